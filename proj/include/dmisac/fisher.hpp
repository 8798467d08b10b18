#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dmisac/channel.hpp"
#include "dmisac/rng.hpp"
#include "dmisac/scenario.hpp"
#include "dmisac/waveform.hpp"

namespace dmisac {

enum class Parameterization { Coherent, NonCoherent };

/// Fisher information for one target under the Gaussian echo model, together
/// with the position error bound extracted from the 2x2 position block after
/// marginalizing the gain nuisances (Schur complement).
struct FisherResult {
    Parameterization parameterization = Parameterization::Coherent;
    Eigen::MatrixXd fim;                 // full parameter FIM
    Eigen::Matrix2d position_info;      // effective position information
    double peb_m = 0.0;                  // sqrt(trace(position_info^-1))
    bool singular = false;               // unobservable geometry
};

/// Coherent parameterization: [x, y, per-(t,r) real amplitude, shared phase].
FisherResult fisher_coherent(const Scenario& scenario, const TransmitFrame& frame,
                             const Target& target, double noise_power_w);

/// Free-gain parameterization: [x, y, Re gain, Im gain] per (t,r) pair; the
/// position columns carry no delay-phase information.
FisherResult fisher_ncp(const Scenario& scenario, const TransmitFrame& frame,
                        const Target& target, double noise_power_w);

FisherResult fisher_information(const Scenario& scenario,
                                const TransmitFrame& frame, const Target& target,
                                double noise_power_w, Parameterization param);

/// Per-point coherent position error bounds at uniformly sampled locations.
struct CoverageResult {
    std::vector<Position2D> points;
    std::vector<double> peb_m;
    /// Fraction of sampled points with PEB at or below the threshold.
    double fraction_below(double threshold_m) const;
    double median_peb() const;
};

/// Samples target positions uniformly over the region (one combined draw per
/// point, taken serially for determinism) and evaluates the single-target
/// coherent PEB at each, with a nominal reflectivity and zero fixed phase.
CoverageResult coverage_pebs(const Scenario& scenario, const TransmitFrame& frame,
                             double rcs_sqm, double noise_power_w,
                             const CoverageConfig& cfg, RngStream& rng,
                             bool parallel = true);

void write_coverage(const CoverageResult& coverage, const std::string& path);

}  // namespace dmisac
