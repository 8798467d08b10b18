#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dmisac/waveform.hpp"

namespace dmisac {

/// Received echo frames of all receive APs, N x L samples each.
struct EchoSet {
    std::vector<int> receive_ap_indices;
    std::vector<Eigen::MatrixXcd> samples;
    double noise_power_w = 0.0;
    double carrier_hz = 0.0;

    int num_receivers() const { return static_cast<int>(samples.size()); }
    int num_antennas() const { return samples.empty() ? 0 : int(samples[0].rows()); }
    int num_instants() const { return samples.empty() ? 0 : int(samples[0].cols()); }
    double total_energy() const;
};

/// Superimposes every tx-AP -> target -> rx-AP echo of the transmitted frame
/// and adds white noise of the given power (pass 0 for a noiseless set).
EchoSet synthesize_echoes(const Scenario& scenario, const TransmitFrame& frame,
                          RngStream& noise_rng, double noise_power_w);

/// Immutable view tying echoes to the geometry and signals that produced
/// them; shared by every cost evaluation of one estimation problem.
struct SensingContext {
    const Scenario* scenario = nullptr;
    const TransmitFrame* frame = nullptr;
    const EchoSet* echoes = nullptr;
    std::vector<const APNode*> tx;
    std::vector<const APNode*> rx;
    double echo_energy = 0.0;

    double carrier() const { return scenario->carrier_hz; }
    double lambda() const { return scenario->wavelength_m(); }
};

SensingContext make_context(const Scenario& scenario, const TransmitFrame& frame,
                            const EchoSet& echoes);

/// Residual energy after the best per-receiver complex-gain fit of a single
/// scatterer at `p` (gains free per transmit/receive pair). Smaller is better;
/// equals the echo energy when the hypothesis explains nothing.
double ncp_cost(const SensingContext& ctx, const Position2D& p);

/// Energy explained by the hypothesis: echo_energy - ncp_cost. This is the
/// detection statistic thresholded by the CFAR stage.
double ncp_score(const SensingContext& ctx, const Position2D& p);

/// Exact minimum over per-pair real amplitudes and one shared phase offset
/// per target of the coherent residual; the phase-coherent cost surface.
struct CoherentProfile {
    double cost = 0.0;
    std::vector<double> phase_offsets;          // per target, reported in [0, pi)
    std::vector<Eigen::MatrixXd> amplitudes;    // per target: M_t x M_r
};

CoherentProfile coherent_profile(const SensingContext& ctx,
                                 const std::vector<Position2D>& positions,
                                 const std::vector<double>* warm_phases = nullptr);

double coherent_cost(const SensingContext& ctx,
                     const std::vector<Position2D>& positions);

struct Detection {
    Position2D position;
    double cost = 0.0;       // grid cost at the detection node
    double score = 0.0;      // explained energy
    double threshold = 0.0;  // CFAR level the score exceeded
    int ix = 0, iy = 0;
};

struct CostMap {
    double x0 = 0.0, y0 = 0.0;
    double spacing = 0.0;
    int nx = 0, ny = 0;
    std::vector<double> cost;  // row-major, index iy * nx + ix
    double echo_energy = 0.0;
    std::vector<Detection> detections;  // consolidated local dips
    int threshold_crossings = 0;        // raw per-cell CFAR exceedances
    int tested_cells = 0;

    double at(int ix, int iy) const { return cost[size_t(iy) * nx + ix]; }
    Position2D node(int ix, int iy) const {
        return {x0 + spacing * ix, y0 + spacing * iy};
    }
};

/// Multiplicative CA-CFAR threshold factor for a gamma-distributed detection
/// statistic with the given shape, trained on `num_training` ring cells.
double cfar_threshold_factor(double pfa, int shape, int num_training);

/// Evaluates the single-scatterer cost on a uniform grid over the region.
CostMap scan_cost_map(const SensingContext& ctx, const GridSpec& grid);
CostMap scan_cost_map_serial(const SensingContext& ctx, const GridSpec& grid);

/// Cell-averaging CFAR over the explained-energy map. Fills the raw crossing
/// counters and the consolidated detection list: one detection per connected
/// blob of threshold crossings, placed at the blob's lowest-cost cell.
void cfar_detect(CostMap& map, const CfarConfig& cfar, int num_gain_dofs);

/// scan_cost_map followed by cfar_detect.
CostMap scan_and_detect(const SensingContext& ctx, const GridSpec& grid,
                        const CfarConfig& cfar, bool parallel = true);

struct EstimationReport {
    std::vector<Position2D> coarse;       // CFAR detection nodes
    std::vector<Position2D> ncp_refined;  // after local descent on the NCP cost
    std::vector<Position2D> refined;      // phase-coherent estimates
    std::vector<double> phase_offsets;    // per target, in [0, pi)
    std::vector<Eigen::MatrixXd> amplitudes;  // per target: M_t x M_r
    double initial_cost = 0.0;            // coherent cost at the coarse nodes
    double final_cost = 0.0;
    bool converged = false;
};

/// Two-stage refinement: per-hypothesis NCP descent, quarter-wavelength
/// multi-start coherent descent, then one joint polish over all targets.
EstimationReport refine_coherent(const SensingContext& ctx,
                                 const std::vector<Position2D>& coarse,
                                 const OptimizerConfig& opt,
                                 double coarse_cell_m);

/// Per-target position errors under the assignment minimizing the total
/// error; unmatched truths yield +infinity entries.
std::vector<double> match_errors(const std::vector<Position2D>& estimates,
                                 const std::vector<Position2D>& truths);

void write_echoes(const EchoSet& echoes, const std::string& path);
EchoSet read_echoes(const std::string& path);

void write_cost_map(const CostMap& map, const std::string& path);

}  // namespace dmisac
