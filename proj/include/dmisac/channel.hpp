#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "dmisac/geometry.hpp"
#include "dmisac/rng.hpp"

namespace dmisac {

/// Point scatterer with a fixed (unknown to the estimator) reflection phase.
struct Target {
    Position2D position;
    double rcs_sqm = 1.0;
    double reflection_phase_rad = 0.0;
};

struct UETerminal {
    Position2D position;
    double phase_offset_rad = 0.0;  // local-oscillator offset, U(-pi, pi)
};

/// Deterministic description of one tx-AP -> target -> rx-AP path.
struct SensingPathParams {
    double gain = 0.0;           // two-leg amplitude (radar equation)
    double carrier_phase = 0.0;  // -2*pi*f*tau + reflection phase, in [0, 2*pi)
    double delay_s = 0.0;
    double aod_rad = 0.0;        // departure azimuth at the transmit AP
    double aoa_rad = 0.0;        // arrival azimuth at the receive AP
};

/// Distance-based log-linear power gain: gain_dB(d) = ref_db - slope*log10(d/1m).
struct PathLossModel {
    double ref_db = -30.5;
    double slope_db_per_decade = 36.7;

    double power_gain(double dist_m) const;
};

struct NlosModel {
    enum class Correlation { Identity, LocalScattering };
    Correlation correlation = Correlation::Identity;
    double angular_spread_rad = 15.0 * kPi / 180.0;
};

/// One realized AP -> UE channel with its deterministic and random parts.
struct CommChannelRealization {
    Eigen::VectorXcd g;          // realized channel, mean + fading draw
    Eigen::VectorXcd mean;       // deterministic component (LoS + reflections)
    Eigen::MatrixXcd covariance; // NLoS covariance R
    double los_gain = 0.0;       // per-element LoS amplitude
    double los_delay_phase = 0.0;
    double ue_phase = 0.0;
    std::vector<double> reflected_gains;   // per target
    std::vector<double> reflected_phases;  // per target
};

/// Thermal noise power in watts: k_B * T * B scaled by the noise figure.
double noise_power(double bandwidth_hz, double temperature_k,
                   double noise_figure_db);

/// Amplitude of a two-leg scattered path (unit-gain elements, RCS in m^2).
double two_leg_amplitude(double d1_m, double d2_m, double wavelength_m,
                         double rcs_sqm);

/// Path parameters for the (tx, target, rx) triple at the given carrier.
SensingPathParams sensing_path_params(const APNode& tx, const APNode& rx,
                                      const Target& target, double carrier_hz);

/// Full N x N echo channel matrix gain * e^{j phase} * a(aoa) a(aod)^T.
std::pair<SensingPathParams, Eigen::MatrixXcd> sensing_channel(
    const APNode& tx, const APNode& rx, const Target& target,
    double carrier_hz);

/// Draws one AP -> UE channel: Rician LoS plus target reflections plus
/// correlated NLoS fading. `rician_factor` is the linear K-factor splitting
/// the direct-path power gain `beta` between mean and fading parts.
CommChannelRealization comm_channel(const APNode& tx, const UETerminal& ue,
                                    const std::vector<Target>& targets,
                                    const PathLossModel& path_loss,
                                    double rician_factor, const NlosModel& nlos,
                                    double carrier_hz, RngStream& rng);

/// Unit-diagonal local-scattering correlation for a ULA, uniform angular
/// spread around the nominal arrival angle.
Eigen::MatrixXcd local_scattering_correlation(const ArrayGeometry& array,
                                              double nominal_angle_rad,
                                              double angular_spread_rad);

}  // namespace dmisac
