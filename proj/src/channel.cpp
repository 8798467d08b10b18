#include "dmisac/channel.hpp"

#include <cmath>

namespace dmisac {

double PathLossModel::power_gain(double dist_m) const {
    if (dist_m <= 0.0) {
        throw GeometryError("PathLossModel: distance must be positive");
    }
    return db_to_linear(ref_db - slope_db_per_decade * std::log10(dist_m));
}

double noise_power(double bandwidth_hz, double temperature_k,
                   double noise_figure_db) {
    if (bandwidth_hz <= 0.0 || temperature_k <= 0.0) {
        throw ConfigError("noise_power: bandwidth and temperature must be positive");
    }
    return kBoltzmann * temperature_k * bandwidth_hz * db_to_linear(noise_figure_db);
}

double two_leg_amplitude(double d1_m, double d2_m, double wavelength_m,
                         double rcs_sqm) {
    if (d1_m <= 0.0 || d2_m <= 0.0) {
        throw GeometryError("two_leg_amplitude: leg lengths must be positive");
    }
    const double four_pi = 4.0 * kPi;
    return std::sqrt(wavelength_m * wavelength_m * rcs_sqm /
                     (four_pi * four_pi * four_pi * d1_m * d1_m * d2_m * d2_m));
}

SensingPathParams sensing_path_params(const APNode& tx, const APNode& rx,
                                      const Target& target, double carrier_hz) {
    SensingPathParams p;
    const double lambda = wavelength(carrier_hz);
    const double d1 = distance(tx.position, target.position);
    const double d2 = distance(target.position, rx.position);
    p.gain = two_leg_amplitude(d1, d2, lambda, target.rcs_sqm);
    p.delay_s = bistatic_delay(tx.position, target.position, rx.position);
    p.carrier_phase = wrap_angle(-kTwoPi * carrier_hz * p.delay_s +
                                 target.reflection_phase_rad);
    p.aod_rad = aod_to_point(tx, target.position);
    p.aoa_rad = aod_to_point(rx, target.position);
    return p;
}

std::pair<SensingPathParams, Eigen::MatrixXcd> sensing_channel(
    const APNode& tx, const APNode& rx, const Target& target,
    double carrier_hz) {
    SensingPathParams p = sensing_path_params(tx, rx, target, carrier_hz);
    const Eigen::VectorXcd a_rx = steering_vector(rx.array, p.aoa_rad);
    const Eigen::VectorXcd a_tx = steering_vector(tx.array, p.aod_rad);
    const std::complex<double> coeff =
        p.gain * std::complex<double>(std::cos(p.carrier_phase),
                                      std::sin(p.carrier_phase));
    Eigen::MatrixXcd h = coeff * (a_rx * a_tx.transpose());
    return {p, std::move(h)};
}

Eigen::MatrixXcd local_scattering_correlation(const ArrayGeometry& array,
                                              double nominal_angle_rad,
                                              double angular_spread_rad) {
    const int n = array.num_elements;
    const int samples = 201;  // midpoint rule over the uniform spread
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
    const double k = n > 1 ? kTwoPi * array.spacing_m / array.wavelength_m : 0.0;
    for (int q = 0; q < samples; ++q) {
        const double delta =
            angular_spread_rad * (2.0 * (q + 0.5) / samples - 1.0);
        const double s = std::sin(nominal_angle_rad + delta);
        for (int m = 0; m < n; ++m) {
            for (int mm = 0; mm < n; ++mm) {
                const double phase = k * (m - mm) * s;
                c(m, mm) += std::complex<double>(std::cos(phase), std::sin(phase));
            }
        }
    }
    c /= static_cast<double>(samples);
    return c;
}

namespace {

/// PSD matrix square root via eigendecomposition (tolerates semidefiniteness).
Eigen::MatrixXcd matrix_sqrt_psd(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() *
           es.eigenvectors().adjoint();
}

}  // namespace

CommChannelRealization comm_channel(const APNode& tx, const UETerminal& ue,
                                    const std::vector<Target>& targets,
                                    const PathLossModel& path_loss,
                                    double rician_factor, const NlosModel& nlos,
                                    double carrier_hz, RngStream& rng) {
    const int n = tx.array.num_elements;
    const double lambda = wavelength(carrier_hz);
    CommChannelRealization ch;
    ch.ue_phase = ue.phase_offset_rad;

    // Direct path: per-element power gain split by the Rician factor.
    const double d = distance(tx.position, ue.position);
    const double beta = path_loss.power_gain(d);
    const double beta_los = beta * rician_factor / (1.0 + rician_factor);
    const double beta_nlos = beta / (1.0 + rician_factor);
    ch.los_gain = std::sqrt(beta_los);
    ch.los_delay_phase = wrap_angle(-kTwoPi * carrier_hz * d / kSpeedOfLight);

    const double aod_ue = aod_to_point(tx, ue.position);
    const double los_phase = ch.los_delay_phase + ue.phase_offset_rad;
    ch.mean = ch.los_gain *
              std::complex<double>(std::cos(los_phase), std::sin(los_phase)) *
              steering_vector(tx.array, aod_ue);

    // Target-scattered components, built like the sensing paths with the UE as
    // a single-element endpoint; UE oscillator offset applies to every arrival.
    ch.reflected_gains.reserve(targets.size());
    ch.reflected_phases.reserve(targets.size());
    for (const Target& t : targets) {
        const double d1 = distance(tx.position, t.position);
        const double d2 = distance(t.position, ue.position);
        const double w = two_leg_amplitude(d1, d2, lambda, t.rcs_sqm);
        const double phase =
            wrap_angle(-kTwoPi * carrier_hz * (d1 + d2) / kSpeedOfLight +
                       t.reflection_phase_rad + ue.phase_offset_rad);
        ch.reflected_gains.push_back(w);
        ch.reflected_phases.push_back(phase);
        const double aod_t = aod_to_point(tx, t.position);
        ch.mean += w * std::complex<double>(std::cos(phase), std::sin(phase)) *
                   steering_vector(tx.array, aod_t);
    }

    // NLoS fading with the configured spatial correlation.
    if (nlos.correlation == NlosModel::Correlation::Identity) {
        ch.covariance = beta_nlos * Eigen::MatrixXcd::Identity(n, n);
    } else {
        ch.covariance = beta_nlos * local_scattering_correlation(
                                        tx.array, aod_ue, nlos.angular_spread_rad);
    }
    Eigen::VectorXcd w(n);
    for (int i = 0; i < n; ++i) w(i) = rng.complex_gaussian(1.0);
    ch.g = ch.mean + matrix_sqrt_psd(ch.covariance) * w;
    return ch;
}

}  // namespace dmisac
