#include "dmisac/waveform.hpp"

#include <cmath>

namespace dmisac {

Eigen::VectorXcd mrt_beamformer(const Eigen::VectorXcd& g) {
    const double n = g.norm();
    if (n == 0.0) throw ConfigError("mrt_beamformer: zero channel vector");
    return g / n;
}

Eigen::MatrixXi round_robin_schedule(int num_transmit_aps, int num_instants) {
    if (num_transmit_aps < 1 || num_instants < 1)
        throw ConfigError("round_robin_schedule: sizes must be positive");
    Eigen::MatrixXi d = Eigen::MatrixXi::Zero(num_transmit_aps, num_instants);
    for (int l = 0; l < num_instants; ++l) d(l % num_transmit_aps, l) = 1;
    return d;
}

TransmitFrame build_frame(
    const Scenario& scenario,
    const std::vector<std::vector<CommChannelRealization>>& channels,
    RngStream& symbol_rng, RngStream& sensing_rng) {
    TransmitFrame f;
    f.transmit_ap_indices = scenario.transmit_indices();
    const int mt = f.num_transmit_aps();
    if (mt == 0) throw ConfigError("build_frame: no transmit AP");
    const int k_ues = static_cast<int>(scenario.ues.size());
    const int n = scenario.aps[f.transmit_ap_indices[0]].array.num_elements;
    const int len = scenario.frame.num_instants;
    f.num_instants = len;
    if (static_cast<int>(channels.size()) != mt)
        throw ConfigError("build_frame: channel table must cover the transmit set");

    // Proportional power allocation over the large-scale direct-path gains.
    f.power_coeffs = Eigen::MatrixXd::Zero(mt, k_ues);
    for (int t = 0; t < mt; ++t) {
        const APNode& ap = scenario.aps[f.transmit_ap_indices[t]];
        if (static_cast<int>(channels[t].size()) != k_ues)
            throw ConfigError("build_frame: channel table must cover all UEs");
        double beta_sum = 0.0;
        std::vector<double> beta(k_ues, 0.0);
        for (int k = 0; k < k_ues; ++k) {
            beta[k] = scenario.path_loss.power_gain(
                distance(ap.position, scenario.ues[k].position));
            beta_sum += beta[k];
        }
        const double budget = ap.comm_power_fraction * ap.max_power_w;
        for (int k = 0; k < k_ues; ++k)
            f.power_coeffs(t, k) = beta_sum > 0.0 ? budget * beta[k] / beta_sum : 0.0;
        if (f.power_coeffs.row(t).sum() > ap.max_power_w * (1.0 + 1e-12))
            throw ConfigError("build_frame: per-AP power budget exceeded");
    }

    f.beamformers.resize(mt);
    for (int t = 0; t < mt; ++t) {
        f.beamformers[t] = Eigen::MatrixXcd::Zero(n, k_ues);
        for (int k = 0; k < k_ues; ++k)
            f.beamformers[t].col(k) = mrt_beamformer(channels[t][k].g);
    }

    f.comm_symbols = Eigen::MatrixXcd(k_ues, len);
    for (int k = 0; k < k_ues; ++k)
        for (int l = 0; l < len; ++l) f.comm_symbols(k, l) = symbol_rng.unit_phase();

    f.sensing_symbols = Eigen::MatrixXcd(n, len);
    if (scenario.frame.sensing_waveform == FrameConfig::SensingWaveform::Steered) {
        // Fixed spatial signature with a random phase per instant.
        const ArrayGeometry& arr = scenario.aps[f.transmit_ap_indices[0]].array;
        const Eigen::VectorXcd dir =
            steering_vector(arr, scenario.frame.steer_direction_rad) / std::sqrt(double(n));
        for (int l = 0; l < len; ++l)
            f.sensing_symbols.col(l) = dir * sensing_rng.unit_phase();
    } else {
        for (int l = 0; l < len; ++l)
            for (int i = 0; i < n; ++i)
                f.sensing_symbols(i, l) = sensing_rng.complex_gaussian(1.0 / n);
    }

    f.schedule = round_robin_schedule(mt, len);

    f.signals.resize(mt);
    for (int t = 0; t < mt; ++t) {
        const APNode& ap = scenario.aps[f.transmit_ap_indices[t]];
        const double rho = ap.comm_power_fraction;
        const double sqrt_rho = std::sqrt(rho);
        const double sensing_amp = std::sqrt((1.0 - rho) * ap.max_power_w);
        Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(n, len);
        for (int k = 0; k < k_ues; ++k) {
            const double amp = sqrt_rho * std::sqrt(f.power_coeffs(t, k));
            if (amp == 0.0) continue;
            x.noalias() += amp * f.beamformers[t].col(k) * f.comm_symbols.row(k);
        }
        for (int l = 0; l < len; ++l)
            if (f.schedule(t, l)) x.col(l) += sensing_amp * f.sensing_symbols.col(l);
        f.signals[t] = std::move(x);
    }
    return f;
}

}  // namespace dmisac
