#include "dmisac/comm_metrics.hpp"

#include <cmath>

namespace dmisac {

namespace {

/// Mean interference power of the sensing waveform seen through channel v.
double sensing_waveform_power(const Scenario& scenario, const Eigen::VectorXcd& v) {
    const int n = static_cast<int>(v.size());
    if (scenario.frame.sensing_waveform == FrameConfig::SensingWaveform::Steered) {
        const ArrayGeometry& arr = scenario.aps[0].array;
        const Eigen::VectorXcd dir =
            steering_vector(arr, scenario.frame.steer_direction_rad);
        return std::norm(v.dot(dir)) / n;  // E[q0 q0^H] = dir dir^H / N
    }
    return v.squaredNorm() / n;  // isotropic: E[q0 q0^H] = I / N
}

}  // namespace

SinrBreakdown ue_sinr(const Scenario& scenario, const TransmitFrame& frame,
                      const std::vector<std::vector<CommChannelRealization>>& channels,
                      int ue, int instant) {
    const int mt = frame.num_transmit_aps();
    const int k_ues = frame.num_ues();
    if (ue < 0 || ue >= k_ues) throw ConfigError("ue_sinr: UE index out of range");
    if (instant < 0 || instant >= frame.num_instants)
        throw ConfigError("ue_sinr: instant out of range");

    SinrBreakdown out;
    out.noise = scenario.receiver_noise_w();

    // Desired and cross-UE beams: coherent sums over the transmit set.
    for (int i = 0; i < k_ues; ++i) {
        std::complex<double> acc = 0.0;
        for (int t = 0; t < mt; ++t) {
            const APNode& ap = scenario.aps[frame.transmit_ap_indices[t]];
            const double amp =
                std::sqrt(ap.comm_power_fraction * frame.power_coeffs(t, i));
            if (amp == 0.0) continue;
            acc += amp * channels[t][ue].g.dot(frame.beamformers[t].col(i));
        }
        if (i == ue)
            out.desired = std::norm(acc);
        else
            out.multiuser += std::norm(acc);
    }

    // Sensing waveform leakage of the AP scheduled at this instant.
    const int n = channels[0][ue].g.size();
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
    for (int t = 0; t < mt; ++t) {
        if (!frame.schedule(t, instant)) continue;
        const APNode& ap = scenario.aps[frame.transmit_ap_indices[t]];
        v += std::sqrt((1.0 - ap.comm_power_fraction) * ap.max_power_w) *
             channels[t][ue].g;
    }
    out.sensing = sensing_waveform_power(scenario, v);
    return out;
}

SEReport sum_se(const Scenario& scenario, const TransmitFrame& frame,
                const std::vector<std::vector<CommChannelRealization>>& channels) {
    SEReport report;
    const int k_ues = frame.num_ues();
    report.per_ue_se.assign(k_ues, 0.0);
    for (int k = 0; k < k_ues; ++k) {
        double se = 0.0;
        for (int l = 0; l < frame.num_instants; ++l) {
            const SinrBreakdown b = ue_sinr(scenario, frame, channels, k, l);
            se += std::log2(1.0 + b.sinr());
        }
        report.per_ue_se[k] = se / frame.num_instants;
        report.sum_se += report.per_ue_se[k];
    }
    return report;
}

}  // namespace dmisac
