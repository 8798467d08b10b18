#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dmisac/scenario.hpp"

namespace dmisac {

/// One transmitted frame: per-UE beams and symbols, the time-shared sensing
/// waveform, and the assembled per-AP baseband signals.
///
/// Per instant l the signal of transmit AP t is
///   x_t[l] = sqrt(rho_t) * sum_k sqrt(p_tk) w_tk q_k[l]
///          + delta_t[l] * sqrt((1 - rho_t) * P_t) * q0[l]
/// with exactly one AP scheduled for sensing (delta) at each instant.
struct TransmitFrame {
    std::vector<int> transmit_ap_indices;   // global AP index per local slot t
    int num_instants = 0;
    Eigen::MatrixXd power_coeffs;           // M_t x K, per-UE powers p_tk [W]
    std::vector<Eigen::MatrixXcd> beamformers;  // per t: N x K unit-norm columns
    Eigen::MatrixXcd comm_symbols;          // K x L unit-modulus symbols
    Eigen::MatrixXcd sensing_symbols;       // N x L waveform q0, E||q0||^2 = 1
    Eigen::MatrixXi schedule;               // M_t x L sensing indicator delta
    std::vector<Eigen::MatrixXcd> signals;  // per t: N x L assembled x_t

    int num_transmit_aps() const { return static_cast<int>(transmit_ap_indices.size()); }
    int num_ues() const { return static_cast<int>(power_coeffs.cols()); }
};

/// Maximum-ratio beam for channel g, normalized so g^H w = ||g||.
Eigen::VectorXcd mrt_beamformer(const Eigen::VectorXcd& g);

/// Round-robin sensing schedule: local AP t is active on instants
/// l = t, t + M_t, t + 2*M_t, ...; every column sums to one.
Eigen::MatrixXi round_robin_schedule(int num_transmit_aps, int num_instants);

/// Builds the frame for the current transmit set. `channels[t][k]` must hold
/// the realized channel from transmit slot t to UE k (used for the beams).
/// Per-UE powers follow the large-scale gains: p_tk = rho_t P_t b_tk / sum_i b_ti.
TransmitFrame build_frame(const Scenario& scenario,
                          const std::vector<std::vector<CommChannelRealization>>& channels,
                          RngStream& symbol_rng, RngStream& sensing_rng);

}  // namespace dmisac
