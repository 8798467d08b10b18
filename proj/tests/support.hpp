#pragma once

// Shared fixtures and independent reference computations for the test suite.
// Everything here is built from public library primitives only, so the
// reference models can disagree with the production code when the production
// code is wrong.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "dmisac/harness.hpp"

namespace testsupport {

using namespace dmisac;

// Four APs around a small arena, two of them receiving; one or two targets.
// Small enough (N=2, L=4) that dense reference solves stay instant.
inline ScenarioConfig tiny_config(int num_targets = 1) {
    ScenarioConfig cfg;
    cfg.region = {0.0, 0.0, 400.0, 400.0};
    cfg.num_aps = 4;
    cfg.num_antennas = 2;
    cfg.num_ues = 1;
    cfg.num_targets = num_targets;
    cfg.frame.num_instants = 4;
    cfg.comm_power_fraction = 0.4;
    cfg.ap_positions = {{0.0, 0.0}, {400.0, 30.0}, {20.0, 380.0}, {390.0, 390.0}};
    cfg.ap_boresights_rad = {0.7, 2.5, -0.6, 3.8};
    cfg.ue_positions = {{210.0, 170.0}};
    cfg.target_positions = {{150.0, 220.0}, {260.0, 140.0}};
    cfg.target_positions.resize(static_cast<std::size_t>(num_targets));
    cfg.selection.strategy = SelectionConfig::Strategy::Fixed;
    cfg.selection.fixed_receive_indices = {1, 2};
    cfg.selection.num_receive_aps = 2;
    return cfg;
}

// Twelve APs evenly spaced on a circle, boresights toward the center, odd
// indices receiving. A spread layout keeps the two scan dips balanced and
// the sidelobe floor far below them.
inline ScenarioConfig ring_config() {
    ScenarioConfig cfg = reference_scenario();
    cfg.comm_power_fraction = 0.0;
    cfg.frame.num_instants = 96;
    cfg.target_positions = {{320.010, 420.007}, {679.991, 579.9935}};
    cfg.cfar.guard_cells = 40;
    cfg.cfar.training_cells = 16;
    cfg.ap_positions.clear();
    cfg.ap_boresights_rad.clear();
    std::vector<int> rx;
    for (int m = 0; m < 12; ++m) {
        const double ang = kTwoPi * m / 12.0;
        cfg.ap_positions.push_back(
            {500.0 + 430.0 * std::cos(ang), 500.0 + 430.0 * std::sin(ang)});
        cfg.ap_boresights_rad.push_back(wrap_angle(ang + kPi));
        if (m % 2 == 1) rx.push_back(m);
    }
    cfg.selection.strategy = SelectionConfig::Strategy::Fixed;
    cfg.selection.fixed_receive_indices = rx;
    cfg.selection.num_receive_aps = static_cast<int>(rx.size());
    return cfg;
}

// Stacks y_r[l] of one receiver into a single column vector (l-major).
inline Eigen::VectorXcd stack_receiver(const EchoSet& echoes, int r) {
    const Eigen::MatrixXcd& y = echoes.samples[static_cast<std::size_t>(r)];
    Eigen::VectorXcd out(y.size());
    for (int l = 0; l < y.cols(); ++l)
        out.segment(l * y.rows(), y.rows()) = y.col(l);
    return out;
}

// Basis vector of pair (t, r) for a scatterer at p: the per-instant rank-1
// response e^{-j 2 pi f tau} a(aoa) a(aod)^T x_t[l], stacked like
// stack_receiver. This is the reference model every oracle minimizes over.
inline Eigen::VectorXcd pair_basis(const Scenario& scenario,
                                   const TransmitFrame& frame, int tx_slot,
                                   int rx_index, const Position2D& p) {
    const APNode& tx = scenario.aps[static_cast<std::size_t>(
        frame.transmit_ap_indices[static_cast<std::size_t>(tx_slot)])];
    const APNode& rx = scenario.aps[static_cast<std::size_t>(rx_index)];
    const double tau = bistatic_delay(tx.position, p, rx.position);
    const double aod = aod_to_point(tx, p);
    const double aoa = aod_to_point(rx, p);
    const std::complex<double> rot =
        std::polar(1.0, wrap_angle(-kTwoPi * scenario.carrier_hz * tau));
    const Eigen::VectorXcd a_rx = steering_vector(rx.array, aoa);
    const Eigen::RowVectorXcd tx_seq =
        steering_vector(tx.array, aod).transpose() *
        frame.signals[static_cast<std::size_t>(tx_slot)];
    const int n = static_cast<int>(a_rx.size());
    const int len = static_cast<int>(tx_seq.size());
    Eigen::VectorXcd out(n * len);
    for (int l = 0; l < len; ++l)
        out.segment(l * n, n) = rot * tx_seq(l) * a_rx;
    return out;
}

// pair_basis without the delay-phase rotation: the response seen by a model
// whose complex gain absorbs the carrier phase.
inline Eigen::VectorXcd pair_basis_steering(const Scenario& scenario,
                                            const TransmitFrame& frame,
                                            int tx_slot, int rx_index,
                                            const Position2D& p) {
    const APNode& tx = scenario.aps[static_cast<std::size_t>(
        frame.transmit_ap_indices[static_cast<std::size_t>(tx_slot)])];
    const APNode& rx = scenario.aps[static_cast<std::size_t>(rx_index)];
    const Eigen::VectorXcd a_rx = steering_vector(rx.array, aod_to_point(rx, p));
    const Eigen::RowVectorXcd tx_seq =
        steering_vector(tx.array, aod_to_point(tx, p)).transpose() *
        frame.signals[static_cast<std::size_t>(tx_slot)];
    const int n = static_cast<int>(a_rx.size());
    Eigen::VectorXcd out(n * static_cast<int>(tx_seq.size()));
    for (int l = 0; l < tx_seq.size(); ++l)
        out.segment(l * n, n) = tx_seq(l) * a_rx;
    return out;
}

// Residual of the free-complex-gain model at p, minimized exactly per
// receiver by a dense least-squares solve. Reference for ncp_cost.
inline double reference_ncp_cost(const Scenario& scenario,
                                 const TransmitFrame& frame,
                                 const EchoSet& echoes, const Position2D& p) {
    const int mt = frame.num_transmit_aps();
    double cost = 0.0;
    for (int r = 0; r < echoes.num_receivers(); ++r) {
        const Eigen::VectorXcd y = stack_receiver(echoes, r);
        Eigen::MatrixXcd design(y.size(), mt);
        for (int t = 0; t < mt; ++t)
            design.col(t) = pair_basis(
                scenario, frame, t,
                echoes.receive_ap_indices[static_cast<std::size_t>(r)], p);
        const Eigen::VectorXcd gamma =
            design.completeOrthogonalDecomposition().solve(y);
        cost += (y - design * gamma).squaredNorm();
    }
    return cost;
}

// Residual of the shared-phase model at p for fixed per-target phases:
// amplitudes are real, so the complex system is solved as a real LS problem
// over the stacked real and imaginary parts.
inline double reference_coherent_cost_at_phases(
    const Scenario& scenario, const TransmitFrame& frame, const EchoSet& echoes,
    const std::vector<Position2D>& positions, const std::vector<double>& phases) {
    const int mt = frame.num_transmit_aps();
    const int s_count = static_cast<int>(positions.size());
    double cost = 0.0;
    for (int r = 0; r < echoes.num_receivers(); ++r) {
        const Eigen::VectorXcd y = stack_receiver(echoes, r);
        Eigen::MatrixXcd design(y.size(), mt * s_count);
        for (int s = 0; s < s_count; ++s) {
            const std::complex<double> offset = std::polar(1.0, phases[s]);
            for (int t = 0; t < mt; ++t)
                design.col(s * mt + t) =
                    offset *
                    pair_basis(scenario, frame, t,
                               echoes.receive_ap_indices[static_cast<std::size_t>(r)],
                               positions[static_cast<std::size_t>(s)]);
        }
        Eigen::MatrixXd real_design(2 * y.size(), design.cols());
        real_design << design.real(), design.imag();
        Eigen::VectorXd real_y(2 * y.size());
        real_y << y.real(), y.imag();
        const Eigen::VectorXd amp =
            real_design.completeOrthogonalDecomposition().solve(real_y);
        cost += (real_y - real_design * amp).squaredNorm();
    }
    return cost;
}

// Dense minimization over the per-target phases: coarse grid plus golden
// section per coordinate, repeated until stable. Independent of the library's
// phase optimizer (different sweep structure, no warm starts, no closed form).
inline double reference_coherent_cost(const Scenario& scenario,
                                      const TransmitFrame& frame,
                                      const EchoSet& echoes,
                                      const std::vector<Position2D>& positions,
                                      int grid_points = 96) {
    const int s_count = static_cast<int>(positions.size());
    auto eval = [&](const std::vector<double>& ph) {
        return reference_coherent_cost_at_phases(scenario, frame, echoes,
                                                 positions, ph);
    };
    std::vector<double> best_ph(static_cast<std::size_t>(s_count), 0.0);
    double best = eval(best_ph);
    // coarse joint grid (grid_points^S evaluations)
    std::vector<int> idx(static_cast<std::size_t>(s_count), 0);
    while (true) {
        std::vector<double> ph(static_cast<std::size_t>(s_count));
        for (int s = 0; s < s_count; ++s)
            ph[static_cast<std::size_t>(s)] =
                kTwoPi * idx[static_cast<std::size_t>(s)] / grid_points;
        const double c = eval(ph);
        if (c < best) {
            best = c;
            best_ph = ph;
        }
        int s = 0;
        while (s < s_count && ++idx[static_cast<std::size_t>(s)] == grid_points) {
            idx[static_cast<std::size_t>(s)] = 0;
            ++s;
        }
        if (s == s_count) break;
    }
    // golden-section polish per coordinate
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int round = 0; round < 4; ++round) {
        for (int s = 0; s < s_count; ++s) {
            double lo = best_ph[static_cast<std::size_t>(s)] - kTwoPi / grid_points;
            double hi = best_ph[static_cast<std::size_t>(s)] + kTwoPi / grid_points;
            std::vector<double> ph = best_ph;
            double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
            ph[static_cast<std::size_t>(s)] = x1;
            double f1 = eval(ph);
            ph[static_cast<std::size_t>(s)] = x2;
            double f2 = eval(ph);
            for (int it = 0; it < 60; ++it) {
                if (f1 < f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - gr * (hi - lo);
                    ph[static_cast<std::size_t>(s)] = x1;
                    f1 = eval(ph);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + gr * (hi - lo);
                    ph[static_cast<std::size_t>(s)] = x2;
                    f2 = eval(ph);
                }
            }
            best_ph[static_cast<std::size_t>(s)] = 0.5 * (lo + hi);
            best = std::min(best, eval(best_ph));
        }
    }
    return best;
}

// Noiseless mean of the echo model with explicit parameters, stacked over
// (receiver, instant, antenna). `gains` is indexed [s][t][r]; the per-pair
// phase is -2 pi f tau(p_s) + phase_offsets[s]. Used by finite-difference
// Fisher oracles.
inline Eigen::VectorXcd model_mean(const Scenario& scenario,
                                   const TransmitFrame& frame,
                                   const std::vector<int>& receive_indices,
                                   const std::vector<Position2D>& positions,
                                   const std::vector<Eigen::MatrixXd>& gains,
                                   const std::vector<double>& phase_offsets) {
    const int mt = frame.num_transmit_aps();
    const int mr = static_cast<int>(receive_indices.size());
    const int n = scenario.aps[0].array.num_elements;
    const int len = frame.num_instants;
    Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(
        static_cast<Eigen::Index>(mr) * len * n);
    for (int s = 0; s < static_cast<int>(positions.size()); ++s) {
        const std::complex<double> offset = std::polar(1.0, phase_offsets[s]);
        for (int r = 0; r < mr; ++r) {
            for (int t = 0; t < mt; ++t) {
                const Eigen::VectorXcd basis = pair_basis(
                    scenario, frame, t, receive_indices[static_cast<std::size_t>(r)],
                    positions[static_cast<std::size_t>(s)]);
                mean.segment(static_cast<Eigen::Index>(r) * len * n, len * n) +=
                    gains[static_cast<std::size_t>(s)](t, r) * offset * basis;
            }
        }
    }
    return mean;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) /
                     static_cast<double>(v.size()));
}

}  // namespace testsupport
