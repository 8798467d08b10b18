#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dmisac/channel.hpp"
#include "dmisac/scenario.hpp"

namespace dmisac {

/// Partition of the AP set into transmitters and receivers.
struct ModeAssignment {
    SelectionConfig::Strategy strategy = SelectionConfig::Strategy::CommCentric;
    std::vector<int> transmit_set;  // ascending AP indices
    std::vector<int> receive_set;   // ascending AP indices
    std::vector<int> pick_order;    // greedy/FPS picks in selection order
    std::vector<double> objective;  // objective value after each pick
};

/// Large-scale power gains, one row per AP, one column per UE.
Eigen::MatrixXd link_gain_table(const std::vector<Position2D>& ap_positions,
                                const std::vector<Position2D>& ue_positions,
                                const PathLossModel& path_loss);

/// Surrogate network spectral efficiency of a candidate transmit set:
/// sum_k log2(1 + b_k^2 / (sum_{i != k} b_i^2 + noise)) with b_k the summed
/// link gain from the set to UE k.
double surrogate_sum_se(const Eigen::MatrixXd& gains,
                        const std::vector<int>& transmit_set, double noise);

/// Default effective noise for the surrogate SINR: the physical noise power
/// rescaled into squared-gain units via the median link gain and the mean
/// per-AP power budget.
double default_surrogate_noise(const Eigen::MatrixXd& gains,
                               double noise_power_w, double mean_ap_power_w);

/// Greedy transmit-set construction maximizing the incremental surrogate SE;
/// the remaining APs become receivers. Ties pick the lowest AP index.
ModeAssignment select_comm_centric(const std::vector<Position2D>& ap_positions,
                                   const std::vector<Position2D>& ue_positions,
                                   const PathLossModel& path_loss,
                                   int num_transmit_aps, double surrogate_noise);

/// Farthest-point receiver placement: seeded with the maximum-distance AP
/// pair (or the AP closest to the centroid when one receiver is wanted),
/// then repeatedly adds the AP maximizing the minimum distance to the chosen
/// set. Ties pick the lowest AP index.
ModeAssignment select_sensing_centric(const std::vector<Position2D>& ap_positions,
                                      int num_receive_aps);

/// Applies the configured strategy to a deployed scenario and returns the
/// assignment; does not modify the scenario.
ModeAssignment select_modes(const Scenario& scenario, const SelectionConfig& cfg,
                            double mean_ap_power_w);

}  // namespace dmisac
