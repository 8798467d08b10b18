#include "dmisac/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmisac/constants.hpp"
#include "dmisac/errors.hpp"

namespace dmisac {

namespace {

std::vector<int> complement(int total, const std::vector<int>& subset) {
    std::vector<char> taken(total, 0);
    for (int i : subset) taken[i] = 1;
    std::vector<int> out;
    for (int i = 0; i < total; ++i)
        if (!taken[i]) out.push_back(i);
    return out;
}

}  // namespace

Eigen::MatrixXd link_gain_table(const std::vector<Position2D>& ap_positions,
                                const std::vector<Position2D>& ue_positions,
                                const PathLossModel& path_loss) {
    Eigen::MatrixXd gains(ap_positions.size(), ue_positions.size());
    for (std::size_t t = 0; t < ap_positions.size(); ++t)
        for (std::size_t k = 0; k < ue_positions.size(); ++k)
            gains(t, k) =
                path_loss.power_gain(distance(ap_positions[t], ue_positions[k]));
    return gains;
}

double surrogate_sum_se(const Eigen::MatrixXd& gains,
                        const std::vector<int>& transmit_set, double noise) {
    if (noise <= 0.0)
        throw ConfigError("surrogate_sum_se: noise term must be positive");
    const int num_ues = static_cast<int>(gains.cols());
    Eigen::VectorXd summed = Eigen::VectorXd::Zero(num_ues);
    for (int t : transmit_set) summed += gains.row(t).transpose();
    const Eigen::VectorXd sq = summed.array().square();
    const double total = sq.sum();
    double se = 0.0;
    for (int k = 0; k < num_ues; ++k)
        se += std::log2(1.0 + sq(k) / (total - sq(k) + noise));
    return se;
}

double default_surrogate_noise(const Eigen::MatrixXd& gains,
                               double noise_power_w, double mean_ap_power_w) {
    if (gains.size() == 0 || noise_power_w <= 0.0 || mean_ap_power_w <= 0.0)
        throw ConfigError("default_surrogate_noise: invalid inputs");
    std::vector<double> flat(gains.data(), gains.data() + gains.size());
    std::nth_element(flat.begin(), flat.begin() + flat.size() / 2, flat.end());
    const double median_gain = flat[flat.size() / 2];
    return median_gain * noise_power_w / mean_ap_power_w;
}

ModeAssignment select_comm_centric(const std::vector<Position2D>& ap_positions,
                                   const std::vector<Position2D>& ue_positions,
                                   const PathLossModel& path_loss,
                                   int num_transmit_aps, double surrogate_noise) {
    const int m = static_cast<int>(ap_positions.size());
    if (num_transmit_aps < 1 || num_transmit_aps > m - 1)
        throw ConfigError("select_comm_centric: need 1 <= M_t <= M-1");
    if (ue_positions.empty())
        throw ConfigError("select_comm_centric: need at least one UE");

    const Eigen::MatrixXd gains =
        link_gain_table(ap_positions, ue_positions, path_loss);
    ModeAssignment out;
    out.strategy = SelectionConfig::Strategy::CommCentric;
    std::vector<char> chosen(m, 0);
    std::vector<int> current;
    for (int step = 0; step < num_transmit_aps; ++step) {
        int best_t = -1;
        double best_se = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < m; ++t) {
            if (chosen[t]) continue;
            current.push_back(t);
            const double se = surrogate_sum_se(gains, current, surrogate_noise);
            current.pop_back();
            if (se > best_se) {  // strict: ties keep the lowest index
                best_se = se;
                best_t = t;
            }
        }
        chosen[best_t] = 1;
        current.push_back(best_t);
        out.pick_order.push_back(best_t);
        out.objective.push_back(best_se);
    }
    out.transmit_set = current;
    std::sort(out.transmit_set.begin(), out.transmit_set.end());
    out.receive_set = complement(m, out.transmit_set);
    return out;
}

ModeAssignment select_sensing_centric(const std::vector<Position2D>& ap_positions,
                                      int num_receive_aps) {
    const int m = static_cast<int>(ap_positions.size());
    if (num_receive_aps < 1 || num_receive_aps > m - 1)
        throw ConfigError("select_sensing_centric: need 1 <= M_r <= M-1");

    ModeAssignment out;
    out.strategy = SelectionConfig::Strategy::SensingCentric;
    std::vector<char> chosen(m, 0);
    std::vector<int> current;

    if (num_receive_aps == 1) {
        // Spread is meaningless for a single receiver; the most central AP
        // covers the largest share of the region.
        Position2D centroid{0.0, 0.0};
        for (const auto& p : ap_positions) {
            centroid.x += p.x / m;
            centroid.y += p.y / m;
        }
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            const double d = distance(ap_positions[i], centroid);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        current.push_back(best);
        chosen[best] = 1;
        out.pick_order.push_back(best);
        out.objective.push_back(best_d);
    } else {
        int bi = 0, bj = 1;
        double best_d = -1.0;
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                const double d = distance(ap_positions[i], ap_positions[j]);
                if (d > best_d) {
                    best_d = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        current = {bi, bj};
        chosen[bi] = chosen[bj] = 1;
        out.pick_order = {bi, bj};
        out.objective = {best_d, best_d};
    }

    while (static_cast<int>(current.size()) < num_receive_aps) {
        int best = -1;
        double best_min = -1.0;
        for (int i = 0; i < m; ++i) {
            if (chosen[i]) continue;
            double dmin = std::numeric_limits<double>::infinity();
            for (int j : current)
                dmin = std::min(dmin, distance(ap_positions[i], ap_positions[j]));
            if (dmin > best_min) {
                best_min = dmin;
                best = i;
            }
        }
        chosen[best] = 1;
        current.push_back(best);
        out.pick_order.push_back(best);
        out.objective.push_back(best_min);
    }
    out.receive_set = current;
    std::sort(out.receive_set.begin(), out.receive_set.end());
    out.transmit_set = complement(m, out.receive_set);
    return out;
}

ModeAssignment select_modes(const Scenario& scenario, const SelectionConfig& cfg,
                            double mean_ap_power_w) {
    const int m = static_cast<int>(scenario.aps.size());
    std::vector<Position2D> ap_pos;
    ap_pos.reserve(m);
    for (const auto& ap : scenario.aps) ap_pos.push_back(ap.position);

    switch (cfg.strategy) {
        case SelectionConfig::Strategy::SensingCentric:
            return select_sensing_centric(ap_pos, cfg.num_receive_aps);
        case SelectionConfig::Strategy::Fixed: {
            ModeAssignment out;
            out.strategy = SelectionConfig::Strategy::Fixed;
            out.receive_set = cfg.fixed_receive_indices;
            std::sort(out.receive_set.begin(), out.receive_set.end());
            if (out.receive_set.empty() ||
                static_cast<int>(out.receive_set.size()) >= m)
                throw ConfigError("select_modes: fixed receive set must leave "
                                  "at least one transmit AP");
            for (std::size_t i = 0; i < out.receive_set.size(); ++i) {
                if (out.receive_set[i] < 0 || out.receive_set[i] >= m)
                    throw ConfigError("select_modes: fixed index out of range");
                if (i > 0 && out.receive_set[i] == out.receive_set[i - 1])
                    throw ConfigError("select_modes: duplicate fixed index");
            }
            out.transmit_set = complement(m, out.receive_set);
            return out;
        }
        case SelectionConfig::Strategy::CommCentric:
        default: {
            std::vector<Position2D> ue_pos;
            for (const auto& ue : scenario.ues) ue_pos.push_back(ue.position);
            double noise = 0.0;
            if (cfg.surrogate_noise) {
                noise = *cfg.surrogate_noise;
            } else {
                const Eigen::MatrixXd gains =
                    link_gain_table(ap_pos, ue_pos, scenario.path_loss);
                noise = default_surrogate_noise(gains, scenario.receiver_noise_w(),
                                                mean_ap_power_w);
            }
            return select_comm_centric(ap_pos, ue_pos, scenario.path_loss,
                                       m - cfg.num_receive_aps, noise);
        }
    }
}

}  // namespace dmisac
