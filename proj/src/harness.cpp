#include "dmisac/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dmisac {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

/// JSON cannot carry IEEE infinities; encode them as a string token.
json json_real(double v) {
    if (std::isfinite(v)) return json(v);
    return json(v > 0 ? "inf" : "-inf");
}

json json_position(const Position2D& p) {
    return json::array({json_real(p.x), json_real(p.y)});
}

}  // namespace

PipelineState build_pipeline(const ScenarioConfig& config, std::uint64_t root_seed,
                             std::uint64_t trial, bool with_noise) {
    config.validate();
    PipelineState st;
    st.scenario = deploy(config, root_seed, trial);
    st.assignment = select_modes(st.scenario, config.selection,
                                 dbm_to_watts(config.ap_power_dbm));
    apply_receive_set(st.scenario, st.assignment.receive_set);
    st.noise_power_w = st.scenario.receiver_noise_w();

    const std::vector<int> tx = st.scenario.transmit_indices();
    RngStream fading(root_seed, trial, StreamTag::CommFading);
    st.channels.resize(tx.size());
    for (std::size_t t = 0; t < tx.size(); ++t) {
        st.channels[t].reserve(st.scenario.ues.size());
        for (const UETerminal& ue : st.scenario.ues) {
            st.channels[t].push_back(comm_channel(
                st.scenario.aps[tx[t]], ue, st.scenario.targets,
                st.scenario.path_loss, st.scenario.rician_factor,
                st.scenario.nlos, st.scenario.carrier_hz, fading));
        }
    }

    RngStream symbol_rng(root_seed, trial, StreamTag::CommSymbols);
    RngStream sensing_rng(root_seed, trial, StreamTag::SensingWaveform);
    st.frame = build_frame(st.scenario, st.channels, symbol_rng, sensing_rng);

    RngStream noise_rng(root_seed, trial, StreamTag::EchoNoise);
    st.echoes = synthesize_echoes(st.scenario, st.frame, noise_rng,
                                  with_noise ? st.noise_power_w : 0.0);
    return st;
}

TrialRecord run_trial(const ScenarioConfig& config, std::uint64_t root_seed,
                      std::uint64_t trial) {
    const auto t_start = std::chrono::steady_clock::now();
    TrialRecord rec;
    rec.config_digest = config_hash(config);
    rec.root_seed = root_seed;
    rec.trial = trial;

    PipelineState st = build_pipeline(config, root_seed, trial);
    rec.transmit_aps = st.assignment.transmit_set;
    rec.receive_aps = st.assignment.receive_set;
    rec.noise_power_w = st.noise_power_w;
    rec.echo_energy = st.echoes.total_energy();

    const SensingContext ctx = make_context(st.scenario, st.frame, st.echoes);

    const auto t_scan = std::chrono::steady_clock::now();
    CostMap map = scan_and_detect(ctx, config.grid, config.cfar);
    rec.timings.scan_s = seconds_since(t_scan);
    rec.tested_cells = map.tested_cells;
    rec.threshold_crossings = map.threshold_crossings;
    for (const Detection& det : map.detections) rec.coarse.push_back(det.position);

    const auto t_refine = std::chrono::steady_clock::now();
    const EstimationReport est =
        refine_coherent(ctx, rec.coarse, config.optimizer, config.grid.spacing_m);
    rec.timings.refine_s = seconds_since(t_refine);
    rec.refined = est.refined;
    rec.phase_offsets = est.phase_offsets;
    rec.initial_cost = est.initial_cost;
    rec.final_cost = est.final_cost;
    rec.converged = est.converged;

    std::vector<Position2D> truths;
    for (const Target& t : st.scenario.targets) truths.push_back(t.position);
    rec.error_m = match_errors(rec.refined, truths);

    rec.se = sum_se(st.scenario, st.frame, st.channels);

    for (const Target& t : st.scenario.targets) {
        rec.peb_coherent_m.push_back(
            fisher_coherent(st.scenario, st.frame, t, st.noise_power_w).peb_m);
        rec.peb_ncp_m.push_back(
            fisher_ncp(st.scenario, st.frame, t, st.noise_power_w).peb_m);
    }

    rec.timings.total_s = seconds_since(t_start);
    return rec;
}

std::string canonical_record(const TrialRecord& rec) {
    json j;
    j["config_digest"] = rec.config_digest;
    j["root_seed"] = rec.root_seed;
    j["trial"] = rec.trial;
    j["transmit_aps"] = rec.transmit_aps;
    j["receive_aps"] = rec.receive_aps;
    j["noise_power_w"] = json_real(rec.noise_power_w);
    j["echo_energy"] = json_real(rec.echo_energy);
    j["tested_cells"] = rec.tested_cells;
    j["threshold_crossings"] = rec.threshold_crossings;
    j["coarse"] = json::array();
    for (const auto& p : rec.coarse) j["coarse"].push_back(json_position(p));
    j["refined"] = json::array();
    for (const auto& p : rec.refined) j["refined"].push_back(json_position(p));
    j["phase_offsets"] = json::array();
    for (double v : rec.phase_offsets) j["phase_offsets"].push_back(json_real(v));
    j["initial_cost"] = json_real(rec.initial_cost);
    j["final_cost"] = json_real(rec.final_cost);
    j["converged"] = rec.converged;
    j["error_m"] = json::array();
    for (double v : rec.error_m) j["error_m"].push_back(json_real(v));
    j["peb_coherent_m"] = json::array();
    for (double v : rec.peb_coherent_m)
        j["peb_coherent_m"].push_back(json_real(v));
    j["peb_ncp_m"] = json::array();
    for (double v : rec.peb_ncp_m) j["peb_ncp_m"].push_back(json_real(v));
    j["per_ue_se"] = json::array();
    for (double v : rec.se.per_ue_se) j["per_ue_se"].push_back(json_real(v));
    j["sum_se"] = json_real(rec.se.sum_se);
    return j.dump(2);
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "receive_aps") return SweepAxis::ReceiveCount;
    if (name == "rho") return SweepAxis::CommPowerFraction;
    if (name == "power_dbm") return SweepAxis::TransmitPowerDbm;
    if (name == "antennas") return SweepAxis::AntennasPerAp;
    throw ConfigError("unknown sweep axis: " + name);
}

std::string sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::ReceiveCount: return "receive_aps";
        case SweepAxis::CommPowerFraction: return "rho";
        case SweepAxis::TransmitPowerDbm: return "power_dbm";
        case SweepAxis::AntennasPerAp: return "antennas";
    }
    return "unknown";
}

ScenarioConfig apply_axis(const ScenarioConfig& base, SweepAxis axis,
                          double value) {
    ScenarioConfig cfg = base;
    switch (axis) {
        case SweepAxis::ReceiveCount:
            cfg.selection.num_receive_aps = static_cast<int>(std::lround(value));
            break;
        case SweepAxis::CommPowerFraction:
            cfg.comm_power_fraction = value;
            break;
        case SweepAxis::TransmitPowerDbm:
            cfg.ap_power_dbm = value;
            break;
        case SweepAxis::AntennasPerAp:
            cfg.num_antennas = static_cast<int>(std::lround(value));
            break;
    }
    cfg.validate();
    return cfg;
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return kInf;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double quantile_of(std::vector<double> values, double q) {
    if (values.empty()) return kInf;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

namespace {

SweepRow make_row(const std::string& axis, double value, const std::string& metric,
                  const std::vector<double>& pooled, int trials) {
    std::vector<double> finite;
    finite.reserve(pooled.size());
    for (double v : pooled)
        if (std::isfinite(v)) finite.push_back(v);
    SweepRow row;
    row.axis = axis;
    row.axis_value = value;
    row.metric = metric;
    row.trials = trials;
    row.samples = static_cast<int>(finite.size());
    row.mean = mean_of(finite);
    row.median = quantile_of(finite, 0.5);
    row.q10 = quantile_of(finite, 0.1);
    row.q90 = quantile_of(finite, 0.9);
    return row;
}

}  // namespace

std::vector<SweepRow> sweep(const ScenarioConfig& base, SweepAxis axis,
                            const std::vector<double>& values, int trials,
                            std::uint64_t root_seed, int workers) {
    if (trials < 1) throw ConfigError("sweep: need at least one trial");
    std::vector<SweepRow> rows;
    const std::string axis_name = sweep_axis_name(axis);

    for (double value : values) {
        const ScenarioConfig cfg = apply_axis(base, axis, value);
        std::vector<TrialRecord> recs(trials);
        std::vector<std::string> failures(trials);

#ifdef _OPENMP
        int nthreads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#endif
        for (int i = 0; i < trials; ++i) {
            try {
                recs[i] = run_trial(cfg, root_seed, static_cast<std::uint64_t>(i));
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
        for (int i = 0; i < trials; ++i)
            if (!failures[i].empty())
                throw std::runtime_error("sweep: trial " + std::to_string(i) +
                                         " failed: " + failures[i]);

        std::vector<double> se, peb_c, peb_n, err, miss, dets;
        for (const TrialRecord& r : recs) {
            se.push_back(r.se.sum_se);
            for (double v : r.peb_coherent_m) peb_c.push_back(v);
            for (double v : r.peb_ncp_m) peb_n.push_back(v);
            for (double v : r.error_m) {
                if (std::isfinite(v)) err.push_back(v);
                miss.push_back(std::isfinite(v) ? 0.0 : 1.0);
            }
            dets.push_back(static_cast<double>(r.coarse.size()));
        }
        rows.push_back(make_row(axis_name, value, "sum_se", se, trials));
        rows.push_back(make_row(axis_name, value, "peb_coherent", peb_c, trials));
        rows.push_back(make_row(axis_name, value, "peb_ncp", peb_n, trials));
        rows.push_back(make_row(axis_name, value, "position_error", err, trials));
        rows.push_back(make_row(axis_name, value, "miss_rate", miss, trials));
        rows.push_back(make_row(axis_name, value, "detections", dets, trials));
    }
    return rows;
}

void write_table(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_table: cannot open " + path);
    out.precision(17);
    out << "axis,axis_value,metric,mean,median,q10,q90,trials,samples\n";
    for (const SweepRow& r : rows) {
        out << r.axis << "," << r.axis_value << "," << r.metric << "," << r.mean
            << "," << r.median << "," << r.q10 << "," << r.q90 << "," << r.trials
            << "," << r.samples << "\n";
    }
    if (!out) throw IoError("write_table: write failed");
}

}  // namespace dmisac
