// Command-line front end: single trials, cost-map scans, stored-echo
// estimation, mode selection, PEB coverage maps, and axis sweeps.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmisac/harness.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace dmisac;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    int workers = 0;
    std::uint64_t trial = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "scenario config JSON path");
    cmd->add_option("--seed", args.seed, "root seed");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--workers", args.workers, "worker threads (0 = default)");
    cmd->add_option("--trial", args.trial, "trial index");
}

ScenarioConfig load_or_default(const CommonArgs& args) {
    if (args.config_path.empty()) return reference_scenario();
    return load_config(args.config_path);
}

void apply_workers(int workers) {
#ifdef _OPENMP
    if (workers > 0) omp_set_num_threads(workers);
#else
    (void)workers;
#endif
}

std::string out_path(const CommonArgs& args, const std::string& name) {
    std::filesystem::create_directories(args.out_dir);
    return (std::filesystem::path(args.out_dir) / name).string();
}

int cmd_simulate(const CommonArgs& args) {
    const ScenarioConfig cfg = load_or_default(args);
    const TrialRecord rec = run_trial(cfg, args.seed, args.trial);
    const std::string path =
        out_path(args, "trial_" + std::to_string(args.trial) + ".json");
    std::ofstream out(path);
    out << canonical_record(rec) << "\n";
    std::cout << "sum SE " << rec.se.sum_se << " bit/s/Hz, " << rec.coarse.size()
              << " detections, record: " << path << "\n";
    return 0;
}

int cmd_scan(const CommonArgs& args) {
    const ScenarioConfig cfg = load_or_default(args);
    const PipelineState st = build_pipeline(cfg, args.seed, args.trial);
    const SensingContext ctx = make_context(st.scenario, st.frame, st.echoes);
    CostMap map = scan_and_detect(ctx, cfg.grid, cfg.cfar);
    const std::string raster =
        out_path(args, "costmap_" + std::to_string(args.trial) + ".txt");
    write_cost_map(map, raster);
    const std::string echoes =
        out_path(args, "echoes_" + std::to_string(args.trial) + ".bin");
    write_echoes(st.echoes, echoes);
    std::cout << map.nx << "x" << map.ny << " map, " << map.detections.size()
              << " detections, raster: " << raster << ", echoes: " << echoes
              << "\n";
    for (const Detection& d : map.detections)
        std::cout << "  node (" << d.position.x << ", " << d.position.y
                  << ") score " << d.score << " threshold " << d.threshold << "\n";
    return 0;
}

int cmd_estimate(const CommonArgs& args, const std::string& echo_path) {
    const ScenarioConfig cfg = load_or_default(args);
    PipelineState st = build_pipeline(cfg, args.seed, args.trial);
    st.echoes = read_echoes(echo_path);
    apply_receive_set(st.scenario, st.echoes.receive_ap_indices);
    const SensingContext ctx = make_context(st.scenario, st.frame, st.echoes);
    CostMap map = scan_and_detect(ctx, cfg.grid, cfg.cfar);
    std::vector<Position2D> coarse;
    for (const Detection& d : map.detections) coarse.push_back(d.position);
    const EstimationReport est =
        refine_coherent(ctx, coarse, cfg.optimizer, cfg.grid.spacing_m);
    std::cout << coarse.size() << " detections\n";
    for (std::size_t s = 0; s < est.refined.size(); ++s)
        std::cout << "  target " << s << ": (" << est.refined[s].x << ", "
                  << est.refined[s].y << "), phase " << est.phase_offsets[s]
                  << " rad\n";
    std::cout << "final cost " << est.final_cost << " (initial "
              << est.initial_cost << ", converged " << est.converged << ")\n";
    return 0;
}

int cmd_select(const CommonArgs& args) {
    const ScenarioConfig cfg = load_or_default(args);
    const Scenario scenario = deploy(cfg, args.seed, args.trial);
    const ModeAssignment assign =
        select_modes(scenario, cfg.selection, dbm_to_watts(cfg.ap_power_dbm));
    std::cout << "transmit:";
    for (int t : assign.transmit_set) std::cout << " " << t;
    std::cout << "\nreceive:";
    for (int r : assign.receive_set) std::cout << " " << r;
    std::cout << "\npick order:";
    for (int r : assign.pick_order) std::cout << " " << r;
    std::cout << "\n";
    return 0;
}

int cmd_coverage(const CommonArgs& args) {
    const ScenarioConfig cfg = load_or_default(args);
    const PipelineState st = build_pipeline(cfg, args.seed, args.trial, false);
    RngStream rng(args.seed, args.trial, StreamTag::CoverageSampling);
    const CoverageResult cov =
        coverage_pebs(st.scenario, st.frame, db_to_linear(cfg.rcs_dbsm),
                      st.noise_power_w, cfg.coverage, rng);
    const double threshold =
        cfg.coverage.threshold_wavelengths * st.scenario.wavelength_m();
    const std::string path =
        out_path(args, "coverage_" + std::to_string(args.trial) + ".txt");
    write_coverage(cov, path);
    std::cout << "coverage " << cov.fraction_below(threshold) << " at "
              << threshold << " m, median PEB " << cov.median_peb()
              << " m, points: " << path << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& axis_name,
              const std::vector<double>& values, int trials) {
    const ScenarioConfig cfg = load_or_default(args);
    const SweepAxis axis = sweep_axis_from_name(axis_name);
    const std::vector<SweepRow> rows =
        sweep(cfg, axis, values, trials, args.seed, args.workers);
    const std::string path = out_path(args, "sweep_" + axis_name + ".csv");
    write_table(rows, path);
    std::cout << rows.size() << " rows: " << path << "\n";
    return 0;
}

int check(bool ok, const std::string& name, int& failures) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "\n";
    if (!ok) ++failures;
    return failures;
}

/// Fast self-contained sanity suite on reduced instances.
int cmd_validate(const CommonArgs& args) {
    int failures = 0;

    ScenarioConfig cfg = reference_scenario(2);
    cfg.num_aps = 4;
    cfg.num_antennas = 2;
    cfg.num_targets = 1;
    cfg.frame.num_instants = 4;
    cfg.selection.num_receive_aps = 2;
    cfg.grid.spacing_m = 100.0;

    const PipelineState st = build_pipeline(cfg, args.seed, 0);
    const SensingContext ctx = make_context(st.scenario, st.frame, st.echoes);

    const Position2D probe{417.0, 233.0};
    const double cost = ncp_cost(ctx, probe);
    check(cost >= 0.0 && cost <= ctx.echo_energy * (1.0 + 1e-12),
          "free-gain cost bounded by echo energy", failures);
    check(coherent_cost(ctx, {probe}) >= cost - 1e-9 * ctx.echo_energy,
          "coherent fit never beats the free-gain fit", failures);

    const double factor = cfar_threshold_factor(1e-3, 1, 8);
    const double classic = 8.0 * (std::pow(1e-3, -1.0 / 8.0) - 1.0);
    check(std::abs(factor - classic) < 1e-9 * classic,
          "CFAR factor matches the exponential closed form", failures);

    const TrialRecord a = run_trial(cfg, args.seed, 0);
    const TrialRecord b = run_trial(cfg, args.seed, 0);
    check(canonical_record(a) == canonical_record(b),
          "trial records reproduce bit-identically", failures);

    const FisherResult fr =
        fisher_coherent(st.scenario, st.frame, st.scenario.targets[0],
                        st.noise_power_w);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fr.fim);
    check(es.eigenvalues().minCoeff() >=
              -1e-8 * std::max(es.eigenvalues().maxCoeff(), 1e-300),
          "information matrix is positive semidefinite", failures);

    std::cout << (failures == 0 ? "all checks passed" : "checks FAILED") << "\n";
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed-MIMO sensing and communication simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string echo_path;
    std::string axis_name = "rho";
    std::vector<double> axis_values;
    int trials = 20;

    CLI::App* sim = app.add_subcommand("simulate", "run one full trial");
    add_common(sim, args);
    CLI::App* scan = app.add_subcommand("scan", "emit a coarse cost-map raster");
    add_common(scan, args);
    CLI::App* est = app.add_subcommand("estimate", "estimate from stored echoes");
    add_common(est, args);
    est->add_option("--echoes", echo_path, "echo file path")->required();
    CLI::App* sel = app.add_subcommand("select", "print the mode assignment");
    add_common(sel, args);
    CLI::App* cov = app.add_subcommand("coverage", "PEB coverage map");
    add_common(cov, args);
    CLI::App* swp = app.add_subcommand("sweep", "axis sweep with trials");
    add_common(swp, args);
    swp->add_option("--axis", axis_name,
                    "receive_aps | rho | power_dbm | antennas");
    swp->add_option("--values", axis_values, "axis values")->required();
    swp->add_option("--trials", trials, "trials per value");
    CLI::App* val = app.add_subcommand("validate", "fast invariant self-checks");
    add_common(val, args);

    CLI11_PARSE(app, argc, argv);
    apply_workers(args.workers);

    try {
        if (sim->parsed()) return cmd_simulate(args);
        if (scan->parsed()) return cmd_scan(args);
        if (est->parsed()) return cmd_estimate(args, echo_path);
        if (sel->parsed()) return cmd_select(args);
        if (cov->parsed()) return cmd_coverage(args);
        if (swp->parsed()) return cmd_sweep(args, axis_name, axis_values, trials);
        if (val->parsed()) return cmd_validate(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
