#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmisac/comm_metrics.hpp"
#include "dmisac/estimator.hpp"
#include "dmisac/fisher.hpp"
#include "dmisac/selection.hpp"

namespace dmisac {

/// Fully built single-trial state, exposed so tests and tools can stop the
/// pipeline at any stage.
struct PipelineState {
    Scenario scenario;
    ModeAssignment assignment;
    std::vector<std::vector<CommChannelRealization>> channels;  // [t][k]
    TransmitFrame frame;
    EchoSet echoes;
    double noise_power_w = 0.0;
};

/// Deploys, selects modes, draws channels, builds the frame, and synthesizes
/// echoes, all from counter-based streams keyed by (root_seed, trial).
PipelineState build_pipeline(const ScenarioConfig& config, std::uint64_t root_seed,
                             std::uint64_t trial = 0, bool with_noise = true);

struct TrialTimings {
    double total_s = 0.0;
    double scan_s = 0.0;
    double refine_s = 0.0;
};

/// One trial's results. Everything except `timings` is deterministic given
/// (config, root_seed, trial) and participates in the canonical serialization.
struct TrialRecord {
    std::uint64_t config_digest = 0;
    std::uint64_t root_seed = 0;
    std::uint64_t trial = 0;
    std::vector<int> transmit_aps;
    std::vector<int> receive_aps;
    SEReport se;
    double noise_power_w = 0.0;
    double echo_energy = 0.0;
    long tested_cells = 0;
    long threshold_crossings = 0;
    std::vector<Position2D> coarse;
    std::vector<Position2D> refined;
    std::vector<double> phase_offsets;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    bool converged = false;
    std::vector<double> error_m;          // per true target, +inf when missed
    std::vector<double> peb_coherent_m;   // per true target
    std::vector<double> peb_ncp_m;
    TrialTimings timings;
};

/// Full pipeline: deploy -> select -> channels -> frame -> echoes -> scan ->
/// refine -> communication metrics -> bounds.
TrialRecord run_trial(const ScenarioConfig& config, std::uint64_t root_seed,
                      std::uint64_t trial = 0);

/// Canonical record serialization (timings excluded); byte-identical across
/// repeated runs and worker counts.
std::string canonical_record(const TrialRecord& record);

enum class SweepAxis { ReceiveCount, CommPowerFraction, TransmitPowerDbm, AntennasPerAp };

SweepAxis sweep_axis_from_name(const std::string& name);
std::string sweep_axis_name(SweepAxis axis);

/// Applies one axis value to a config copy.
ScenarioConfig apply_axis(const ScenarioConfig& base, SweepAxis axis, double value);

struct SweepRow {
    std::string axis;
    double axis_value = 0.0;
    std::string metric;
    double mean = 0.0;
    double median = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    int trials = 0;
    int samples = 0;  // pooled values behind the statistics
};

/// Monte Carlo sweep over one axis. Trials parallelize over workers; the
/// aggregate is merged by trial index and does not depend on the worker count.
std::vector<SweepRow> sweep(const ScenarioConfig& base, SweepAxis axis,
                            const std::vector<double>& values, int trials,
                            std::uint64_t root_seed, int workers = 0);

void write_table(const std::vector<SweepRow>& rows, const std::string& path);

/// Percentile helpers shared by the sweep and the tools (linear interpolation,
/// finite values only unless all are infinite).
double mean_of(const std::vector<double>& values);
double quantile_of(std::vector<double> values, double q);

}  // namespace dmisac
