#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmisac/channel.hpp"
#include "dmisac/geometry.hpp"

namespace dmisac {

struct Region {
    double xmin = 0.0, ymin = 0.0;
    double xmax = 1000.0, ymax = 1000.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
};

struct FrameConfig {
    int num_instants = 16;  // symbol instants per frame
    enum class SensingWaveform { Isotropic, Steered };
    SensingWaveform sensing_waveform = SensingWaveform::Isotropic;
    double steer_direction_rad = 0.0;  // used by the steered option only
};

struct GridSpec {
    double spacing_m = 5.0;
    double margin_m = 0.0;  // shrink the scanned region on each side
};

struct CfarConfig {
    double pfa = 1e-3;
    int guard_cells = 2;     // half-width of the guard band
    int training_cells = 8;  // ring cells averaged for the local level
};

struct OptimizerConfig {
    int max_iterations = 200;
    double gradient_step_m = 2e-4;
    double position_tolerance_m = 1e-7;
    int multistart_radius = 2;  // offsets in [-r, r]^2 at quarter-wavelength steps
};

struct CoverageConfig {
    int samples = 500;
    double threshold_wavelengths = 0.1;  // PEB acceptance level in wavelengths
};

struct SelectionConfig {
    enum class Strategy { CommCentric, SensingCentric, Fixed };
    Strategy strategy = Strategy::CommCentric;
    int num_receive_aps = 6;
    std::vector<int> fixed_receive_indices;
    std::optional<double> surrogate_noise;  // override for the selection noise term
};

/// Everything needed to reproduce a simulation: geometry statistics, radio
/// parameters, and per-stage knobs. Serializes to/from JSON losslessly.
struct ScenarioConfig {
    Region region;
    int num_aps = 12;
    int num_antennas = 8;
    int num_ues = 4;
    int num_targets = 2;
    double carrier_hz = 3.5e9;
    double bandwidth_hz = 1e5;
    double element_spacing_wavelengths = 0.5;
    double ap_power_dbm = 30.0;
    double comm_power_fraction = 0.5;
    double noise_temperature_k = 290.0;
    double noise_figure_db = 0.0;
    double rcs_dbsm = 0.0;
    double rician_factor_db = 10.0;
    PathLossModel path_loss;
    NlosModel::Correlation nlos_correlation = NlosModel::Correlation::Identity;
    double nlos_angular_spread_deg = 15.0;
    FrameConfig frame;
    GridSpec grid;
    CfarConfig cfar;
    OptimizerConfig optimizer;
    CoverageConfig coverage;
    SelectionConfig selection;

    // Optional pinned entity placements; drawn uniformly when absent.
    std::vector<Position2D> ap_positions;
    std::vector<double> ap_boresights_rad;
    std::vector<Position2D> ue_positions;
    std::vector<Position2D> target_positions;

    void validate() const;  // throws ConfigError on inconsistency
};

/// A deployed scenario: concrete node placements and drawn phases.
struct Scenario {
    Region region;
    double carrier_hz = 3.5e9;
    double bandwidth_hz = 1e5;
    double noise_temperature_k = 290.0;
    double noise_figure_db = 0.0;
    double rician_factor = 10.0;  // linear
    PathLossModel path_loss;
    NlosModel nlos;
    FrameConfig frame;
    std::vector<APNode> aps;
    std::vector<UETerminal> ues;
    std::vector<Target> targets;

    double wavelength_m() const { return wavelength(carrier_hz); }
    double receiver_noise_w() const {
        return noise_power(bandwidth_hz, noise_temperature_k, noise_figure_db);
    }
    std::vector<int> transmit_indices() const;
    std::vector<int> receive_indices() const;
};

/// Draws AP/UE/target placements and phases for one scenario realization.
/// All APs start in transmit mode; mode selection is applied separately.
Scenario deploy(const ScenarioConfig& config, std::uint64_t root_seed,
                std::uint64_t trial = 0);

/// Flips the listed APs to receive mode, the rest to transmit mode.
void apply_receive_set(Scenario& scenario, const std::vector<int>& receive_indices);

/// Baseline urban evaluation setup (1 km^2, 12 APs, 3.5 GHz, 100 kHz).
ScenarioConfig reference_scenario(int num_ues = 4);

std::string to_json(const ScenarioConfig& config);
ScenarioConfig config_from_json(const std::string& text);
ScenarioConfig load_config(const std::string& path);
void save_config(const ScenarioConfig& config, const std::string& path);

/// FNV-1a hash of the canonical serialized form.
std::uint64_t config_hash(const ScenarioConfig& config);

}  // namespace dmisac
