#include "dmisac/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dmisac {

using nlohmann::json;

void ScenarioConfig::validate() const {
    if (num_aps < 1) throw ConfigError("config: num_aps must be >= 1");
    if (num_antennas < 1) throw ConfigError("config: num_antennas must be >= 1");
    if (num_ues < 0) throw ConfigError("config: num_ues must be >= 0");
    if (num_targets < 0) throw ConfigError("config: num_targets must be >= 0");
    if (carrier_hz <= 0.0) throw ConfigError("config: carrier_hz must be positive");
    if (bandwidth_hz <= 0.0) throw ConfigError("config: bandwidth_hz must be positive");
    if (region.width() <= 0.0 || region.height() <= 0.0)
        throw ConfigError("config: region must have positive area");
    if (comm_power_fraction < 0.0 || comm_power_fraction > 1.0)
        throw ConfigError("config: comm_power_fraction must lie in [0, 1]");
    if (frame.num_instants < 1)
        throw ConfigError("config: frame.num_instants must be >= 1");
    if (selection.num_receive_aps < 1 || selection.num_receive_aps >= num_aps)
        throw ConfigError("config: num_receive_aps must leave at least one transmit AP");
    if (selection.strategy == SelectionConfig::Strategy::Fixed &&
        static_cast<int>(selection.fixed_receive_indices.size()) !=
            selection.num_receive_aps)
        throw ConfigError("config: fixed receive set size mismatch");
    if (cfar.pfa <= 0.0 || cfar.pfa >= 1.0)
        throw ConfigError("config: cfar.pfa must lie in (0, 1)");
    if (grid.spacing_m <= 0.0)
        throw ConfigError("config: grid.spacing_m must be positive");
    if (!ap_positions.empty() &&
        static_cast<int>(ap_positions.size()) != num_aps)
        throw ConfigError("config: ap_positions size mismatch");
    if (!ue_positions.empty() && static_cast<int>(ue_positions.size()) != num_ues)
        throw ConfigError("config: ue_positions size mismatch");
    if (!target_positions.empty() &&
        static_cast<int>(target_positions.size()) != num_targets)
        throw ConfigError("config: target_positions size mismatch");
    if (!ap_boresights_rad.empty() &&
        static_cast<int>(ap_boresights_rad.size()) != num_aps)
        throw ConfigError("config: ap_boresights size mismatch");
}

std::vector<int> Scenario::transmit_indices() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(aps.size()); ++i)
        if (aps[i].mode == APMode::Transmit) out.push_back(i);
    return out;
}

std::vector<int> Scenario::receive_indices() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(aps.size()); ++i)
        if (aps[i].mode == APMode::Receive) out.push_back(i);
    return out;
}

Scenario deploy(const ScenarioConfig& config, std::uint64_t root_seed,
                std::uint64_t trial) {
    config.validate();
    Scenario s;
    s.region = config.region;
    s.carrier_hz = config.carrier_hz;
    s.bandwidth_hz = config.bandwidth_hz;
    s.noise_temperature_k = config.noise_temperature_k;
    s.noise_figure_db = config.noise_figure_db;
    s.rician_factor = db_to_linear(config.rician_factor_db);
    s.path_loss = config.path_loss;
    s.nlos.correlation = config.nlos_correlation;
    s.nlos.angular_spread_rad = config.nlos_angular_spread_deg * kPi / 180.0;
    s.frame = config.frame;

    RngStream place(root_seed, trial, StreamTag::Deployment);
    const double lambda = wavelength(config.carrier_hz);
    ArrayGeometry array{config.num_antennas,
                        config.element_spacing_wavelengths * lambda, lambda};

    s.aps.resize(config.num_aps);
    for (int i = 0; i < config.num_aps; ++i) {
        APNode& ap = s.aps[i];
        ap.position = config.ap_positions.empty()
                          ? Position2D{place.uniform(s.region.xmin, s.region.xmax),
                                       place.uniform(s.region.ymin, s.region.ymax)}
                          : config.ap_positions[i];
        ap.boresight_rad = config.ap_boresights_rad.empty()
                               ? place.uniform(0.0, kTwoPi)
                               : config.ap_boresights_rad[i];
        ap.array = array;
        ap.max_power_w = dbm_to_watts(config.ap_power_dbm);
        ap.comm_power_fraction = config.comm_power_fraction;
        ap.mode = APMode::Transmit;
    }

    RngStream ue_phase(root_seed, trial, StreamTag::UePhase);
    s.ues.resize(config.num_ues);
    for (int k = 0; k < config.num_ues; ++k) {
        UETerminal& ue = s.ues[k];
        ue.position = config.ue_positions.empty()
                          ? Position2D{place.uniform(s.region.xmin, s.region.xmax),
                                       place.uniform(s.region.ymin, s.region.ymax)}
                          : config.ue_positions[k];
        ue.phase_offset_rad = ue_phase.uniform(-kPi, kPi);
    }

    RngStream target_phase(root_seed, trial, StreamTag::TargetPhase);
    s.targets.resize(config.num_targets);
    for (int t = 0; t < config.num_targets; ++t) {
        Target& tgt = s.targets[t];
        tgt.position = config.target_positions.empty()
                           ? Position2D{place.uniform(s.region.xmin, s.region.xmax),
                                        place.uniform(s.region.ymin, s.region.ymax)}
                           : config.target_positions[t];
        tgt.rcs_sqm = db_to_linear(config.rcs_dbsm);
        tgt.reflection_phase_rad = target_phase.uniform(-kPi, kPi);
    }
    return s;
}

void apply_receive_set(Scenario& scenario, const std::vector<int>& receive_indices) {
    for (APNode& ap : scenario.aps) ap.mode = APMode::Transmit;
    for (int idx : receive_indices) {
        if (idx < 0 || idx >= static_cast<int>(scenario.aps.size()))
            throw ConfigError("apply_receive_set: AP index out of range");
        scenario.aps[idx].mode = APMode::Receive;
    }
    if (scenario.transmit_indices().empty())
        throw ConfigError("apply_receive_set: no transmit AP left");
    if (scenario.receive_indices().empty())
        throw ConfigError("apply_receive_set: no receive AP selected");
}

ScenarioConfig reference_scenario(int num_ues) {
    ScenarioConfig c;
    c.num_ues = num_ues;
    return c;  // struct defaults encode the baseline setup
}

namespace {

json position_list(const std::vector<Position2D>& v) {
    json out = json::array();
    for (const auto& p : v) out.push_back({p.x, p.y});
    return out;
}

std::vector<Position2D> positions_from(const json& j) {
    std::vector<Position2D> out;
    for (const auto& e : j) out.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    return out;
}

std::string waveform_name(FrameConfig::SensingWaveform w) {
    return w == FrameConfig::SensingWaveform::Isotropic ? "isotropic" : "steered";
}

std::string strategy_name(SelectionConfig::Strategy s) {
    switch (s) {
        case SelectionConfig::Strategy::CommCentric: return "comm_centric";
        case SelectionConfig::Strategy::SensingCentric: return "sensing_centric";
        default: return "fixed";
    }
}

json to_json_obj(const ScenarioConfig& c) {
    json j;
    j["region"] = {{"xmin", c.region.xmin},
                   {"ymin", c.region.ymin},
                   {"xmax", c.region.xmax},
                   {"ymax", c.region.ymax}};
    j["num_aps"] = c.num_aps;
    j["num_antennas"] = c.num_antennas;
    j["num_ues"] = c.num_ues;
    j["num_targets"] = c.num_targets;
    j["carrier_hz"] = c.carrier_hz;
    j["bandwidth_hz"] = c.bandwidth_hz;
    j["element_spacing_wavelengths"] = c.element_spacing_wavelengths;
    j["ap_power_dbm"] = c.ap_power_dbm;
    j["comm_power_fraction"] = c.comm_power_fraction;
    j["noise_temperature_k"] = c.noise_temperature_k;
    j["noise_figure_db"] = c.noise_figure_db;
    j["rcs_dbsm"] = c.rcs_dbsm;
    j["rician_factor_db"] = c.rician_factor_db;
    j["path_loss"] = {{"ref_db", c.path_loss.ref_db},
                      {"slope_db_per_decade", c.path_loss.slope_db_per_decade}};
    j["nlos"] = {{"correlation",
                  c.nlos_correlation == NlosModel::Correlation::Identity
                      ? "identity"
                      : "local_scattering"},
                 {"angular_spread_deg", c.nlos_angular_spread_deg}};
    j["frame"] = {{"num_instants", c.frame.num_instants},
                  {"sensing_waveform", waveform_name(c.frame.sensing_waveform)},
                  {"steer_direction_rad", c.frame.steer_direction_rad}};
    j["grid"] = {{"spacing_m", c.grid.spacing_m}, {"margin_m", c.grid.margin_m}};
    j["cfar"] = {{"pfa", c.cfar.pfa},
                 {"guard_cells", c.cfar.guard_cells},
                 {"training_cells", c.cfar.training_cells}};
    j["optimizer"] = {{"max_iterations", c.optimizer.max_iterations},
                      {"gradient_step_m", c.optimizer.gradient_step_m},
                      {"position_tolerance_m", c.optimizer.position_tolerance_m},
                      {"multistart_radius", c.optimizer.multistart_radius}};
    j["coverage"] = {{"samples", c.coverage.samples},
                     {"threshold_wavelengths", c.coverage.threshold_wavelengths}};
    json sel = {{"strategy", strategy_name(c.selection.strategy)},
                {"num_receive_aps", c.selection.num_receive_aps},
                {"fixed_receive_indices", c.selection.fixed_receive_indices}};
    if (c.selection.surrogate_noise)
        sel["surrogate_noise"] = *c.selection.surrogate_noise;
    j["selection"] = sel;
    if (!c.ap_positions.empty()) j["ap_positions"] = position_list(c.ap_positions);
    if (!c.ap_boresights_rad.empty()) j["ap_boresights_rad"] = c.ap_boresights_rad;
    if (!c.ue_positions.empty()) j["ue_positions"] = position_list(c.ue_positions);
    if (!c.target_positions.empty())
        j["target_positions"] = position_list(c.target_positions);
    return j;
}

ScenarioConfig from_json_obj(const json& j) {
    ScenarioConfig c;
    if (j.contains("region")) {
        const auto& r = j.at("region");
        c.region = {r.at("xmin"), r.at("ymin"), r.at("xmax"), r.at("ymax")};
    }
    c.num_aps = j.value("num_aps", c.num_aps);
    c.num_antennas = j.value("num_antennas", c.num_antennas);
    c.num_ues = j.value("num_ues", c.num_ues);
    c.num_targets = j.value("num_targets", c.num_targets);
    c.carrier_hz = j.value("carrier_hz", c.carrier_hz);
    c.bandwidth_hz = j.value("bandwidth_hz", c.bandwidth_hz);
    c.element_spacing_wavelengths =
        j.value("element_spacing_wavelengths", c.element_spacing_wavelengths);
    c.ap_power_dbm = j.value("ap_power_dbm", c.ap_power_dbm);
    c.comm_power_fraction = j.value("comm_power_fraction", c.comm_power_fraction);
    c.noise_temperature_k = j.value("noise_temperature_k", c.noise_temperature_k);
    c.noise_figure_db = j.value("noise_figure_db", c.noise_figure_db);
    c.rcs_dbsm = j.value("rcs_dbsm", c.rcs_dbsm);
    c.rician_factor_db = j.value("rician_factor_db", c.rician_factor_db);
    if (j.contains("path_loss")) {
        c.path_loss.ref_db = j.at("path_loss").value("ref_db", c.path_loss.ref_db);
        c.path_loss.slope_db_per_decade = j.at("path_loss").value(
            "slope_db_per_decade", c.path_loss.slope_db_per_decade);
    }
    if (j.contains("nlos")) {
        const std::string corr = j.at("nlos").value("correlation", "identity");
        c.nlos_correlation = corr == "local_scattering"
                                 ? NlosModel::Correlation::LocalScattering
                                 : NlosModel::Correlation::Identity;
        c.nlos_angular_spread_deg =
            j.at("nlos").value("angular_spread_deg", c.nlos_angular_spread_deg);
    }
    if (j.contains("frame")) {
        const auto& f = j.at("frame");
        c.frame.num_instants = f.value("num_instants", c.frame.num_instants);
        c.frame.sensing_waveform =
            f.value("sensing_waveform", "isotropic") == std::string("steered")
                ? FrameConfig::SensingWaveform::Steered
                : FrameConfig::SensingWaveform::Isotropic;
        c.frame.steer_direction_rad =
            f.value("steer_direction_rad", c.frame.steer_direction_rad);
    }
    if (j.contains("grid")) {
        c.grid.spacing_m = j.at("grid").value("spacing_m", c.grid.spacing_m);
        c.grid.margin_m = j.at("grid").value("margin_m", c.grid.margin_m);
    }
    if (j.contains("cfar")) {
        const auto& f = j.at("cfar");
        c.cfar.pfa = f.value("pfa", c.cfar.pfa);
        c.cfar.guard_cells = f.value("guard_cells", c.cfar.guard_cells);
        c.cfar.training_cells = f.value("training_cells", c.cfar.training_cells);
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        c.optimizer.max_iterations =
            o.value("max_iterations", c.optimizer.max_iterations);
        c.optimizer.gradient_step_m =
            o.value("gradient_step_m", c.optimizer.gradient_step_m);
        c.optimizer.position_tolerance_m =
            o.value("position_tolerance_m", c.optimizer.position_tolerance_m);
        c.optimizer.multistart_radius =
            o.value("multistart_radius", c.optimizer.multistart_radius);
    }
    if (j.contains("coverage")) {
        c.coverage.samples = j.at("coverage").value("samples", c.coverage.samples);
        c.coverage.threshold_wavelengths = j.at("coverage").value(
            "threshold_wavelengths", c.coverage.threshold_wavelengths);
    }
    if (j.contains("selection")) {
        const auto& s = j.at("selection");
        const std::string name = s.value("strategy", "comm_centric");
        c.selection.strategy =
            name == "sensing_centric" ? SelectionConfig::Strategy::SensingCentric
            : name == "fixed"         ? SelectionConfig::Strategy::Fixed
                                      : SelectionConfig::Strategy::CommCentric;
        c.selection.num_receive_aps =
            s.value("num_receive_aps", c.selection.num_receive_aps);
        if (s.contains("fixed_receive_indices"))
            c.selection.fixed_receive_indices =
                s.at("fixed_receive_indices").get<std::vector<int>>();
        if (s.contains("surrogate_noise"))
            c.selection.surrogate_noise = s.at("surrogate_noise").get<double>();
    }
    if (j.contains("ap_positions")) c.ap_positions = positions_from(j.at("ap_positions"));
    if (j.contains("ap_boresights_rad"))
        c.ap_boresights_rad = j.at("ap_boresights_rad").get<std::vector<double>>();
    if (j.contains("ue_positions")) c.ue_positions = positions_from(j.at("ue_positions"));
    if (j.contains("target_positions"))
        c.target_positions = positions_from(j.at("target_positions"));
    return c;
}

}  // namespace

std::string to_json(const ScenarioConfig& config) {
    return to_json_obj(config).dump(2);
}

ScenarioConfig config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw IoError("config_from_json: invalid JSON");
    ScenarioConfig c = from_json_obj(j);
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const ScenarioConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_config: cannot open " + path);
    out << to_json(config) << "\n";
}

std::uint64_t config_hash(const ScenarioConfig& config) {
    const std::string text = to_json(config);
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64-bit
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace dmisac
