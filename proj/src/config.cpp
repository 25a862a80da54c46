#include "isac/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace isac::config {

using nlohmann::json;

namespace {

// One field list drives reading, writing and hashing. The visitor receives
// (section, key, reference) for every configurable value.
template <typename Cfg, typename V>
void visit_fields(Cfg& c, V&& v) {
    v("", "profile", c.profile);
    v("", "seed", c.seed);

    v("radio", "carrier_freq_hz", c.radio.carrier_freq_hz);
    v("radio", "subcarrier_spacing_hz", c.radio.subcarrier_spacing_hz);
    v("radio", "num_subcarriers", c.radio.num_subcarriers);
    v("radio", "symbols_per_frame", c.radio.symbols_per_frame);
    v("radio", "sensing_symbols", c.radio.sensing_symbols);
    v("radio", "cp_fraction", c.radio.cp_fraction);
    v("radio", "eirp_watts", c.radio.eirp_watts);
    v("radio", "rx_element_gain", c.radio.rx_element_gain);
    v("radio", "noise_psd_w_per_hz", c.radio.noise_psd_w_per_hz);
    v("radio", "num_tx_antennas", c.radio.num_tx_antennas);
    v("radio", "num_rx_antennas", c.radio.num_rx_antennas);
    v("radio", "sensing_power_fraction", c.radio.sensing_power_fraction);

    v("layout", "num_bs", c.layout.num_bs);
    v("layout", "ring_radius_m", c.layout.ring_radius_m);
    v("layout", "scan_halfwidth_deg", c.layout.scan_halfwidth_deg);
    v("layout", "scan_step_deg", c.layout.scan_step_deg);
    v("layout", "comm_dir_deg", c.layout.comm_dir_deg);
    v("layout", "sensing_order", c.layout.sensing_order);
    v("layout", "n_sensing", c.layout.n_sensing);

    v("area", "x_min", c.area.x_min);
    v("area", "x_max", c.area.x_max);
    v("area", "y_min", c.area.y_min);
    v("area", "y_max", c.area.y_max);
    v("area", "cell_m", c.cell_m);

    v("targets", "num_pedestrians", c.targets.num_pedestrians);
    v("targets", "num_vehicles", c.targets.num_vehicles);
    v("targets", "min_separation_m", c.targets.min_separation_m);
    v("targets", "scenario_file", c.targets.scenario_file);

    v("rcs", "pedestrian_m2", c.rcs.pedestrian_m2);
    v("rcs", "surface_m2", c.rcs.surface_m2);
    v("rcs", "wheelhouse_m2", c.rcs.wheelhouse_m2);
    v("rcs", "corner_m2", c.rcs.corner_m2);
    v("visibility", "surface_halfwidth_deg", c.surface_halfwidth_deg);
    v("visibility", "corner_halfwidth_deg", c.corner_halfwidth_deg);
    v("visibility", "wheel_offset_m", c.wheel_offset_m);

    v("timing", "scan_period_s", c.scan_period_s);
    v("timing", "num_scans", c.num_scans);

    v("sensing", "range_zero_pad", c.sensing.periodogram.range_zero_pad);
    v("sensing", "doppler_zero_pad", c.sensing.periodogram.doppler_zero_pad);
    v("sensing", "noise", c.sensing.noise);
    v("sensing", "fast", c.sensing.fast);

    v("clustering", "excision_mode", c.excision.mode);
    v("clustering", "excision_threshold", c.clustering.excision_threshold);
    v("clustering", "excision_margin", c.excision.margin);
    v("clustering", "calibration_trials", c.excision.trials);
    v("clustering", "knn_gate_pedestrian", c.clustering.knn_gate_pedestrian);
    v("clustering", "knn_gate_vehicle", c.clustering.knn_gate_vehicle);
    v("clustering", "dbscan_eps", c.clustering.dbscan_eps);
    v("clustering", "dbscan_min_pts", c.clustering.dbscan_min_pts);
    v("clustering", "units", c.clustering.units);
    v("clustering", "covariance_jitter", c.clustering.covariance_jitter);

    v("tracker", "process_noise_scale", c.motion.process_noise_scale);
    v("tracker", "survival_prob", c.motion.survival_prob);
    v("tracker", "detection_prob", c.motion.detection_prob);
    v("tracker", "clutter_intensity", c.motion.clutter_intensity);
    v("tracker", "phd_prune", c.tracker.phd_prune);
    v("tracker", "phd_cap", c.tracker.phd_cap);
    v("tracker", "mbm_bernoulli_prune", c.tracker.mbm_bernoulli_prune);
    v("tracker", "mbm_global_prune", c.tracker.mbm_global_prune);
    v("tracker", "mbm_cap", c.tracker.mbm_cap);
    v("tracker", "assoc_gate", c.tracker.assoc_gate);
    v("tracker", "existence_thresh", c.tracker.existence_thresh);
    v("tracker", "merge_thresh", c.tracker.merge_thresh);
    v("tracker", "initial_cov", c.tracker.initial_cov);
    v("tracker", "birth_cov", c.tracker.birth_cov);
    v("tracker", "recovery_cov", c.tracker.recovery_cov);
    v("tracker", "birth_weight", c.tracker.birth_weight);
    v("tracker", "recovery_weight", c.tracker.recovery_weight);
    v("tracker", "recovery_birth", c.tracker.recovery_birth);
    v("tracker", "adaptive_birth", c.tracker.adaptive_birth);
    v("tracker", "adaptive_birth_weight", c.tracker.adaptive_birth_weight);
    v("tracker", "layout_births", c.tracker.layout_births);
    v("tracker", "max_children_per_hypothesis", c.tracker.max_children_per_hypothesis);

    v("classifier", "window_m", c.classifier.window_m);
    v("classifier", "perturb_sigma_m", c.classifier.perturb_sigma_m);
    v("classifier", "num_filters", c.classifier.num_filters);
    v("classifier", "filter_size", c.classifier.filter_size);
    v("classifier", "pool_factor", c.classifier.pool_factor);
    v("classifier", "learning_rate", c.classifier.learning_rate);
    v("classifier", "momentum", c.classifier.momentum);
    v("classifier", "max_epochs", c.classifier.max_epochs);
    v("classifier", "batch_size", c.classifier.batch_size);
    v("classifier", "patience", c.classifier.patience);
    v("classifier", "min_improvement", c.classifier.min_improvement);
    v("classifier", "validation_fraction", c.classifier.validation_fraction);
    v("classifier", "normalize_patches", c.classifier.normalize_patches);
    v("classifier", "log_range_db", c.classifier.log_range_db);
    v("classifier", "init_seed", c.classifier.seed);
    v("classifier", "train_pedestrians", c.training.num_pedestrians);
    v("classifier", "train_vehicles", c.training.num_vehicles);
    v("classifier", "train_scans", c.training.num_scans);
    v("classifier", "train_runs", c.training.num_runs);
    v("classifier", "train_seed", c.training.seed);
    v("classifier", "model_path", c.training.model_path);

    v("metrics", "ospa_order", c.ospa.order_p);
    v("metrics", "ospa_gate_m", c.ospa.gate_m);
    v("metrics", "comm_snr_linear", c.comm_snr_linear);
    v("metrics", "capacity_rho", c.capacity_rho);

    v("run", "filters", c.filters);
    v("run", "gating", c.gating);
    v("run", "out_dir", c.out_dir);
    v("run", "dump_maps", c.dump_maps);
}

const json* section_of(const json& j, const std::string& section) {
    if (section.empty()) return &j;
    auto it = j.find(section);
    if (it == j.end()) return nullptr;
    if (!it->is_object()) throw ConfigError("section '" + section + "' must be an object");
    return &*it;
}

std::string where(const std::string& s, const std::string& k) { return s.empty() ? k : s + "." + k; }

struct Reader {
    const json& root;
    std::set<std::string> seen;

    template <typename T>
    void operator()(const std::string& section, const std::string& key, T& field) {
        seen.insert(where(section, key));
        const json* s = section_of(root, section);
        if (!s) return;
        auto it = s->find(key);
        if (it == s->end()) return;
        try {
            assign(*it, field);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key '" + where(section, key) + "': " + e.what());
        }
    }

    template <typename T>
    static void assign(const json& j, T& f) { f = j.get<T>(); }
    static void assign(const json& j, clustering::GateUnits& f) {
        f = clustering::gate_units_from_string(j.get<std::string>());
    }
    static void assign(const json& j, clustering::GatingMode& f) {
        f = clustering::gating_mode_from_string(j.get<std::string>());
    }
    static void assign(const json& j, std::vector<tracking::FilterKind>& f) {
        f.clear();
        if (j.is_string()) {
            const auto s = j.get<std::string>();
            if (s == "both") f = {tracking::FilterKind::phd, tracking::FilterKind::mbm};
            else f.push_back(tracking::filter_kind_from_string(s));
            return;
        }
        for (const auto& e : j) f.push_back(tracking::filter_kind_from_string(e.get<std::string>()));
    }
    static void assign(const json& j, std::vector<tracking::Vec4>& f) {
        f.clear();
        for (const auto& e : j) {
            const auto v = e.get<std::vector<double>>();
            if (v.size() != 4) throw ConfigError("layout birth must be [x, y, vx, vy]");
            f.emplace_back(v[0], v[1], v[2], v[3]);
        }
    }
};

struct Writer {
    json& root;

    template <typename T>
    void operator()(const std::string& section, const std::string& key, const T& field) {
        json& s = section.empty() ? root : root[section];
        s[key] = value(field);
    }

    template <typename T>
    static json value(const T& f) { return f; }
    static json value(const clustering::GateUnits& f) { return clustering::to_string(f); }
    static json value(const clustering::GatingMode& f) { return clustering::to_string(f); }
    static json value(const std::vector<tracking::FilterKind>& f) {
        json a = json::array();
        for (auto k : f) a.push_back(tracking::to_string(k));
        return a;
    }
    static json value(const std::vector<tracking::Vec4>& f) {
        json a = json::array();
        for (const auto& v : f) a.push_back({v[0], v[1], v[2], v[3]});
        return a;
    }
};

std::string kind_name(scenario::MotionKind k) {
    switch (k) {
        case scenario::MotionKind::static_hold: return "static";
        case scenario::MotionKind::uniform: return "uniform";
        case scenario::MotionKind::accelerate: return "accelerate";
        case scenario::MotionKind::turn: return "turn";
    }
    return "uniform";
}

scenario::MotionKind kind_from(const std::string& s) {
    if (s == "static") return scenario::MotionKind::static_hold;
    if (s == "uniform") return scenario::MotionKind::uniform;
    if (s == "accelerate") return scenario::MotionKind::accelerate;
    if (s == "turn") return scenario::MotionKind::turn;
    throw ConfigError("unknown motion primitive '" + s + "'");
}

}  // namespace

std::vector<scenario::TargetTruth> targets_from_json(const json& j) {
    const json& list = j.contains("targets") ? j.at("targets") : j;
    if (!list.is_array()) throw ConfigError("targets must be an array");
    std::vector<scenario::TargetTruth> out;
    try {
        for (const auto& t : list) {
            scenario::TargetTruth tt;
            tt.id = t.value("id", static_cast<int>(out.size()));
            tt.cls = target_class_from_string(t.at("class").get<std::string>());
            const auto pos = t.at("position").get<std::vector<double>>();
            if (pos.size() != 2) throw ConfigError("target position must be [x, y]");
            tt.trajectory.initial_position = {pos[0], pos[1]};
            tt.trajectory.initial_heading_rad = deg_to_rad(t.value("heading_deg", 0.0));
            tt.trajectory.initial_speed_mps = t.value("speed_mps", 0.0);
            tt.length_m = t.value("length_m", tt.length_m);
            tt.width_m = t.value("width_m", tt.width_m);
            for (const auto& s : t.at("segments")) {
                scenario::MotionPrimitive m;
                m.kind = kind_from(s.at("kind").get<std::string>());
                m.duration_s = s.at("duration_s").get<double>();
                m.accel_mps2 = s.value("accel_mps2", 0.0);
                m.turn_rate_rps = deg_to_rad(s.value("turn_rate_dps", 0.0));
                tt.trajectory.segments.push_back(m);
            }
            tt.trajectory.validate();
            out.push_back(std::move(tt));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("targets: ") + e.what());
    }
    return out;
}

json targets_to_json(const std::vector<scenario::TargetTruth>& targets) {
    json a = json::array();
    for (const auto& t : targets) {
        json segs = json::array();
        for (const auto& s : t.trajectory.segments)
            segs.push_back({{"kind", kind_name(s.kind)},
                            {"duration_s", s.duration_s},
                            {"accel_mps2", s.accel_mps2},
                            {"turn_rate_dps", s.turn_rate_rps * 180.0 / kPi}});
        a.push_back({{"id", t.id},
                     {"class", to_string(t.cls)},
                     {"position", {t.trajectory.initial_position.x(), t.trajectory.initial_position.y()}},
                     {"heading_deg", t.trajectory.initial_heading_rad * 180.0 / kPi},
                     {"speed_mps", t.trajectory.initial_speed_mps},
                     {"length_m", t.length_m},
                     {"width_m", t.width_m},
                     {"segments", segs}});
    }
    return a;
}

RunConfig paper_preset() {
    RunConfig c;
    c.profile = "paper";
    c.layout.scan_halfwidth_deg = 60.0;
    c.num_scans = 200;
    c.targets.num_pedestrians = 4;
    c.targets.num_vehicles = 4;
    c.training.num_scans = 40;
    return c;
}

RunConfig desk_preset() {
    RunConfig c;
    c.profile = "desk";
    c.radio.num_subcarriers = 512;
    // Same occupied bandwidth as the full numerology (3168 x 120 kHz), so the
    // range resolution, noise power and capacity bandwidth are unchanged.
    c.radio.subcarrier_spacing_hz = 3168.0 * 120e3 / 512.0;
    c.radio.sensing_symbols = 32;
    c.radio.symbols_per_frame = 320;
    c.layout.scan_halfwidth_deg = 36.0;   // 31 directions at 2.4 deg
    c.num_scans = 50;
    c.targets.num_pedestrians = 1;
    c.targets.num_vehicles = 1;
    c.training.num_pedestrians = 4;
    c.training.num_vehicles = 4;
    c.training.num_scans = 10;
    c.training.num_runs = 8;
    return c;
}

RunConfig preset(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "paper") return paper_preset();
    throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

RunConfig from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    RunConfig cfg = preset(j.value("profile", std::string("desk")));
    Reader r{j, {}};
    visit_fields(cfg, r);

    // Reject unknown keys so typos do not silently fall back to defaults.
    std::set<std::string> sections;
    for (const auto& k : r.seen)
        if (auto dot = k.find('.'); dot != std::string::npos) sections.insert(k.substr(0, dot));
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (sections.count(it.key())) {
            for (auto jt = it->begin(); jt != it->end(); ++jt) {
                const auto full = it.key() + "." + jt.key();
                if (!r.seen.count(full) && full != "targets.list") throw ConfigError("unknown config key '" + full + "'");
            }
        } else if (!r.seen.count(it.key())) {
            throw ConfigError("unknown config key '" + it.key() + "'");
        }
    }

    if (j.contains("targets") && j["targets"].contains("list"))
        cfg.targets.explicit_targets = targets_from_json(j["targets"]["list"]);
    if (!cfg.targets.scenario_file.empty()) {
        std::filesystem::path p = cfg.targets.scenario_file;
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        std::ifstream is(p);
        if (!is) throw ConfigError("scenario file not found: " + p.string());
        json sj;
        try {
            sj = json::parse(is, nullptr, true, true);
        } catch (const json::parse_error& e) {
            throw ConfigError("scenario file " + p.string() + ": " + e.what());
        }
        cfg.targets.explicit_targets = targets_from_json(sj);
    }
    cfg.validate();
    return cfg;
}

RunConfig load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config file not found: " + path.string());
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

json to_json(const RunConfig& cfg) {
    json j = json::object();
    Writer w{j};
    visit_fields(cfg, w);
    if (!cfg.targets.explicit_targets.empty()) j["targets"]["list"] = targets_to_json(cfg.targets.explicit_targets);
    return j;
}

std::string hash(const RunConfig& cfg) {
    const std::string s = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

void RunConfig::validate() const {
    radio.validate();
    if (layout.num_bs < 1) throw ConfigError("layout.num_bs must be >= 1");
    if (layout.n_sensing < 0 || layout.n_sensing > layout.num_bs)
        throw ConfigError("layout.n_sensing must lie in [0, num_bs]");
    if (static_cast<int>(layout.sensing_order.size()) < layout.n_sensing)
        throw ConfigError("layout.sensing_order lists fewer BSs than n_sensing");
    std::set<int> ids;
    for (int id : layout.sensing_order) {
        if (id < 0 || id >= layout.num_bs) throw ConfigError("layout.sensing_order has an id outside [0, num_bs)");
        if (!ids.insert(id).second) throw ConfigError("layout.sensing_order repeats a BS id");
    }
    if (layout.ring_radius_m <= 0 || layout.scan_step_deg <= 0 || layout.scan_halfwidth_deg <= 0 ||
        layout.scan_halfwidth_deg >= 90)
        throw ConfigError("layout geometry invalid");
    if (area.x_max <= area.x_min || area.y_max <= area.y_min) throw ConfigError("area bounds invalid");
    if (cell_m <= 0) throw ConfigError("area.cell_m must be > 0");
    if (targets.num_pedestrians < 0 || targets.num_vehicles < 0) throw ConfigError("target counts must be >= 0");
    if (scan_period_s <= 0 || num_scans < 1) throw ConfigError("timing invalid");
    if (sensing.periodogram.range_zero_pad < 1 || sensing.periodogram.doppler_zero_pad < 1)
        throw ConfigError("zero-padding factors must be >= 1");
    clustering.validate();
    if (excision.mode != "auto" && excision.mode != "fixed")
        throw ConfigError("clustering.excision_mode must be auto or fixed");
    if (excision.margin <= 0 || excision.trials < 1) throw ConfigError("excision calibration parameters invalid");
    motion_model().validate();
    tracker.validate();
    classifier.validate();
    if (training.num_scans < 1 || training.num_runs < 1 || training.num_pedestrians < 1 || training.num_vehicles < 1)
        throw ConfigError("classifier training needs scans and both classes");
    ospa.validate();
    if (comm_snr_linear <= 0) throw ConfigError("metrics.comm_snr_linear must be > 0");
    for (double r : capacity_rho)
        if (r < 0 || r > 1) throw ConfigError("metrics.capacity_rho entries must lie in [0, 1]");
    if (filters.empty()) throw ConfigError("run.filters must not be empty");
}

fusion::GridSpec RunConfig::grid() const { return fusion::GridSpec::covering(area, cell_m, cell_m); }

tracking::MotionModel RunConfig::motion_model() const {
    tracking::MotionModel m = motion;
    m.scan_period_s = scan_period_s;
    m.area_m2 = area.area_m2();
    return m;
}

metrics::CapacityParams RunConfig::capacity(int n_sensing, double rho_p) const {
    metrics::CapacityParams p;
    p.comm_snr_linear = comm_snr_linear;
    p.n_sensing = n_sensing;
    p.n_total = layout.num_bs;
    p.rho_p = rho_p;
    p.num_subcarriers = radio.num_subcarriers;
    p.subcarrier_spacing_hz = radio.subcarrier_spacing_hz;
    return p;
}

std::vector<int> RunConfig::sensing_ids() const {
    std::vector<int> ids(layout.sensing_order.begin(), layout.sensing_order.begin() + layout.n_sensing);
    std::sort(ids.begin(), ids.end());
    return ids;
}

scenario::Scenario build_scenario(const RunConfig& cfg, std::uint64_t seed) {
    scenario::Scenario s;
    s.radio = cfg.radio;
    s.area = cfg.area;
    s.rcs = cfg.rcs;
    s.visibility.surface_halfwidth_rad = deg_to_rad(cfg.surface_halfwidth_deg);
    s.visibility.corner_halfwidth_rad = deg_to_rad(cfg.corner_halfwidth_deg);
    s.visibility.wheel_offset_m = cfg.wheel_offset_m;
    s.scan_period_s = cfg.scan_period_s;
    s.num_scans = cfg.num_scans;
    s.seed = seed;
    s.base_stations = scenario::ring_layout(cfg.layout.num_bs, cfg.layout.ring_radius_m, cfg.area.center(),
                                            deg_to_rad(cfg.layout.scan_halfwidth_deg),
                                            deg_to_rad(cfg.layout.scan_step_deg));
    const auto sensing = cfg.sensing_ids();
    for (auto& bs : s.base_stations) {
        bs.comm_dir_rad = deg_to_rad(cfg.layout.comm_dir_deg);
        bs.role = std::binary_search(sensing.begin(), sensing.end(), bs.id) ? scenario::BsRole::sensing_comm
                                                                            : scenario::BsRole::comm_only;
    }
    const double horizon = cfg.num_scans * cfg.scan_period_s;
    if (!cfg.targets.explicit_targets.empty()) {
        s.targets = cfg.targets.explicit_targets;
    } else {
        s.targets = scenario::random_targets(cfg.targets.num_pedestrians, cfg.targets.num_vehicles, horizon, cfg.area,
                                             derive_seed(seed, {static_cast<std::uint64_t>(Stream::scenario_gen)}),
                                             cfg.targets.min_separation_m);
    }
    s.validate();
    return s;
}

}  // namespace isac::config
