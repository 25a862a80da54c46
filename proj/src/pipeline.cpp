#include "isac/pipeline.hpp"

#include "isac/map_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

namespace isac::pipeline {

using nlohmann::json;

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fusion::SoftMap fused_scan(const scenario::Scenario& scn, const fusion::GridSpec& grid,
                           const sensing::SensingOptions& opt, int scan,
                           std::vector<sensing::RangeAngleMap>* polar_out) {
    std::vector<fusion::SoftMap> per_bs;
    for (const auto& bs : scn.base_stations) {
        if (bs.role != scenario::BsRole::sensing_comm) continue;
        const auto refl = scenario::scan_reflectors(scn, bs, scan);
        auto polar = sensing::generate_range_angle_map(scn, bs, scan, refl, opt);
        per_bs.push_back(fusion::resample_to_grid(polar, bs, grid));
        if (polar_out) polar_out->push_back(std::move(polar));
    }
    if (per_bs.empty()) {
        fusion::SoftMap empty;
        empty.grid = grid;
        empty.scan_index = scan;
        empty.values = Eigen::MatrixXd::Zero(grid.ny, grid.nx);
        empty.coverage = fusion::CoverageMatrix::Zero(grid.ny, grid.nx);
        return empty;
    }
    return fusion::fuse(per_bs);
}

namespace {

std::vector<scenario::TruthState> truth_inside(const scenario::Scenario& scn, int scan) {
    std::vector<scenario::TruthState> out;
    for (const auto& t : scenario::truth_at(scn, scn.scan_time(scan)))
        if (scn.area.contains(t.position)) out.push_back(t);
    return out;
}

}  // namespace

Simulation simulate(const config::RunConfig& cfg, std::uint64_t seed, bool keep_polar) {
    Simulation sim;
    try {
        sim.scenario = config::build_scenario(cfg, seed);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("scenario", e.what());
    }
    const auto grid = cfg.grid();
    sim.scans.reserve(static_cast<std::size_t>(cfg.num_scans));
    for (int s = 0; s < cfg.num_scans; ++s) {
        ScanData d;
        try {
            d.map = fused_scan(sim.scenario, grid, cfg.sensing, s, keep_polar ? &d.polar : nullptr);
        } catch (const std::exception& e) {
            throw StageError("sensing/fusion", "scan " + std::to_string(s) + ": " + e.what());
        }
        d.truth = truth_inside(sim.scenario, s);
        sim.scans.push_back(std::move(d));
    }
    return sim;
}

double calibrate_excision(const config::RunConfig& cfg) {
    const json key = {{"radio", config::to_json(cfg)["radio"]},   {"layout", config::to_json(cfg)["layout"]},
                      {"area", config::to_json(cfg)["area"]},     {"sensing", config::to_json(cfg)["sensing"]},
                      {"margin", cfg.excision.margin},            {"trials", cfg.excision.trials}};
    const std::string k = key.dump();
    static std::mutex mu;
    static std::map<std::string, double> cache;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(k); it != cache.end()) return it->second;
    }

    config::RunConfig c = cfg;
    c.targets.explicit_targets.clear();
    c.targets.num_pedestrians = 0;
    c.targets.num_vehicles = 0;
    c.targets.scenario_file.clear();
    c.num_scans = 1;
    const auto grid = c.grid();
    double peak = 0.0;
    for (int trial = 0; trial < cfg.excision.trials; ++trial) {
        const auto seed = derive_seed(0x9e3779b97f4a7c15ULL, {static_cast<std::uint64_t>(Stream::calibration),
                                                              static_cast<std::uint64_t>(trial)});
        auto scn = config::build_scenario(c, seed);
        const auto map = fused_scan(scn, grid, c.sensing, 0);
        peak = std::max(peak, map.values.maxCoeff());
    }
    const double gamma = cfg.excision.margin * peak;
    std::lock_guard lock(mu);
    cache.emplace(k, gamma);
    return gamma;
}

double excision_threshold(const config::RunConfig& cfg) {
    return cfg.excision.mode == "auto" ? calibrate_excision(cfg) : cfg.clustering.excision_threshold;
}

std::vector<classifier::LabeledScan> labeled_scans(const Simulation& sim) {
    std::vector<classifier::LabeledScan> out;
    for (const auto& s : sim.scans) out.push_back({s.map, s.truth});
    return out;
}

classifier::TrainResult train_classifier(const config::RunConfig& cfg) {
    config::RunConfig c = cfg;
    c.targets.explicit_targets.clear();
    c.targets.scenario_file.clear();
    c.targets.num_pedestrians = cfg.training.num_pedestrians;
    c.targets.num_vehicles = cfg.training.num_vehicles;
    c.num_scans = cfg.training.num_scans;
    std::vector<classifier::LabeledScan> scans;
    for (int r = 0; r < cfg.training.num_runs; ++r) {
        const auto part = labeled_scans(simulate(c, cfg.training.seed + static_cast<std::uint64_t>(r)));
        scans.insert(scans.end(), part.begin(), part.end());
    }
    Rng rng = make_rng(cfg.training.seed, Stream::training);
    const auto data = classifier::make_training_set(scans, cfg.classifier.window_m, cfg.classifier.perturb_sigma_m, rng);
    try {
        return classifier::train(data, cfg.classifier);
    } catch (const std::exception& e) {
        throw StageError("classifier", e.what());
    }
}

metrics::ConfusionCounts evaluate_classifier(const classifier::CnnModel& model, const Simulation& sim,
                                             double window_m) {
    metrics::ConfusionCounts cc;
    for (const auto& s : sim.scans)
        for (const auto& t : s.truth) {
            const auto patch = classifier::crop_window(s.map, t.position, window_m);
            cc.add(t.cls, classifier::classify(model, patch).cls);
        }
    return cc;
}

double FilterRun::median_ospa() const {
    std::vector<double> v;
    for (const auto& s : scans) v.push_back(s.ospa.total);
    return median(std::move(v));
}

double FilterRun::mean_ospa() const {
    if (scans.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : scans) s += r.ospa.total;
    return s / static_cast<double>(scans.size());
}

FilterRun track(const Simulation& sim, const config::RunConfig& cfg, tracking::FilterKind filter,
                clustering::GatingMode gating, const classifier::CnnModel* model, double excision) {
    if (gating == clustering::GatingMode::adaptive && !model)
        throw ConfigError("adaptive gating requires a trained classifier model");

    FilterRun run;
    run.filter = filter;
    run.gating = gating;
    auto ccfg = cfg.clustering;
    ccfg.excision_threshold = excision;
    clustering::apply_gating(ccfg, gating);
    auto tracker = tracking::make_tracker(filter, cfg.motion_model(), cfg.tracker, cfg.area.center());
    const auto repairs_before = tracking::psd_repairs();

    std::vector<clustering::PredictedTrack> predicted;   // from scan t-1
    std::map<int, TargetClass> labels;
    for (const auto& scan : sim.scans) {
        const int t = scan.map.scan_index;

        if (model) {
            for (auto& p : predicted) {
                classifier::Classification c;
                try {
                    c = classifier::classify(*model, classifier::crop_window(scan.map, p.position, cfg.classifier.window_m));
                } catch (const std::exception& e) {
                    throw StageError("classifier", "scan " + std::to_string(t) + ": " + e.what());
                }
                labels[p.track_id] = c.cls;
                p.cls = c.cls;
                tracker->set_label(p.track_id, c.cls);

                const scenario::TruthState* nearest = nullptr;
                double best = cfg.ospa.gate_m;
                for (const auto& tr : scan.truth) {
                    const double d = (tr.position - p.position).norm();
                    if (d < best) {
                        best = d;
                        nearest = &tr;
                    }
                }
                if (nearest) run.confusion.add(nearest->cls, c.cls);
            }
        } else {
            for (auto& p : predicted)
                if (auto it = labels.find(p.track_id); it != labels.end()) p.cls = it->second;
        }

        clustering::MeasurementSet ms;
        try {
            ms = clustering::cluster_map(scan.map, predicted, ccfg);
        } catch (const std::exception& e) {
            throw StageError("clustering", "scan " + std::to_string(t) + ": " + e.what());
        }

        tracking::StepOutput out;
        try {
            out = tracker->step(ms);
        } catch (const std::exception& e) {
            throw StageError("tracking", "scan " + std::to_string(t) + ": " + e.what());
        }

        std::vector<Vec2> truth_pos, est_pos;
        for (const auto& tr : scan.truth) truth_pos.push_back(tr.position);
        for (const auto& e : out.estimates) {
            est_pos.push_back(e.state.head<2>());
            std::optional<TargetClass> cls = e.cls;
            if (auto it = labels.find(e.track_id); it != labels.end()) cls = it->second;
            run.tracks.push_back({t, e.track_id, e.state, e.score, cls});
        }
        ScanRecord rec;
        rec.scan_index = t;
        rec.ospa = metrics::ospa(truth_pos, est_pos, cfg.ospa);
        rec.num_measurements = static_cast<int>(ms.size());
        rec.num_estimates = static_cast<int>(out.estimates.size());
        run.scans.push_back(rec);

        predicted = std::move(out.predicted);
    }
    run.psd_repairs = tracking::psd_repairs() - repairs_before;
    return run;
}

RunReport run_pipeline(const config::RunConfig& cfg, const classifier::CnnModel* model) {
    cfg.validate();
    if (cfg.gating == clustering::GatingMode::adaptive && !model)
        throw ConfigError("adaptive gating requires a trained classifier model");
    RunReport rep;
    rep.cfg = cfg;
    rep.excision = excision_threshold(cfg);
    const auto sim = simulate(cfg, cfg.seed, cfg.dump_maps);
    if (cfg.dump_maps) {
        const std::filesystem::path dir = std::filesystem::path(cfg.out_dir) / "maps";
        std::filesystem::create_directories(dir);
        for (const auto& s : sim.scans) {
            std::ostringstream name;
            name << "fused_" << std::setw(4) << std::setfill('0') << s.map.scan_index << ".bin";
            map_io::save_grid(dir / name.str(), s.map);
            for (const auto& p : s.polar) {
                std::ostringstream pn;
                pn << "bs" << p.bs_id << "_" << std::setw(4) << std::setfill('0') << p.scan_index << ".bin";
                map_io::save_polar(dir / pn.str(), p);
            }
        }
    }
    for (auto f : cfg.filters) rep.runs.push_back(track(sim, cfg, f, cfg.gating, model, rep.excision));
    return rep;
}

json capacity_table(const config::RunConfig& cfg) {
    json rows = json::array();
    std::vector<double> rhos = cfg.capacity_rho;
    rhos.push_back(cfg.radio.sensing_power_fraction);
    std::sort(rhos.begin(), rhos.end());
    rhos.erase(std::unique(rhos.begin(), rhos.end()), rhos.end());
    for (double rho : rhos)
        for (int ns = 0; ns <= cfg.layout.num_bs; ++ns)
            rows.push_back({{"n_sensing", ns},
                            {"rho_p", rho},
                            {"capacity_bps", metrics::aggregate_capacity(cfg.capacity(ns, rho))}});
    return rows;
}

namespace {

json ospa_json(const metrics::OspaResult& o) {
    return {{"total", o.total},
            {"localization", o.localization_term},
            {"missed", o.missed_term},
            {"false_alarm", o.false_alarm_term},
            {"matched_pairs", o.matched_pairs},
            {"cardinality", o.cardinality},
            {"num_truth", o.num_truth},
            {"num_estimates", o.num_estimates}};
}

}  // namespace

json report_json(const RunReport& rep) {
    const auto& cfg = rep.cfg;
    json j;
    j["metadata"] = {{"version", kVersion},
                     {"seed", cfg.seed},
                     {"config_hash", config::hash(cfg)},
                     {"profile", cfg.profile},
                     {"gating", clustering::to_string(cfg.gating)},
                     {"n_sensing", cfg.layout.n_sensing},
                     {"sensing_bs", cfg.sensing_ids()},
                     {"num_scans", cfg.num_scans},
                     {"ospa_order", cfg.ospa.order_p},
                     {"ospa_gate_m", cfg.ospa.gate_m},
                     {"excision_threshold", rep.excision},
                     {"excision_mode", cfg.excision.mode}};
    j["config"] = config::to_json(cfg);
    json filters = json::object();
    for (const auto& r : rep.runs) {
        json scans = json::array();
        for (const auto& s : r.scans) {
            json o = ospa_json(s.ospa);
            o["scan_index"] = s.scan_index;
            o["num_measurements"] = s.num_measurements;
            scans.push_back(o);
        }
        json f;
        f["gating"] = clustering::to_string(r.gating);
        f["scans"] = scans;
        f["summary"] = {{"median_ospa", r.median_ospa()}, {"mean_ospa", r.mean_ospa()}, {"psd_repairs", r.psd_repairs}};
        f["confusion"] = {{"tp", r.confusion.tp}, {"tn", r.confusion.tn}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}};
        f["accuracy"] = r.confusion.total() ? json(metrics::accuracy(r.confusion)) : json(nullptr);
        filters[tracking::to_string(r.filter)] = f;
    }
    j["filters"] = filters;
    j["capacity"] = capacity_table(cfg);
    j["capacity_configured_bps"] =
        metrics::aggregate_capacity(cfg.capacity(cfg.layout.n_sensing, cfg.radio.sensing_power_fraction));
    return j;
}

namespace {

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

std::string ospa_csv(const RunReport& rep) {
    std::ostringstream os;
    os << "scan_index,filter,gating,total,localization,missed,false_alarm,matched_pairs,cardinality,num_truth,"
          "num_estimates,num_measurements\n";
    for (const auto& r : rep.runs)
        for (const auto& s : r.scans)
            os << s.scan_index << ',' << tracking::to_string(r.filter) << ',' << clustering::to_string(r.gating) << ','
               << num(s.ospa.total) << ',' << num(s.ospa.localization_term) << ',' << num(s.ospa.missed_term) << ','
               << num(s.ospa.false_alarm_term) << ',' << s.ospa.matched_pairs << ',' << s.ospa.cardinality << ','
               << s.ospa.num_truth << ',' << s.ospa.num_estimates << ',' << s.num_measurements << '\n';
    return os.str();
}

std::string tracks_csv(const RunReport& rep) {
    std::ostringstream os;
    os << "scan_index,filter,track_id,x,y,vx,vy,weight_or_existence,class_label\n";
    for (const auto& r : rep.runs)
        for (const auto& t : r.tracks)
            os << t.scan_index << ',' << tracking::to_string(r.filter) << ',' << t.track_id << ',' << num(t.state[0])
               << ',' << num(t.state[1]) << ',' << num(t.state[2]) << ',' << num(t.state[3]) << ',' << num(t.score)
               << ',' << (t.cls ? to_string(*t.cls) : "") << '\n';
    return os.str();
}

void write_outputs(const RunReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
        os << body;
    };
    write("report.json", report_json(rep).dump(2) + "\n");
    write("ospa.csv", ospa_csv(rep));
    write("tracks.csv", tracks_csv(rep));
}

SweepVariable sweep_variable_from_string(const std::string& s) {
    if (s == "ns" || s == "n_sensing") return SweepVariable::n_sensing;
    if (s == "gating") return SweepVariable::gating;
    throw ConfigError("unknown sweep variable '" + s + "' (expected ns or gating)");
}

namespace {

std::string group_hash(config::RunConfig cfg) {
    cfg.seed = 0;
    return config::hash(cfg);
}

}  // namespace

std::vector<SweepPoint> sweep(const config::RunConfig& base, SweepVariable variable,
                              const std::vector<std::uint64_t>& seeds, const classifier::CnnModel* model) {
    std::vector<SweepPoint> out;
    if (variable == SweepVariable::n_sensing) {
        for (int ns = 1; ns <= base.layout.num_bs; ++ns) {
            config::RunConfig cfg = base;
            cfg.layout.n_sensing = ns;
            std::optional<classifier::CnnModel> own;
            const classifier::CnnModel* m = model;
            if (!m && cfg.gating == clustering::GatingMode::adaptive) {
                own = obtain_model(cfg);
                m = &*own;
            }
            for (auto seed : seeds) {
                cfg.seed = seed;
                out.push_back({ns, cfg.gating, seed, group_hash(cfg), run_pipeline(cfg, m)});
            }
        }
        return out;
    }

    std::optional<classifier::CnnModel> own;
    const classifier::CnnModel* m = model;
    if (!m) {
        own = obtain_model(base);
        m = &*own;
    }
    const double gamma = excision_threshold(base);
    const clustering::GatingMode modes[] = {clustering::GatingMode::fixed_4, clustering::GatingMode::fixed_6,
                                            clustering::GatingMode::adaptive};
    std::vector<std::vector<SweepPoint>> per_mode(3);
    for (auto seed : seeds) {
        config::RunConfig cfg = base;
        cfg.seed = seed;
        const auto sim = simulate(cfg, seed);
        for (std::size_t k = 0; k < 3; ++k) {
            config::RunConfig c = cfg;
            c.gating = modes[k];
            RunReport rep;
            rep.cfg = c;
            rep.excision = gamma;
            for (auto f : c.filters) rep.runs.push_back(track(sim, c, f, c.gating, m, gamma));
            per_mode[k].push_back({c.layout.n_sensing, c.gating, seed, group_hash(c), std::move(rep)});
        }
    }
    for (auto& v : per_mode)
        for (auto& p : v) out.push_back(std::move(p));
    return out;
}

json sweep_json(const std::vector<SweepPoint>& points, SweepVariable variable) {
    // Group by configuration hash; the order of first appearance is kept.
    std::vector<std::string> order;
    std::map<std::string, std::vector<const SweepPoint*>> groups;
    for (const auto& p : points) {
        if (!groups.count(p.group_hash)) order.push_back(p.group_hash);
        groups[p.group_hash].push_back(&p);
    }
    json rows = json::array();
    for (const auto& h : order) {
        const auto& g = groups[h];
        const auto& first = *g.front();
        std::map<std::string, std::vector<double>> med, acc;
        std::vector<std::string> filter_order;
        for (const auto* p : g)
            for (const auto& r : p->report.runs) {
                const auto name = tracking::to_string(r.filter);
                if (!med.count(name)) filter_order.push_back(name);
                med[name].push_back(r.median_ospa());
                if (r.confusion.total()) acc[name].push_back(metrics::accuracy(r.confusion));
            }
        for (const auto& name : filter_order) {
            json row;
            row["config_hash"] = h;
            if (variable == SweepVariable::n_sensing) row["n_sensing"] = first.n_sensing;
            else row["gating"] = clustering::to_string(first.gating);
            row["filter"] = name;
            row["seeds"] = g.size();
            row["median_ospa"] = median(med[name]);
            double mean = 0.0;
            for (double v : med[name]) mean += v;
            row["mean_of_medians_ospa"] = mean / static_cast<double>(med[name].size());
            row["per_seed_median_ospa"] = med[name];
            if (!acc[name].empty()) {
                double a = 0.0;
                for (double v : acc[name]) a += v;
                row["accuracy"] = a / static_cast<double>(acc[name].size());
            } else {
                row["accuracy"] = nullptr;
            }
            const auto& c = first.report.cfg;
            row["capacity_bps"] = metrics::aggregate_capacity(c.capacity(c.layout.n_sensing, c.radio.sensing_power_fraction));
            rows.push_back(row);
        }
    }
    return {{"variable", variable == SweepVariable::n_sensing ? "n_sensing" : "gating"}, {"rows", rows}};
}

classifier::CnnModel obtain_model(const config::RunConfig& cfg) {
    if (!cfg.training.model_path.empty()) {
        if (!std::filesystem::exists(cfg.training.model_path))
            throw ConfigError("classifier model not found: " + cfg.training.model_path);
        return classifier::CnnModel::load(cfg.training.model_path);
    }
    return train_classifier(cfg).model;
}

}  // namespace isac::pipeline
