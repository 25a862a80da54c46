// isac-sim: command-line driver for the cooperative sensing pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include "isac/config.hpp"
#include "isac/map_io.hpp"
#include "isac/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <regex>

namespace fs = std::filesystem;
using namespace isac;

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string filter;
    std::string gating;
    std::optional<int> ns;
    std::string out;
    bool dump_maps = false;
    bool fast = false;
    std::string model;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config_path, "JSON config (comments allowed); defaults to the desk profile");
    app->add_option("--seed", o.seed, "Scenario seed");
    app->add_option("--filter", o.filter, "phd | mbm | both")->check(CLI::IsMember({"phd", "mbm", "both"}));
    app->add_option("--gating", o.gating, "fixed-4 | fixed-6 | adaptive")
        ->check(CLI::IsMember({"fixed-4", "fixed-6", "adaptive"}));
    app->add_option("--ns", o.ns, "Number of sensing BSs");
    app->add_option("--out", o.out, "Output directory (model file for train-classifier)");
    app->add_flag("--dump-maps", o.dump_maps, "Write per-BS and fused map binaries");
    app->add_flag("--fast", o.fast, "Closed-form map synthesis instead of symbol-level simulation");
    app->add_option("--model", o.model, "Classifier model file");
}

config::RunConfig resolve(const CommonOptions& o) {
    config::RunConfig cfg = o.config_path.empty() ? config::desk_preset() : config::load(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.filter.empty()) {
        if (o.filter == "both") cfg.filters = {tracking::FilterKind::phd, tracking::FilterKind::mbm};
        else cfg.filters = {tracking::filter_kind_from_string(o.filter)};
    }
    if (!o.gating.empty()) cfg.gating = clustering::gating_mode_from_string(o.gating);
    if (o.ns) cfg.layout.n_sensing = *o.ns;
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (o.dump_maps) cfg.dump_maps = true;
    if (o.fast) cfg.sensing.fast = true;
    if (!o.model.empty()) cfg.training.model_path = o.model;
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& p, const std::string& body) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << body;
}

std::string truth_csv(const pipeline::Simulation& sim) {
    std::ostringstream os;
    os << std::setprecision(17) << "scan_index,target_id,class,x,y,vx,vy\n";
    for (const auto& s : sim.scans)
        for (const auto& t : s.truth)
            os << s.map.scan_index << ',' << t.id << ',' << to_string(t.cls) << ',' << t.position.x() << ','
               << t.position.y() << ',' << t.velocity.x() << ',' << t.velocity.y() << '\n';
    return os.str();
}

int cmd_simulate(const CommonOptions& o) {
    auto cfg = resolve(o);
    const auto sim = pipeline::simulate(cfg, cfg.seed, true);
    const fs::path dir = fs::path(cfg.out_dir) / "maps";
    fs::create_directories(dir);
    for (const auto& s : sim.scans) {
        std::ostringstream name;
        name << "fused_" << std::setw(4) << std::setfill('0') << s.map.scan_index << ".bin";
        map_io::save_grid(dir / name.str(), s.map);
        if (cfg.dump_maps)
            for (const auto& p : s.polar) {
                std::ostringstream pn;
                pn << "bs" << p.bs_id << "_" << std::setw(4) << std::setfill('0') << p.scan_index << ".bin";
                map_io::save_polar(dir / pn.str(), p);
            }
    }
    write_text(fs::path(cfg.out_dir) / "truth.csv", truth_csv(sim));
    write_text(fs::path(cfg.out_dir) / "config.json", config::to_json(cfg).dump(2) + "\n");
    std::cout << "simulated " << sim.scans.size() << " scans -> " << dir.string() << "\n";
    return 0;
}

int cmd_train(const CommonOptions& o) {
    auto cfg = resolve(o);
    if (o.seed) cfg.training.seed = *o.seed;
    const auto res = pipeline::train_classifier(cfg);
    const fs::path out = o.out.empty() ? fs::path("model.bin") : fs::path(o.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    res.model.save(out);
    std::cout << "epochs " << res.epochs_run << ", final loss " << res.final_loss << ", train accuracy "
              << res.train_accuracy << ", validation accuracy " << res.validation_accuracy << "\n"
              << "model -> " << out.string() << "\n";
    return 0;
}

int cmd_track(const CommonOptions& o, const std::string& maps_dir) {
    auto cfg = resolve(o);
    pipeline::Simulation sim;
    sim.scenario = config::build_scenario(cfg, cfg.seed);
    std::vector<fs::path> files;
    const std::regex fused("fused_[0-9]+\\.bin");
    for (const auto& e : fs::directory_iterator(maps_dir))
        if (std::regex_match(e.path().filename().string(), fused)) files.push_back(e.path());
    if (files.empty()) throw ConfigError("no fused_*.bin maps in " + maps_dir);
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        pipeline::ScanData d;
        d.map = map_io::load_grid(f);
        if (!(d.map.grid == cfg.grid())) throw ConfigError("map grid in " + f.string() + " differs from the config");
        for (const auto& t : scenario::truth_at(sim.scenario, sim.scenario.scan_time(d.map.scan_index)))
            if (cfg.area.contains(t.position)) d.truth.push_back(t);
        sim.scans.push_back(std::move(d));
    }
    cfg.num_scans = static_cast<int>(sim.scans.size());

    std::optional<classifier::CnnModel> model;
    if (cfg.gating == clustering::GatingMode::adaptive || !cfg.training.model_path.empty())
        model = pipeline::obtain_model(cfg);
    pipeline::RunReport rep;
    rep.cfg = cfg;
    rep.excision = pipeline::excision_threshold(cfg);
    for (auto f : cfg.filters)
        rep.runs.push_back(pipeline::track(sim, cfg, f, cfg.gating, model ? &*model : nullptr, rep.excision));
    pipeline::write_outputs(rep, cfg.out_dir);
    for (const auto& r : rep.runs)
        std::cout << tracking::to_string(r.filter) << ": median OSPA " << r.median_ospa() << " m\n";
    return 0;
}

int cmd_run(const CommonOptions& o) {
    auto cfg = resolve(o);
    std::optional<classifier::CnnModel> model;
    if (cfg.gating == clustering::GatingMode::adaptive || !cfg.training.model_path.empty())
        model = pipeline::obtain_model(cfg);
    const auto rep = pipeline::run_pipeline(cfg, model ? &*model : nullptr);
    pipeline::write_outputs(rep, cfg.out_dir);
    for (const auto& r : rep.runs) {
        std::cout << tracking::to_string(r.filter) << " (" << clustering::to_string(r.gating) << "): median OSPA "
                  << r.median_ospa() << " m";
        if (r.confusion.total()) std::cout << ", accuracy " << metrics::accuracy(r.confusion);
        std::cout << "\n";
    }
    std::cout << "report -> " << (fs::path(cfg.out_dir) / "report.json").string() << "\n";
    return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& variable, int num_seeds) {
    auto cfg = resolve(o);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < num_seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
    std::optional<classifier::CnnModel> model;
    if (!cfg.training.model_path.empty()) model = pipeline::obtain_model(cfg);
    const auto var = pipeline::sweep_variable_from_string(variable);
    const auto points = pipeline::sweep(cfg, var, seeds, model ? &*model : nullptr);
    const fs::path dir = cfg.out_dir;
    for (const auto& p : points) {
        std::ostringstream sub;
        sub << "ns" << p.n_sensing << "_" << clustering::to_string(p.gating) << "_seed" << p.seed;
        pipeline::write_outputs(p.report, dir / sub.str());
    }
    const auto table = pipeline::sweep_json(points, var);
    write_text(dir / "sweep.json", table.dump(2) + "\n");
    for (const auto& row : table["rows"]) {
        std::cout << (var == pipeline::SweepVariable::n_sensing ? "N_s=" + std::to_string(row["n_sensing"].get<int>())
                                                                : row["gating"].get<std::string>())
                  << " " << row["filter"].get<std::string>() << ": median OSPA " << row["median_ospa"].get<double>();
        if (!row["accuracy"].is_null()) std::cout << ", accuracy " << row["accuracy"].get<double>();
        std::cout << ", capacity " << row["capacity_bps"].get<double>() / 1e9 << " Gbit/s\n";
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& files) {
    for (const auto& f : files) {
        std::ifstream is(f);
        if (!is) throw ConfigError("report not found: " + f);
        const auto j = nlohmann::json::parse(is);
        const auto& md = j.at("metadata");
        std::cout << f << "  seed " << md.at("seed") << "  hash " << md.at("config_hash").get<std::string>()
                  << "  gating " << md.at("gating").get<std::string>() << "  N_s " << md.at("n_sensing") << "\n";
        for (const auto& [name, fj] : j.at("filters").items()) {
            std::cout << "  " << name << ": median OSPA " << fj.at("summary").at("median_ospa").get<double>()
                      << " m, mean " << fj.at("summary").at("mean_ospa").get<double>() << " m";
            if (!fj.at("accuracy").is_null()) std::cout << ", accuracy " << fj.at("accuracy").get<double>();
            std::cout << "\n";
        }
        std::cout << "  capacity at configured N_s: " << j.at("capacity_configured_bps").get<double>() / 1e9
                  << " Gbit/s\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-BS cooperative ISAC sensing simulator"};
    app.require_subcommand(1);

    CommonOptions sim_o, train_o, track_o, run_o, sweep_o;
    std::string maps_dir, variable = "ns";
    int num_seeds = 2;
    std::vector<std::string> report_files;

    auto* sim = app.add_subcommand("simulate", "Generate fused maps (and per-BS maps with --dump-maps)");
    add_common(sim, sim_o);
    auto* train = app.add_subcommand("train-classifier", "Train the target classifier and write the model file");
    add_common(train, train_o);
    auto* trk = app.add_subcommand("track", "Cluster and track from dumped fused maps");
    add_common(trk, track_o);
    trk->add_option("--maps", maps_dir, "Directory with fused_*.bin maps")->required();
    auto* run = app.add_subcommand("run", "End-to-end pipeline");
    add_common(run, run_o);
    auto* swp = app.add_subcommand("sweep", "Repeat the pipeline over N_s or gating modes");
    add_common(swp, sweep_o);
    swp->add_option("--variable", variable, "ns | gating")->check(CLI::IsMember({"ns", "gating"}));
    swp->add_option("--seeds", num_seeds, "Number of consecutive seeds starting at --seed")->check(CLI::PositiveNumber);
    auto* rep = app.add_subcommand("report", "Summarize report.json files");
    rep->add_option("files", report_files, "report.json paths")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*sim) return cmd_simulate(sim_o);
        if (*train) return cmd_train(train_o);
        if (*trk) return cmd_track(track_o, maps_dir);
        if (*run) return cmd_run(run_o);
        if (*swp) return cmd_sweep(sweep_o, variable, num_seeds);
        if (*rep) return cmd_report(report_files);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
