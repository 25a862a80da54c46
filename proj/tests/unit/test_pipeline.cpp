#include "isac/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace isac;
using namespace isac::pipeline;

namespace {

config::RunConfig quick(int scans) {
    auto c = config::desk_preset();
    c.num_scans = scans;
    c.excision.mode = "fixed";
    c.clustering.excision_threshold = 1.5e-12;
    return c;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("simulation has one fused map per scan with truth inside the area") {
    const auto c = quick(4);
    const auto sim = simulate(c, 3);
    REQUIRE(sim.scans.size() == 4);
    for (int t = 0; t < 4; ++t) {
        const auto& s = sim.scans[static_cast<std::size_t>(t)];
        CHECK(s.map.scan_index == t);
        CHECK(s.map.grid == c.grid());
        CHECK(s.map.contributing_bs == c.sensing_ids());
        CHECK(s.truth.size() <= 2);
        for (const auto& tr : s.truth) CHECK(c.area.contains(tr.position));
        CHECK(s.polar.empty());
    }
}

TEST_CASE("simulation is deterministic per seed") {
    const auto c = quick(2);
    const auto a = simulate(c, 11), b = simulate(c, 11), d = simulate(c, 12);
    CHECK(a.scans[1].map.values == b.scans[1].map.values);
    CHECK(a.scans[1].map.values != d.scans[1].map.values);
}

TEST_CASE("calibrated excision keeps noise-only maps below threshold") {
    auto c = config::desk_preset();
    const double gamma = calibrate_excision(c);
    CHECK(gamma > 0.0);
    CHECK(excision_threshold(c) == gamma);
    c.targets.num_pedestrians = c.targets.num_vehicles = 0;
    c.num_scans = 1;
    const auto grid = c.grid();
    int below = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto scn = config::build_scenario(c, seed + 5000);
        below += fused_scan(scn, grid, c.sensing, 0).values.maxCoeff() < gamma;
    }
    CHECK(below >= 99);
}

TEST_CASE("reports have one record per scan and are byte-identical across runs") {
    auto c = quick(10);
    c.gating = clustering::GatingMode::fixed_6;
    const auto a = run_pipeline(c, nullptr), b = run_pipeline(c, nullptr);
    REQUIRE(a.runs.size() == 2);
    for (const auto& r : a.runs) CHECK(r.scans.size() == 10);
    CHECK(report_json(a).dump() == report_json(b).dump());
    CHECK(ospa_csv(a) == ospa_csv(b));
    CHECK(report_json(a)["metadata"]["config_hash"] == config::hash(c));
}

TEST_CASE("adaptive gating without a model is a configuration error") {
    auto c = quick(2);
    c.gating = clustering::GatingMode::adaptive;
    CHECK_THROWS_AS(run_pipeline(c, nullptr), ConfigError);
}

TEST_CASE("classification uses only predictions from the previous scan") {
    auto c = quick(6);
    c.gating = clustering::GatingMode::adaptive;
    Rng rng(1);
    const classifier::CnnModel model(classifier::patch_side(c.classifier.window_m, c.grid()), c.classifier, rng);
    const auto sim = simulate(c, 5);
    const auto run = track(sim, c, tracking::FilterKind::mbm, c.gating, &model, c.clustering.excision_threshold);
    // Scan 0 has no predictions; scan t classifies at most the estimates of t-1.
    std::uint64_t available = 0;
    for (std::size_t t = 0; t + 1 < run.scans.size(); ++t) available += static_cast<std::uint64_t>(run.scans[t].num_estimates);
    CHECK(run.confusion.total() <= available);
    CHECK(run.confusion.total() > 0);
}

TEST_CASE("outputs are written to disk") {
    auto c = quick(3);
    c.gating = clustering::GatingMode::fixed_4;
    c.filters = {tracking::FilterKind::phd};
    const auto rep = run_pipeline(c, nullptr);
    const auto dir = std::filesystem::temp_directory_path() / "isac_pipeline_outputs";
    std::filesystem::remove_all(dir);
    write_outputs(rep, dir);
    for (const char* f : {"report.json", "ospa.csv", "tracks.csv"}) CHECK(std::filesystem::exists(dir / f));
    std::ifstream is(dir / "ospa.csv");
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) ++lines;
    CHECK(lines == 1 + 3);
    std::filesystem::remove_all(dir);
}

TEST_CASE("capacity table agrees with the metrics module") {
    const auto c = config::paper_preset();
    const auto table = capacity_table(c);
    CHECK(table.size() == 7 * 3);
    for (const auto& row : table) {
        const double expect = metrics::aggregate_capacity(c.capacity(row["n_sensing"], row["rho_p"]));
        CHECK(row["capacity_bps"].get<double>() == expect);
    }
}

TEST_CASE("sweeps produce one report per value and seed") {
    auto c = quick(2);
    c.filters = {tracking::FilterKind::phd};
    Rng rng(2);
    const classifier::CnnModel model(classifier::patch_side(c.classifier.window_m, c.grid()), c.classifier, rng);

    c.gating = clustering::GatingMode::fixed_6;
    const auto ns = sweep(c, SweepVariable::n_sensing, {1, 2}, &model);
    CHECK(ns.size() == 12);
    const auto jn = sweep_json(ns, SweepVariable::n_sensing);
    REQUIRE(jn["rows"].size() == 6);
    for (const auto& row : jn["rows"]) {
        CHECK(row["seeds"] == 2);
        auto cc = c;
        cc.layout.n_sensing = row["n_sensing"];
        CHECK(row["capacity_bps"].get<double>() ==
              metrics::aggregate_capacity(cc.capacity(cc.layout.n_sensing, cc.radio.sensing_power_fraction)));
    }

    const auto g = sweep(c, SweepVariable::gating, {1}, &model);
    CHECK(g.size() == 3);
    const auto jg = sweep_json(g, SweepVariable::gating);
    REQUIRE(jg["rows"].size() == 3);
    CHECK(jg["rows"][0]["gating"] == "fixed-4");
    CHECK(jg["rows"][2]["gating"] == "adaptive");
    CHECK_THROWS(sweep_variable_from_string("rho"));
}

TEST_CASE("median") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
}

}
