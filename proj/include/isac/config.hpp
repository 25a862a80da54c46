#pragma once

#include "isac/classifier.hpp"
#include "isac/clustering.hpp"
#include "isac/fusion.hpp"
#include "isac/metrics.hpp"
#include "isac/scenario.hpp"
#include "isac/sensing.hpp"
#include "isac/tracking.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace isac::config {

struct LayoutSpec {
    int num_bs = 6;
    double ring_radius_m = 50.0;
    double scan_halfwidth_deg = 60.0;
    double scan_step_deg = 2.4;
    double comm_dir_deg = 45.0;
    std::vector<int> sensing_order{0, 2, 4, 1, 3, 5};
    int n_sensing = 3;
};

struct TargetSpec {
    int num_pedestrians = 4;
    int num_vehicles = 4;
    double min_separation_m = 8.0;
    std::string scenario_file;                         // explicit targets, overrides the random draw
    std::vector<scenario::TargetTruth> explicit_targets;
};

struct ExcisionSpec {
    std::string mode = "auto";    // auto: calibrated on noise-only maps; fixed: use clustering.excision_threshold
    double margin = 1.25;
    int trials = 30;
};

struct TrainingSpec {
    int num_pedestrians = 4;
    int num_vehicles = 4;
    int num_scans = 40;
    int num_runs = 1;              // independent scenarios, seeds seed, seed+1, ...
    std::uint64_t seed = 1001;
    std::string model_path;
};

struct RunConfig {
    std::string profile = "desk";
    std::uint64_t seed = 1;
    scenario::RadioParams radio;
    LayoutSpec layout;
    scenario::SurveillanceArea area;
    double cell_m = 0.1;
    TargetSpec targets;
    scenario::RcsTable rcs;
    double surface_halfwidth_deg = 30.0;
    double corner_halfwidth_deg = 80.0;
    double wheel_offset_m = 1.35;
    double scan_period_s = 0.05;
    int num_scans = 200;
    sensing::SensingOptions sensing;
    clustering::ClusteringConfig clustering;
    ExcisionSpec excision;
    tracking::MotionModel motion;
    tracking::TrackerConfig tracker;
    classifier::ClassifierConfig classifier;
    TrainingSpec training;
    metrics::OspaConfig ospa;
    double comm_snr_linear = 6.43;
    std::vector<double> capacity_rho{0.1, 0.3, 0.5};
    std::vector<tracking::FilterKind> filters{tracking::FilterKind::phd, tracking::FilterKind::mbm};
    clustering::GatingMode gating = clustering::GatingMode::adaptive;
    std::string out_dir = "out";
    bool dump_maps = false;

    /// Throws ConfigError on the first violated invariant.
    void validate() const;

    fusion::GridSpec grid() const;
    /// Motion model with T_scan and area taken from the run parameters.
    tracking::MotionModel motion_model() const;
    metrics::CapacityParams capacity(int n_sensing, double rho_p) const;
    std::vector<int> sensing_ids() const;
};

/// Paper-scale parameters: K = 3168, M_s = 112, 51 scan directions,
/// 200 scans, 4 pedestrians and 4 vehicles.
RunConfig paper_preset();
/// Desk/CI profile: K = 512 (spacing raised to keep the bandwidth), M_s = 32,
/// 31 scan directions, 50 scans, one pedestrian and one vehicle.
RunConfig desk_preset();
RunConfig preset(const std::string& name);

/// Applies a JSON document on top of the preset named by its "profile" key
/// (default desk). Unknown keys are rejected.
RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Reads JSON with // and /* */ comments.
RunConfig load(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);
/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string hash(const RunConfig& cfg);

std::vector<scenario::TargetTruth> targets_from_json(const nlohmann::json& j);
nlohmann::json targets_to_json(const std::vector<scenario::TargetTruth>& targets);

/// Scenario for a run: BS ring, roles from n_sensing, targets either explicit
/// or drawn from `seed`.
scenario::Scenario build_scenario(const RunConfig& cfg, std::uint64_t seed);

}  // namespace isac::config
