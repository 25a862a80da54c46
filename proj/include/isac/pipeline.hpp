#pragma once

#include "isac/classifier.hpp"
#include "isac/config.hpp"
#include "isac/metrics.hpp"
#include "isac/tracking.hpp"

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

namespace isac::pipeline {

struct ScanData {
    fusion::SoftMap map;
    std::vector<scenario::TruthState> truth;      // targets inside the surveillance area
    std::vector<sensing::RangeAngleMap> polar;    // kept only on request
};

struct Simulation {
    scenario::Scenario scenario;
    std::vector<ScanData> scans;
};

/// Per-BS range-angle maps of the sensing BSs, resampled and fused.
fusion::SoftMap fused_scan(const scenario::Scenario& scn, const fusion::GridSpec& grid,
                           const sensing::SensingOptions& opt, int scan,
                           std::vector<sensing::RangeAngleMap>* polar_out = nullptr);

Simulation simulate(const config::RunConfig& cfg, std::uint64_t seed, bool keep_polar = false);

/// margin x the largest fused-map value over noise-only trials; cached per
/// (radio, layout, area, sensing, calibration) parameters.
double calibrate_excision(const config::RunConfig& cfg);
/// The calibrated threshold in auto mode, the configured one otherwise.
double excision_threshold(const config::RunConfig& cfg);

std::vector<classifier::LabeledScan> labeled_scans(const Simulation& sim);

/// Simulates the training scenario (training.* counts, seed, scans) and
/// trains the CNN on perturbed truth crops.
classifier::TrainResult train_classifier(const config::RunConfig& cfg);

/// Classifier accuracy on truth-centered crops of a simulation.
metrics::ConfusionCounts evaluate_classifier(const classifier::CnnModel& model, const Simulation& sim,
                                             double window_m);

struct ScanRecord {
    int scan_index = 0;
    metrics::OspaResult ospa;
    int num_measurements = 0;
    int num_estimates = 0;
};

struct TrackLogRow {
    int scan_index = 0;
    int track_id = 0;
    tracking::Vec4 state = tracking::Vec4::Zero();
    double score = 0.0;
    std::optional<TargetClass> cls;
};

struct FilterRun {
    tracking::FilterKind filter = tracking::FilterKind::phd;
    clustering::GatingMode gating = clustering::GatingMode::adaptive;
    std::vector<ScanRecord> scans;
    std::vector<TrackLogRow> tracks;
    metrics::ConfusionCounts confusion;
    std::uint64_t psd_repairs = 0;

    double median_ospa() const;
    double mean_ospa() const;
};

/// Per scan: crop and classify at the predictions from t-1, cluster with
/// class-dependent gates, filter step, OSPA against the truth.
FilterRun track(const Simulation& sim, const config::RunConfig& cfg, tracking::FilterKind filter,
                clustering::GatingMode gating, const classifier::CnnModel* model, double excision);

struct RunReport {
    config::RunConfig cfg;
    double excision = 0.0;
    std::vector<FilterRun> runs;
};

/// simulate -> track for every configured filter. Adaptive gating needs a model.
RunReport run_pipeline(const config::RunConfig& cfg, const classifier::CnnModel* model);

nlohmann::json capacity_table(const config::RunConfig& cfg);
nlohmann::json report_json(const RunReport& report);
std::string ospa_csv(const RunReport& report);
std::string tracks_csv(const RunReport& report);
/// report.json, ospa.csv and tracks.csv under `dir`.
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

enum class SweepVariable { n_sensing, gating };
SweepVariable sweep_variable_from_string(const std::string& s);

struct SweepPoint {
    int n_sensing = 0;
    clustering::GatingMode gating = clustering::GatingMode::adaptive;
    std::uint64_t seed = 0;
    std::string group_hash;   // config hash with the seed cleared
    RunReport report;
};

/// One pipeline run per sweep value and seed. Over N_s the values are 1..N_tot
/// and a classifier is trained per N_s unless `model` is given; over gating
/// the three modes share each simulated map sequence.
std::vector<SweepPoint> sweep(const config::RunConfig& base, SweepVariable variable,
                              const std::vector<std::uint64_t>& seeds, const classifier::CnnModel* model);
/// Per sweep value and filter: median/mean OSPA over seeds, mean accuracy and
/// the capacity at that N_s. Points are grouped by group_hash only.
nlohmann::json sweep_json(const std::vector<SweepPoint>& points, SweepVariable variable);

/// Loads the configured model, or trains one when no path is set.
classifier::CnnModel obtain_model(const config::RunConfig& cfg);

double median(std::vector<double> v);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace isac::pipeline
