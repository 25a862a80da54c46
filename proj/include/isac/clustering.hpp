#pragma once

#include "isac/common.hpp"
#include "isac/fusion.hpp"

#include <optional>
#include <string>
#include <vector>

namespace isac::clustering {

enum class GateUnits { cells, meters };
enum class GatingMode { fixed_4, fixed_6, adaptive };

std::string to_string(GatingMode m);
GatingMode gating_mode_from_string(const std::string& s);
std::string to_string(GateUnits u);
GateUnits gate_units_from_string(const std::string& s);

struct ClusteringConfig {
    double excision_threshold = 2e-7;
    double knn_gate_pedestrian = 4.0;
    double knn_gate_vehicle = 6.0;
    std::optional<double> knn_gate_fixed;
    double dbscan_eps = 3.0;
    int dbscan_min_pts = 50;
    GateUnits units = GateUnits::meters;
    double covariance_jitter = 1e-6;   // m^2 added to every R

    void validate() const;
    /// Gate for a track of the given class (or unlabeled) in meters.
    double gate_m(std::optional<TargetClass> cls, const fusion::GridSpec& grid) const;
    double eps_m(const fusion::GridSpec& grid) const;
};

/// Sets knn_gate_fixed for the fixed modes (4 or 6 in the configured units)
/// and clears it for the adaptive mode.
void apply_gating(ClusteringConfig& cfg, GatingMode mode);

struct MapPoint {
    int row = 0;
    int col = 0;
    double value = 0.0;
    Vec2 position = Vec2::Zero();   // cell center, meters
};

/// One-step-ahead predicted track position with the classifier's label.
struct PredictedTrack {
    int track_id = 0;
    Vec2 position = Vec2::Zero();
    std::optional<TargetClass> cls;
};

struct Cluster {
    std::vector<MapPoint> members;
    int source_track = -1;   // -1: formed by DBSCAN
};

struct Measurement {
    Vec2 z = Vec2::Zero();
    Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
    int count = 0;
    int source_track = -1;
    std::vector<MapPoint> members;
};

struct MeasurementSet {
    int scan_index = 0;
    std::vector<Measurement> measurements;
    std::size_t excised_points = 0;
    std::size_t gated_points = 0;
    std::size_t noise_points = 0;

    std::size_t size() const { return measurements.size(); }
};

/// Cells with value strictly above the threshold, in (row, col) order.
std::vector<MapPoint> excise(const fusion::SoftMap& map, double threshold);

struct GateResult {
    std::vector<Cluster> clusters;   // one per track that received points, by track id
    std::vector<MapPoint> residual;
};

/// 1-NN association of points to predicted tracks with class-dependent gates.
/// Distance ties go to the lower track id.
GateResult gate_assign(const std::vector<MapPoint>& points, const std::vector<PredictedTrack>& tracks,
                       const ClusteringConfig& cfg, const fusion::GridSpec& grid);

/// DBSCAN labels: -1 noise, otherwise cluster index. Points are processed in
/// canonical (row, col) order so the result does not depend on input order;
/// labels refer to the input positions.
std::vector<int> dbscan_labels(const std::vector<MapPoint>& points, double eps_m, int min_pts);

std::vector<Cluster> dbscan(const std::vector<MapPoint>& points, double eps_m, int min_pts);

/// Value-weighted centroid and sample covariance about it; single-cell clusters
/// get diag(dx^2, dy^2). `jitter` * I is added to every covariance.
Measurement summarize(const Cluster& cluster, const fusion::GridSpec& grid, double jitter = 1e-6);

/// Excision, gated association, DBSCAN on the residual and summarization.
MeasurementSet cluster_map(const fusion::SoftMap& map, const std::vector<PredictedTrack>& tracks,
                           const ClusteringConfig& cfg);

}  // namespace isac::clustering
