#include "isac/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace isac::clustering {

std::string to_string(GatingMode m) {
    switch (m) {
        case GatingMode::fixed_4: return "fixed-4";
        case GatingMode::fixed_6: return "fixed-6";
        case GatingMode::adaptive: return "adaptive";
    }
    return "adaptive";
}

GatingMode gating_mode_from_string(const std::string& s) {
    if (s == "fixed-4") return GatingMode::fixed_4;
    if (s == "fixed-6") return GatingMode::fixed_6;
    if (s == "adaptive") return GatingMode::adaptive;
    throw ConfigError("unknown gating mode '" + s + "' (expected fixed-4, fixed-6 or adaptive)");
}

std::string to_string(GateUnits u) { return u == GateUnits::cells ? "cells" : "meters"; }

GateUnits gate_units_from_string(const std::string& s) {
    if (s == "cells") return GateUnits::cells;
    if (s == "meters") return GateUnits::meters;
    throw ConfigError("unknown gate units '" + s + "' (expected cells or meters)");
}

void ClusteringConfig::validate() const {
    if (excision_threshold < 0) throw ConfigError("excision_threshold must be >= 0");
    if (knn_gate_pedestrian <= 0 || knn_gate_vehicle <= 0 || dbscan_eps <= 0)
        throw ConfigError("clustering gates must be positive");
    if (knn_gate_fixed && *knn_gate_fixed <= 0) throw ConfigError("knn_gate_fixed must be positive");
    if (dbscan_min_pts < 1) throw ConfigError("dbscan_min_pts must be >= 1");
    if (covariance_jitter < 0) throw ConfigError("covariance_jitter must be >= 0");
}

namespace {

double to_meters(double v, GateUnits u, const fusion::GridSpec& grid) {
    return u == GateUnits::cells ? v * grid.dx_m : v;
}

}  // namespace

double ClusteringConfig::gate_m(std::optional<TargetClass> cls, const fusion::GridSpec& grid) const {
    double g = knn_gate_vehicle;
    if (knn_gate_fixed) g = *knn_gate_fixed;
    else if (cls && *cls == TargetClass::pedestrian) g = knn_gate_pedestrian;
    return to_meters(g, units, grid);
}

double ClusteringConfig::eps_m(const fusion::GridSpec& grid) const { return to_meters(dbscan_eps, units, grid); }

void apply_gating(ClusteringConfig& cfg, GatingMode mode) {
    switch (mode) {
        case GatingMode::fixed_4: cfg.knn_gate_fixed = 4.0; break;
        case GatingMode::fixed_6: cfg.knn_gate_fixed = 6.0; break;
        case GatingMode::adaptive: cfg.knn_gate_fixed.reset(); break;
    }
}

std::vector<MapPoint> excise(const fusion::SoftMap& map, double threshold) {
    std::vector<MapPoint> out;
    const auto& g = map.grid;
    for (int r = 0; r < g.ny; ++r)
        for (int c = 0; c < g.nx; ++c) {
            const double v = map.values(r, c);
            if (v > threshold) out.push_back({r, c, v, g.cell_center(c, r)});
        }
    return out;
}

GateResult gate_assign(const std::vector<MapPoint>& points, const std::vector<PredictedTrack>& tracks,
                       const ClusteringConfig& cfg, const fusion::GridSpec& grid) {
    GateResult res;
    std::vector<const PredictedTrack*> order;
    for (const auto& t : tracks) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](auto a, auto b) { return a->track_id < b->track_id; });

    std::vector<double> gates;
    for (auto t : order) gates.push_back(cfg.gate_m(t->cls, grid));

    std::vector<Cluster> per_track(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) per_track[i].source_track = order[i]->track_id;

    for (const auto& p : points) {
        int best = -1;
        double best_d2 = 0.0;
        for (std::size_t i = 0; i < order.size(); ++i) {
            const double d2 = (p.position - order[i]->position).squaredNorm();
            if (best < 0 || d2 < best_d2) {
                best = static_cast<int>(i);
                best_d2 = d2;
            }
        }
        if (best >= 0 && best_d2 <= gates[static_cast<std::size_t>(best)] * gates[static_cast<std::size_t>(best)])
            per_track[static_cast<std::size_t>(best)].members.push_back(p);
        else
            res.residual.push_back(p);
    }
    for (auto& c : per_track)
        if (!c.members.empty()) res.clusters.push_back(std::move(c));
    return res;
}

std::vector<int> dbscan_labels(const std::vector<MapPoint>& points, double eps_m, int min_pts) {
    const std::size_t n = points.size();
    std::vector<int> labels(n, -1);
    if (n == 0) return labels;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = points[a];
        const auto& pb = points[b];
        if (pa.row != pb.row) return pa.row < pb.row;
        if (pa.col != pb.col) return pa.col < pb.col;
        return a < b;
    });

    // Buckets of side eps; each neighborhood query scans the 3x3 block.
    auto key = [&](const Vec2& p) {
        const auto bx = static_cast<std::int64_t>(std::floor(p.x() / eps_m));
        const auto by = static_cast<std::int64_t>(std::floor(p.y() / eps_m));
        return std::pair{bx, by};
    };
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> buckets;
    for (std::size_t k = 0; k < n; ++k) buckets[key(points[order[k]].position)].push_back(k);

    const double eps2 = eps_m * eps_m;
    auto neighbors = [&](std::size_t k, std::vector<std::size_t>& out) {
        out.clear();
        const Vec2& p = points[order[k]].position;
        const auto [bx, by] = key(p);
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = buckets.find({bx + dx, by + dy});
                if (it == buckets.end()) continue;
                for (auto j : it->second)
                    if ((points[order[j]].position - p).squaredNorm() <= eps2) out.push_back(j);
            }
        std::sort(out.begin(), out.end());
    };

    constexpr int kUnvisited = -2;
    std::vector<int> lab(n, kUnvisited);   // indexed by canonical position
    std::vector<std::size_t> nb, nb2;
    int next = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (lab[k] != kUnvisited) continue;
        neighbors(k, nb);
        if (static_cast<int>(nb.size()) < min_pts) {
            lab[k] = -1;
            continue;
        }
        const int cid = next++;
        lab[k] = cid;
        std::deque<std::size_t> queue(nb.begin(), nb.end());
        while (!queue.empty()) {
            const std::size_t q = queue.front();
            queue.pop_front();
            if (lab[q] == -1) lab[q] = cid;   // border point previously marked noise
            if (lab[q] != kUnvisited) continue;
            lab[q] = cid;
            neighbors(q, nb2);
            if (static_cast<int>(nb2.size()) >= min_pts) queue.insert(queue.end(), nb2.begin(), nb2.end());
        }
    }
    for (std::size_t k = 0; k < n; ++k) labels[order[k]] = lab[k];
    return labels;
}

namespace {

std::vector<Cluster> clusters_from_labels(const std::vector<MapPoint>& points, const std::vector<int>& labels) {
    const int count = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<Cluster> clusters(static_cast<std::size_t>(std::max(count, 0)));
    // Members in canonical order regardless of input order.
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(points[a].row, points[a].col) < std::tie(points[b].row, points[b].col);
    });
    for (auto i : idx)
        if (labels[i] >= 0) clusters[static_cast<std::size_t>(labels[i])].members.push_back(points[i]);
    return clusters;
}

}  // namespace

std::vector<Cluster> dbscan(const std::vector<MapPoint>& points, double eps_m, int min_pts) {
    return clusters_from_labels(points, dbscan_labels(points, eps_m, min_pts));
}

Measurement summarize(const Cluster& cluster, const fusion::GridSpec& grid, double jitter) {
    if (cluster.members.empty()) throw std::invalid_argument("summarize: empty cluster");
    Measurement m;
    m.source_track = cluster.source_track;
    m.members = cluster.members;
    m.count = static_cast<int>(cluster.members.size());

    double wsum = 0.0;
    Vec2 acc = Vec2::Zero();
    for (const auto& p : cluster.members) {
        wsum += p.value;
        acc += p.value * p.position;
    }
    if (wsum > 0.0) {
        m.z = acc / wsum;
    } else {
        for (const auto& p : cluster.members) m.z += p.position;
        m.z /= static_cast<double>(m.count);
    }

    if (m.count == 1) {
        m.R = Eigen::Vector2d(grid.dx_m * grid.dx_m, grid.dy_m * grid.dy_m).asDiagonal();
    } else {
        Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
        for (const auto& p : cluster.members) {
            const Vec2 d = p.position - m.z;
            s += d * d.transpose();
        }
        m.R = s / static_cast<double>(m.count - 1);
    }
    m.R = 0.5 * (m.R + m.R.transpose()).eval();
    m.R += jitter * Eigen::Matrix2d::Identity();
    return m;
}

MeasurementSet cluster_map(const fusion::SoftMap& map, const std::vector<PredictedTrack>& tracks,
                           const ClusteringConfig& cfg) {
    MeasurementSet out;
    out.scan_index = map.scan_index;
    const auto points = excise(map, cfg.excision_threshold);
    out.excised_points = points.size();

    auto gated = gate_assign(points, tracks, cfg, map.grid);
    for (const auto& c : gated.clusters) {
        out.gated_points += c.members.size();
        out.measurements.push_back(summarize(c, map.grid, cfg.covariance_jitter));
    }
    const auto labels = dbscan_labels(gated.residual, cfg.eps_m(map.grid), cfg.dbscan_min_pts);
    for (int l : labels) out.noise_points += l < 0;
    for (const auto& c : clusters_from_labels(gated.residual, labels))
        out.measurements.push_back(summarize(c, map.grid, cfg.covariance_jitter));
    return out;
}

}  // namespace isac::clustering
