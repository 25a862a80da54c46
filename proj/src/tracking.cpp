#include "isac/tracking.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace isac::tracking {

Mat4 MotionModel::F() const {
    Mat4 f = Mat4::Identity();
    f(0, 2) = scan_period_s;
    f(1, 3) = scan_period_s;
    return f;
}

Mat4 MotionModel::Q() const { return process_noise_scale * scan_period_s * Mat4::Identity(); }

Mat24 MotionModel::H() {
    Mat24 h = Mat24::Zero();
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    return h;
}

void MotionModel::validate() const {
    if (scan_period_s <= 0 || process_noise_scale <= 0) throw ConfigError("motion model: T_scan and alpha_q must be > 0");
    if (survival_prob < 0 || survival_prob > 1 || detection_prob < 0 || detection_prob > 1)
        throw ConfigError("motion model: probabilities must lie in [0, 1]");
    if (clutter_intensity < 0 || area_m2 <= 0) throw ConfigError("motion model: clutter intensity/area invalid");
}

void TrackerConfig::validate() const {
    if (phd_prune <= 0 || mbm_bernoulli_prune <= 0 || mbm_global_prune <= 0 || assoc_gate <= 0 ||
        existence_thresh <= 0 || merge_thresh <= 0)
        throw ConfigError("tracker thresholds must be positive");
    if (phd_cap < 1 || mbm_cap < 1 || max_children_per_hypothesis < 1) throw ConfigError("tracker caps must be >= 1");
    if (initial_cov <= 0 || birth_cov <= 0 || recovery_cov <= 0) throw ConfigError("tracker covariances must be > 0");
    if (birth_weight < 0 || recovery_weight < 0 || adaptive_birth_weight < 0 || birth_weight > 1 ||
        recovery_weight > 1 || adaptive_birth_weight > 1)
        throw ConfigError("birth weights must lie in [0, 1]");
}

double MbmDistribution::weight_sum() const {
    double s = 0.0;
    for (const auto& h : hypotheses) s += h.weight;
    return s;
}

std::size_t MbmDistribution::num_bernoullis() const {
    std::size_t n = 0;
    for (const auto& h : hypotheses) n += h.bernoullis.size();
    return n;
}

namespace {

std::atomic<std::uint64_t> g_psd_repairs{0};

constexpr double kLog2Pi = 1.8378770664093453;

}  // namespace

std::uint64_t psd_repairs() { return g_psd_repairs.load(); }

void ensure_psd(Mat4& P) {
    P = 0.5 * (P + P.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat4> es(P, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues()(0);
    const double scale = std::max(1.0, es.eigenvalues()(3));
    if (min_eig < -1e-12 * scale) {
        P += (-min_eig + 1e-9 * scale) * Mat4::Identity();
        g_psd_repairs.fetch_add(1);
    }
}

void kalman_predict(Vec4& mean, Mat4& cov, const MotionModel& model) {
    const Mat4 F = model.F();
    mean = F * mean;
    cov = F * cov * F.transpose() + model.Q();
    cov = 0.5 * (cov + cov.transpose()).eval();
}

KalmanUpdate kalman_update(const Vec4& mean, const Mat4& cov, const Vec2& z, const Eigen::Matrix2d& R,
                           const MotionModel&) {
    const Mat24 H = MotionModel::H();
    const Eigen::Matrix2d S = H * cov * H.transpose() + R;
    const double det = S.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) throw std::domain_error("kalman_update: singular innovation covariance");
    const Eigen::Matrix2d Si = S.inverse();
    const Eigen::Matrix<double, 4, 2> K = cov * H.transpose() * Si;
    const Vec2 nu = z - H * mean;

    KalmanUpdate u;
    u.mean = mean + K * nu;
    const Mat4 IKH = Mat4::Identity() - K * H;
    u.cov = IKH * cov * IKH.transpose() + K * R * K.transpose();
    ensure_psd(u.cov);
    u.mahalanobis2 = nu.dot(Si * nu);
    u.log_likelihood = -kLog2Pi - 0.5 * std::log(det) - 0.5 * u.mahalanobis2;
    u.likelihood = std::exp(u.log_likelihood);
    return u;
}

GaussianComponent kalman_predict(const GaussianComponent& c, const MotionModel& model) {
    GaussianComponent p = c;
    kalman_predict(p.mean, p.cov, model);
    p.weight = c.weight * model.survival_prob;
    return p;
}

Mixture phd_predict(const Mixture& mixture, const MotionModel& model, const Mixture& births) {
    Mixture out;
    out.reserve(mixture.size() + births.size());
    for (const auto& c : mixture) out.push_back(kalman_predict(c, model));
    out.insert(out.end(), births.begin(), births.end());
    return out;
}

Mixture phd_update(const Mixture& predicted, const std::vector<clustering::Measurement>& measurements,
                   const MotionModel& model) {
    const double pd = model.detection_prob;
    Mixture out;
    out.reserve(predicted.size() * (measurements.size() + 1));
    for (const auto& c : predicted) {
        GaussianComponent m = c;
        m.weight = c.weight * (1.0 - pd);
        out.push_back(m);
    }
    std::vector<KalmanUpdate> ups(predicted.size());
    for (const auto& meas : measurements) {
        double denom = model.clutter_density();
        for (std::size_t h = 0; h < predicted.size(); ++h) {
            ups[h] = kalman_update(predicted[h].mean, predicted[h].cov, meas.z, meas.R, model);
            denom += pd * predicted[h].weight * ups[h].likelihood;
        }
        for (std::size_t h = 0; h < predicted.size(); ++h) {
            const double num = pd * predicted[h].weight * ups[h].likelihood;
            out.push_back({denom > 0.0 ? num / denom : 0.0, ups[h].mean, ups[h].cov, predicted[h].track_id,
                           predicted[h].class_label});
        }
    }
    return out;
}

namespace {

// Heavier first; ties by lower track id, then original order.
template <typename T, typename W>
std::vector<std::size_t> order_by_weight(const std::vector<T>& items, W weight) {
    std::vector<std::size_t> idx(items.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double wa = weight(items[a]), wb = weight(items[b]);
        if (wa != wb) return wa > wb;
        return items[a].track_id < items[b].track_id;
    });
    return idx;
}

}  // namespace

Mixture phd_prune_cap(const Mixture& mixture, const TrackerConfig& cfg) {
    Mixture kept;
    for (const auto& c : mixture)
        if (c.weight >= cfg.phd_prune) kept.push_back(c);
    const auto idx = order_by_weight(kept, [](const GaussianComponent& c) { return c.weight; });
    Mixture out;
    for (std::size_t i = 0; i < idx.size() && static_cast<int>(i) < cfg.phd_cap; ++i) out.push_back(kept[idx[i]]);
    return out;
}

Mixture phd_merge(const Mixture& mixture, double threshold) {
    const auto idx = order_by_weight(mixture, [](const GaussianComponent& c) { return c.weight; });
    std::vector<bool> used(mixture.size(), false);
    Mixture out;
    for (std::size_t lead_pos = 0; lead_pos < idx.size(); ++lead_pos) {
        const std::size_t lead = idx[lead_pos];
        if (used[lead]) continue;
        std::vector<std::size_t> group;
        for (std::size_t k = lead_pos; k < idx.size(); ++k) {
            const std::size_t i = idx[k];
            if (!used[i] && (mixture[i].mean - mixture[lead].mean).norm() < threshold) group.push_back(i);
        }
        GaussianComponent m;
        m.track_id = mixture[lead].track_id;
        m.class_label = mixture[lead].class_label;
        for (auto i : group) {
            used[i] = true;
            m.weight += mixture[i].weight;
            if (!m.class_label) m.class_label = mixture[i].class_label;
        }
        if (m.weight > 0.0) {
            m.mean.setZero();
            for (auto i : group) m.mean += mixture[i].weight * mixture[i].mean;
            m.mean /= m.weight;
            m.cov.setZero();
            for (auto i : group) {
                const Vec4 d = mixture[i].mean - m.mean;
                m.cov += mixture[i].weight * (mixture[i].cov + d * d.transpose());
            }
            m.cov /= m.weight;
        } else {
            m.mean = mixture[lead].mean;
            m.cov = mixture[lead].cov;
        }
        ensure_psd(m.cov);
        out.push_back(m);
    }
    return out;
}

Mixture phd_postprocess(const Mixture& mixture, const TrackerConfig& cfg) {
    return phd_merge(phd_prune_cap(mixture, cfg), cfg.merge_thresh);
}

std::vector<TrackEstimate> phd_estimate(const Mixture& mixture) {
    double total = 0.0;
    for (const auto& c : mixture) total += c.weight;
    const auto n = static_cast<std::size_t>(std::max(0.0, std::round(total)));
    const auto idx = order_by_weight(mixture, [](const GaussianComponent& c) { return c.weight; });
    std::vector<TrackEstimate> out;
    for (std::size_t i = 0; i < std::min(n, idx.size()); ++i) {
        const auto& c = mixture[idx[i]];
        out.push_back({c.track_id, c.mean, c.weight, c.class_label});
    }
    return out;
}

double missed_existence(double r, double detection_prob) {
    const double denom = 1.0 - r * detection_prob;
    return denom > 0.0 ? r * (1.0 - detection_prob) / denom : 0.0;
}

MbmDistribution mbm_predict(const MbmDistribution& dist, const MotionModel& model,
                            const std::vector<Bernoulli>& births) {
    MbmDistribution out;
    if (dist.hypotheses.empty()) out.hypotheses.push_back({1.0, {}});
    for (const auto& h : dist.hypotheses) {
        GlobalHypothesis p;
        p.weight = h.weight;
        for (const auto& b : h.bernoullis) {
            Bernoulli q = b;
            kalman_predict(q.mean, q.cov, model);
            q.r = b.r * model.survival_prob;
            p.bernoullis.push_back(q);
        }
        out.hypotheses.push_back(std::move(p));
    }
    for (auto& h : out.hypotheses) h.bernoullis.insert(h.bernoullis.end(), births.begin(), births.end());
    return out;
}

namespace {

struct Association {
    double logw = 0.0;
    std::uint64_t seq = 0;
    std::vector<int> meas_of;   // per Bernoulli: measurement index or -1
};

struct WorseFirst {
    bool operator()(const Association& a, const Association& b) const {
        if (a.logw != b.logw) return a.logw > b.logw;
        return a.seq < b.seq;
    }
};

double log_or_ninf(double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

}  // namespace

MbmDistribution mbm_update(const MbmDistribution& predicted, const std::vector<clustering::Measurement>& measurements,
                           const MotionModel& model, const TrackerConfig& cfg) {
    const double pd = model.detection_prob;
    const double log_kappa = std::log(std::max(model.clutter_density(), 1e-300));
    const std::size_t m = measurements.size();
    const auto K = static_cast<std::size_t>(cfg.max_children_per_hypothesis);

    struct Child {
        double logw;
        GlobalHypothesis hyp;
    };
    std::vector<Child> children;

    for (const auto& parent : predicted.hypotheses) {
        const auto& bs = parent.bernoullis;
        const std::size_t n = bs.size();
        std::vector<double> miss_logw(n);
        std::vector<std::vector<std::pair<int, double>>> gated(n);   // (measurement, log weight)
        std::vector<std::vector<KalmanUpdate>> upd(n);
        for (std::size_t i = 0; i < n; ++i) {
            miss_logw[i] = log_or_ninf(1.0 - bs[i].r * pd);
            upd[i].resize(m);
            if (bs[i].r <= 0.0 || pd <= 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) {
                upd[i][j] = kalman_update(bs[i].mean, bs[i].cov, measurements[j].z, measurements[j].R, model);
                if (upd[i][j].mahalanobis2 <= cfg.assoc_gate)
                    gated[i].push_back(
                        {static_cast<int>(j), std::log(bs[i].r) + std::log(pd) + upd[i][j].log_likelihood});
            }
        }

        std::priority_queue<Association, std::vector<Association>, WorseFirst> best;
        std::vector<int> assign(n, -1);
        std::vector<char> used(m, 0);
        std::uint64_t seq = 0;
        auto dfs = [&](auto&& self, std::size_t i, double acc, std::size_t n_used) -> void {
            if (i == n) {
                Association a{acc + static_cast<double>(m - n_used) * log_kappa, seq++, assign};
                if (best.size() < K) best.push(std::move(a));
                else if (WorseFirst{}(a, best.top())) {
                    best.pop();
                    best.push(std::move(a));
                }
                return;
            }
            if (std::isfinite(miss_logw[i])) {
                assign[i] = -1;
                self(self, i + 1, acc + miss_logw[i], n_used);
            }
            for (const auto& [j, lw] : gated[i]) {
                if (used[static_cast<std::size_t>(j)]) continue;
                used[static_cast<std::size_t>(j)] = 1;
                assign[i] = j;
                self(self, i + 1, acc + lw, n_used + 1);
                used[static_cast<std::size_t>(j)] = 0;
            }
            assign[i] = -1;
        };
        dfs(dfs, 0, 0.0, 0);

        std::vector<Association> kept;
        while (!best.empty()) {
            kept.push_back(best.top());
            best.pop();
        }
        std::reverse(kept.begin(), kept.end());   // heaviest first

        const double parent_log = log_or_ninf(parent.weight);
        for (const auto& a : kept) {
            Child c{parent_log + a.logw, {}};
            for (std::size_t i = 0; i < n; ++i) {
                Bernoulli b = bs[i];
                if (a.meas_of[i] < 0) {
                    b.r = missed_existence(bs[i].r, pd);
                } else {
                    const auto& u = upd[i][static_cast<std::size_t>(a.meas_of[i])];
                    b.r = 1.0;
                    b.mean = u.mean;
                    b.cov = u.cov;
                }
                c.hyp.bernoullis.push_back(std::move(b));
            }
            children.push_back(std::move(c));
        }
    }

    MbmDistribution out;
    if (children.empty()) {
        out.hypotheses.push_back({1.0, {}});
        return out;
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& c : children) mx = std::max(mx, c.logw);
    if (!std::isfinite(mx)) throw std::domain_error("mbm_update: every association has zero weight");
    double sum = 0.0;
    for (const auto& c : children) sum += std::exp(c.logw - mx);
    for (auto& c : children) c.hyp.weight = std::exp(c.logw - mx) / sum;

    double kept_sum = 0.0;
    for (auto& c : children)
        if (c.hyp.weight >= cfg.mbm_global_prune) {
            kept_sum += c.hyp.weight;
            out.hypotheses.push_back(std::move(c.hyp));
        }
    for (auto& h : out.hypotheses) h.weight /= kept_sum;
    return out;
}

namespace {

std::vector<Bernoulli> merge_bernoullis(const std::vector<Bernoulli>& bs, double threshold) {
    const auto idx = order_by_weight(bs, [](const Bernoulli& b) { return b.r; });
    std::vector<bool> used(bs.size(), false);
    std::vector<Bernoulli> out;
    for (std::size_t lead_pos = 0; lead_pos < idx.size(); ++lead_pos) {
        const std::size_t lead = idx[lead_pos];
        if (used[lead]) continue;
        std::vector<std::size_t> group;
        for (std::size_t k = lead_pos; k < idx.size(); ++k) {
            const std::size_t i = idx[k];
            if (!used[i] && (bs[i].mean - bs[lead].mean).norm() < threshold) group.push_back(i);
        }
        if (group.size() == 1) {
            used[lead] = true;
            out.push_back(bs[lead]);
            continue;
        }
        Bernoulli b;
        b.track_id = bs[lead].track_id;
        b.class_label = bs[lead].class_label;
        double rs = 0.0;
        for (auto i : group) {
            used[i] = true;
            rs += bs[i].r;
            if (!b.class_label) b.class_label = bs[i].class_label;
        }
        b.mean.setZero();
        for (auto i : group) b.mean += bs[i].r * bs[i].mean;
        b.mean /= rs;
        b.cov.setZero();
        for (auto i : group) {
            const Vec4 d = bs[i].mean - b.mean;
            b.cov += bs[i].r * (bs[i].cov + d * d.transpose());
        }
        b.cov /= rs;
        ensure_psd(b.cov);
        b.r = std::min(1.0, rs);
        out.push_back(b);
    }
    return out;
}

}  // namespace

MbmDistribution mbm_postprocess(const MbmDistribution& dist, const TrackerConfig& cfg) {
    std::vector<GlobalHypothesis> hs;
    for (const auto& h : dist.hypotheses) {
        if (h.weight < cfg.mbm_global_prune) continue;
        GlobalHypothesis g;
        g.weight = h.weight;
        for (const auto& b : h.bernoullis)
            if (b.r >= cfg.mbm_bernoulli_prune) g.bernoullis.push_back(b);
        hs.push_back(std::move(g));
    }
    std::stable_sort(hs.begin(), hs.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    if (static_cast<int>(hs.size()) > cfg.mbm_cap) hs.resize(static_cast<std::size_t>(cfg.mbm_cap));

    MbmDistribution out;
    if (hs.empty()) {
        out.hypotheses.push_back({1.0, {}});
        return out;
    }
    double s = 0.0;
    for (const auto& h : hs) s += h.weight;
    for (auto& h : hs) h.weight /= s;
    hs.front().bernoullis = merge_bernoullis(hs.front().bernoullis, cfg.merge_thresh);
    out.hypotheses = std::move(hs);
    return out;
}

int best_hypothesis(const MbmDistribution& dist) {
    int best = -1;
    for (std::size_t g = 0; g < dist.hypotheses.size(); ++g)
        if (best < 0 || dist.hypotheses[g].weight > dist.hypotheses[static_cast<std::size_t>(best)].weight)
            best = static_cast<int>(g);
    return best;
}

std::vector<TrackEstimate> mbm_estimate(const MbmDistribution& dist, double existence_thresh) {
    std::vector<TrackEstimate> out;
    const int g = best_hypothesis(dist);
    if (g < 0) return out;
    for (const auto& b : dist.hypotheses[static_cast<std::size_t>(g)].bernoullis)
        if (b.r >= existence_thresh) out.push_back({b.track_id, b.mean, b.r, b.class_label});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.track_id < b.track_id; });
    return out;
}

std::string to_string(FilterKind k) { return k == FilterKind::phd ? "phd" : "mbm"; }

FilterKind filter_kind_from_string(const std::string& s) {
    if (s == "phd") return FilterKind::phd;
    if (s == "mbm") return FilterKind::mbm;
    throw ConfigError("unknown filter '" + s + "' (expected phd or mbm)");
}

Tracker::Tracker(const MotionModel& model, const TrackerConfig& cfg, const Vec2& area_center)
    : model_(model), cfg_(cfg), area_center_(area_center) {
    model_.validate();
    cfg_.validate();
}

StepOutput Tracker::step(const clustering::MeasurementSet& ms) {
    if (!initialized_) {
        seed(ms.measurements);
        initialized_ = true;
    } else {
        std::vector<BirthComponent> births;
        for (const auto& mean : cfg_.layout_births)
            births.push_back({cfg_.birth_weight, mean, cfg_.birth_cov * Mat4::Identity()});
        if (cfg_.recovery_birth)
            births.push_back({cfg_.recovery_weight, Vec4(area_center_.x(), area_center_.y(), 0.0, 0.0),
                              cfg_.recovery_cov * Mat4::Identity()});
        for (const auto& p : pending_births_)
            births.push_back({cfg_.adaptive_birth_weight, Vec4(p.x(), p.y(), 0.0, 0.0), cfg_.initial_cov * Mat4::Identity()});
        std::vector<int> ids;
        for (std::size_t i = 0; i < births.size(); ++i) ids.push_back(next_id());
        advance(births, ids, ms.measurements);
    }

    StepOutput out;
    out.estimates = estimate();

    pending_births_.clear();
    if (cfg_.adaptive_birth)
        for (const auto& m : ms.measurements) {
            bool explained = false;
            for (const auto& e : out.estimates)
                if ((e.state.head<2>() - m.z).norm() <= cfg_.merge_thresh) explained = true;
            if (!explained) pending_births_.push_back(m.z);
        }

    const Mat4 F = model_.F();
    for (const auto& e : out.estimates) {
        const Vec4 next = F * e.state;
        out.predicted.push_back({e.track_id, next.head<2>(), e.cls});
    }
    return out;
}

void PhdTracker::seed(const std::vector<clustering::Measurement>& measurements) {
    mixture_.clear();
    for (const auto& m : measurements)
        mixture_.push_back({1.0, Vec4(m.z.x(), m.z.y(), 0.0, 0.0), cfg_.initial_cov * Mat4::Identity(), next_id(), {}});
}

void PhdTracker::advance(const std::vector<BirthComponent>& births, const std::vector<int>& birth_ids,
                         const std::vector<clustering::Measurement>& measurements) {
    Mixture b;
    for (std::size_t i = 0; i < births.size(); ++i)
        b.push_back({births[i].weight, births[i].mean, births[i].cov, birth_ids[i], {}});
    const auto predicted = phd_predict(mixture_, model_, b);
    mixture_ = phd_postprocess(phd_update(predicted, measurements, model_), cfg_);
}

std::vector<TrackEstimate> PhdTracker::estimate() const { return phd_estimate(mixture_); }

void PhdTracker::set_label(int track_id, TargetClass cls) {
    for (auto& c : mixture_)
        if (c.track_id == track_id) c.class_label = cls;
}

void MbmTracker::seed(const std::vector<clustering::Measurement>& measurements) {
    dist_.hypotheses.assign(1, {1.0, {}});
    for (const auto& m : measurements)
        dist_.hypotheses[0].bernoullis.push_back(
            {1.0, Vec4(m.z.x(), m.z.y(), 0.0, 0.0), cfg_.initial_cov * Mat4::Identity(), next_id(), {}});
}

void MbmTracker::advance(const std::vector<BirthComponent>& births, const std::vector<int>& birth_ids,
                         const std::vector<clustering::Measurement>& measurements) {
    std::vector<Bernoulli> b;
    for (std::size_t i = 0; i < births.size(); ++i)
        b.push_back({births[i].weight, births[i].mean, births[i].cov, birth_ids[i], {}});
    const auto predicted = mbm_predict(dist_, model_, b);
    dist_ = mbm_postprocess(mbm_update(predicted, measurements, model_, cfg_), cfg_);
}

std::vector<TrackEstimate> MbmTracker::estimate() const { return mbm_estimate(dist_, cfg_.existence_thresh); }

void MbmTracker::set_label(int track_id, TargetClass cls) {
    for (auto& h : dist_.hypotheses)
        for (auto& b : h.bernoullis)
            if (b.track_id == track_id) b.class_label = cls;
}

std::unique_ptr<Tracker> make_tracker(FilterKind kind, const MotionModel& model, const TrackerConfig& cfg,
                                      const Vec2& area_center) {
    if (kind == FilterKind::phd) return std::make_unique<PhdTracker>(model, cfg, area_center);
    return std::make_unique<MbmTracker>(model, cfg, area_center);
}

}  // namespace isac::tracking
