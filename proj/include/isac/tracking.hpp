#pragma once

#include "isac/clustering.hpp"
#include "isac/common.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace isac::tracking {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Mat24 = Eigen::Matrix<double, 2, 4>;

/// Constant-velocity model on (x, y, vx, vy) with position-only measurements.
struct MotionModel {
    double scan_period_s = 0.05;
    double process_noise_scale = 5.0;   // alpha_q; Q = alpha_q * T * I4
    double survival_prob = 0.9;
    double detection_prob = 0.99;
    double clutter_intensity = 0.1;
    double area_m2 = 1600.0;

    Mat4 F() const;
    Mat4 Q() const;
    static Mat24 H();
    /// Clutter density kappa = lambda_c / A.
    double clutter_density() const { return clutter_intensity / area_m2; }
    void validate() const;
};

struct GaussianComponent {
    double weight = 0.0;
    Vec4 mean = Vec4::Zero();
    Mat4 cov = Mat4::Identity();
    int track_id = 0;
    std::optional<TargetClass> class_label;
};

struct Bernoulli {
    double r = 0.0;
    Vec4 mean = Vec4::Zero();
    Mat4 cov = Mat4::Identity();
    int track_id = 0;
    std::optional<TargetClass> class_label;
};

struct GlobalHypothesis {
    double weight = 1.0;
    std::vector<Bernoulli> bernoullis;
};

struct MbmDistribution {
    std::vector<GlobalHypothesis> hypotheses;

    double weight_sum() const;
    std::size_t num_bernoullis() const;
};

struct BirthComponent {
    double weight = 0.01;   // PHD weight or Bernoulli existence
    Vec4 mean = Vec4::Zero();
    Mat4 cov = 0.1 * Mat4::Identity();
};

struct TrackerConfig {
    double phd_prune = 1e-4;              // gamma_p
    int phd_cap = 10;                     // gamma_q
    double mbm_bernoulli_prune = 1e-4;    // gamma_l
    double mbm_global_prune = 1e-15;      // gamma_g
    int mbm_cap = 10;                     // gamma_c
    double assoc_gate = 14.0;             // xi_a, squared Mahalanobis distance
    double existence_thresh = 0.99;       // gamma_e
    double merge_thresh = 5.0;            // gamma_m
    double initial_cov = 0.5;
    double birth_cov = 0.1;
    double recovery_cov = 5.0;
    double birth_weight = 0.01;
    double recovery_weight = 0.01;
    bool recovery_birth = true;
    bool adaptive_birth = true;           // births at unexplained measurements of the previous scan
    double adaptive_birth_weight = 0.01;
    std::vector<Vec4> layout_births;      // fixed birth means from the scenario layout
    int max_children_per_hypothesis = 200;

    void validate() const;
};

/// Number of covariance repairs (symmetrize + jitter) performed so far.
std::uint64_t psd_repairs();
/// Symmetrizes and, if not positive definite, adds growing jitter.
void ensure_psd(Mat4& P);

struct KalmanUpdate {
    Vec4 mean;
    Mat4 cov;
    double likelihood = 0.0;
    double log_likelihood = 0.0;
    double mahalanobis2 = 0.0;
};

void kalman_predict(Vec4& mean, Mat4& cov, const MotionModel& model);
KalmanUpdate kalman_update(const Vec4& mean, const Mat4& cov, const Vec2& z, const Eigen::Matrix2d& R,
                           const MotionModel& model);

GaussianComponent kalman_predict(const GaussianComponent& c, const MotionModel& model);

using Mixture = std::vector<GaussianComponent>;

Mixture phd_predict(const Mixture& mixture, const MotionModel& model, const Mixture& births);
Mixture phd_update(const Mixture& predicted, const std::vector<clustering::Measurement>& measurements,
                   const MotionModel& model);
Mixture phd_prune_cap(const Mixture& mixture, const TrackerConfig& cfg);
/// Greedy moment-matched merge around the heaviest remaining component.
Mixture phd_merge(const Mixture& mixture, double threshold);
Mixture phd_postprocess(const Mixture& mixture, const TrackerConfig& cfg);

struct TrackEstimate {
    int track_id = 0;
    Vec4 state = Vec4::Zero();
    double score = 0.0;   // PHD weight or existence probability
    std::optional<TargetClass> cls;
};

/// round(sum w) heaviest components, ties by lower track id.
std::vector<TrackEstimate> phd_estimate(const Mixture& mixture);

double missed_existence(double r, double detection_prob);

MbmDistribution mbm_predict(const MbmDistribution& dist, const MotionModel& model,
                            const std::vector<Bernoulli>& births);
MbmDistribution mbm_update(const MbmDistribution& predicted, const std::vector<clustering::Measurement>& measurements,
                           const MotionModel& model, const TrackerConfig& cfg);
MbmDistribution mbm_postprocess(const MbmDistribution& dist, const TrackerConfig& cfg);
std::vector<TrackEstimate> mbm_estimate(const MbmDistribution& dist, double existence_thresh);
/// Index of the heaviest hypothesis (first on ties), or -1 when empty.
int best_hypothesis(const MbmDistribution& dist);

enum class FilterKind { phd, mbm };
std::string to_string(FilterKind k);
FilterKind filter_kind_from_string(const std::string& s);

struct StepOutput {
    std::vector<TrackEstimate> estimates;
    std::vector<clustering::PredictedTrack> predicted;   // for scan t+1
};

class Tracker {
public:
    Tracker(const MotionModel& model, const TrackerConfig& cfg, const Vec2& area_center);
    virtual ~Tracker() = default;

    virtual FilterKind kind() const = 0;
    /// predict -> update -> postprocess -> estimate. The first call seeds
    /// tracks from the measurements with covariance initial_cov * I4.
    StepOutput step(const clustering::MeasurementSet& measurements);
    /// Attaches a class label to every component carrying `track_id`.
    virtual void set_label(int track_id, TargetClass cls) = 0;

    const MotionModel& model() const { return model_; }
    const TrackerConfig& config() const { return cfg_; }

protected:
    virtual void seed(const std::vector<clustering::Measurement>& measurements) = 0;
    virtual void advance(const std::vector<BirthComponent>& births, const std::vector<int>& birth_ids,
                         const std::vector<clustering::Measurement>& measurements) = 0;
    virtual std::vector<TrackEstimate> estimate() const = 0;

    int next_id() { return next_id_++; }

    MotionModel model_;
    TrackerConfig cfg_;
    Vec2 area_center_;

private:
    bool initialized_ = false;
    int next_id_ = 1;
    std::vector<Vec2> pending_births_;
};

class PhdTracker : public Tracker {
public:
    using Tracker::Tracker;
    FilterKind kind() const override { return FilterKind::phd; }
    void set_label(int track_id, TargetClass cls) override;
    const Mixture& mixture() const { return mixture_; }

protected:
    void seed(const std::vector<clustering::Measurement>& measurements) override;
    void advance(const std::vector<BirthComponent>& births, const std::vector<int>& birth_ids,
                 const std::vector<clustering::Measurement>& measurements) override;
    std::vector<TrackEstimate> estimate() const override;

private:
    Mixture mixture_;
};

class MbmTracker : public Tracker {
public:
    using Tracker::Tracker;
    FilterKind kind() const override { return FilterKind::mbm; }
    void set_label(int track_id, TargetClass cls) override;
    const MbmDistribution& distribution() const { return dist_; }

protected:
    void seed(const std::vector<clustering::Measurement>& measurements) override;
    void advance(const std::vector<BirthComponent>& births, const std::vector<int>& birth_ids,
                 const std::vector<clustering::Measurement>& measurements) override;
    std::vector<TrackEstimate> estimate() const override;

private:
    MbmDistribution dist_;
};

std::unique_ptr<Tracker> make_tracker(FilterKind kind, const MotionModel& model, const TrackerConfig& cfg,
                                      const Vec2& area_center);

}  // namespace isac::tracking
