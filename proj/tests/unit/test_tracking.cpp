#include "isac/tracking.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace isac;
using namespace isac::tracking;

namespace {

clustering::Measurement meas(double x, double y, double var = 0.01) {
    clustering::Measurement m;
    m.z = {x, y};
    m.R = var * Eigen::Matrix2d::Identity();
    m.count = 1;
    return m;
}

clustering::MeasurementSet scan_of(std::vector<clustering::Measurement> ms, int k = 0) {
    clustering::MeasurementSet s;
    s.scan_index = k;
    s.measurements = std::move(ms);
    return s;
}

double gauss2(const Vec2& x, const Vec2& mu, const Eigen::Matrix2d& S) {
    const Vec2 d = x - mu;
    return std::exp(-0.5 * d.dot(S.inverse() * d)) / (2 * kPi * std::sqrt(S.determinant()));
}

Bernoulli bern(double r, double x, double y, int id) {
    Bernoulli b;
    b.r = r;
    b.mean = Vec4(x, y, 0, 0);
    b.cov = 0.2 * Mat4::Identity();
    b.track_id = id;
    return b;
}

}  // namespace

TEST_SUITE("tracking") {

TEST_CASE("constant-velocity prediction") {
    MotionModel model;
    Vec4 m(1, 2, 3, -4);
    Mat4 P = Mat4::Identity();
    kalman_predict(m, P, model);
    CHECK(m.isApprox(Vec4(1.15, 1.8, 3, -4)));
    Mat4 expect = Mat4::Identity() * (1.0 + 0.25);
    expect(0, 0) = expect(1, 1) = 1.0 + 0.0025 + 0.25;
    expect(0, 2) = expect(2, 0) = expect(1, 3) = expect(3, 1) = 0.05;
    CHECK(P.isApprox(expect));
}

TEST_CASE("kalman update equals the information-form posterior") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    MotionModel model;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::Matrix4d A = Eigen::Matrix4d::NullaryExpr([&] { return n(rng); });
        const Mat4 P = A * A.transpose() + 0.1 * Mat4::Identity();
        const Vec4 m = Vec4::NullaryExpr([&] { return n(rng); });
        Eigen::Matrix2d B = Eigen::Matrix2d::NullaryExpr([&] { return n(rng); });
        const Eigen::Matrix2d R = B * B.transpose() + 0.05 * Eigen::Matrix2d::Identity();
        const Vec2 z(n(rng), n(rng));
        const auto u = kalman_update(m, P, z, R, model);

        const Mat24 H = MotionModel::H();
        const Mat4 info = P.inverse() + H.transpose() * R.inverse() * H;
        const Mat4 post = info.inverse();
        const Vec4 mean = post * (P.inverse() * m + H.transpose() * R.inverse() * z);
        CHECK((u.mean - mean).norm() < 1e-8 * (1 + mean.norm()));
        CHECK((u.cov - post).norm() < 1e-8 * (1 + post.norm()));
        const Eigen::Matrix2d S = H * P * H.transpose() + R;
        CHECK(u.likelihood == doctest::Approx(gauss2(z, H * m, S)).epsilon(1e-10));
    }
}

TEST_CASE("filter is consistent on simulated constant-velocity motion") {
    // Average NEES of the updated state over many runs is chi-square with 4 dof.
    MotionModel model;
    model.process_noise_scale = 0.2;
    const Mat4 F = model.F(), Q = model.Q();
    const Eigen::Matrix2d R = 0.04 * Eigen::Matrix2d::Identity();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    Eigen::LLT<Mat4> lq(Q);
    double nees = 0.0;
    int count = 0;
    for (int run = 0; run < 200; ++run) {
        Vec4 x(0, 0, 1, 0.5);
        Vec4 m = x;
        Mat4 P = 0.01 * Mat4::Identity();
        m += Eigen::LLT<Mat4>(P).matrixL() * Vec4::NullaryExpr([&] { return n(rng); });
        for (int k = 0; k < 30; ++k) {
            x = F * x + lq.matrixL() * Vec4::NullaryExpr([&] { return n(rng); });
            kalman_predict(m, P, model);
            const Vec2 z = x.head<2>() + 0.2 * Vec2(n(rng), n(rng));
            const auto u = kalman_update(m, P, z, R, model);
            m = u.mean;
            P = u.cov;
            nees += (x - m).dot(P.inverse() * (x - m));
            ++count;
        }
    }
    CHECK(nees / count == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("PHD update weights follow the closed form") {
    MotionModel model;
    Mixture pred{{0.8, Vec4(0, 0, 0, 0), 0.3 * Mat4::Identity(), 1, {}},
                 {0.5, Vec4(1, 0, 0, 0), 0.3 * Mat4::Identity(), 2, {}}};
    const auto z = meas(0.2, 0.1);
    const auto out = phd_update(pred, {z}, model);
    REQUIRE(out.size() == 4);
    const double pd = model.detection_prob, kappa = model.clutter_density();
    CHECK(out[0].weight == doctest::Approx(0.8 * (1 - pd)));
    CHECK(out[1].weight == doctest::Approx(0.5 * (1 - pd)));
    const Eigen::Matrix2d S = 0.3 * Eigen::Matrix2d::Identity() + z.R;
    const double g1 = gauss2(z.z, {0, 0}, S), g2 = gauss2(z.z, {1, 0}, S);
    const double denom = kappa + pd * (0.8 * g1 + 0.5 * g2);
    CHECK(out[2].weight == doctest::Approx(pd * 0.8 * g1 / denom));
    CHECK(out[3].weight == doctest::Approx(pd * 0.5 * g2 / denom));
    CHECK(out[2].track_id == 1);
    double detected = out[2].weight + out[3].weight;
    CHECK(detected < 1.0);
}

TEST_CASE("PHD with no measurements only scales by the miss probability") {
    MotionModel model;
    Mixture pred{{0.7, Vec4::Zero(), Mat4::Identity(), 1, {}}};
    const auto out = phd_update(pred, {}, model);
    REQUIRE(out.size() == 1);
    CHECK(out[0].weight == doctest::Approx(0.7 * 0.01));
    const auto p = phd_predict(pred, model, {{0.01, Vec4::Ones(), Mat4::Identity(), 9, {}}});
    REQUIRE(p.size() == 2);
    CHECK(p[0].weight == doctest::Approx(0.63));
    CHECK(p[1].track_id == 9);
}

TEST_CASE("pruning drops light components and caps the heaviest") {
    TrackerConfig cfg;
    Mixture mix;
    for (int i = 0; i < 15; ++i) mix.push_back({0.01 * (i + 1), Vec4::Constant(i), Mat4::Identity(), i, {}});
    mix.push_back({5e-5, Vec4::Zero(), Mat4::Identity(), 99, {}});
    const auto out = phd_prune_cap(mix, cfg);
    REQUIRE(out.size() == 10);
    CHECK(out.front().track_id == 14);
    CHECK(out.back().track_id == 5);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].weight >= out[i].weight);
}

TEST_CASE("merging moment-matches nearby components and keeps the leader's id") {
    Mixture mix{{0.6, Vec4(0, 0, 0, 0), 0.1 * Mat4::Identity(), 3, {}},
                {0.3, Vec4(1, 0, 0, 0), 0.2 * Mat4::Identity(), 1, TargetClass::vehicle},
                {0.5, Vec4(20, 0, 0, 0), 0.1 * Mat4::Identity(), 2, {}}};
    const auto out = phd_merge(mix, 5.0);
    REQUIRE(out.size() == 2);
    const auto& m = out[0];
    CHECK(m.track_id == 3);
    CHECK(m.class_label == TargetClass::vehicle);
    CHECK(m.weight == doctest::Approx(0.9));
    const Vec4 mu(0.3 / 0.9, 0, 0, 0);
    CHECK(m.mean.isApprox(mu));
    Mat4 cov = (0.6 * (0.1 * Mat4::Identity() + (Vec4::Zero() - mu) * (Vec4::Zero() - mu).transpose()) +
                0.3 * (0.2 * Mat4::Identity() + (Vec4(1, 0, 0, 0) - mu) * (Vec4(1, 0, 0, 0) - mu).transpose())) /
               0.9;
    CHECK(m.cov.isApprox(cov));
    CHECK(out[1].track_id == 2);
}

TEST_CASE("merging preserves total weight and first moments") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 1.0), pos(-4, 4);
    for (int trial = 0; trial < 20; ++trial) {
        Mixture mix;
        for (int i = 0; i < 12; ++i) mix.push_back({u(rng), Vec4(pos(rng), pos(rng), 0, 0), Mat4::Identity(), i, {}});
        const auto out = phd_merge(mix, 2.0);
        double w0 = 0, w1 = 0;
        Vec4 m0 = Vec4::Zero(), m1 = Vec4::Zero();
        for (const auto& c : mix) w0 += c.weight, m0 += c.weight * c.mean;
        for (const auto& c : out) w1 += c.weight, m1 += c.weight * c.mean;
        CHECK(w1 == doctest::Approx(w0));
        CHECK((m1 - m0).norm() < 1e-9);
        CHECK(out.size() <= mix.size());
        CHECK(out.size() == phd_merge(out, 1e-9).size());
    }
}

TEST_CASE("PHD estimates take round(sum w) heaviest components") {
    Mixture mix{{0.9, Vec4(1, 0, 0, 0), Mat4::Identity(), 4, {}},
                {0.7, Vec4(2, 0, 0, 0), Mat4::Identity(), 2, {}},
                {0.7, Vec4(3, 0, 0, 0), Mat4::Identity(), 1, {}},
                {0.1, Vec4(4, 0, 0, 0), Mat4::Identity(), 3, {}}};
    const auto est = phd_estimate(mix);   // sum 2.4 -> 2
    REQUIRE(est.size() == 2);
    CHECK(est[0].track_id == 4);
    CHECK(est[1].track_id == 1);
    CHECK(phd_estimate({}).empty());
}

TEST_CASE("missed-detection existence") {
    CHECK(missed_existence(0.5, 0.9) == doctest::Approx(0.05 / 0.55));
    CHECK(missed_existence(0.0, 0.9) == 0.0);
    CHECK(missed_existence(1.0, 1.0) == 0.0);
}

TEST_CASE("MBM update enumerates associations with the right weights") {
    MotionModel model;
    TrackerConfig cfg;
    cfg.assoc_gate = 1e9;
    MbmDistribution pred;
    pred.hypotheses.push_back({1.0, {bern(0.9, 0, 0, 1), bern(0.6, 1, 0, 2)}});
    const std::vector<clustering::Measurement> zs{meas(0.1, 0.0), meas(0.9, 0.2)};
    const auto out = mbm_update(pred, zs, model, cfg);
    REQUIRE(out.hypotheses.size() == 7);
    CHECK(out.weight_sum() == doctest::Approx(1.0));

    // Unnormalized weights of every association, by brute force.
    const double pd = model.detection_prob, kappa = model.clutter_density();
    const double r[2] = {0.9, 0.6};
    const Eigen::Matrix2d S = 0.2 * Eigen::Matrix2d::Identity() + 0.01 * Eigen::Matrix2d::Identity();
    auto g = [&](int i, int j) { return gauss2(zs[j].z, Vec2(i == 0 ? 0 : 1, 0), S); };
    std::vector<double> w;
    for (int a = -1; a < 2; ++a)
        for (int b = -1; b < 2; ++b) {
            if (a >= 0 && a == b) continue;
            double v = 1.0;
            v *= a < 0 ? 1 - r[0] * pd : r[0] * pd * g(0, a);
            v *= b < 0 ? 1 - r[1] * pd : r[1] * pd * g(1, b);
            v *= std::pow(kappa, 2 - (a >= 0) - (b >= 0));
            w.push_back(v);
        }
    double s = 0;
    for (double v : w) s += v;
    std::sort(w.begin(), w.end(), std::greater<>());
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(out.hypotheses[k].weight == doctest::Approx(w[k] / s));

    // The best hypothesis assigns each track its own measurement.
    const auto& best = out.hypotheses[static_cast<std::size_t>(best_hypothesis(out))].bernoullis;
    CHECK(best[0].r == 1.0);
    CHECK(best[0].mean.head<2>().isApprox(Vec2(0.1 * 0.2 / 0.21, 0), 1e-9));
}

TEST_CASE("MBM gating excludes far measurements") {
    MotionModel model;
    TrackerConfig cfg;
    MbmDistribution pred;
    pred.hypotheses.push_back({1.0, {bern(1.0, 0, 0, 1)}});
    const auto out = mbm_update(pred, {meas(10, 10)}, model, cfg);
    REQUIRE(out.hypotheses.size() == 1);
    CHECK(out.hypotheses[0].bernoullis[0].r == doctest::Approx(missed_existence(1.0, 0.99)));
}

TEST_CASE("MBM children are capped per parent") {
    MotionModel model;
    TrackerConfig cfg;
    cfg.assoc_gate = 1e9;
    cfg.max_children_per_hypothesis = 3;
    MbmDistribution pred;
    pred.hypotheses.push_back({1.0, {bern(0.9, 0, 0, 1), bern(0.6, 1, 0, 2)}});
    const auto out = mbm_update(pred, {meas(0.1, 0.0), meas(0.9, 0.2)}, model, cfg);
    CHECK(out.hypotheses.size() == 3);
    CHECK(out.weight_sum() == doctest::Approx(1.0));
}

TEST_CASE("MBM postprocess prunes, caps, normalizes and estimates from the best hypothesis") {
    TrackerConfig cfg;
    cfg.mbm_cap = 2;
    MbmDistribution d;
    d.hypotheses.push_back({0.2, {bern(1.0, 0, 0, 1)}});
    d.hypotheses.push_back({0.5, {bern(0.995, 0, 0, 2), bern(0.3, 10, 0, 3), bern(1e-6, 20, 0, 4)}});
    d.hypotheses.push_back({0.1, {}});
    d.hypotheses.push_back({1e-20, {}});
    const auto p = mbm_postprocess(d, cfg);
    REQUIRE(p.hypotheses.size() == 2);
    CHECK(p.hypotheses[0].weight == doctest::Approx(0.5 / 0.7));
    CHECK(p.hypotheses[0].bernoullis.size() == 2);
    const auto est = mbm_estimate(p, 0.99);
    REQUIRE(est.size() == 1);
    CHECK(est[0].track_id == 2);
    CHECK(best_hypothesis(MbmDistribution{}) == -1);
}

TEST_CASE("covariance repair makes matrices positive definite") {
    Mat4 P = Mat4::Identity();
    P(0, 0) = -0.5;
    P(0, 1) = 0.3;
    const auto before = psd_repairs();
    ensure_psd(P);
    CHECK(psd_repairs() == before + 1);
    CHECK(P == P.transpose());
    Eigen::SelfAdjointEigenSolver<Mat4> es(P);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    Mat4 ok = 2 * Mat4::Identity();
    ensure_psd(ok);
    CHECK(psd_repairs() == before + 1);
}

TEST_CASE("both trackers follow two crossing-free targets") {
    MotionModel model;
    TrackerConfig cfg;
    for (auto kind : {FilterKind::phd, FilterKind::mbm}) {
        CAPTURE(to_string(kind));
        auto tr = make_tracker(kind, model, cfg, Vec2::Zero());
        StepOutput out;
        for (int k = 0; k < 40; ++k) {
            const double t = k * model.scan_period_s;
            out = tr->step(scan_of({meas(-5 + 1.0 * t, 2.0), meas(6.0, -3 + 2.0 * t)}, k));
        }
        REQUIRE(out.estimates.size() == 2);
        const double t = 39 * model.scan_period_s;
        std::vector<Vec2> truth{{-5 + t, 2.0}, {6.0, -3 + 2 * t}};
        for (const auto& e : out.estimates) {
            double best = 1e9;
            for (const auto& p : truth) best = std::min(best, (e.state.head<2>() - p).norm());
            CHECK(best < 0.1);
        }
        CHECK(out.predicted.size() == 2);
        CHECK(out.estimates[0].track_id != out.estimates[1].track_id);
    }
}

TEST_CASE("a target appearing later is picked up by the adaptive birth") {
    MotionModel model;
    TrackerConfig cfg;
    for (auto kind : {FilterKind::phd, FilterKind::mbm}) {
        CAPTURE(to_string(kind));
        auto tr = make_tracker(kind, model, cfg, Vec2::Zero());
        StepOutput out;
        for (int k = 0; k < 30; ++k) {
            std::vector<clustering::Measurement> ms{meas(0, 0)};
            if (k >= 5) ms.push_back(meas(10, 10));
            out = tr->step(scan_of(ms, k));
        }
        CHECK(out.estimates.size() == 2);
    }
}

TEST_CASE("labels attach to every component of a track") {
    MotionModel model;
    TrackerConfig cfg;
    PhdTracker phd(model, cfg, Vec2::Zero());
    const auto out = phd.step(scan_of({meas(1, 1)}));
    REQUIRE(out.estimates.size() == 1);
    phd.set_label(out.estimates[0].track_id, TargetClass::vehicle);
    CHECK(phd.step(scan_of({meas(1, 1)}, 1)).estimates[0].cls == TargetClass::vehicle);
    CHECK_THROWS(filter_kind_from_string("jpda"));
}

}
