#include "isac/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace isac::scenario {

void RadioParams::validate() const {
    if (num_subcarriers < 1) throw ConfigError("num_subcarriers must be >= 1");
    if (sensing_symbols < 1 || sensing_symbols > symbols_per_frame)
        throw ConfigError("sensing_symbols must lie in [1, symbols_per_frame]");
    if (sensing_power_fraction < 0.0 || sensing_power_fraction > 1.0)
        throw ConfigError("sensing_power_fraction must lie in [0, 1]");
    if (carrier_freq_hz <= 0 || subcarrier_spacing_hz <= 0 || eirp_watts <= 0 || rx_element_gain <= 0 ||
        noise_psd_w_per_hz <= 0 || cp_fraction < 0)
        throw ConfigError("radio parameters must be positive");
    if (num_tx_antennas < 1 || num_rx_antennas < 1) throw ConfigError("antenna counts must be >= 1");
}

int BsPose::num_scan_dirs() const {
    return static_cast<int>(std::lround(2.0 * scan_halfwidth_rad / scan_step_rad)) + 1;
}

std::vector<double> BsPose::scan_dirs() const {
    const int n = num_scan_dirs();
    const double start = -0.5 * (n - 1) * scan_step_rad;
    std::vector<double> dirs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) dirs[static_cast<std::size_t>(i)] = start + i * scan_step_rad;
    return dirs;
}

double BsPose::bearing_to(const Vec2& p) const {
    const Vec2 d = p - position_m;
    return wrap_angle(std::atan2(d.y(), d.x()) - boresight_rad);
}

void BsPose::validate() const {
    if (scan_step_rad <= 0.0 || scan_halfwidth_rad <= 0.0)
        throw ConfigError("BS " + std::to_string(id) + ": scan step and half-width must be positive");
    const double ratio = 2.0 * scan_halfwidth_rad / scan_step_rad;
    if (std::abs(ratio - std::round(ratio)) > 1e-6)
        throw ConfigError("BS " + std::to_string(id) + ": 2*scan_halfwidth must be a multiple of scan_step");
    if (scan_halfwidth_rad >= kPi / 2) throw ConfigError("scan half-width must be below 90 degrees");
}

double Trajectory::horizon_s() const {
    double h = 0.0;
    for (const auto& s : segments) h += s.duration_s;
    return h;
}

namespace {

KinematicState initial_state(const Trajectory& tr) {
    KinematicState s;
    s.position = tr.initial_position;
    s.heading_rad = tr.initial_heading_rad;
    s.speed_mps = tr.initial_speed_mps;
    s.velocity = s.speed_mps * Vec2(std::cos(s.heading_rad), std::sin(s.heading_rad));
    return s;
}

KinematicState propagate(const KinematicState& s0, const MotionPrimitive& m, double dt) {
    KinematicState s = s0;
    const Vec2 dir(std::cos(s0.heading_rad), std::sin(s0.heading_rad));
    switch (m.kind) {
    case MotionKind::static_hold:
        s.speed_mps = 0.0;
        break;
    case MotionKind::uniform:
        s.position = s0.position + s0.speed_mps * dt * dir;
        break;
    case MotionKind::accelerate: {
        double t_move = dt;
        if (m.accel_mps2 < 0.0) t_move = std::min(dt, s0.speed_mps / -m.accel_mps2);
        s.speed_mps = std::max(0.0, s0.speed_mps + m.accel_mps2 * t_move);
        const double dist = s0.speed_mps * t_move + 0.5 * m.accel_mps2 * t_move * t_move;
        s.position = s0.position + dist * dir;
        break;
    }
    case MotionKind::turn: {
        const double w = m.turn_rate_rps;
        if (std::abs(w) < 1e-12) {
            s.position = s0.position + s0.speed_mps * dt * dir;
        } else {
            const double h1 = s0.heading_rad + w * dt;
            const double r = s0.speed_mps / w;
            s.position = s0.position + r * Vec2(std::sin(h1) - std::sin(s0.heading_rad),
                                                std::cos(s0.heading_rad) - std::cos(h1));
            s.heading_rad = h1;
        }
        break;
    }
    }
    s.velocity = s.speed_mps * Vec2(std::cos(s.heading_rad), std::sin(s.heading_rad));
    return s;
}

}  // namespace

void Trajectory::validate() const {
    if (segments.empty()) throw ConfigError("trajectory has no motion primitives");
    KinematicState s = initial_state(*this);
    if (s.speed_mps < 0) throw ConfigError("initial speed must be nonnegative");
    for (const auto& m : segments) {
        if (m.duration_s <= 0.0) throw ConfigError("motion primitive duration must be positive");
        if (m.kind == MotionKind::static_hold && s.speed_mps > 1e-9)
            throw ConfigError("static primitive entered with nonzero speed (decelerate first)");
        s = propagate(s, m, m.duration_s);
    }
}

KinematicState advance(const Trajectory& trajectory, double t_s) {
    const double horizon = trajectory.horizon_s();
    if (t_s < 0.0 || t_s > horizon * (1.0 + 1e-12) + 1e-12)
        throw std::out_of_range("time " + std::to_string(t_s) + " s outside trajectory horizon " +
                                std::to_string(horizon) + " s");
    KinematicState s = initial_state(trajectory);
    double t = t_s;
    for (const auto& m : trajectory.segments) {
        if (t <= m.duration_s) return propagate(s, m, t);
        s = propagate(s, m, m.duration_s);
        t -= m.duration_s;
    }
    return s;
}

double RcsTable::mean_for(ReflectorKind kind) const {
    switch (kind) {
    case ReflectorKind::pedestrian: return pedestrian_m2;
    case ReflectorKind::surface: return surface_m2;
    case ReflectorKind::wheelhouse: return wheelhouse_m2;
    case ReflectorKind::corner: return corner_m2;
    }
    return 0.0;
}

double path_loss_factor(double rcs_m2, double distance_m, double carrier_hz) {
    const double four_pi_cubed = std::pow(4.0 * kPi, 3);
    return kSpeedOfLight * kSpeedOfLight * rcs_m2 /
           (four_pi_cubed * carrier_hz * carrier_hz * std::pow(distance_m, 4));
}

namespace {

struct BodyReflector {
    Vec2 offset;         // body frame: x forward, y left
    Vec2 normal;         // outward direction used by the visibility test
    ReflectorKind kind;
    double halfwidth;    // visibility aperture; negative = always visible
};

std::vector<BodyReflector> vehicle_body(const TargetTruth& t, const VisibilityConfig& vis) {
    const double hl = 0.5 * t.length_m;
    const double hw = 0.5 * t.width_m;
    std::vector<BodyReflector> pts;
    pts.reserve(12);
    // surfaces: front, back, left, right
    pts.push_back({{hl, 0.0}, {1.0, 0.0}, ReflectorKind::surface, vis.surface_halfwidth_rad});
    pts.push_back({{-hl, 0.0}, {-1.0, 0.0}, ReflectorKind::surface, vis.surface_halfwidth_rad});
    pts.push_back({{0.0, hw}, {0.0, 1.0}, ReflectorKind::surface, vis.surface_halfwidth_rad});
    pts.push_back({{0.0, -hw}, {0.0, -1.0}, ReflectorKind::surface, vis.surface_halfwidth_rad});
    for (double sx : {1.0, -1.0})
        for (double sy : {1.0, -1.0})
            pts.push_back({{sx * vis.wheel_offset_m, sy * hw}, {0.0, sy}, ReflectorKind::wheelhouse, -1.0});
    for (double sx : {1.0, -1.0})
        for (double sy : {1.0, -1.0}) {
            const Vec2 c(sx * hl, sy * hw);
            pts.push_back({c, c.normalized(), ReflectorKind::corner, vis.corner_halfwidth_rad});
        }
    return pts;
}

ReflectionPoint make_point(const Vec2& pos, const Vec2& vel, ReflectorKind kind, double mean_rcs,
                           const BsPose& bs, const RadioParams& radio, Rng& rng, int target_id) {
    ReflectionPoint p;
    p.position_m = pos;
    p.kind = kind;
    p.mean_rcs_m2 = mean_rcs;
    p.target_id = target_id;
    const Vec2 los = pos - bs.position_m;
    p.distance_m = los.norm();
    p.doa_rad = bs.bearing_to(pos);
    p.radial_speed_mps = p.distance_m > 0 ? -vel.dot(los) / p.distance_m : 0.0;
    p.doppler_hz = 2.0 * radio.carrier_freq_hz * p.radial_speed_mps / kSpeedOfLight;
    p.delay_s = 2.0 * p.distance_m / kSpeedOfLight;

    // Both draws always happen so the stream layout does not depend on the mean.
    std::exponential_distribution<double> unit_exp(1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const double e = unit_exp(rng);
    const double phi = phase(rng);
    p.drawn_rcs_m2 = mean_rcs > 0.0 ? mean_rcs * e : 0.0;
    if (p.drawn_rcs_m2 > 0.0 && p.distance_m > 0.0) {
        const double mag = std::sqrt(path_loss_factor(p.drawn_rcs_m2, p.distance_m, radio.carrier_freq_hz));
        p.path_gain = std::polar(mag, phi);
    }
    return p;
}

}  // namespace

std::vector<ReflectionPoint> target_reflectors(const TargetTruth& target, const BsPose& bs, double t_s,
                                               const RadioParams& radio, Rng& rng, const RcsTable& rcs,
                                               const VisibilityConfig& vis) {
    const KinematicState st = advance(target.trajectory, t_s);
    std::vector<ReflectionPoint> out;
    auto in_front = [&](const Vec2& p) { return std::abs(bs.bearing_to(p)) < kPi / 2; };

    if (target.cls == TargetClass::pedestrian) {
        auto p = make_point(st.position, st.velocity, ReflectorKind::pedestrian, rcs.pedestrian_m2, bs, radio,
                            rng, target.id);
        if (in_front(st.position)) out.push_back(p);
        return out;
    }

    const double ch = std::cos(st.heading_rad), sh = std::sin(st.heading_rad);
    Eigen::Matrix2d rot;
    rot << ch, -sh, sh, ch;
    for (const auto& br : vehicle_body(target, vis)) {
        const Vec2 pos = st.position + rot * br.offset;
        auto p = make_point(pos, st.velocity, br.kind, rcs.mean_for(br.kind), bs, radio, rng, target.id);
        bool visible = in_front(pos);
        if (visible && br.halfwidth >= 0.0) {
            const Vec2 to_bs = (bs.position_m - pos).normalized();
            const Vec2 n = rot * br.normal;
            visible = std::acos(std::clamp(n.dot(to_bs), -1.0, 1.0)) <= br.halfwidth;
        }
        if (visible) out.push_back(p);
    }
    return out;
}

void Scenario::validate() const {
    radio.validate();
    if (base_stations.empty()) throw ConfigError("scenario has no base stations");
    for (const auto& bs : base_stations) bs.validate();
    if (scan_period_s <= 0.0) throw ConfigError("scan period must be positive");
    if (num_scans < 1) throw ConfigError("num_scans must be >= 1");
    const double needed = scan_time(num_scans - 1);
    for (const auto& t : targets) {
        t.trajectory.validate();
        if (t.trajectory.horizon_s() + 1e-9 < needed)
            throw ConfigError("target " + std::to_string(t.id) + " trajectory shorter than the simulation");
    }
}

std::vector<TruthState> truth_at(const Scenario& scenario, double t_s) {
    std::vector<TruthState> out;
    out.reserve(scenario.targets.size());
    for (const auto& t : scenario.targets) {
        const auto st = advance(t.trajectory, t_s);
        out.push_back({t.id, t.cls, st.position, st.velocity});
    }
    return out;
}

std::vector<ReflectionPoint> scan_reflectors(const Scenario& scenario, const BsPose& bs, int scan) {
    std::vector<ReflectionPoint> all;
    const double t = scenario.scan_time(scan);
    for (const auto& target : scenario.targets) {
        Rng rng = make_rng(scenario.seed, Stream::reflectors,
                           {static_cast<std::uint64_t>(bs.id), static_cast<std::uint64_t>(scan),
                            static_cast<std::uint64_t>(target.id)});
        auto pts = target_reflectors(target, bs, t, scenario.radio, rng, scenario.rcs, scenario.visibility);
        all.insert(all.end(), pts.begin(), pts.end());
    }
    return all;
}

std::vector<BsPose> ring_layout(int count, double radius_m, const Vec2& center, double scan_halfwidth_rad,
                                double scan_step_rad) {
    std::vector<BsPose> out;
    for (int i = 0; i < count; ++i) {
        const double a = 2.0 * kPi * i / count;
        BsPose bs;
        bs.id = i;
        bs.position_m = center + radius_m * Vec2(std::cos(a), std::sin(a));
        bs.boresight_rad = wrap_angle(a + kPi);
        bs.scan_halfwidth_rad = scan_halfwidth_rad;
        bs.scan_step_rad = scan_step_rad;
        out.push_back(bs);
    }
    return out;
}

std::vector<TargetTruth> random_targets(int num_pedestrians, int num_vehicles, double horizon_s,
                                        const SurveillanceArea& area, std::uint64_t seed,
                                        double min_separation_m) {
    Rng rng = make_rng(seed, Stream::scenario_gen);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double margin = 6.0;
    std::vector<Vec2> starts;
    std::vector<TargetTruth> out;
    const int total = num_pedestrians + num_vehicles;
    for (int i = 0; i < total; ++i) {
        const bool vehicle = i >= num_pedestrians;
        Vec2 p;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            p = {area.x_min + margin + unit(rng) * (area.x_max - area.x_min - 2 * margin),
                 area.y_min + margin + unit(rng) * (area.y_max - area.y_min - 2 * margin)};
            bool ok = true;
            for (const auto& q : starts) ok = ok && (p - q).norm() >= min_separation_m;
            if (ok) break;
        }
        starts.push_back(p);

        TargetTruth t;
        t.id = i;
        t.cls = vehicle ? TargetClass::vehicle : TargetClass::pedestrian;
        const double vmax = vehicle ? 6.0 : 1.6;
        const double amax = vehicle ? 2.0 : 0.6;
        t.trajectory.initial_position = p;
        t.trajectory.initial_heading_rad = wrap_angle(2.0 * kPi * unit(rng));
        t.trajectory.initial_speed_mps = (0.3 + 0.7 * unit(rng)) * vmax;

        KinematicState s = advance(Trajectory{p, t.trajectory.initial_heading_rad,
                                              t.trajectory.initial_speed_mps,
                                              {{MotionKind::uniform, 1e-9, 0, 0}}},
                                   0.0);
        double elapsed = 0.0;
        while (elapsed < horizon_s) {
            MotionPrimitive m;
            m.duration_s = std::min(horizon_s - elapsed, 0.8 + 1.7 * unit(rng)) + 1e-6;
            const double pick = unit(rng);
            if (s.speed_mps < 1e-9) {
                if (pick < 0.4) {
                    m.kind = MotionKind::static_hold;
                } else {
                    m.kind = MotionKind::accelerate;
                    m.accel_mps2 = amax * (0.5 + 0.5 * unit(rng));
                    m.duration_s = std::min(m.duration_s, vmax / m.accel_mps2);
                }
            } else if (pick < 0.35) {
                m.kind = MotionKind::turn;
                // Turn toward the area center so targets stay inside.
                const Vec2 to_c = area.center() - s.position;
                const double rel = wrap_angle(std::atan2(to_c.y(), to_c.x()) - s.heading_rad);
                const double sign = rel >= 0 ? 1.0 : -1.0;
                m.turn_rate_rps = sign * (0.3 + 0.5 * unit(rng));
            } else if (pick < 0.6) {
                m.kind = MotionKind::accelerate;
                const bool slow = unit(rng) < 0.5;
                m.accel_mps2 = (slow ? -1.0 : 1.0) * amax * (0.5 + 0.5 * unit(rng));
                if (!slow) m.duration_s = std::min(m.duration_s, std::max(0.05, (vmax - s.speed_mps) / m.accel_mps2));
            } else {
                m.kind = MotionKind::uniform;
            }
            t.trajectory.segments.push_back(m);
            s = advance(t.trajectory, t.trajectory.horizon_s());
            elapsed = t.trajectory.horizon_s();
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace isac::scenario
