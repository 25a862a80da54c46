#pragma once

#include "isac/common.hpp"
#include "isac/rng.hpp"

#include <complex>
#include <cstdint>
#include <vector>

namespace isac::scenario {

/// OFDM and link-budget parameters shared by every base station.
struct RadioParams {
    double carrier_freq_hz = 28e9;
    double subcarrier_spacing_hz = 120e3;
    int num_subcarriers = 3168;
    int symbols_per_frame = 1120;
    int sensing_symbols = 112;
    double cp_fraction = 1.0 / 14.0;   // T_cp / T
    double eirp_watts = 1.0;           // P_T * G_T^a
    double rx_element_gain = 1.0;      // G_R, linear
    double noise_psd_w_per_hz = 4e-20;
    int num_tx_antennas = 50;
    int num_rx_antennas = 50;
    double sensing_power_fraction = 0.3;

    double symbol_period_s() const { return 1.0 / subcarrier_spacing_hz; }
    double total_symbol_period_s() const { return symbol_period_s() * (1.0 + cp_fraction); }
    double bandwidth_hz() const { return num_subcarriers * subcarrier_spacing_hz; }
    /// sigma_N^2 = N_0 K Delta_f
    double noise_variance() const { return noise_psd_w_per_hz * bandwidth_hz(); }

    void validate() const;
};

enum class BsRole { sensing_comm, comm_only };

struct BsPose {
    int id = 0;
    Vec2 position_m = Vec2::Zero();
    double boresight_rad = 0.0;
    double scan_halfwidth_rad = deg_to_rad(60.0);
    double scan_step_rad = deg_to_rad(2.4);
    double comm_dir_rad = deg_to_rad(45.0);   // UE direction, relative to boresight
    BsRole role = BsRole::sensing_comm;

    int num_scan_dirs() const;
    /// Scan directions relative to boresight, ascending from -Theta_0.
    std::vector<double> scan_dirs() const;
    /// Bearing of a world point relative to boresight, wrapped to (-pi, pi].
    double bearing_to(const Vec2& p) const;

    void validate() const;
};

enum class MotionKind { static_hold, uniform, accelerate, turn };

struct MotionPrimitive {
    MotionKind kind = MotionKind::uniform;
    double duration_s = 0.0;
    double accel_mps2 = 0.0;      // accelerate: longitudinal acceleration
    double turn_rate_rps = 0.0;   // turn: constant yaw rate
};

struct KinematicState {
    Vec2 position = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();
    double heading_rad = 0.0;
    double speed_mps = 0.0;
};

/// Piecewise motion: each primitive starts from the state the previous one
/// ended in, so position and velocity are continuous at boundaries.
struct Trajectory {
    Vec2 initial_position = Vec2::Zero();
    double initial_heading_rad = 0.0;
    double initial_speed_mps = 0.0;
    std::vector<MotionPrimitive> segments;

    double horizon_s() const;
    void validate() const;
};

/// Kinematic state at time t_s. Throws std::out_of_range beyond the horizon.
KinematicState advance(const Trajectory& trajectory, double t_s);

struct TargetTruth {
    int id = 0;
    TargetClass cls = TargetClass::pedestrian;
    Trajectory trajectory;
    double length_m = 4.5;   // vehicles only
    double width_m = 1.8;
};

enum class ReflectorKind { pedestrian, surface, wheelhouse, corner };

/// Mean RCS per reflector kind (Swerling I means).
struct RcsTable {
    double pedestrian_m2 = 1.0;
    double surface_m2 = 20.0;
    double wheelhouse_m2 = 0.0;
    double corner_m2 = 5.0;

    double mean_for(ReflectorKind kind) const;
};

struct VisibilityConfig {
    double surface_halfwidth_rad = deg_to_rad(30.0);
    double corner_halfwidth_rad = deg_to_rad(80.0);
    double wheel_offset_m = 1.35;
};

struct ReflectionPoint {
    Vec2 position_m = Vec2::Zero();
    double mean_rcs_m2 = 0.0;
    double drawn_rcs_m2 = 0.0;
    ReflectorKind kind = ReflectorKind::pedestrian;
    double distance_m = 0.0;
    double doa_rad = 0.0;          // relative to BS boresight
    double radial_speed_mps = 0.0; // closing speed, positive when approaching
    double doppler_hz = 0.0;
    double delay_s = 0.0;
    std::complex<double> path_gain{0.0, 0.0};
    int target_id = -1;
};

/// |beta|^2 of the two-way free-space path: c^2 sigma / ((4 pi)^3 f_c^2 d^4).
double path_loss_factor(double rcs_m2, double distance_m, double carrier_hz);

/// Reflection points of one target seen by one BS at time t_s. RCS draws are
/// exponential (Swerling I); the caller supplies one RNG substream per
/// (BS, scan, target) so draws are fixed within a scan.
std::vector<ReflectionPoint> target_reflectors(const TargetTruth& target, const BsPose& bs, double t_s,
                                               const RadioParams& radio, Rng& rng,
                                               const RcsTable& rcs = {}, const VisibilityConfig& vis = {});

struct SurveillanceArea {
    double x_min = -20.0, x_max = 20.0, y_min = -20.0, y_max = 20.0;
    double area_m2() const { return (x_max - x_min) * (y_max - y_min); }
    Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
    bool contains(const Vec2& p) const {
        return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
    }
};

struct Scenario {
    RadioParams radio;
    std::vector<BsPose> base_stations;
    std::vector<TargetTruth> targets;
    SurveillanceArea area;
    RcsTable rcs;
    VisibilityConfig visibility;
    double scan_period_s = 0.05;
    int num_scans = 200;
    std::uint64_t seed = 1;

    double scan_time(int scan) const { return scan * scan_period_s; }
    void validate() const;
};

struct TruthState {
    int id = 0;
    TargetClass cls = TargetClass::pedestrian;
    Vec2 position = Vec2::Zero();
    Vec2 velocity = Vec2::Zero();
};

std::vector<TruthState> truth_at(const Scenario& scenario, double t_s);

/// All reflectors of all targets for one (BS, scan), each target drawing from
/// its own substream.
std::vector<ReflectionPoint> scan_reflectors(const Scenario& scenario, const BsPose& bs, int scan);

/// N BSs evenly spaced on a circle around `center`, boresights toward it.
std::vector<BsPose> ring_layout(int count, double radius_m, const Vec2& center, double scan_halfwidth_rad,
                                double scan_step_rad);

/// Random targets with mixed motion primitives, starting at least
/// `min_separation_m` apart inside the inner part of `area`.
std::vector<TargetTruth> random_targets(int num_pedestrians, int num_vehicles, double horizon_s,
                                        const SurveillanceArea& area, std::uint64_t seed,
                                        double min_separation_m = 8.0);

}  // namespace isac::scenario
