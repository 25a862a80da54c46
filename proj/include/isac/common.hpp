#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <stdexcept>
#include <string>

namespace isac {

using Vec2 = Eigen::Vector2d;

/// Propagation speed used throughout the link budget and delay model.
inline constexpr double kSpeedOfLight = 3.0e8;
inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double rad);

/// Invalid or inconsistent configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runtime failure inside one pipeline stage.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

enum class TargetClass { pedestrian, vehicle };

std::string to_string(TargetClass c);
TargetClass target_class_from_string(const std::string& s);

}  // namespace isac
