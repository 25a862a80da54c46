#pragma once

#include "isac/fusion.hpp"
#include "isac/sensing.hpp"

#include <filesystem>
#include <iosfwd>

namespace isac::map_io {

/// Binary map dump: eight little-endian 64-bit header fields
///   magic "ISACMAP\0", version, rows, cols, range_bin_m, angle_step_rad,
///   bs_id, scan_index
/// followed by rows*cols float64 values in row-major order. Version 1 is a
/// polar range-angle map (scan directions symmetric about boresight).
/// Version 2 is a Cartesian soft map: range_bin_m/angle_step_rad carry
/// dx/dy, bs_id is -1, and x_min, y_min (float64) precede the values.
inline constexpr std::uint64_t kMagic = 0x0050414d43415349ULL;  // "ISACMAP\0"
inline constexpr std::uint64_t kPolarVersion = 1;
inline constexpr std::uint64_t kGridVersion = 2;

void write_polar(std::ostream& os, const sensing::RangeAngleMap& map);
sensing::RangeAngleMap read_polar(std::istream& is);

void write_grid(std::ostream& os, const fusion::SoftMap& map);
fusion::SoftMap read_grid(std::istream& is);

void save_polar(const std::filesystem::path& path, const sensing::RangeAngleMap& map);
sensing::RangeAngleMap load_polar(const std::filesystem::path& path);
void save_grid(const std::filesystem::path& path, const fusion::SoftMap& map);
fusion::SoftMap load_grid(const std::filesystem::path& path);

/// Plain CSV (one matrix row per line), intended for small maps.
void write_csv(std::ostream& os, const Eigen::MatrixXd& values);

}  // namespace isac::map_io
