#include "isac/map_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace isac::map_io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
    return v;
}

void put_u64(std::ostream& os, std::uint64_t v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_i64(std::ostream& os, std::int64_t v) { put_u64(os, static_cast<std::uint64_t>(v)); }
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("map file truncated");
    return to_le(v);
}
std::int64_t get_i64(std::istream& is) { return static_cast<std::int64_t>(get_u64(is)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_values(std::ostream& os, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(os, m(r, c));
}

Eigen::MatrixXd get_values(std::istream& is, std::uint64_t rows, std::uint64_t cols) {
    if (rows > (1u << 24) || cols > (1u << 24)) throw std::runtime_error("map dimensions implausible");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_f64(is);
    return m;
}

std::uint64_t check_header(std::istream& is, std::uint64_t expected_version) {
    if (get_u64(is) != kMagic) throw std::runtime_error("not a map file (bad magic)");
    const auto version = get_u64(is);
    if (version != expected_version) throw std::runtime_error("unexpected map file version " + std::to_string(version));
    return version;
}

}  // namespace

void write_polar(std::ostream& os, const sensing::RangeAngleMap& map) {
    put_u64(os, kMagic);
    put_u64(os, kPolarVersion);
    put_u64(os, static_cast<std::uint64_t>(map.values.rows()));
    put_u64(os, static_cast<std::uint64_t>(map.values.cols()));
    put_f64(os, map.range_bin_m);
    put_f64(os, map.angle_step_rad());
    put_i64(os, map.bs_id);
    put_i64(os, map.scan_index);
    put_values(os, map.values);
}

sensing::RangeAngleMap read_polar(std::istream& is) {
    check_header(is, kPolarVersion);
    const auto rows = get_u64(is), cols = get_u64(is);
    sensing::RangeAngleMap map;
    map.range_bin_m = get_f64(is);
    const double step = get_f64(is);
    map.bs_id = static_cast<int>(get_i64(is));
    map.scan_index = static_cast<int>(get_i64(is));
    map.values = get_values(is, rows, cols);
    const double start = -0.5 * (static_cast<double>(cols) - 1.0) * step;
    for (std::uint64_t i = 0; i < cols; ++i) map.scan_dirs_rad.push_back(start + static_cast<double>(i) * step);
    return map;
}

void write_grid(std::ostream& os, const fusion::SoftMap& map) {
    put_u64(os, kMagic);
    put_u64(os, kGridVersion);
    put_u64(os, static_cast<std::uint64_t>(map.values.rows()));
    put_u64(os, static_cast<std::uint64_t>(map.values.cols()));
    put_f64(os, map.grid.dx_m);
    put_f64(os, map.grid.dy_m);
    put_i64(os, -1);
    put_i64(os, map.scan_index);
    put_f64(os, map.grid.x_min);
    put_f64(os, map.grid.y_min);
    put_values(os, map.values);
}

fusion::SoftMap read_grid(std::istream& is) {
    check_header(is, kGridVersion);
    const auto rows = get_u64(is), cols = get_u64(is);
    fusion::SoftMap map;
    map.grid.dx_m = get_f64(is);
    map.grid.dy_m = get_f64(is);
    (void)get_i64(is);
    map.scan_index = static_cast<int>(get_i64(is));
    map.grid.x_min = get_f64(is);
    map.grid.y_min = get_f64(is);
    map.grid.ny = static_cast<int>(rows);
    map.grid.nx = static_cast<int>(cols);
    map.values = get_values(is, rows, cols);
    map.coverage = fusion::CoverageMatrix::Zero(map.values.rows(), map.values.cols());
    return map;
}

void save_polar(const std::filesystem::path& path, const sensing::RangeAngleMap& map) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_polar(os, map);
}

sensing::RangeAngleMap load_polar(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    return read_polar(is);
}

void save_grid(const std::filesystem::path& path, const fusion::SoftMap& map) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_grid(os, map);
}

fusion::SoftMap load_grid(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    return read_grid(is);
}

void write_csv(std::ostream& os, const Eigen::MatrixXd& values) {
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c) os << ',';
            os << values(r, c);
        }
        os << '\n';
    }
}

}  // namespace isac::map_io
