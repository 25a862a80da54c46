#include "isac/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace isac::fusion {

int GridSpec::col_of(double x) const { return static_cast<int>(std::floor((x - x_min) / dx_m)); }
int GridSpec::row_of(double y) const { return static_cast<int>(std::floor((y - y_min) / dy_m)); }

void GridSpec::validate() const {
    if (dx_m <= 0.0 || dy_m <= 0.0) throw ConfigError("grid resolution must be positive");
    if (nx < 1 || ny < 1) throw ConfigError("grid must have at least one cell per axis");
}

GridSpec GridSpec::covering(const scenario::SurveillanceArea& area, double dx, double dy) {
    GridSpec g;
    g.x_min = area.x_min;
    g.y_min = area.y_min;
    g.dx_m = dx;
    g.dy_m = dy;
    g.nx = static_cast<int>(std::lround((area.x_max - area.x_min) / dx));
    g.ny = static_cast<int>(std::lround((area.y_max - area.y_min) / dy));
    return g;
}

SoftMap resample_to_grid(const sensing::RangeAngleMap& map, const scenario::BsPose& bs, const GridSpec& grid) {
    SoftMap out;
    out.grid = grid;
    out.scan_index = map.scan_index;
    out.contributing_bs = {map.bs_id};
    out.values = Eigen::MatrixXd::Zero(grid.ny, grid.nx);
    out.coverage = CoverageMatrix::Zero(grid.ny, grid.nx);

    const int n_range = map.num_range_bins();
    const int n_dirs = static_cast<int>(map.scan_dirs_rad.size());
    if (n_range < 1 || n_dirs < 1 || map.range_bin_m <= 0.0) return out;
    const double first_dir = map.scan_dirs_rad.front();
    const double step = n_dirs > 1 ? map.angle_step_rad() : 1.0;

    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const Vec2 c = grid.cell_center(ix, iy);
            const double range = (c - bs.position_m).norm();
            const double bearing = bs.bearing_to(c);
            const double fr = range / map.range_bin_m;
            const double fa = n_dirs > 1 ? (bearing - first_dir) / step : 0.0;
            if (fr > n_range - 1 || fa < 0.0 || fa > n_dirs - 1) continue;
            if (n_dirs == 1 && std::abs(bearing - first_dir) > 1e-12) continue;

            const int r0 = std::min(static_cast<int>(fr), n_range - 1);
            const int a0 = std::min(static_cast<int>(fa), n_dirs - 1);
            const int r1 = std::min(r0 + 1, n_range - 1);
            const int a1 = std::min(a0 + 1, n_dirs - 1);
            const double wr = fr - r0, wa = fa - a0;
            const double v = (1 - wr) * ((1 - wa) * map.values(r0, a0) + wa * map.values(r0, a1)) +
                             wr * ((1 - wa) * map.values(r1, a0) + wa * map.values(r1, a1));
            out.values(iy, ix) = v;
            out.coverage(iy, ix) = 1;
        }
    }
    return out;
}

SoftMap fuse(std::span<const SoftMap> maps) {
    if (maps.empty()) throw std::invalid_argument("fuse: no maps");
    const auto& first = maps.front();
    for (const auto& m : maps) {
        if (!(m.grid == first.grid)) throw std::invalid_argument("fuse: maps use different grids");
        if (m.scan_index != first.scan_index) throw std::invalid_argument("fuse: maps from different scans");
    }
    std::vector<std::size_t> order(maps.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) {
        return maps[i].contributing_bs.empty() ? -1 : *std::min_element(maps[i].contributing_bs.begin(),
                                                                         maps[i].contributing_bs.end());
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

    SoftMap out;
    out.grid = first.grid;
    out.scan_index = first.scan_index;
    out.values = Eigen::MatrixXd::Zero(first.grid.ny, first.grid.nx);
    out.coverage = CoverageMatrix::Zero(first.grid.ny, first.grid.nx);
    for (auto i : order) {
        out.values += maps[i].values;
        if (maps[i].coverage.size() == out.coverage.size()) out.coverage += maps[i].coverage;
        out.contributing_bs.insert(out.contributing_bs.end(), maps[i].contributing_bs.begin(),
                                   maps[i].contributing_bs.end());
    }
    std::sort(out.contributing_bs.begin(), out.contributing_bs.end());
    out.contributing_bs.erase(std::unique(out.contributing_bs.begin(), out.contributing_bs.end()),
                              out.contributing_bs.end());
    return out;
}

}  // namespace isac::fusion
