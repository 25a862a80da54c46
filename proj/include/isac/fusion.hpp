#pragma once

#include "isac/common.hpp"
#include "isac/scenario.hpp"
#include "isac/sensing.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace isac::fusion {

/// Uniform Cartesian grid; cell (ix, iy) is centered at
/// (x_min + (ix + 0.5) dx, y_min + (iy + 0.5) dy).
struct GridSpec {
    double x_min = -20.0;
    double y_min = -20.0;
    double dx_m = 0.1;
    double dy_m = 0.1;
    int nx = 400;
    int ny = 400;

    Vec2 cell_center(int ix, int iy) const { return {x_min + (ix + 0.5) * dx_m, y_min + (iy + 0.5) * dy_m}; }
    /// Nearest cell index; may fall outside [0, n).
    int col_of(double x) const;
    int row_of(double y) const;
    bool operator==(const GridSpec&) const = default;
    void validate() const;

    static GridSpec covering(const scenario::SurveillanceArea& area, double dx, double dy);
};

using CoverageMatrix = Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic>;

struct SoftMap {
    Eigen::MatrixXd values;   // ny x nx (row = y index)
    CoverageMatrix coverage;  // number of BSs whose field of view covers each cell
    GridSpec grid;
    int scan_index = 0;
    std::vector<int> contributing_bs;
};

/// Rotates/translates a polar map into the grid frame and bilinearly
/// interpolates it; cells outside the BS field of view or range span are 0.
SoftMap resample_to_grid(const sensing::RangeAngleMap& map, const scenario::BsPose& bs, const GridSpec& grid);

/// Element-wise sum in ascending BS-id order.
SoftMap fuse(std::span<const SoftMap> maps);

}  // namespace isac::fusion
