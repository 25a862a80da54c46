#pragma once

#include <Eigen/Dense>

namespace isac::detail {

enum class FftSign { forward = -1, backward = +1 };

/// In-place unnormalized DFT of every column of a column-major matrix.
void fft_columns(Eigen::MatrixXcd& m, FftSign sign);
/// In-place unnormalized DFT of every row.
void fft_rows(Eigen::MatrixXcd& m, FftSign sign);

}  // namespace isac::detail
