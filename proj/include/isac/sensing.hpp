#pragma once

#include "isac/common.hpp"
#include "isac/rng.hpp"
#include "isac/scenario.hpp"

#include <complex>
#include <span>
#include <vector>

namespace isac::sensing {

using cd = std::complex<double>;

enum class GridRole { tx, rx, quotient };

/// K x M_s grid of OFDM symbols (rows: subcarriers, columns: symbols).
struct SymbolGrid {
    Eigen::MatrixXcd entries;
    GridRole role = GridRole::tx;

    int num_subcarriers() const { return static_cast<int>(entries.rows()); }
    int num_symbols() const { return static_cast<int>(entries.cols()); }
};

struct BeamWeights {
    Eigen::VectorXcd tx_weights;
    Eigen::VectorXcd rx_weights;
    double sense_dir_rad = 0.0;
    double comm_dir_rad = 0.0;
};

/// Half-wavelength ULA steering vector, a(theta)_n = exp(j pi n sin theta).
Eigen::VectorXcd steering_vector(int num_elements, double theta_rad);

/// Normalized two-direction array gain |a^T(theta_l) a*(theta_s)|^2 / N^2.
double array_gain_factor(int num_elements, double sense_dir_rad, double doa_rad);

/// i.i.d. uniform QPSK symbols with unit modulus.
SymbolGrid make_tx_grid(int num_subcarriers, int num_symbols, Rng& rng);

/// Multi-beam precoder splitting power between sensing and communication
/// beams; the receive combiner is matched to the sensing direction.
BeamWeights tx_beamformer(const scenario::RadioParams& radio, double sense_dir_rad, double comm_dir_rad);

/// Per-antenna received vector for one (subcarrier, symbol) before combining.
Eigen::VectorXcd antenna_rx(int k, int m, const SymbolGrid& tx, const BeamWeights& weights,
                            std::span<const scenario::ReflectionPoint> reflections,
                            const scenario::RadioParams& radio, Rng* noise_rng);

/// Combined received grid y = w_R^T (H w_T x + n). With `noise_rng` null the
/// grid is noise-free. Combined noise is drawn as CN(0, ||w_R||^2 sigma_N^2),
/// which equals the distribution of w_R^T n for i.i.d. per-antenna noise.
SymbolGrid simulate_rx_grid(const SymbolGrid& tx, const BeamWeights& weights,
                            std::span<const scenario::ReflectionPoint> reflections,
                            const scenario::RadioParams& radio, Rng* noise_rng);

/// Per-antenna sensing SNR of one reflection for a given normalized array gain.
double sensing_snr(const scenario::ReflectionPoint& reflection, const scenario::RadioParams& radio,
                   double array_gain);

struct PeriodogramOptions {
    int range_zero_pad = 1;
    int doppler_zero_pad = 1;
};

/// Reciprocal filtering followed by the double periodogram. Output is
/// (range_zero_pad*K) x (doppler_zero_pad*M_s); a unit tone maps to 1.
Eigen::MatrixXd range_doppler_map(const SymbolGrid& rx, const SymbolGrid& tx, const PeriodogramOptions& opt = {});

struct RangeAngleMap {
    Eigen::MatrixXd values;   // range bins x scan directions
    double range_bin_m = 0.0;
    std::vector<double> scan_dirs_rad;
    int bs_id = 0;
    int scan_index = 0;

    int num_range_bins() const { return static_cast<int>(values.rows()); }
    double angle_step_rad() const {
        return scan_dirs_rad.size() > 1 ? scan_dirs_rad[1] - scan_dirs_rad[0] : 0.0;
    }
};

/// Range-bin width c / (2 N_fft Delta_f).
double range_bin_m(const scenario::RadioParams& radio, int range_zero_pad);

/// Per direction, keeps the Doppler column holding that map's global maximum.
RangeAngleMap range_angle_map(std::span<const Eigen::MatrixXd> per_direction_maps, std::span<const double> scan_dirs,
                              double range_bin, int bs_id = 0, int scan_index = 0);

struct SensingOptions {
    PeriodogramOptions periodogram;
    bool noise = true;
    /// Synthesize maps from closed-form tone responses plus exponential bin
    /// noise instead of simulating the symbol grids.
    bool fast = false;
};

/// Full per-BS signal chain for one scan: one tx grid, channel and
/// periodogram per scan direction.
RangeAngleMap generate_range_angle_map(const scenario::Scenario& scenario, const scenario::BsPose& bs, int scan,
                                       std::span<const scenario::ReflectionPoint> reflections,
                                       const SensingOptions& opt);

/// Mean periodogram value of a pure-noise bin: ||w_R||^2 sigma_N^2 / (K M_s).
double noise_bin_mean(const scenario::RadioParams& radio);

}  // namespace isac::sensing
