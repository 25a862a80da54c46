#include "isac/sensing.hpp"

#include "fft.hpp"

#include <cmath>
#include <stdexcept>

namespace isac::sensing {

using scenario::RadioParams;
using scenario::ReflectionPoint;

Eigen::VectorXcd steering_vector(int num_elements, double theta_rad) {
    Eigen::VectorXcd a(num_elements);
    const double s = kPi * std::sin(theta_rad);
    for (int n = 0; n < num_elements; ++n) a[n] = std::polar(1.0, s * n);
    return a;
}

double array_gain_factor(int num_elements, double sense_dir_rad, double doa_rad) {
    const double psi = kPi * (std::sin(doa_rad) - std::sin(sense_dir_rad));
    if (std::abs(std::sin(0.5 * psi)) < 1e-12) return 1.0;
    const double af = std::sin(0.5 * num_elements * psi) / (num_elements * std::sin(0.5 * psi));
    return af * af;
}

SymbolGrid make_tx_grid(int num_subcarriers, int num_symbols, Rng& rng) {
    if (num_subcarriers < 1 || num_symbols < 1) throw std::invalid_argument("grid dimensions must be >= 1");
    static const double h = 1.0 / std::sqrt(2.0);
    static const cd alphabet[4] = {{h, h}, {-h, h}, {-h, -h}, {h, -h}};
    std::uniform_int_distribution<int> pick(0, 3);
    SymbolGrid g;
    g.role = GridRole::tx;
    g.entries.resize(num_subcarriers, num_symbols);
    for (Eigen::Index j = 0; j < g.entries.cols(); ++j)
        for (Eigen::Index i = 0; i < g.entries.rows(); ++i) g.entries(i, j) = alphabet[pick(rng)];
    return g;
}

BeamWeights tx_beamformer(const RadioParams& radio, double sense_dir_rad, double comm_dir_rad) {
    const int nt = radio.num_tx_antennas;
    const double rho = radio.sensing_power_fraction;
    BeamWeights w;
    w.sense_dir_rad = sense_dir_rad;
    w.comm_dir_rad = comm_dir_rad;
    const double scale = std::sqrt(radio.eirp_watts) / nt;
    w.tx_weights = scale * (std::sqrt(rho) * steering_vector(nt, sense_dir_rad).conjugate() +
                            std::sqrt(1.0 - rho) * steering_vector(nt, comm_dir_rad).conjugate());
    w.rx_weights = steering_vector(radio.num_rx_antennas, sense_dir_rad).conjugate();
    return w;
}

namespace {

/// Scalar gain of reflection l after tx precoding and rx combining.
cd combined_gain(const ReflectionPoint& r, const BeamWeights& w, const RadioParams& radio) {
    const cd tx = steering_vector(radio.num_tx_antennas, r.doa_rad).transpose() * w.tx_weights;
    const cd rx = w.rx_weights.transpose() * steering_vector(radio.num_rx_antennas, r.doa_rad);
    return std::sqrt(radio.rx_element_gain) * r.path_gain * tx * rx;
}

cd delay_phase(int k, const ReflectionPoint& r, const RadioParams& radio) {
    return std::polar(1.0, -2.0 * kPi * k * radio.subcarrier_spacing_hz * r.delay_s);
}

cd doppler_phase(int m, const ReflectionPoint& r, const RadioParams& radio) {
    return std::polar(1.0, 2.0 * kPi * m * radio.total_symbol_period_s() * r.doppler_hz);
}

cd complex_normal(Rng& rng, double variance) {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5 * variance));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

}  // namespace

Eigen::VectorXcd antenna_rx(int k, int m, const SymbolGrid& tx, const BeamWeights& weights,
                            std::span<const ReflectionPoint> reflections, const RadioParams& radio, Rng* noise_rng) {
    const int nr = radio.num_rx_antennas;
    const int nt = radio.num_tx_antennas;
    const cd x = tx.entries(k, m);
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(nr);
    for (const auto& r : reflections) {
        if (r.path_gain == cd{}) continue;
        const cd tx_gain = steering_vector(nt, r.doa_rad).transpose() * weights.tx_weights;
        const cd coef = std::sqrt(radio.rx_element_gain) * r.path_gain * doppler_phase(m, r, radio) *
                        delay_phase(k, r, radio) * tx_gain * x;
        y += coef * steering_vector(nr, r.doa_rad);
    }
    if (noise_rng) {
        const double var = radio.noise_variance();
        for (int n = 0; n < nr; ++n) y[n] += complex_normal(*noise_rng, var);
    }
    return y;
}

SymbolGrid simulate_rx_grid(const SymbolGrid& tx, const BeamWeights& weights,
                            std::span<const ReflectionPoint> reflections, const RadioParams& radio, Rng* noise_rng) {
    const int K = tx.num_subcarriers();
    const int M = tx.num_symbols();

    std::vector<const ReflectionPoint*> active;
    for (const auto& r : reflections)
        if (r.path_gain != cd{}) active.push_back(&r);
    const int L = static_cast<int>(active.size());

    SymbolGrid rx;
    rx.role = GridRole::rx;
    if (L > 0) {
        Eigen::MatrixXcd U(K, L), V(M, L);
        for (int l = 0; l < L; ++l) {
            const auto& r = *active[static_cast<std::size_t>(l)];
            const cd b = combined_gain(r, weights, radio);
            for (int k = 0; k < K; ++k) U(k, l) = b * delay_phase(k, r, radio);
            for (int m = 0; m < M; ++m) V(m, l) = doppler_phase(m, r, radio);
        }
        rx.entries = (U * V.transpose()).cwiseProduct(tx.entries);
    } else {
        rx.entries = Eigen::MatrixXcd::Zero(K, M);
    }

    if (noise_rng) {
        const double var = weights.rx_weights.squaredNorm() * radio.noise_variance();
        std::normal_distribution<double> n(0.0, std::sqrt(0.5 * var));
        for (Eigen::Index j = 0; j < M; ++j)
            for (Eigen::Index i = 0; i < K; ++i) {
                const double re = n(*noise_rng);
                const double im = n(*noise_rng);
                rx.entries(i, j) += cd(re, im);
            }
    }
    return rx;
}

double sensing_snr(const ReflectionPoint& reflection, const RadioParams& radio, double array_gain) {
    if (reflection.distance_m <= 0.0) throw std::domain_error("sensing_snr: reflection at zero distance");
    const double budget = radio.eirp_watts * radio.rx_element_gain / radio.noise_variance();
    return radio.sensing_power_fraction * array_gain * budget *
           scenario::path_loss_factor(reflection.drawn_rcs_m2, reflection.distance_m, radio.carrier_freq_hz);
}

Eigen::MatrixXd range_doppler_map(const SymbolGrid& rx, const SymbolGrid& tx, const PeriodogramOptions& opt) {
    const Eigen::Index K = tx.entries.rows(), M = tx.entries.cols();
    if (rx.entries.rows() != K || rx.entries.cols() != M)
        throw std::invalid_argument("range_doppler_map: grid dimensions differ");
    if (opt.range_zero_pad < 1 || opt.doppler_zero_pad < 1)
        throw std::invalid_argument("range_doppler_map: zero-padding factors must be >= 1");
    if ((tx.entries.array() == cd{}).any()) throw std::domain_error("range_doppler_map: zero transmit symbol");

    Eigen::MatrixXcd spec = Eigen::MatrixXcd::Zero(K * opt.range_zero_pad, M * opt.doppler_zero_pad);
    spec.topLeftCorner(K, M) = rx.entries.cwiseQuotient(tx.entries);
    detail::fft_columns(spec, detail::FftSign::backward);   // delay
    detail::fft_rows(spec, detail::FftSign::forward);       // Doppler
    const double norm = 1.0 / (static_cast<double>(K) * M * K * M);
    return spec.cwiseAbs2() * norm;
}

double range_bin_m(const RadioParams& radio, int range_zero_pad) {
    return kSpeedOfLight / (2.0 * radio.num_subcarriers * range_zero_pad * radio.subcarrier_spacing_hz);
}

namespace {

Eigen::VectorXd peak_column(const Eigen::MatrixXd& map) {
    Eigen::Index r = 0, c = 0;
    map.maxCoeff(&r, &c);
    return map.col(c);
}

}  // namespace

RangeAngleMap range_angle_map(std::span<const Eigen::MatrixXd> per_direction_maps, std::span<const double> scan_dirs,
                              double range_bin, int bs_id, int scan_index) {
    if (per_direction_maps.empty()) throw std::invalid_argument("range_angle_map: no scan directions");
    if (per_direction_maps.size() != scan_dirs.size())
        throw std::invalid_argument("range_angle_map: one map per scan direction required");
    RangeAngleMap out;
    out.values.resize(per_direction_maps.front().rows(), static_cast<Eigen::Index>(per_direction_maps.size()));
    for (std::size_t i = 0; i < per_direction_maps.size(); ++i)
        out.values.col(static_cast<Eigen::Index>(i)) = peak_column(per_direction_maps[i]);
    out.range_bin_m = range_bin;
    out.scan_dirs_rad.assign(scan_dirs.begin(), scan_dirs.end());
    out.bs_id = bs_id;
    out.scan_index = scan_index;
    return out;
}

double noise_bin_mean(const RadioParams& radio) {
    return radio.num_rx_antennas * radio.noise_variance() /
           (static_cast<double>(radio.num_subcarriers) * radio.sensing_symbols);
}

namespace {

/// Normalized Dirichlet response (1/N) sum_n exp(j 2 pi n x).
cd dirichlet(int n, double x) {
    const double s = std::sin(kPi * x);
    if (std::abs(s) < 1e-12) {
        // x integer: every term equals exp(j 2 pi n x) = 1 up to rounding
        return {1.0, 0.0};
    }
    return std::polar(std::sin(kPi * n * x) / (n * s), kPi * (n - 1) * x);
}

Eigen::VectorXd synthesize_column(const RadioParams& radio, const BeamWeights& w,
                                  std::span<const ReflectionPoint> reflections, const PeriodogramOptions& opt,
                                  Rng* noise_rng) {
    const int K = radio.num_subcarriers, M = radio.sensing_symbols;
    const int nr = K * opt.range_zero_pad, nd = M * opt.doppler_zero_pad;
    std::vector<const ReflectionPoint*> active;
    for (const auto& r : reflections)
        if (r.path_gain != cd{}) active.push_back(&r);
    const int L = static_cast<int>(active.size());

    Eigen::VectorXcd col = Eigen::VectorXcd::Zero(nr);
    if (L > 0) {
        Eigen::MatrixXcd Dr(nr, L), Dd(nd, L);
        for (int l = 0; l < L; ++l) {
            const auto& r = *active[static_cast<std::size_t>(l)];
            const cd b = combined_gain(r, w, radio);
            const double tau_bins = radio.subcarrier_spacing_hz * r.delay_s;
            const double dop = radio.total_symbol_period_s() * r.doppler_hz;
            for (int n = 0; n < nr; ++n) Dr(n, l) = b * dirichlet(K, static_cast<double>(n) / nr - tau_bins);
            for (int p = 0; p < nd; ++p) Dd(p, l) = dirichlet(M, dop - static_cast<double>(p) / nd);
        }
        const Eigen::MatrixXcd S = Dr * Dd.transpose();
        Eigen::Index rmax = 0, cmax = 0;
        S.cwiseAbs2().maxCoeff(&rmax, &cmax);
        col = S.col(cmax);
    }
    if (noise_rng) {
        const double mu = noise_bin_mean(radio) * (w.rx_weights.squaredNorm() / radio.num_rx_antennas);
        for (int n = 0; n < nr; ++n) col[n] += complex_normal(*noise_rng, mu);
    }
    return col.cwiseAbs2();
}

}  // namespace

RangeAngleMap generate_range_angle_map(const scenario::Scenario& scn, const scenario::BsPose& bs, int scan,
                                       std::span<const ReflectionPoint> reflections, const SensingOptions& opt) {
    const auto& radio = scn.radio;
    const auto dirs = bs.scan_dirs();
    RangeAngleMap out;
    out.range_bin_m = range_bin_m(radio, opt.periodogram.range_zero_pad);
    out.scan_dirs_rad = dirs;
    out.bs_id = bs.id;
    out.scan_index = scan;
    out.values.resize(static_cast<Eigen::Index>(radio.num_subcarriers) * opt.periodogram.range_zero_pad,
                      static_cast<Eigen::Index>(dirs.size()));

    for (std::size_t i = 0; i < dirs.size(); ++i) {
        const std::initializer_list<std::uint64_t> tags{static_cast<std::uint64_t>(bs.id),
                                                         static_cast<std::uint64_t>(scan), i};
        Rng noise_rng = make_rng(scn.seed, Stream::noise, tags);
        const auto w = tx_beamformer(radio, dirs[i], bs.comm_dir_rad);
        if (opt.fast) {
            out.values.col(static_cast<Eigen::Index>(i)) =
                synthesize_column(radio, w, reflections, opt.periodogram, opt.noise ? &noise_rng : nullptr);
            continue;
        }
        Rng tx_rng = make_rng(scn.seed, Stream::tx_symbols, tags);
        const auto tx = make_tx_grid(radio.num_subcarriers, radio.sensing_symbols, tx_rng);
        const auto rx = simulate_rx_grid(tx, w, reflections, radio, opt.noise ? &noise_rng : nullptr);
        out.values.col(static_cast<Eigen::Index>(i)) = peak_column(range_doppler_map(rx, tx, opt.periodogram));
    }
    return out;
}

}  // namespace isac::sensing
