#include "isac/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace isac::metrics {

void OspaConfig::validate() const {
    if (!(order_p >= 1.0)) throw ConfigError("OSPA order p must be >= 1");
    if (!(gate_m > 0.0)) throw ConfigError("OSPA gate must be > 0");
}

namespace {

// Hungarian method with potentials for n <= m; returns column per row.
std::vector<int> hungarian(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows()), m = static_cast<int>(a.cols());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = a(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<std::size_t>(j)] != 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

}  // namespace

std::vector<int> assignment(const Eigen::MatrixXd& cost) {
    if (!cost.allFinite()) throw std::invalid_argument("assignment: costs must be finite");
    if (cost.rows() == 0) return {};
    if (cost.cols() == 0) return std::vector<int>(static_cast<std::size_t>(cost.rows()), -1);
    if (cost.rows() <= cost.cols()) return hungarian(cost);
    const auto col_to_row = hungarian(cost.transpose());
    std::vector<int> out(static_cast<std::size_t>(cost.rows()), -1);
    for (std::size_t c = 0; c < col_to_row.size(); ++c) out[static_cast<std::size_t>(col_to_row[c])] = static_cast<int>(c);
    return out;
}

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& rows_to_cols) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_to_cols.size(); ++r)
        if (rows_to_cols[r] >= 0) s += cost(static_cast<Eigen::Index>(r), rows_to_cols[r]);
    return s;
}

OspaResult ospa(const std::vector<Vec2>& truth, const std::vector<Vec2>& estimates, const OspaConfig& cfg) {
    cfg.validate();
    OspaResult res;
    const auto n = static_cast<int>(truth.size()), m = static_cast<int>(estimates.size());
    res.num_truth = n;
    res.num_estimates = m;
    if (n == 0 && m == 0) return res;

    const double p = cfg.order_p, c = cfg.gate_m, cp = std::pow(c, p);
    Eigen::MatrixXd d(n, m), cost(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            d(i, j) = (truth[static_cast<std::size_t>(i)] - estimates[static_cast<std::size_t>(j)]).norm();
            cost(i, j) = std::pow(std::min(d(i, j), c), p);
        }

    double loc = 0.0;
    int k = 0;
    if (n > 0 && m > 0) {
        const auto match = assignment(cost);
        for (int i = 0; i < n; ++i) {
            const int j = match[static_cast<std::size_t>(i)];
            if (j >= 0 && d(i, j) < c) {
                loc += std::pow(d(i, j), p);
                ++k;
            }
        }
    }
    const int nc = n + m - k;
    res.matched_pairs = k;
    res.cardinality = nc;
    res.localization_term = loc / nc;
    res.missed_term = 0.5 * cp * (n - k) / nc;
    res.false_alarm_term = 0.5 * cp * (m - k) / nc;
    res.total = std::pow(res.localization_term + res.missed_term + res.false_alarm_term, 1.0 / p);
    return res;
}

void CapacityParams::validate() const {
    if (!(comm_snr_linear > 0)) throw ConfigError("communication SNR must be > 0");
    if (n_total < 1 || n_sensing < 0 || n_sensing > n_total) throw ConfigError("need 0 <= N_s <= N_tot, N_tot >= 1");
    if (rho_p < 0 || rho_p > 1) throw ConfigError("rho_p must lie in [0, 1]");
    if (num_subcarriers < 1 || subcarrier_spacing_hz <= 0) throw ConfigError("invalid OFDM numerology");
}

double aggregate_capacity(const CapacityParams& p) {
    p.validate();
    const double bw = p.subcarrier_spacing_hz * p.num_subcarriers;
    const double shared = p.n_sensing * bw * std::log2(1.0 + (1.0 - p.rho_p) * p.comm_snr_linear);
    const double comm_only = (p.n_total - p.n_sensing) * bw * std::log2(1.0 + p.comm_snr_linear);
    return (shared + comm_only) / p.n_total;
}

void ConfusionCounts::add(TargetClass truth, TargetClass predicted) {
    const bool t = truth == TargetClass::vehicle, q = predicted == TargetClass::vehicle;
    if (t && q) ++tp;
    else if (!t && !q) ++tn;
    else if (!t && q) ++fp;
    else ++fn;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
}

double accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw std::invalid_argument("accuracy: no classifications");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

}  // namespace isac::metrics
