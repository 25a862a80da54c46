#pragma once

#include "isac/common.hpp"

#include <cstdint>
#include <vector>

namespace isac::metrics {

struct OspaConfig {
    double order_p = 2.0;
    double gate_m = 5.0;

    void validate() const;
};

/// Terms are the p-th-power contributions; they sum to total^p.
struct OspaResult {
    double total = 0.0;
    double localization_term = 0.0;
    double missed_term = 0.0;
    double false_alarm_term = 0.0;
    int matched_pairs = 0;
    int cardinality = 0;   // N_c
    int num_truth = 0;
    int num_estimates = 0;
};

OspaResult ospa(const std::vector<Vec2>& truth, const std::vector<Vec2>& estimates, const OspaConfig& cfg);

/// Minimum-cost rectangular assignment (Hungarian method). Returns for each
/// row the assigned column, or -1 for rows left unassigned when rows > cols.
std::vector<int> assignment(const Eigen::MatrixXd& cost);
/// Cost of an assignment summed in row order.
double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& rows_to_cols);

struct CapacityParams {
    double comm_snr_linear = 6.43;
    int n_sensing = 0;
    int n_total = 6;
    double rho_p = 0.3;
    int num_subcarriers = 3168;
    double subcarrier_spacing_hz = 120e3;

    void validate() const;
};

/// Aggregate downlink rate in bit/s, averaged over the N_tot BSs.
double aggregate_capacity(const CapacityParams& p);

struct ConfusionCounts {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }
    /// Vehicle is the positive class.
    void add(TargetClass truth, TargetClass predicted);
    ConfusionCounts& operator+=(const ConfusionCounts& o);
};

double accuracy(const ConfusionCounts& c);

}  // namespace isac::metrics
