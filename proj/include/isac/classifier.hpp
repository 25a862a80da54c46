#pragma once

#include "isac/common.hpp"
#include "isac/fusion.hpp"
#include "isac/rng.hpp"
#include "isac/scenario.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace isac::classifier {

struct Patch {
    Eigen::MatrixXd pixels;   // side x side, row = y
    Vec2 center_m = Vec2::Zero();
    int scan_index = 0;

    int side() const { return static_cast<int>(pixels.rows()); }
};

struct ClassifierConfig {
    double window_m = 6.0;
    double perturb_sigma_m = 0.5;
    int num_filters = 20;
    int filter_size = 5;
    int pool_factor = 2;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int max_epochs = 200;
    int batch_size = 32;
    int patience = 10;            // epochs without improvement before stopping
    double min_improvement = 1e-4;
    double validation_fraction = 0.2;
    bool normalize_patches = true;
    // With normalization on: > 0 maps x/max to 1 + 10 log10(x/max) / range,
    // clipped at 0, so glints do not flatten the rest of the patch. 0 keeps x/max.
    double log_range_db = 30.0;
    std::uint64_t seed = 7;

    void validate() const;
};

/// Patch side in cells: round(window / dx).
int patch_side(double window_m, const fusion::GridSpec& grid);

/// side x side crop centered on the cell nearest `center_m` (pixel side/2 is
/// the center); cells outside the map are zero.
Patch crop_window(const fusion::SoftMap& map, const Vec2& center_m, double window_m);

struct LabeledPatch {
    Patch patch;
    TargetClass label = TargetClass::pedestrian;
};

/// One fused map together with the targets it was simulated from.
struct LabeledScan {
    fusion::SoftMap map;
    std::vector<scenario::TruthState> truth;
};

/// Crops every in-grid target at its true position plus N(0, sigma^2 I)
/// displacement, then balances classes by subsampling the majority.
std::vector<LabeledPatch> make_training_set(std::span<const LabeledScan> scans, double window_m, double sigma_m,
                                            Rng& rng);

/// Layer geometry of the conv -> ReLU -> max-pool -> FC -> softmax network.
struct Shape {
    int input = 0;
    int conv = 0;   // input - filter + 1
    int pool = 0;   // conv / pool_factor
    int fc_inputs = 0;

    static Shape of(int input_side, int filters, int filter_size, int pool_factor);
};

class CnnModel {
public:
    CnnModel() = default;
    CnnModel(int input_side, const ClassifierConfig& cfg, Rng& rng);

    const Shape& shape() const { return shape_; }
    int num_filters() const { return num_filters_; }
    int filter_size() const { return filter_size_; }
    int pool_factor() const { return pool_factor_; }
    bool normalizes_input() const { return normalize_; }
    double log_range_db() const { return log_range_db_; }

    /// Flat parameter vector layout: conv weights [f][u][v], conv biases,
    /// FC weights [class][feature], FC biases.
    std::size_t num_parameters() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    /// Softmax scores for a patch after optional max normalization.
    std::array<double, 2> forward(const Eigen::MatrixXd& pixels) const;
    /// Cross-entropy loss of one example; accumulates d loss / d params into `grad`.
    double loss_and_gradient(const Eigen::MatrixXd& pixels, int label, std::span<double> grad) const;
    double loss(const Eigen::MatrixXd& pixels, int label) const;

    void save(const std::filesystem::path& path) const;
    static CnnModel load(const std::filesystem::path& path);

    std::size_t conv_weight_offset() const { return 0; }
    std::size_t conv_bias_offset() const;
    std::size_t fc_weight_offset() const;
    std::size_t fc_bias_offset() const;

private:
    struct Activations;
    Eigen::MatrixXd prepare(const Eigen::MatrixXd& pixels) const;
    void run_forward(const Eigen::MatrixXd& x, Activations& act) const;

    Shape shape_;
    int num_filters_ = 0;
    int filter_size_ = 0;
    int pool_factor_ = 2;
    bool normalize_ = true;
    double log_range_db_ = 0.0;
    std::vector<double> params_;
};

struct TrainResult {
    CnnModel model;
    double final_loss = 0.0;
    int epochs_run = 0;
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
    std::vector<double> loss_history;
};

/// Thrown when the training loss stops being finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int epoch, const std::string& what) : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

/// Mini-batch SGD with momentum on cross-entropy; stratified train/validation
/// split, early stop when the training loss plateaus.
TrainResult train(std::span<const LabeledPatch> dataset, const ClassifierConfig& cfg);

struct Classification {
    TargetClass cls = TargetClass::vehicle;
    std::array<double, 2> scores{0.5, 0.5};   // {pedestrian, vehicle}
};

/// argmax of the softmax scores; an exact tie resolves to vehicle.
Classification classify(const CnnModel& model, const Patch& patch);

inline int label_index(TargetClass c) { return c == TargetClass::pedestrian ? 0 : 1; }

}  // namespace isac::classifier
