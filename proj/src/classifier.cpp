#include "isac/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace isac::classifier {

void ClassifierConfig::validate() const {
    if (window_m <= 0 || perturb_sigma_m < 0 || log_range_db < 0 || num_filters < 1 || filter_size < 1 || pool_factor < 1 ||
        learning_rate <= 0 || momentum < 0 || max_epochs < 1 || batch_size < 1)
        throw ConfigError("classifier parameters must be positive");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw ConfigError("validation_fraction must lie in [0, 1)");
}

int patch_side(double window_m, const fusion::GridSpec& grid) {
    return static_cast<int>(std::lround(window_m / grid.dx_m));
}

Patch crop_window(const fusion::SoftMap& map, const Vec2& center_m, double window_m) {
    const auto& g = map.grid;
    const int side = patch_side(window_m, g);
    const int cx = g.col_of(center_m.x());
    const int cy = g.row_of(center_m.y());
    Patch p;
    p.center_m = center_m;
    p.scan_index = map.scan_index;
    p.pixels = Eigen::MatrixXd::Zero(side, side);
    const int x0 = cx - side / 2, y0 = cy - side / 2;
    for (int r = 0; r < side; ++r) {
        const int y = y0 + r;
        if (y < 0 || y >= g.ny) continue;
        for (int c = 0; c < side; ++c) {
            const int x = x0 + c;
            if (x < 0 || x >= g.nx) continue;
            p.pixels(r, c) = map.values(y, x);
        }
    }
    return p;
}

std::vector<LabeledPatch> make_training_set(std::span<const LabeledScan> scans, double window_m, double sigma_m,
                                            Rng& rng) {
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::vector<LabeledPatch> ped, veh;
    for (const auto& s : scans) {
        const auto& g = s.map.grid;
        for (const auto& t : s.truth) {
            const int cx = g.col_of(t.position.x()), cy = g.row_of(t.position.y());
            // Displacement is drawn for every target so the stream does not
            // depend on which targets are inside the grid.
            const Vec2 d(jitter(rng), jitter(rng));
            if (cx < 0 || cx >= g.nx || cy < 0 || cy >= g.ny) continue;
            LabeledPatch lp{crop_window(s.map, t.position + sigma_m * d, window_m), t.cls};
            (t.cls == TargetClass::pedestrian ? ped : veh).push_back(std::move(lp));
        }
    }
    if (ped.empty() || veh.empty()) throw std::invalid_argument("make_training_set: both classes must be present");

    auto& major = ped.size() > veh.size() ? ped : veh;
    const auto& minor = ped.size() > veh.size() ? veh : ped;
    std::shuffle(major.begin(), major.end(), rng);
    major.resize(minor.size());

    std::vector<LabeledPatch> out;
    out.reserve(2 * minor.size());
    for (std::size_t i = 0; i < minor.size(); ++i) {
        out.push_back(std::move(ped[i]));
        out.push_back(std::move(veh[i]));
    }
    return out;
}

Shape Shape::of(int input_side, int filters, int filter_size, int pool_factor) {
    Shape s;
    s.input = input_side;
    s.conv = input_side - filter_size + 1;
    s.pool = s.conv / pool_factor;
    s.fc_inputs = filters * s.pool * s.pool;
    return s;
}

struct CnnModel::Activations {
    Eigen::MatrixXd cols;            // im2col: row i*C+j, column u*k+v
    std::vector<double> conv;        // [f][i][j] after ReLU
    std::vector<double> pooled;      // [f][i][j]
    std::vector<int> pool_argmax;    // flat index into conv per pooled cell
    std::array<double, 2> logits{};
    std::array<double, 2> probs{};
};

CnnModel::CnnModel(int input_side, const ClassifierConfig& cfg, Rng& rng)
    : shape_(Shape::of(input_side, cfg.num_filters, cfg.filter_size, cfg.pool_factor)),
      num_filters_(cfg.num_filters),
      filter_size_(cfg.filter_size),
      pool_factor_(cfg.pool_factor),
      normalize_(cfg.normalize_patches),
      log_range_db_(cfg.log_range_db) {
    if (shape_.conv < 1 || shape_.pool < 1) throw std::invalid_argument("CnnModel: input smaller than filter/pool");
    params_.assign(fc_bias_offset() + 2, 0.0);
    std::normal_distribution<double> n(0.0, 1.0);
    const double conv_std = std::sqrt(2.0 / (filter_size_ * filter_size_));
    for (std::size_t i = 0; i < conv_bias_offset(); ++i) params_[i] = conv_std * n(rng);
    const double fc_std = std::sqrt(1.0 / shape_.fc_inputs);
    for (std::size_t i = fc_weight_offset(); i < fc_bias_offset(); ++i) params_[i] = fc_std * n(rng);
}

std::size_t CnnModel::conv_bias_offset() const {
    return static_cast<std::size_t>(num_filters_) * filter_size_ * filter_size_;
}
std::size_t CnnModel::fc_weight_offset() const { return conv_bias_offset() + static_cast<std::size_t>(num_filters_); }
std::size_t CnnModel::fc_bias_offset() const {
    return fc_weight_offset() + 2 * static_cast<std::size_t>(shape_.fc_inputs);
}

Eigen::MatrixXd CnnModel::prepare(const Eigen::MatrixXd& pixels) const {
    if (pixels.rows() != shape_.input || pixels.cols() != shape_.input)
        throw std::invalid_argument("classifier: patch side " + std::to_string(pixels.rows()) +
                                    " does not match model input " + std::to_string(shape_.input));
    if (!normalize_) return pixels;
    const double mx = pixels.maxCoeff();
    if (mx <= 0.0) return pixels;
    if (log_range_db_ <= 0.0) return pixels / mx;
    return pixels.unaryExpr([&](double v) {
        return v > 0.0 ? std::max(0.0, 1.0 + 10.0 * std::log10(v / mx) / log_range_db_) : 0.0;
    });
}

void CnnModel::run_forward(const Eigen::MatrixXd& x, Activations& act) const {
    const int F = num_filters_, k = filter_size_, C = shape_.conv, P = shape_.pool, pf = pool_factor_;
    const double* w = params_.data();
    const double* b = params_.data() + conv_bias_offset();
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    act.cols.resize(C * C, k * k);
    for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v)
            for (int i = 0; i < C; ++i)
                for (int j = 0; j < C; ++j) act.cols(i * C + j, u * k + v) = x(i + u, j + v);
    act.conv.resize(static_cast<std::size_t>(F) * C * C);
    Eigen::Map<Eigen::MatrixXd> out(act.conv.data(), C * C, F);
    out.noalias() = act.cols * Eigen::Map<const RowMat>(w, F, k * k).transpose();
    for (int f = 0; f < F; ++f) out.col(f) = (out.col(f).array() + b[f]).cwiseMax(0.0);
    act.pooled.assign(static_cast<std::size_t>(F) * P * P, 0.0);
    act.pool_argmax.assign(act.pooled.size(), 0);
    for (int f = 0; f < F; ++f)
        for (int i = 0; i < P; ++i)
            for (int j = 0; j < P; ++j) {
                int best = -1;
                double bv = 0.0;
                for (int u = 0; u < pf; ++u)
                    for (int v = 0; v < pf; ++v) {
                        const int idx = f * C * C + (i * pf + u) * C + (j * pf + v);
                        if (best < 0 || act.conv[static_cast<std::size_t>(idx)] > bv) {
                            best = idx;
                            bv = act.conv[static_cast<std::size_t>(idx)];
                        }
                    }
                const std::size_t o = static_cast<std::size_t>(f) * P * P + static_cast<std::size_t>(i) * P + j;
                act.pooled[o] = bv;
                act.pool_argmax[o] = best;
            }
    const double* fw = params_.data() + fc_weight_offset();
    const double* fb = params_.data() + fc_bias_offset();
    const std::size_t D = act.pooled.size();
    for (int c = 0; c < 2; ++c) {
        double s = fb[c];
        const double* row = fw + static_cast<std::size_t>(c) * D;
        for (std::size_t d = 0; d < D; ++d) s += row[d] * act.pooled[d];
        act.logits[static_cast<std::size_t>(c)] = s;
    }
    const double m = std::max(act.logits[0], act.logits[1]);
    const double e0 = std::exp(act.logits[0] - m), e1 = std::exp(act.logits[1] - m);
    act.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
}

std::array<double, 2> CnnModel::forward(const Eigen::MatrixXd& pixels) const {
    Activations act;
    run_forward(prepare(pixels), act);
    return act.probs;
}

double CnnModel::loss(const Eigen::MatrixXd& pixels, int label) const {
    Activations act;
    run_forward(prepare(pixels), act);
    const double m = std::max(act.logits[0], act.logits[1]);
    const double lse = m + std::log(std::exp(act.logits[0] - m) + std::exp(act.logits[1] - m));
    return lse - act.logits[static_cast<std::size_t>(label)];
}

double CnnModel::loss_and_gradient(const Eigen::MatrixXd& pixels, int label, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
    const Eigen::MatrixXd x = prepare(pixels);
    Activations act;
    run_forward(x, act);

    const double m = std::max(act.logits[0], act.logits[1]);
    const double lse = m + std::log(std::exp(act.logits[0] - m) + std::exp(act.logits[1] - m));
    const double loss = lse - act.logits[static_cast<std::size_t>(label)];

    const int F = num_filters_, k = filter_size_, C = shape_.conv;
    const std::size_t D = act.pooled.size();
    std::array<double, 2> dlogit{act.probs[0], act.probs[1]};
    dlogit[static_cast<std::size_t>(label)] -= 1.0;

    const double* fw = params_.data() + fc_weight_offset();
    double* gfw = grad.data() + fc_weight_offset();
    double* gfb = grad.data() + fc_bias_offset();
    std::vector<double> dpooled(D, 0.0);
    for (int c = 0; c < 2; ++c) {
        const double g = dlogit[static_cast<std::size_t>(c)];
        gfb[c] += g;
        const double* row = fw + static_cast<std::size_t>(c) * D;
        double* grow = gfw + static_cast<std::size_t>(c) * D;
        for (std::size_t d = 0; d < D; ++d) {
            grow[d] += g * act.pooled[d];
            dpooled[d] += g * row[d];
        }
    }

    // Max-pool routes the gradient to the argmax; ReLU passes it where the
    // activation is positive.
    std::vector<double> dconv(act.conv.size(), 0.0);
    for (std::size_t o = 0; o < D; ++o) {
        const auto idx = static_cast<std::size_t>(act.pool_argmax[o]);
        if (act.conv[idx] > 0.0) dconv[idx] += dpooled[o];
    }

    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const Eigen::MatrixXd> d(dconv.data(), C * C, F);
    Eigen::Map<RowMat> gw(grad.data(), F, k * k);
    gw.noalias() += d.transpose() * act.cols;
    double* gb = grad.data() + conv_bias_offset();
    for (int f = 0; f < F; ++f) gb[f] += d.col(f).sum();
    return loss;
}

namespace {

constexpr std::uint64_t kModelMagic = 0x314c444d4e4e4331ULL;  // "1CNNMDL1"
constexpr std::uint64_t kModelVersion = 2;

void put(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
std::uint64_t get(std::istream& is) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("model file truncated");
    return v;
}

}  // namespace

void CnnModel::save(const std::filesystem::path& path) const {
    static_assert(std::endian::native == std::endian::little, "model files are little-endian");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write model " + path.string());
    put(os, kModelMagic);
    put(os, kModelVersion);
    put(os, static_cast<std::uint64_t>(shape_.input));
    put(os, static_cast<std::uint64_t>(num_filters_));
    put(os, static_cast<std::uint64_t>(filter_size_));
    put(os, static_cast<std::uint64_t>(pool_factor_));
    put(os, normalize_ ? 1u : 0u);
    put(os, std::bit_cast<std::uint64_t>(log_range_db_));
    put(os, static_cast<std::uint64_t>(params_.size()));
    for (double p : params_) put(os, std::bit_cast<std::uint64_t>(p));
}

CnnModel CnnModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read model " + path.string());
    if (get(is) != kModelMagic) throw std::runtime_error("not a classifier model file");
    if (get(is) != kModelVersion) throw std::runtime_error("unsupported model file version");
    CnnModel m;
    const int input = static_cast<int>(get(is));
    m.num_filters_ = static_cast<int>(get(is));
    m.filter_size_ = static_cast<int>(get(is));
    m.pool_factor_ = static_cast<int>(get(is));
    m.normalize_ = get(is) != 0;
    m.log_range_db_ = std::bit_cast<double>(get(is));
    m.shape_ = Shape::of(input, m.num_filters_, m.filter_size_, m.pool_factor_);
    const auto n = get(is);
    if (n != m.fc_bias_offset() + 2) throw std::runtime_error("model parameter count inconsistent with header");
    m.params_.resize(n);
    for (auto& p : m.params_) p = std::bit_cast<double>(get(is));
    return m;
}

Classification classify(const CnnModel& model, const Patch& patch) {
    Classification c;
    c.scores = model.forward(patch.pixels);
    c.cls = c.scores[0] > c.scores[1] ? TargetClass::pedestrian : TargetClass::vehicle;
    return c;
}

namespace {

double accuracy_of(const CnnModel& model, std::span<const LabeledPatch> data, std::span<const std::size_t> idx) {
    if (idx.empty()) return 0.0;
    std::size_t ok = 0;
    for (auto i : idx) ok += classify(model, data[i].patch).cls == data[i].label;
    return static_cast<double>(ok) / static_cast<double>(idx.size());
}

}  // namespace

TrainResult train(std::span<const LabeledPatch> dataset, const ClassifierConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    const int side = dataset.front().patch.side();
    bool has_ped = false, has_veh = false;
    for (const auto& d : dataset) {
        if (d.patch.side() != side) throw std::invalid_argument("train: patches of different sizes");
        (d.label == TargetClass::pedestrian ? has_ped : has_veh) = true;
    }
    if (!has_ped || !has_veh) throw std::invalid_argument("train: both classes must be present");

    Rng rng = make_rng(cfg.seed, Stream::classifier_init);
    TrainResult res;
    res.model = CnnModel(side, cfg, rng);

    // Stratified split.
    std::vector<std::size_t> train_idx, val_idx;
    for (TargetClass cls : {TargetClass::pedestrian, TargetClass::vehicle}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < dataset.size(); ++i)
            if (dataset[i].label == cls) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * members.size()));
        val_idx.insert(val_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    auto& model = res.model;
    const std::size_t P = model.num_parameters();
    std::vector<double> grad(P), velocity(P, 0.0);
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const auto& ex = dataset[train_idx[b]];
                epoch_loss += model.loss_and_gradient(ex.patch.pixels, label_index(ex.label), grad);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            auto params = model.parameters();
            for (std::size_t i = 0; i < P; ++i) {
                velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i] * scale;
                params[i] += velocity[i];
            }
        }
        epoch_loss /= static_cast<double>(train_idx.size());
        if (!std::isfinite(epoch_loss))
            throw DivergenceError(epoch, "classifier training diverged at epoch " + std::to_string(epoch));
        res.loss_history.push_back(epoch_loss);
        res.final_loss = epoch_loss;
        res.epochs_run = epoch + 1;
        if (epoch_loss < best * (1.0 - cfg.min_improvement)) {
            best = epoch_loss;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    res.train_accuracy = accuracy_of(model, dataset, train_idx);
    res.validation_accuracy = accuracy_of(model, dataset, val_idx);
    return res;
}

}  // namespace isac::classifier
