#include "noma/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noma/binio.hpp"

namespace noma {

namespace {

// ---------------------------------------------------------------------------
// Deterministic GEMM kernels. Each output row is written by exactly one
// thread and inner accumulation order is fixed, so results do not depend on
// the thread count.
// ---------------------------------------------------------------------------

// C += A * B ; A: M x K, B: K x N, C: M x N
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            const double* brow = b + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C = A^T * B ; A: M x K, B: M x N, C: K x N
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int kk = 0; kk < k; ++kk) {
        double* crow = c + static_cast<size_t>(kk) * n;
        std::fill(crow, crow + n, 0.0);
        for (int i = 0; i < m; ++i) {
            double av = a[static_cast<size_t>(i) * k + kk];
            const double* brow = b + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

Vec transpose(const Vec& w, int rows, int cols) {
    Vec t(w.size());
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            t[static_cast<size_t>(j) * rows + i] = w[static_cast<size_t>(i) * cols + j];
    return t;
}

void add_bias_rows(Matrix& z, const Vec& bias) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < z.rows; ++i) {
        double* row = z.row(i);
        for (int j = 0; j < z.cols; ++j) row[j] += bias[j];
    }
}

void apply_activation(Matrix& z, Activation act) {
    if (act != Activation::relu) return;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < z.rows; ++i) {
        double* row = z.row(i);
        for (int j = 0; j < z.cols; ++j) row[j] = row[j] > 0.0 ? row[j] : 0.0;
    }
}

struct BatchCache {
    std::vector<Matrix> h;      // h[0] = input, h[l+1] = post-activation of layer l
    std::vector<Matrix> z;      // pre-activations per layer
    std::vector<Matrix> mask;   // inverted dropout masks, empty when unused
};

// Forward over a batch; in train mode masks come from `drop_rng` (serial draw
// order: layer by layer, row-major).
void forward_batch(const MlpModel& model, const Matrix& x, bool train_mode, Rng* drop_rng,
                   BatchCache* cache, Matrix& out) {
    const size_t L = model.layers.size();
    Matrix cur = x;
    if (cache) {
        cache->h.assign(L + 1, {});
        cache->z.assign(L, {});
        cache->mask.assign(L, {});
        cache->h[0] = cur;
    }
    for (size_t l = 0; l < L; ++l) {
        const DenseLayer& layer = model.layers[l];
        Matrix z(cur.rows, layer.out);
        gemm_acc(cur.data.data(), layer.w.data(), z.data.data(), cur.rows, layer.in, layer.out);
        add_bias_rows(z, layer.b);
        if (cache) cache->z[l] = z;
        apply_activation(z, layer.act);
        if (train_mode && layer.keep < 1.0) {
            Matrix mask(z.rows, z.cols);
            for (int i = 0; i < z.rows; ++i)
                for (int j = 0; j < z.cols; ++j)
                    mask.at(i, j) = drop_rng->uniform() < layer.keep ? 1.0 / layer.keep : 0.0;
            for (int i = 0; i < z.rows; ++i)
                for (int j = 0; j < z.cols; ++j) z.at(i, j) *= mask.at(i, j);
            if (cache) cache->mask[l] = std::move(mask);
        }
        if (cache) cache->h[l + 1] = z;
        cur = std::move(z);
    }
    out = std::move(cur);
}

// Backward for loss = mean over batch rows of mse per row. Fills per-layer
// weight and bias gradients; masks from the cache are honored.
void backward_batch(const MlpModel& model, const BatchCache& cache, const Matrix& pred,
                    const Matrix& label, std::vector<Vec>& dw, std::vector<Vec>& db) {
    const size_t L = model.layers.size();
    const int batch = pred.rows;
    const int out_dim = pred.cols;
    dw.assign(L, {});
    db.assign(L, {});

    Matrix delta(batch, out_dim);
    double scale = 2.0 / (static_cast<double>(batch) * out_dim);
    for (int i = 0; i < batch; ++i)
        for (int j = 0; j < out_dim; ++j)
            delta.at(i, j) = scale * (pred.at(i, j) - label.at(i, j));

    for (size_t l = L; l-- > 0;) {
        const DenseLayer& layer = model.layers[l];

        // delta currently holds dL/d(post-activation output of layer l).
        if (!cache.mask[l].data.empty())
            for (int i = 0; i < batch; ++i)
                for (int j = 0; j < layer.out; ++j)
                    delta.at(i, j) *= cache.mask[l].at(i, j);
        if (layer.act == Activation::relu)
            for (int i = 0; i < batch; ++i)
                for (int j = 0; j < layer.out; ++j)
                    if (cache.z[l].at(i, j) <= 0.0) delta.at(i, j) = 0.0;

        dw[l].assign(layer.w.size(), 0.0);
        gemm_tn(cache.h[l].data.data(), delta.data.data(), dw[l].data(), batch, layer.in,
                layer.out);
        db[l].assign(layer.out, 0.0);
        for (int i = 0; i < batch; ++i)
            for (int j = 0; j < layer.out; ++j) db[l][j] += delta.at(i, j);

        if (l > 0) {
            Matrix next(batch, layer.in);
            Vec wt = transpose(layer.w, layer.in, layer.out);
            gemm_acc(delta.data.data(), wt.data(), next.data.data(), batch, layer.out,
                     layer.in);
            delta = std::move(next);
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Model plumbing
// ---------------------------------------------------------------------------

void MlpModel::validate() const {
    if (layers.empty()) throw ConfigError("model has no layers");
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.in < 1 || layer.out < 1) throw ConfigError("layer with empty dimension");
        if (layer.w.size() != static_cast<size_t>(layer.in) * layer.out ||
            layer.b.size() != static_cast<size_t>(layer.out))
            throw ConfigError("layer buffer sizes do not match dimensions");
        if (!(layer.keep > 0.0 && layer.keep <= 1.0))
            throw ConfigError("dropout keep probability must be in (0, 1]");
        if (l > 0 && layers[l - 1].out != layer.in)
            throw ConfigError("adjacent layer dimensions do not chain");
    }
    if (layers.back().act != Activation::identity)
        throw ConfigError("output layer must be linear");
    if (!feat_mean.empty() &&
        (feat_mean.size() != static_cast<size_t>(input_dim()) ||
         feat_std.size() != feat_mean.size()))
        throw ConfigError("normalization constants do not match the input dimension");
}

MlpModel make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                  double keep, uint64_t seed) {
    if (input_dim < 1 || output_dim < 1) throw ConfigError("empty model dimensions");
    MlpModel model;
    std::vector<int> dims;
    dims.push_back(input_dim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(output_dim);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        bool is_output = l + 2 == dims.size();
        layer.act = is_output ? Activation::identity : Activation::relu;
        layer.keep = is_output ? 1.0 : keep;
        layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
        layer.b.assign(layer.out, 0.0);
        Rng rng(derive_seed(seed, l));
        double limit = std::sqrt(6.0 / layer.in);
        for (double& w : layer.w) w = rng.uniform(-limit, limit);
        model.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
}

Vec forward(const MlpModel& model, const Vec& input, RunMode mode, uint64_t seed) {
    if (input.size() != static_cast<size_t>(model.input_dim()))
        throw ConfigError("input length does not match the model");
    Matrix x(1, model.input_dim());
    std::copy(input.begin(), input.end(), x.data.begin());
    Rng rng(seed);
    Matrix out;
    forward_batch(model, x, mode == RunMode::train, &rng, nullptr, out);
    return out.data;
}

Vec forward_f32(const MlpModel& model, const Vec& input) {
    if (input.size() != static_cast<size_t>(model.input_dim()))
        throw ConfigError("input length does not match the model");
    std::vector<float> cur(input.begin(), input.end());
    for (const auto& layer : model.layers) {
        std::vector<float> next(layer.out);
        for (int j = 0; j < layer.out; ++j) next[j] = static_cast<float>(layer.b[j]);
        for (int i = 0; i < layer.in; ++i) {
            float v = cur[i];
            const double* wrow = layer.w.data() + static_cast<size_t>(i) * layer.out;
            for (int j = 0; j < layer.out; ++j) next[j] += v * static_cast<float>(wrow[j]);
        }
        if (layer.act == Activation::relu)
            for (float& v : next) v = v > 0.f ? v : 0.f;
        cur = std::move(next);
    }
    return Vec(cur.begin(), cur.end());
}

double mse_loss(const Vec& pred, const Vec& label) {
    if (pred.size() != label.size() || pred.empty())
        throw ConfigError("mse over mismatched or empty vectors");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - label[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

Gradients backward(const MlpModel& model, const Vec& input, const Vec& label) {
    if (label.size() != static_cast<size_t>(model.output_dim()))
        throw ConfigError("label length does not match the model");
    Matrix x(1, model.input_dim());
    if (input.size() != x.data.size()) throw ConfigError("input length does not match the model");
    std::copy(input.begin(), input.end(), x.data.begin());
    Matrix y(1, model.output_dim());
    std::copy(label.begin(), label.end(), y.data.begin());

    BatchCache cache;
    Matrix pred;
    forward_batch(model, x, false, nullptr, &cache, pred);
    Gradients g;
    backward_batch(model, cache, pred, y, g.dw, g.db);
    return g;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

Trainer::Trainer(MlpModel model, TrainConfig cfg)
    : model_(std::move(model)),
      cfg_(cfg),
      shuffle_rng_(derive_seed(cfg.seed, 0x5u)),
      dropout_rng_(derive_seed(cfg.seed, 0x6u)) {
    cfg_.validate();
    model_.validate();
    m_w_.resize(model_.layers.size());
    v_w_.resize(model_.layers.size());
    m_b_.resize(model_.layers.size());
    v_b_.resize(model_.layers.size());
    for (size_t l = 0; l < model_.layers.size(); ++l) {
        m_w_[l].assign(model_.layers[l].w.size(), 0.0);
        v_w_[l].assign(model_.layers[l].w.size(), 0.0);
        m_b_[l].assign(model_.layers[l].b.size(), 0.0);
        v_b_[l].assign(model_.layers[l].b.size(), 0.0);
    }
}

double Trainer::run_epoch(const Matrix& features, const Matrix& labels) {
    if (features.rows == 0) throw ConfigError("empty dataset");
    if (features.rows != labels.rows) throw ConfigError("feature/label row mismatch");
    if (features.cols != model_.input_dim() || labels.cols != model_.output_dim())
        throw ConfigError("dataset dimensions do not match the model");

    const int n = features.rows;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<int>(shuffle_rng_.uniform_int(i + 1))]);

    constexpr double kAdamB1 = 0.9, kAdamB2 = 0.999, kAdamEps = 1e-8;
    constexpr double kRmsDecay = 0.9, kRmsEps = 1e-8;

    double loss_sum = 0.0;
    for (int start = 0; start < n; start += cfg_.batch_size) {
        int rows = std::min(cfg_.batch_size, n - start);
        Matrix bx(rows, features.cols), by(rows, labels.cols);
        for (int i = 0; i < rows; ++i) {
            const double* fx = features.row(order[start + i]);
            std::copy(fx, fx + features.cols, bx.row(i));
            const double* fy = labels.row(order[start + i]);
            std::copy(fy, fy + labels.cols, by.row(i));
        }

        BatchCache cache;
        Matrix pred;
        forward_batch(model_, bx, true, &dropout_rng_, &cache, pred);

        double batch_loss = 0.0;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < pred.cols; ++j) {
                double d = pred.at(i, j) - by.at(i, j);
                batch_loss += d * d;
            }
        batch_loss /= static_cast<double>(rows) * pred.cols;
        loss_sum += batch_loss * rows;

        std::vector<Vec> dw, db;
        backward_batch(model_, cache, pred, by, dw, db);

        ++step_;
        for (size_t l = 0; l < model_.layers.size(); ++l) {
            auto update = [&](Vec& w, Vec& mom, Vec& var, const Vec& grad) {
                if (cfg_.optimizer == OptimizerKind::adam) {
                    double c1 = 1.0 - std::pow(kAdamB1, static_cast<double>(step_));
                    double c2 = 1.0 - std::pow(kAdamB2, static_cast<double>(step_));
#pragma omp parallel for schedule(static)
                    for (long i = 0; i < static_cast<long>(w.size()); ++i) {
                        mom[i] = kAdamB1 * mom[i] + (1.0 - kAdamB1) * grad[i];
                        var[i] = kAdamB2 * var[i] + (1.0 - kAdamB2) * grad[i] * grad[i];
                        double mhat = mom[i] / c1;
                        double vhat = var[i] / c2;
                        w[i] -= cfg_.learn_rate * mhat / (std::sqrt(vhat) + kAdamEps);
                    }
                } else {
#pragma omp parallel for schedule(static)
                    for (long i = 0; i < static_cast<long>(w.size()); ++i) {
                        var[i] = kRmsDecay * var[i] + (1.0 - kRmsDecay) * grad[i] * grad[i];
                        w[i] -= cfg_.learn_rate * grad[i] / (std::sqrt(var[i]) + kRmsEps);
                    }
                }
            };
            update(model_.layers[l].w, m_w_[l], v_w_[l], dw[l]);
            update(model_.layers[l].b, m_b_[l], v_b_[l], db[l]);
        }
    }
    return loss_sum / n;
}

TrainResult train(const MlpModel& model, const Matrix& features, const Matrix& labels,
                  const TrainConfig& cfg) {
    Trainer trainer(model, cfg);
    TrainResult result;
    result.loss_history.reserve(cfg.epochs);
    for (int e = 0; e < cfg.epochs; ++e)
        result.loss_history.push_back(trainer.run_epoch(features, labels));
    result.model = trainer.take_model();
    return result;
}

uint64_t flops_count(const MlpModel& model) {
    uint64_t total = 0;
    for (const auto& layer : model.layers)
        total += 2ull * static_cast<uint64_t>(layer.in) * static_cast<uint64_t>(layer.out);
    return total;
}

Matrix predict_batch(const MlpModel& model, const Matrix& x) {
    if (x.cols != model.input_dim()) throw ConfigError("batch width does not match the model");
    Matrix out;
    forward_batch(model, x, false, nullptr, nullptr, out);
    return out;
}

Vec normalize_features(const MlpModel& model, const Vec& raw) {
    if (model.feat_mean.empty()) return raw;
    if (raw.size() != model.feat_mean.size())
        throw ConfigError("feature length does not match normalization constants");
    Vec out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i)
        out[i] = (raw[i] - model.feat_mean[i]) / model.feat_std[i];
    return out;
}

void bind_normalization(MlpModel& model, const Matrix& features) {
    const int d = features.cols;
    Vec mean(d, 0.0), stdev(d, 0.0);
    for (int i = 0; i < features.rows; ++i)
        for (int j = 0; j < d; ++j) mean[j] += features.at(i, j);
    for (int j = 0; j < d; ++j) mean[j] /= std::max(1, features.rows);
    for (int i = 0; i < features.rows; ++i)
        for (int j = 0; j < d; ++j) {
            double c = features.at(i, j) - mean[j];
            stdev[j] += c * c;
        }
    for (int j = 0; j < d; ++j) {
        stdev[j] = std::sqrt(stdev[j] / std::max(1, features.rows));
        if (stdev[j] < 1e-12) stdev[j] = 1.0;  // constant feature (e.g. always-full slot flag)
    }
    model.feat_mean = std::move(mean);
    model.feat_std = std::move(stdev);
}

Matrix normalize_matrix(const MlpModel& model, const Matrix& raw) {
    Matrix out(raw.rows, raw.cols);
    for (int i = 0; i < raw.rows; ++i)
        for (int j = 0; j < raw.cols; ++j)
            out.at(i, j) = (raw.at(i, j) - model.feat_mean[j]) / model.feat_std[j];
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

static constexpr uint32_t kModelVersion = 1;

void MlpModel::save(const std::string& path) const {
    BinWriter w;
    w.u32(static_cast<uint32_t>(layers.size()));
    for (const auto& layer : layers) {
        w.u32(static_cast<uint32_t>(layer.in));
        w.u32(static_cast<uint32_t>(layer.out));
        w.u8(static_cast<uint8_t>(layer.act));
        w.f64(layer.keep);
        w.f64_array(layer.w.data(), layer.w.size());
        w.f64_array(layer.b.data(), layer.b.size());
    }
    w.u32(static_cast<uint32_t>(feat_mean.size()));
    w.f64_array(feat_mean.data(), feat_mean.size());
    w.f64_array(feat_std.data(), feat_std.size());
    w.write_file(path, BinKind::model, kModelVersion);
}

MlpModel MlpModel::load(const std::string& path) {
    BinReader r(path, BinKind::model, kModelVersion);
    MlpModel model;
    uint32_t n_layers = r.u32();
    model.layers.resize(n_layers);
    for (auto& layer : model.layers) {
        layer.in = static_cast<int>(r.u32());
        layer.out = static_cast<int>(r.u32());
        layer.act = static_cast<Activation>(r.u8());
        layer.keep = r.f64();
        layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
        r.f64_array(layer.w.data(), layer.w.size());
        layer.b.resize(layer.out);
        r.f64_array(layer.b.data(), layer.b.size());
    }
    uint32_t feat = r.u32();
    model.feat_mean.resize(feat);
    model.feat_std.resize(feat);
    r.f64_array(model.feat_mean.data(), feat);
    r.f64_array(model.feat_std.data(), feat);
    model.validate();
    return model;
}

bool MlpModel::operator==(const MlpModel& o) const {
    if (layers.size() != o.layers.size() || feat_mean != o.feat_mean || feat_std != o.feat_std)
        return false;
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& a = layers[l];
        const auto& b = o.layers[l];
        if (a.in != b.in || a.out != b.out || a.act != b.act || a.keep != b.keep ||
            a.w != b.w || a.b != b.b)
            return false;
    }
    return true;
}

}  // namespace noma
