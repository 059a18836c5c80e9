#pragma once

#include <string>
#include <vector>

#include "noma/common.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Self-contained feed-forward network engine: dense layers, relu, inverted
// dropout, backprop, Adam / RMSProp, FLOPs accounting. Everything is 64-bit
// during training; a 32-bit inference path exists behind a flag.
// ---------------------------------------------------------------------------

enum class Activation : uint8_t { relu = 0, identity = 1 };
enum class OptimizerKind : uint8_t { adam = 0, rmsprop = 1 };
enum class RunMode { train, infer };

struct DenseLayer {
    int in = 0, out = 0;
    Vec w;        // [in][out] row-major
    Vec b;        // [out]
    Activation act = Activation::identity;
    double keep = 1.0;  // inverted-dropout keep probability on this layer's output
};

struct MlpModel {
    std::vector<DenseLayer> layers;
    Vec feat_mean, feat_std;  // input normalization, empty until bound at training time

    int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
    void validate() const;  // dimension chaining, keep in (0,1], identity head

    void save(const std::string& path) const;
    static MlpModel load(const std::string& path);
    bool operator==(const MlpModel& o) const;
};

// Hidden stack with relu activations and a linear output head. `keep` applies
// to every hidden layer's output. Scaled-uniform fan-in init, seeded.
MlpModel make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                  double keep, uint64_t seed);

// Layer-by-layer affine + activation. Train mode draws an inverted dropout
// mask from `seed` for every layer with keep < 1; infer mode applies neither
// masks nor rescaling.
Vec forward(const MlpModel& model, const Vec& input, RunMode mode, uint64_t seed = 0);

// 32-bit inference path (weights and arithmetic cast to float).
Vec forward_f32(const MlpModel& model, const Vec& input);

double mse_loss(const Vec& pred, const Vec& label);

struct Gradients {
    std::vector<Vec> dw;  // per layer, [in][out]
    std::vector<Vec> db;  // per layer, [out]
};

// Exact gradients of mse_loss(forward(model, input), label) on the
// dropout-free graph.
Gradients backward(const MlpModel& model, const Vec& input, const Vec& label);

struct TrainConfig {
    double learn_rate = 0.01;
    int batch_size = 200;
    int epochs = 100;
    OptimizerKind optimizer = OptimizerKind::adam;
    uint64_t seed = 1;

    void validate() const {
        if (learn_rate < 0) throw ConfigError("learn_rate must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
    }
};

// Owns the optimizer state so training can be resumed epoch by epoch; a
// sequence of run_epoch calls is bit-identical to one train() with the same
// total epoch count.
class Trainer {
public:
    Trainer(MlpModel model, TrainConfig cfg);

    // One pass of shuffled minibatches; returns the mean training loss.
    double run_epoch(const Matrix& features, const Matrix& labels);

    const MlpModel& model() const { return model_; }
    MlpModel take_model() { return std::move(model_); }

private:
    MlpModel model_;
    TrainConfig cfg_;
    std::vector<Vec> m_w_, v_w_, m_b_, v_b_;
    long step_ = 0;
    Rng shuffle_rng_, dropout_rng_;
    friend struct TrainerAccess;
};

struct TrainResult {
    MlpModel model;
    Vec loss_history;  // per-epoch training loss
};

TrainResult train(const MlpModel& model, const Matrix& features, const Matrix& labels,
                  const TrainConfig& cfg);

// Inference cost: twice the summed weight-matrix areas.
uint64_t flops_count(const MlpModel& model);

// Batch inference, rows of `x` in, rows out.
Matrix predict_batch(const MlpModel& model, const Matrix& x);

// (value - mean) / std per feature using the constants bound to the model;
// identity when none are bound.
Vec normalize_features(const MlpModel& model, const Vec& raw);

// Compute per-feature mean and standard deviation over `features` and store
// them on the model (constant features get std 1).
void bind_normalization(MlpModel& model, const Matrix& features);

Matrix normalize_matrix(const MlpModel& model, const Matrix& raw);

}  // namespace noma
