#include "noma/cotrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "noma/binio.hpp"

namespace noma {

namespace {

double matrix_mse(const MlpModel& model, const Matrix& x, const Matrix& y) {
    Matrix pred = predict_batch(model, x);
    double acc = 0.0;
    for (int i = 0; i < pred.rows; ++i)
        for (int j = 0; j < pred.cols; ++j) {
            double d = pred.at(i, j) - y.at(i, j);
            acc += d * d;
        }
    return acc / (static_cast<double>(pred.rows) * pred.cols);
}

// Squared error of each row, summed over components.
Vec row_sq_errors(const MlpModel& model, const Matrix& x, const Matrix& y) {
    Matrix pred = predict_batch(model, x);
    Vec out(pred.rows, 0.0);
    for (int i = 0; i < pred.rows; ++i)
        for (int j = 0; j < pred.cols; ++j) {
            double d = pred.at(i, j) - y.at(i, j);
            out[i] += d * d;
        }
    return out;
}

Matrix append_row(const Matrix& m, const Vec& row) {
    Matrix out(m.rows + 1, m.cols);
    std::copy(m.data.begin(), m.data.end(), out.data.begin());
    std::copy(row.begin(), row.end(), out.row(m.rows));
    return out;
}

// Fine-tuned copy of `model` on labeled + (g_u, pseudo); returns the summed
// squared-error drop over the labeled set. Shared by the public op and the
// round loop (which reuses the base errors across a pool).
double delta_against_base(const MlpModel& model, const TrainConfig& ft_cfg, int ft_epochs,
                          const Matrix& lx, const Matrix& ly, const Vec& base_errors,
                          const Vec& g_u) {
    Vec pseudo = forward(model, g_u, RunMode::infer);
    Matrix fx = append_row(lx, g_u);
    Matrix fy = append_row(ly, pseudo);

    TrainConfig cfg = ft_cfg;
    cfg.epochs = ft_epochs;
    Trainer copy(model, cfg);
    for (int e = 0; e < ft_epochs; ++e) copy.run_epoch(fx, fy);

    Vec tuned_errors = row_sq_errors(copy.model(), lx, ly);
    double delta = 0.0;
    for (size_t i = 0; i < tuned_errors.size(); ++i)
        delta += base_errors[i] - tuned_errors[i];
    return delta;
}

}  // namespace

Vec SubchannelEnsemble::predict(const Vec& input) const {
    Vec a = forward(h1, input, RunMode::infer);
    Vec b = forward(h2, input, RunMode::infer);
    for (size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (a[i] + b[i]);
    return a;
}

double confidence_delta(const MlpModel& model, const TrainConfig& ft_cfg, int ft_epochs,
                        const Matrix& labeled_x, const Matrix& labeled_y, const Vec& g_u) {
    if (labeled_x.rows == 0) throw ConfigError("confidence requires a non-empty labeled set");
    Vec base = row_sq_errors(model, labeled_x, labeled_y);
    return delta_against_base(model, ft_cfg, ft_epochs, labeled_x, labeled_y, base, g_u);
}

void cotrain_round(CoTrainState& state, const Matrix& unlabeled, const CoTrainConfig& cfg) {
    cfg.validate();
    struct Placement {
        bool present = false;
        Vec features, pseudo;
    };
    Placement omega[2];
    state.last_delta_max[0] = std::numeric_limits<double>::quiet_NaN();
    state.last_delta_max[1] = std::numeric_limits<double>::quiet_NaN();

    for (int k = 0; k < 2; ++k) {
        Trainer& trainer = k == 0 ? state.t1 : state.t2;
        const Matrix& lx = k == 0 ? state.l1_x : state.l2_x;
        const Matrix& ly = k == 0 ? state.l1_y : state.l2_y;
        TrainConfig ft_cfg;
        ft_cfg.learn_rate = k == 0 ? cfg.lr1 : cfg.lr2;
        ft_cfg.batch_size = k == 0 ? cfg.batch1 : cfg.batch2;
        ft_cfg.optimizer = cfg.optimizer;
        ft_cfg.epochs = cfg.ft_epochs;

        Vec base = row_sq_errors(trainer.model(), lx, ly);
        double best_delta = 0.0;
        int best_pos = -1;
        for (size_t pos = 0; pos < state.pool.size(); ++pos) {
            int row = state.pool[pos];
            Vec g_u(unlabeled.row(row), unlabeled.row(row) + unlabeled.cols);
            TrainConfig cand_cfg = ft_cfg;
            cand_cfg.seed = derive_seed(state.seed, (static_cast<uint64_t>(state.iter) << 24) ^
                                                        (static_cast<uint64_t>(k) << 20) ^
                                                        static_cast<uint64_t>(row));
            double delta = delta_against_base(trainer.model(), cand_cfg, cfg.ft_epochs, lx, ly,
                                              base, g_u);
            if (std::isnan(state.last_delta_max[k]) || delta > state.last_delta_max[k])
                state.last_delta_max[k] = delta;
            if (delta > 0.0 && (best_pos < 0 || delta > best_delta)) {
                best_delta = delta;
                best_pos = static_cast<int>(pos);
            }
        }
        if (best_pos >= 0) {
            int row = state.pool[best_pos];
            Vec g_u(unlabeled.row(row), unlabeled.row(row) + unlabeled.cols);
            omega[k].present = true;
            omega[k].pseudo = forward(trainer.model(), g_u, RunMode::infer);
            omega[k].features = std::move(g_u);
            state.pool.erase(state.pool.begin() + best_pos);
        }
    }

    // Cross-placement: learner 1 absorbs what learner 2 vouched for and vice
    // versa.
    bool grew = false;
    if (omega[1].present) {
        state.l1_x = append_row(state.l1_x, omega[1].features);
        state.l1_y = append_row(state.l1_y, omega[1].pseudo);
        grew = true;
    }
    if (omega[0].present) {
        state.l2_x = append_row(state.l2_x, omega[0].features);
        state.l2_y = append_row(state.l2_y, omega[0].pseudo);
        grew = true;
    }

    if (grew) {
        for (int e = 0; e < cfg.round_epochs; ++e) {
            state.t1.run_epoch(state.l1_x, state.l1_y);
            state.t2.run_epoch(state.l2_x, state.l2_y);
        }
        Rng refill(derive_seed(state.seed, 0x7F00u + static_cast<uint64_t>(state.iter)));
        while (static_cast<int>(state.pool.size()) < cfg.pool_size && !state.reservoir.empty()) {
            size_t pick = refill.uniform_int(state.reservoir.size());
            state.pool.push_back(state.reservoir[pick]);
            state.reservoir.erase(state.reservoir.begin() + static_cast<ptrdiff_t>(pick));
        }
    }

    state.stalled = !omega[0].present && !omega[1].present;
    ++state.iter;
}

CoTrainResult cotrain(const Matrix& labeled_x, const Matrix& labeled_y,
                      const Matrix& unlabeled_x, const CoTrainConfig& cfg,
                      const Matrix* val_x, const Matrix* val_y) {
    cfg.validate();
    if (labeled_x.rows == 0) throw ConfigError("co-training requires labeled samples");
    if (unlabeled_x.rows > 0 && unlabeled_x.cols != labeled_x.cols)
        throw ConfigError("unlabeled feature schema differs from the labeled set");

    MlpModel seed1 = make_mlp(labeled_x.cols, cfg.hidden1, labeled_y.cols, cfg.keep1,
                              derive_seed(cfg.seed, 0x11u));
    MlpModel seed2 = make_mlp(labeled_x.cols, cfg.hidden2, labeled_y.cols, cfg.keep2,
                              derive_seed(cfg.seed, 0x22u));
    bind_normalization(seed1, labeled_x);
    seed2.feat_mean = seed1.feat_mean;
    seed2.feat_std = seed1.feat_std;

    Matrix lx = normalize_matrix(seed1, labeled_x);
    Matrix ux = unlabeled_x.rows > 0 ? normalize_matrix(seed1, unlabeled_x) : Matrix{};

    TrainConfig tc1{cfg.lr1, cfg.batch1, cfg.init_epochs, cfg.optimizer,
                    derive_seed(cfg.seed, 0x33u)};
    TrainConfig tc2{cfg.lr2, cfg.batch2, cfg.init_epochs, cfg.optimizer,
                    derive_seed(cfg.seed, 0x44u)};
    Trainer t1(std::move(seed1), tc1);
    Trainer t2(std::move(seed2), tc2);
    for (int e = 0; e < cfg.init_epochs; ++e) {
        t1.run_epoch(lx, labeled_y);
        t2.run_epoch(lx, labeled_y);
    }

    CoTrainResult result;
    result.initial_1 = t1.model();
    result.initial_2 = t2.model();

    CoTrainState state(std::move(t1), std::move(t2));
    state.seed = derive_seed(cfg.seed, 0x55u);
    state.l1_x = lx;
    state.l1_y = labeled_y;
    state.l2_x = lx;
    state.l2_y = labeled_y;

    std::vector<int> order(ux.rows);
    for (int i = 0; i < ux.rows; ++i) order[i] = i;
    Rng shuffle(derive_seed(cfg.seed, 0x66u));
    for (int i = ux.rows - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<int>(shuffle.uniform_int(i + 1))]);
    for (int i = 0; i < ux.rows; ++i) {
        if (i < cfg.pool_size) state.pool.push_back(order[i]);
        else state.reservoir.push_back(order[i]);
    }

    Matrix vx;
    if (val_x && val_x->rows > 0) vx = normalize_matrix(state.t1.model(), *val_x);

    for (int round = 0; round < cfg.t_max && !state.pool.empty(); ++round) {
        cotrain_round(state, ux, cfg);
        CoTrainRoundLog log_row;
        log_row.round = state.iter;
        log_row.l1_size = state.l1_x.rows;
        log_row.l2_size = state.l2_x.rows;
        log_row.delta_max_1 = state.last_delta_max[0];
        log_row.delta_max_2 = state.last_delta_max[1];
        log_row.val_mse = std::numeric_limits<double>::quiet_NaN();
        if (!vx.data.empty() && val_y) {
            SubchannelEnsemble probe{state.t1.model(), state.t2.model()};
            double acc = 0.0;
            for (int i = 0; i < vx.rows; ++i) {
                Vec in(vx.row(i), vx.row(i) + vx.cols);
                Vec pred = probe.predict(in);
                for (int j = 0; j < val_y->cols; ++j) {
                    double d = pred[j] - val_y->at(i, j);
                    acc += d * d;
                }
            }
            log_row.val_mse = acc / (static_cast<double>(vx.rows) * val_y->cols);
        }
        result.log.push_back(log_row);
        if (state.stalled) break;
    }

    result.ensemble.h1 = state.t1.take_model();
    result.ensemble.h2 = state.t2.take_model();
    return result;
}

SubchannelAlloc predict_subchannels(const SubchannelEnsemble& ensemble, const Scenario& sc,
                                    const Association& x) {
    std::vector<Vec> blocks;
    blocks.reserve(sc.n_stations());
    for (int b = 0; b < sc.n_stations(); ++b) {
        Vec raw = station_features(sc, x, b);
        Vec in = normalize_features(ensemble.h1, raw);
        blocks.push_back(ensemble.predict(in));
    }
    Vec scores = assemble_subchannel_scores(sc, x, blocks);
    return project_to_feasible(sc, x, scores);
}

double ensemble_mse(const SubchannelEnsemble& ensemble, const Matrix& x, const Matrix& y) {
    double acc = 0.0;
    for (int i = 0; i < x.rows; ++i) {
        Vec in(x.row(i), x.row(i) + x.cols);
        Vec pred = ensemble.predict(in);
        for (int j = 0; j < y.cols; ++j) {
            double d = pred[j] - y.at(i, j);
            acc += d * d;
        }
    }
    return acc / (static_cast<double>(x.rows) * y.cols);
}

double model_mse(const MlpModel& model, const Matrix& x, const Matrix& y) {
    return matrix_mse(model, x, y);
}

// ---------------------------------------------------------------------------
// Ensemble checkpoint: a model-kind file at its own version, holding both nets.
// ---------------------------------------------------------------------------

static constexpr uint32_t kEnsembleVersion = 2;

static void write_model_fields(BinWriter& w, const MlpModel& model) {
    w.u32(static_cast<uint32_t>(model.layers.size()));
    for (const auto& layer : model.layers) {
        w.u32(static_cast<uint32_t>(layer.in));
        w.u32(static_cast<uint32_t>(layer.out));
        w.u8(static_cast<uint8_t>(layer.act));
        w.f64(layer.keep);
        w.f64_array(layer.w.data(), layer.w.size());
        w.f64_array(layer.b.data(), layer.b.size());
    }
    w.u32(static_cast<uint32_t>(model.feat_mean.size()));
    w.f64_array(model.feat_mean.data(), model.feat_mean.size());
    w.f64_array(model.feat_std.data(), model.feat_std.size());
}

static MlpModel read_model_fields(BinReader& r) {
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

void SubchannelEnsemble::save(const std::string& path) const {
    BinWriter w;
    write_model_fields(w, h1);
    write_model_fields(w, h2);
    w.write_file(path, BinKind::model, kEnsembleVersion);
}

SubchannelEnsemble SubchannelEnsemble::load(const std::string& path) {
    BinReader r(path, BinKind::model, kEnsembleVersion);
    SubchannelEnsemble e;
    e.h1 = read_model_fields(r);
    e.h2 = read_model_fields(r);
    return e;
}

void write_cotrain_log_csv(const std::string& path, const std::vector<CoTrainRoundLog>& log) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fprintf(f, "round,labeled_1,labeled_2,delta_max_1,delta_max_2,val_mse\n");
    for (const auto& row : log)
        std::fprintf(f, "%d,%d,%d,%.12g,%.12g,%.12g\n", row.round, row.l1_size, row.l2_size,
                     row.delta_max_1, row.delta_max_2, row.val_mse);
    std::fclose(f);
}

}  // namespace noma
