#pragma once

#include <optional>
#include <string>
#include <vector>

#include "noma/features.hpp"
#include "noma/matching.hpp"
#include "noma/neural.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Co-training for subchannel allocation: two deliberately different learners
// trade their most trustworthy pseudo-labeled samples. A candidate's
// confidence is the drop in squared error over the learner's own labeled set
// after briefly fine-tuning a copy on the candidate; only positive drops are
// ever placed, and each placement goes into the *other* learner's set.
// ---------------------------------------------------------------------------

struct CoTrainConfig {
    int pool_size = 100;      // working pool drawn from the unlabeled set
    int t_max = 50;           // round cap
    int init_epochs = 100;    // initial supervised training per learner
    int ft_epochs = 5;        // per-candidate fine-tune budget
    int round_epochs = 5;     // model update budget after a round grows a set
    uint64_t seed = 1;

    // Learner shapes and schedules; the two must stay visibly different or
    // co-training collapses into self-training.
    std::vector<int> hidden1 = {700, 700, 700};
    std::vector<int> hidden2 = {80, 80, 80, 80};
    double keep1 = 0.8, keep2 = 1.0;
    double lr1 = 0.01, lr2 = 0.05;
    int batch1 = 200, batch2 = 500;
    OptimizerKind optimizer = OptimizerKind::rmsprop;

    void validate() const {
        if (pool_size < 1) throw ConfigError("pool_size must be >= 1");
        if (t_max < 0) throw ConfigError("t_max must be >= 0");
        if (init_epochs < 1 || ft_epochs < 1 || round_epochs < 1)
            throw ConfigError("epoch budgets must be >= 1");
    }
};

struct SubchannelEnsemble {
    MlpModel h1, h2;

    // Componentwise mean of the two regressors (inputs already normalized).
    Vec predict(const Vec& input) const;

    void save(const std::string& path) const;
    static SubchannelEnsemble load(const std::string& path);
};

// Squared-error drop over `labeled` when a copy of `model` is fine-tuned for
// ft_epochs on labeled + (g_u, model(g_u)). Positive means the pseudo-labeled
// candidate made the copy agree better with the ground truth.
double confidence_delta(const MlpModel& model, const TrainConfig& ft_cfg, int ft_epochs,
                        const Matrix& labeled_x, const Matrix& labeled_y, const Vec& g_u);

struct CoTrainState {
    Matrix l1_x, l1_y, l2_x, l2_y;  // per-learner labeled sets (grow only)
    std::vector<int> pool;          // row indices into the unlabeled matrix
    std::vector<int> reservoir;     // rows not yet drawn into the pool
    Trainer t1, t2;                 // learners with persistent optimizer state
    int iter = 0;
    bool stalled = false;           // both learners placed nothing last round
    double last_delta_max[2] = {0.0, 0.0};
    uint64_t seed = 0;

    CoTrainState(Trainer a, Trainer b) : t1(std::move(a)), t2(std::move(b)) {}
};

// One round: score the pool with both learners, place at most one item per
// learner into the other's set, retrain and refill if anything moved.
void cotrain_round(CoTrainState& state, const Matrix& unlabeled, const CoTrainConfig& cfg);

struct CoTrainRoundLog {
    int round;
    int l1_size, l2_size;
    double delta_max_1, delta_max_2;
    double val_mse;  // NaN when no validation set was given
};

struct CoTrainResult {
    SubchannelEnsemble ensemble;
    MlpModel initial_1, initial_2;  // learners right after supervised training
    std::vector<CoTrainRoundLog> log;
};

// Full run. `labeled` rows are raw features (normalization is computed here
// and bound to both learners); `unlabeled` rows share the schema.
CoTrainResult cotrain(const Matrix& labeled_x, const Matrix& labeled_y,
                      const Matrix& unlabeled_x, const CoTrainConfig& cfg,
                      const Matrix* val_x = nullptr, const Matrix* val_y = nullptr);

// Ensemble scores per station projected onto a feasible allocation.
SubchannelAlloc predict_subchannels(const SubchannelEnsemble& ensemble, const Scenario& sc,
                                    const Association& x);

double ensemble_mse(const SubchannelEnsemble& ensemble, const Matrix& x, const Matrix& y);
double model_mse(const MlpModel& model, const Matrix& x, const Matrix& y);

void write_cotrain_log_csv(const std::string& path, const std::vector<CoTrainRoundLog>& log);

}  // namespace noma
