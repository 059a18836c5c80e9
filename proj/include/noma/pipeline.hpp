#pragma once

#include <string>
#include <vector>

#include "noma/assoc.hpp"
#include "noma/cotrain.hpp"
#include "noma/features.hpp"
#include "noma/matching.hpp"
#include "noma/netmodel.hpp"
#include "noma/neural.hpp"
#include "noma/powerctl.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Dataset generation and persistence, the classical oracle pipeline, CDF
// utilities and the named experiments behind the `eval` CLI command.
// ---------------------------------------------------------------------------

enum class DatasetKind : uint8_t { subchannel = 0, power = 1, unlabeled = 2 };

struct Dataset {
    DatasetKind kind = DatasetKind::unlabeled;
    Matrix features;   // one row per station block, raw dB features
    Matrix labels;     // empty for unlabeled
    Vec norm_mean, norm_std;  // per-feature stats of this dataset
    uint64_t base_seed = 0;
    std::vector<uint64_t> scenario_seeds;  // per kept scenario
    int stations_per_scenario = 0;

    int n_scenarios() const { return static_cast<int>(scenario_seeds.size()); }

    void save(const std::string& path) const;
    static Dataset load(const std::string& path);
    bool operator==(const Dataset& o) const;
};

struct OracleConfig {
    AssocSolverConfig assoc;
    GradientConfig gradient;
};

struct OracleRun {
    Association x;
    SubchannelAlloc s;
    PowerAlloc p;                       // budget-respecting, interference-capped
    Vec objective_trace;
    std::vector<AssocTraceRow> assoc_trace;
};

// Bootstrap association: best reference SINR subject to a per-station load
// cap, so the first matching pass always has room.
Association capped_max_sinr_association(const Scenario& sc, int cap);

// The full classical pipeline for one scenario: capped max-SINR bootstrap,
// matching, equal power, dual-decomposition association, re-matching,
// gradient power, cross-tier interference capping.
OracleRun run_oracle(const Scenario& sc, const OracleConfig& cfg);

// n_samples scenarios worth of labeled station blocks. A scenario whose
// oracle run fails (or no longer fits the learner slots) is skipped and a
// replacement seed is drawn, a bounded number of times.
Dataset generate_labeled(const ScenarioConfig& config, int n_samples, DatasetKind kind,
                         uint64_t seed, const OracleConfig& oracle = {});

// Gain features only; slotting comes from the capped bootstrap association,
// no iterative solver runs.
Dataset generate_unlabeled(const ScenarioConfig& config, int n_samples, uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Empirical CDFs.
// ---------------------------------------------------------------------------

struct CdfSeries {
    Vec values;      // ascending, unique
    Vec fractions;   // strictly increasing to 1
    std::string metric, scheme;
};

CdfSeries compute_cdf(Vec values);
void write_cdf_csv(const std::string& path, const CdfSeries& series);

// ---------------------------------------------------------------------------
// Model training on datasets (normalization constants are computed from the
// dataset and stored with the returned model).
// ---------------------------------------------------------------------------

struct PowerNetConfig {
    std::vector<int> hidden = {800, 800, 800};
    TrainConfig train{0.01, 200, 100, OptimizerKind::adam, 1};
};

MlpModel train_power_model(const Dataset& ds, const PowerNetConfig& cfg);

// Single-learner baseline for the subchannel task (the wide learner's shape).
struct SubchannelNetConfig {
    std::vector<int> hidden = {700, 700, 700};
    double keep = 0.8;
    TrainConfig train{0.01, 200, 100, OptimizerKind::rmsprop, 1};
};

MlpModel train_subchannel_model(const Dataset& ds, const SubchannelNetConfig& cfg);

CoTrainResult cotrain_subchannel(const Dataset& labeled, const Dataset& unlabeled,
                                 const CoTrainConfig& cfg, const Dataset* validation = nullptr);

// Power prediction for a known allocation, budget-capped per station.
PowerAlloc predict_power(const MlpModel& model, const Scenario& sc, const Association& x,
                         const SubchannelAlloc& s);

// ---------------------------------------------------------------------------
// Experiments. Every emitted allocation is interference-capped before its
// metric is computed so the outputs respect the feasibility contract.
// ---------------------------------------------------------------------------

struct ExperimentOptions {
    int n_scenarios = 0;             // 0 = per-experiment default
    std::string power_model_path;    // fig6, fig8
    std::string ensemble_path;       // fig5, fig8
    std::string subchannel_model_path;  // fig5
    std::string power_dataset_path;  // fig7
};

// Known names: fig4 (association load comparison), fig5 (sum-rate CDFs of
// subchannel schemes), fig6 (power-net approximation of the gradient oracle),
// fig7 (EE versus training epochs), fig8 (EE CDFs of power schemes).
void run_experiment(const std::string& name, const ScenarioConfig& config, uint64_t seed,
                    const std::string& out_dir, const ExperimentOptions& opts = {});

}  // namespace noma
