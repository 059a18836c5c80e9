#include "noma/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "noma/binio.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Dataset persistence
// ---------------------------------------------------------------------------

static constexpr uint32_t kDatasetVersion = 1;

void Dataset::save(const std::string& path) const {
    BinWriter w;
    w.u8(static_cast<uint8_t>(kind));
    w.u32(static_cast<uint32_t>(features.rows));
    w.u32(static_cast<uint32_t>(features.cols));
    w.u32(static_cast<uint32_t>(labels.cols));
    w.u32(static_cast<uint32_t>(stations_per_scenario));
    w.u64(base_seed);
    w.u32(static_cast<uint32_t>(scenario_seeds.size()));
    w.u64_array(scenario_seeds.data(), scenario_seeds.size());
    w.u32(static_cast<uint32_t>(norm_mean.size()));
    w.f64_array(norm_mean.data(), norm_mean.size());
    w.f64_array(norm_std.data(), norm_std.size());
    w.f64_array(features.data.data(), features.data.size());
    w.f64_array(labels.data.data(), labels.data.size());
    w.write_file(path, BinKind::dataset, kDatasetVersion);
}

Dataset Dataset::load(const std::string& path) {
    BinReader r(path, BinKind::dataset, kDatasetVersion);
    Dataset ds;
    ds.kind = static_cast<DatasetKind>(r.u8());
    int rows = static_cast<int>(r.u32());
    int feat = static_cast<int>(r.u32());
    int lab = static_cast<int>(r.u32());
    ds.stations_per_scenario = static_cast<int>(r.u32());
    ds.base_seed = r.u64();
    uint32_t n_seeds = r.u32();
    ds.scenario_seeds.resize(n_seeds);
    r.u64_array(ds.scenario_seeds.data(), n_seeds);
    uint32_t nm = r.u32();
    ds.norm_mean.resize(nm);
    ds.norm_std.resize(nm);
    r.f64_array(ds.norm_mean.data(), nm);
    r.f64_array(ds.norm_std.data(), nm);
    ds.features = Matrix(rows, feat);
    r.f64_array(ds.features.data.data(), ds.features.data.size());
    ds.labels = Matrix(lab > 0 ? rows : 0, lab);
    r.f64_array(ds.labels.data.data(), ds.labels.data.size());
    if (ds.kind != DatasetKind::unlabeled && lab == 0 && rows > 0)
        throw IoError("labeled dataset without labels: " + path);
    return ds;
}

bool Dataset::operator==(const Dataset& o) const {
    return kind == o.kind && features == o.features && labels == o.labels &&
           norm_mean == o.norm_mean && norm_std == o.norm_std && base_seed == o.base_seed &&
           scenario_seeds == o.scenario_seeds &&
           stations_per_scenario == o.stations_per_scenario;
}

void save_dataset(const Dataset& ds, const std::string& path) { ds.save(path); }
Dataset load_dataset(const std::string& path) { return Dataset::load(path); }

// ---------------------------------------------------------------------------
// Classical oracle pipeline
// ---------------------------------------------------------------------------

Association capped_max_sinr_association(const Scenario& sc, int cap) {
    const int B = sc.n_stations();
    Association x(B, sc.n_users);
    std::vector<int> load(B, 0);
    for (int m = 0; m < sc.n_users; ++m) {
        int best_b = -1;
        double best = -1.0;
        for (int b = 0; b < B; ++b) {
            if (load[b] >= cap) continue;
            double top = 0.0;
            for (int n = 0; n < sc.n_subchannels; ++n)
                top = std::max(top, sc.gain(b, m, n));
            double ref = sc.stations[b].p_max * top / sc.noise_power;
            if (ref > best) { best = ref; best_b = b; }
        }
        if (best_b < 0)
            throw InfeasibleError("association cap leaves no room for user " + std::to_string(m));
        x.set(best_b, m, true);
        ++load[best_b];
    }
    return x;
}

// Move users off stations that ended above their cap, weakest score first,
// to their best-scoring station with room.
static void enforce_load_caps(const Scenario& sc, const ScoreMatrix& scores, int hard_cap,
                              Association& x) {
    const int B = sc.n_stations();
    std::vector<int> load(B);
    for (int b = 0; b < B; ++b) load[b] = x.load(b);
    auto cap_of = [&](int b) { return std::min(sc.stations[b].k_cap, hard_cap); };

    for (int b = 0; b < B; ++b) {
        while (load[b] > cap_of(b)) {
            int worst_m = -1;
            double worst = 0.0;
            for (int m = 0; m < sc.n_users; ++m) {
                if (!x.get(b, m)) continue;
                double v = scores.at(b, m);
                if (worst_m < 0 || v < worst) { worst = v; worst_m = m; }
            }
            int best_b = -1;
            double best = 0.0;
            for (int j = 0; j < B; ++j) {
                if (j == b || load[j] >= cap_of(j)) continue;
                double v = scores.at(j, worst_m);
                if (best_b < 0 || v > best) { best = v; best_b = j; }
            }
            if (best_b < 0)
                throw InfeasibleError("association caps admit no feasible placement");
            x.set(b, worst_m, false);
            x.set(best_b, worst_m, true);
            --load[b];
            ++load[best_b];
        }
    }
}

OracleRun run_oracle(const Scenario& sc, const OracleConfig& cfg) {
    const int hard_cap = 2 * sc.n_subchannels;
    int boot_cap = hard_cap;
    for (const auto& bs : sc.stations) boot_cap = std::min(boot_cap, bs.k_cap);

    Association x0 = capped_max_sinr_association(sc, boot_cap);
    PowerAlloc bg = uniform_background_power(sc);
    SubchannelAlloc s0 = two_side_matching(sc, x0, bg);
    PowerAlloc p0 = equal_power(sc, x0, s0);

    AssocResult assoc = solve_user_association(sc, s0, p0, cfg.assoc);
    ScoreMatrix final_scores = association_scores(sc, s0, p0, assoc.duals);
    enforce_load_caps(sc, final_scores, hard_cap, assoc.x);

    SubchannelAlloc s = two_side_matching(sc, assoc.x, p0);
    PowerResult pr = solve_power(sc, assoc.x, s, cfg.gradient);

    OracleRun run;
    run.x = std::move(assoc.x);
    run.s = std::move(s);
    run.p = cap_cross_interference(sc, run.x, run.s, pr.p);
    run.objective_trace = std::move(pr.trace);
    run.assoc_trace = std::move(assoc.trace);
    return run;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

namespace {

struct SampleBlocks {
    bool ok = false;
    uint64_t seed = 0;
    std::vector<Vec> features;  // per station
    std::vector<Vec> labels;    // per station (empty vectors for unlabeled)
};

bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

SampleBlocks make_labeled_sample(const ScenarioConfig& config, uint64_t scenario_seed,
                                 DatasetKind kind, const OracleConfig& oracle) {
    SampleBlocks out;
    out.seed = scenario_seed;
    try {
        Scenario sc = generate_scenario(config, scenario_seed);
        OracleRun run = run_oracle(sc, oracle);
        for (int b = 0; b < sc.n_stations(); ++b) {
            Vec f = station_features(sc, run.x, b);
            Vec l = kind == DatasetKind::subchannel
                        ? station_subchannel_labels(sc, run.x, run.s, b)
                        : station_power_labels(sc, run.x, run.s, run.p, b);
            if (!all_finite(f) || !all_finite(l)) return out;
            out.features.push_back(std::move(f));
            out.labels.push_back(std::move(l));
        }
        out.ok = true;
    } catch (const InfeasibleError&) {
        out.ok = false;
    }
    return out;
}

SampleBlocks make_unlabeled_sample(const ScenarioConfig& config, uint64_t scenario_seed) {
    SampleBlocks out;
    out.seed = scenario_seed;
    try {
        Scenario sc = generate_scenario(config, scenario_seed);
        int cap = 2 * sc.n_subchannels;
        for (const auto& bs : sc.stations) cap = std::min(cap, bs.k_cap);
        Association x = capped_max_sinr_association(sc, cap);
        for (int b = 0; b < sc.n_stations(); ++b) {
            Vec f = station_features(sc, x, b);
            if (!all_finite(f)) return out;
            out.features.push_back(std::move(f));
            out.labels.emplace_back();
        }
        out.ok = true;
    } catch (const InfeasibleError&) {
        out.ok = false;
    }
    return out;
}

constexpr int kMaxDrawAttempts = 8;

Dataset collect_dataset(const ScenarioConfig& config, int n_samples, DatasetKind kind,
                        uint64_t seed, const OracleConfig& oracle) {
    config.validate();
    if (n_samples < 0) throw ConfigError("n_samples must be >= 0");

    std::vector<SampleBlocks> blocks(n_samples);
    int skipped = 0;

#pragma omp parallel for schedule(dynamic) reduction(+ : skipped)
    for (int i = 0; i < n_samples; ++i) {
        for (int attempt = 0; attempt < kMaxDrawAttempts; ++attempt) {
            uint64_t scenario_seed =
                derive_seed(seed, static_cast<uint64_t>(i) * kMaxDrawAttempts + attempt);
            SampleBlocks sample = kind == DatasetKind::unlabeled
                                      ? make_unlabeled_sample(config, scenario_seed)
                                      : make_labeled_sample(config, scenario_seed, kind, oracle);
            if (sample.ok) {
                blocks[i] = std::move(sample);
                break;
            }
            ++skipped;
        }
    }

    for (int i = 0; i < n_samples; ++i)
        if (!blocks[i].ok)
            throw InfeasibleError("sample " + std::to_string(i) + " failed after " +
                                  std::to_string(kMaxDrawAttempts) + " draws");
    if (skipped > 0)
        std::fprintf(stderr, "dataset generation: %d infeasible draws replaced\n", skipped);

    Dataset ds;
    ds.kind = kind;
    ds.base_seed = seed;
    ds.stations_per_scenario = config.n_stations();
    const int per = config.n_stations();
    int feat_dim = 0, label_dim = 0;
    if (n_samples > 0) {
        feat_dim = static_cast<int>(blocks[0].features[0].size());
        label_dim = kind == DatasetKind::unlabeled
                        ? 0
                        : static_cast<int>(blocks[0].labels[0].size());
    } else {
        SlotLayout layout{1, config.n_subchannels};
        // An empty dataset still records a consistent schema.
        ScenarioConfig probe = config;
        Scenario sc = generate_scenario(probe, seed);
        layout = slot_layout(sc);
        feat_dim = layout.feature_dim();
        label_dim = kind == DatasetKind::subchannel  ? layout.subchannel_label_dim()
                    : kind == DatasetKind::power     ? layout.power_label_dim()
                                                     : 0;
    }

    ds.features = Matrix(n_samples * per, feat_dim);
    ds.labels = Matrix(label_dim > 0 ? n_samples * per : 0, label_dim);
    for (int i = 0; i < n_samples; ++i) {
        ds.scenario_seeds.push_back(blocks[i].seed);
        for (int b = 0; b < per; ++b) {
            std::copy(blocks[i].features[b].begin(), blocks[i].features[b].end(),
                      ds.features.row(i * per + b));
            if (label_dim > 0)
                std::copy(blocks[i].labels[b].begin(), blocks[i].labels[b].end(),
                          ds.labels.row(i * per + b));
        }
    }

    ds.norm_mean.assign(feat_dim, 0.0);
    ds.norm_std.assign(feat_dim, 1.0);
    if (ds.features.rows > 0) {
        for (int j = 0; j < feat_dim; ++j) {
            double mean = 0.0;
            for (int i = 0; i < ds.features.rows; ++i) mean += ds.features.at(i, j);
            mean /= ds.features.rows;
            double var = 0.0;
            for (int i = 0; i < ds.features.rows; ++i) {
                double c = ds.features.at(i, j) - mean;
                var += c * c;
            }
            double stdev = std::sqrt(var / ds.features.rows);
            ds.norm_mean[j] = mean;
            ds.norm_std[j] = stdev < 1e-12 ? 1.0 : stdev;
        }
    }
    return ds;
}

}  // namespace

Dataset generate_labeled(const ScenarioConfig& config, int n_samples, DatasetKind kind,
                         uint64_t seed, const OracleConfig& oracle) {
    if (kind == DatasetKind::unlabeled)
        throw ConfigError("generate_labeled expects a labeled kind");
    if (n_samples < 1) throw ConfigError("labeled datasets need n_samples >= 1");
    return collect_dataset(config, n_samples, kind, seed, oracle);
}

Dataset generate_unlabeled(const ScenarioConfig& config, int n_samples, uint64_t seed) {
    return collect_dataset(config, n_samples, DatasetKind::unlabeled, seed, {});
}

// ---------------------------------------------------------------------------
// CDFs
// ---------------------------------------------------------------------------

CdfSeries compute_cdf(Vec values) {
    if (values.empty()) throw ConfigError("cdf of an empty sample");
    std::sort(values.begin(), values.end());
    CdfSeries out;
    const size_t n = values.size();
    for (size_t i = 0; i < n; ++i) {
        if (i + 1 < n && values[i + 1] == values[i]) continue;  // keep the last duplicate
        out.values.push_back(values[i]);
        out.fractions.push_back(static_cast<double>(i + 1) / static_cast<double>(n));
    }
    return out;
}

void write_cdf_csv(const std::string& path, const CdfSeries& series) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fprintf(f, "%s,cumulative_fraction\n",
                 series.metric.empty() ? "value" : series.metric.c_str());
    for (size_t i = 0; i < series.values.size(); ++i)
        std::fprintf(f, "%.12g,%.12g\n", series.values[i], series.fractions[i]);
    std::fclose(f);
}

// ---------------------------------------------------------------------------
// Training on datasets
// ---------------------------------------------------------------------------

MlpModel train_power_model(const Dataset& ds, const PowerNetConfig& cfg) {
    if (ds.kind != DatasetKind::power) throw ConfigError("power training needs a power dataset");
    if (ds.features.rows == 0) throw ConfigError("empty dataset");
    MlpModel model = make_mlp(ds.features.cols, cfg.hidden, ds.labels.cols, 1.0,
                              derive_seed(cfg.train.seed, 0xA1u));
    bind_normalization(model, ds.features);
    Matrix nx = normalize_matrix(model, ds.features);
    TrainResult tr = train(model, nx, ds.labels, cfg.train);
    tr.model.feat_mean = model.feat_mean;
    tr.model.feat_std = model.feat_std;
    return std::move(tr.model);
}

MlpModel train_subchannel_model(const Dataset& ds, const SubchannelNetConfig& cfg) {
    if (ds.kind != DatasetKind::subchannel)
        throw ConfigError("subchannel training needs a subchannel dataset");
    if (ds.features.rows == 0) throw ConfigError("empty dataset");
    MlpModel model = make_mlp(ds.features.cols, cfg.hidden, ds.labels.cols, cfg.keep,
                              derive_seed(cfg.train.seed, 0xB2u));
    bind_normalization(model, ds.features);
    Matrix nx = normalize_matrix(model, ds.features);
    TrainResult tr = train(model, nx, ds.labels, cfg.train);
    tr.model.feat_mean = model.feat_mean;
    tr.model.feat_std = model.feat_std;
    return std::move(tr.model);
}

CoTrainResult cotrain_subchannel(const Dataset& labeled, const Dataset& unlabeled,
                                 const CoTrainConfig& cfg, const Dataset* validation) {
    if (labeled.kind != DatasetKind::subchannel)
        throw ConfigError("co-training needs a subchannel dataset");
    const Matrix* vx = validation ? &validation->features : nullptr;
    const Matrix* vy = validation ? &validation->labels : nullptr;
    return cotrain(labeled.features, labeled.labels, unlabeled.features, cfg, vx, vy);
}

PowerAlloc predict_power(const MlpModel& model, const Scenario& sc, const Association& x,
                         const SubchannelAlloc& s) {
    std::vector<Vec> blocks;
    blocks.reserve(sc.n_stations());
    for (int b = 0; b < sc.n_stations(); ++b) {
        Vec raw = station_features(sc, x, b);
        blocks.push_back(forward(model, normalize_features(model, raw), RunMode::infer));
    }
    return assemble_power(sc, x, s, blocks);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

namespace {

std::vector<uint64_t> test_seeds(uint64_t seed, int n) {
    std::vector<uint64_t> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = derive_seed(seed, 0xE5700000ull + static_cast<uint64_t>(i));
    return out;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

struct CsvFile {
    std::FILE* f;
    explicit CsvFile(const std::string& path) : f(std::fopen(path.c_str(), "w")) {
        if (!f) throw IoError("cannot open for writing: " + path);
    }
    ~CsvFile() { if (f) std::fclose(f); }
    void header(const char* text) { std::fputs(text, f); }
    void line(const char* fmt, auto... args) { std::fprintf(f, fmt, args...); }
};

double mean_of(const Vec& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double median_of(Vec v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void experiment_fig4(const ScenarioConfig& config, uint64_t seed, const std::string& out_dir,
                     int n_seeds) {
    OracleConfig oracle;
    CsvFile loads(join_path(out_dir, "fig4_loads.csv"));
    loads.header("seed_index,station,kind,users_dual_decomposition,users_max_sinr\n");

    Vec macro_dual, macro_ms;
    auto seeds = test_seeds(seed, n_seeds);
    for (int i = 0; i < n_seeds; ++i) {
        Scenario sc = generate_scenario(config, seeds[i]);
        OracleRun run = run_oracle(sc, oracle);
        Association ms = max_sinr_association(sc);
        for (int b = 0; b < sc.n_stations(); ++b)
            loads.line("%d,%d,%s,%d,%d\n", i, b,
                       sc.stations[b].kind == BsKind::macro ? "macro" : "small",
                       run.x.load(b), ms.load(b));
        macro_dual.push_back(run.x.load(0));
        macro_ms.push_back(ms.load(0));
    }
    CsvFile summary(join_path(out_dir, "fig4_summary.csv"));
    summary.header("metric,dual_decomposition,max_sinr\n");
    summary.line("mean_macro_users,%.12g,%.12g\n", mean_of(macro_dual), mean_of(macro_ms));
}

struct TestPoint {
    Scenario sc;
    OracleRun oracle;
};

std::vector<TestPoint> build_test_points(const ScenarioConfig& config, uint64_t seed, int n,
                                         const OracleConfig& oracle) {
    std::vector<TestPoint> points(n);
    auto seeds = test_seeds(seed, n);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        points[i].sc = generate_scenario(config, seeds[i]);
        points[i].oracle = run_oracle(points[i].sc, oracle);
    }
    return points;
}

double scheme_sum_rate(const Scenario& sc, const Association& x, const SubchannelAlloc& s) {
    PowerAlloc p = cap_cross_interference(sc, x, s, equal_power(sc, x, s));
    return sum_rate(sc, x, s, p);
}

void experiment_fig5(const ScenarioConfig& config, uint64_t seed, const std::string& out_dir,
                     int n, const ExperimentOptions& opts) {
    if (opts.ensemble_path.empty() || opts.subchannel_model_path.empty())
        throw ConfigError("fig5 needs --ensemble and --subchannel-model");
    SubchannelEnsemble ensemble = SubchannelEnsemble::load(opts.ensemble_path);
    MlpModel single = MlpModel::load(opts.subchannel_model_path);

    OracleConfig oracle;
    auto points = build_test_points(config, seed, n, oracle);
    Vec rate_match, rate_single, rate_semi;
    for (auto& pt : points) {
        rate_match.push_back(scheme_sum_rate(pt.sc, pt.oracle.x, pt.oracle.s));

        std::vector<Vec> blocks;
        for (int b = 0; b < pt.sc.n_stations(); ++b) {
            Vec raw = station_features(pt.sc, pt.oracle.x, b);
            blocks.push_back(forward(single, normalize_features(single, raw), RunMode::infer));
        }
        SubchannelAlloc s_single = project_to_feasible(
            pt.sc, pt.oracle.x, assemble_subchannel_scores(pt.sc, pt.oracle.x, blocks));
        rate_single.push_back(scheme_sum_rate(pt.sc, pt.oracle.x, s_single));

        SubchannelAlloc s_semi = predict_subchannels(ensemble, pt.sc, pt.oracle.x);
        rate_semi.push_back(scheme_sum_rate(pt.sc, pt.oracle.x, s_semi));
    }

    auto emit = [&](const char* scheme, const Vec& v) {
        CdfSeries cdf = compute_cdf(v);
        cdf.metric = "sum_rate_bits_per_s";
        cdf.scheme = scheme;
        write_cdf_csv(join_path(out_dir, std::string("fig5_sum_rate_cdf_") + scheme + ".csv"),
                      cdf);
    };
    emit("matching", rate_match);
    emit("single_dnn", rate_single);
    emit("semi_supervised", rate_semi);

    CsvFile summary(join_path(out_dir, "fig5_summary.csv"));
    summary.header("scheme,mean_sum_rate_bits_per_s,median_sum_rate_bits_per_s,mean_ratio_to_matching\n");
    auto row = [&](const char* scheme, const Vec& v) {
        double ratio = 0.0;
        for (size_t i = 0; i < v.size(); ++i) ratio += v[i] / rate_match[i];
        ratio /= v.size();
        summary.line("%s,%.12g,%.12g,%.12g\n", scheme, mean_of(v), median_of(v), ratio);
    };
    row("matching", rate_match);
    row("single_dnn", rate_single);
    row("semi_supervised", rate_semi);
}

void experiment_fig6(const ScenarioConfig& config, uint64_t seed, const std::string& out_dir,
                     int n, const ExperimentOptions& opts) {
    if (opts.power_model_path.empty()) throw ConfigError("fig6 needs --power-model");
    MlpModel power_net = MlpModel::load(opts.power_model_path);

    OracleConfig oracle;
    auto points = build_test_points(config, seed, n, oracle);
    Vec ee_grad, ee_dnn, ratios;
    for (auto& pt : points) {
        double grad = energy_efficiency(pt.sc, pt.oracle.x, pt.oracle.s, pt.oracle.p);
        PowerAlloc dnn = cap_cross_interference(
            pt.sc, pt.oracle.x, pt.oracle.s,
            predict_power(power_net, pt.sc, pt.oracle.x, pt.oracle.s));
        double learned = energy_efficiency(pt.sc, pt.oracle.x, pt.oracle.s, dnn);
        ee_grad.push_back(grad);
        ee_dnn.push_back(learned);
        ratios.push_back(learned / grad);
    }

    auto emit = [&](const char* scheme, const Vec& v) {
        CdfSeries cdf = compute_cdf(v);
        cdf.metric = "ee_bits_per_joule";
        cdf.scheme = scheme;
        write_cdf_csv(join_path(out_dir, std::string("fig6_ee_cdf_") + scheme + ".csv"), cdf);
    };
    emit("gradient", ee_grad);
    emit("power_dnn", ee_dnn);

    CsvFile summary(join_path(out_dir, "fig6_summary.csv"));
    summary.header("metric,value\n");
    summary.line("mean_ee_gradient_bits_per_joule,%.12g\n", mean_of(ee_grad));
    summary.line("mean_ee_power_dnn_bits_per_joule,%.12g\n", mean_of(ee_dnn));
    summary.line("mean_ee_ratio_dnn_over_gradient,%.12g\n", mean_of(ratios));
    summary.line("median_ee_ratio_dnn_over_gradient,%.12g\n", median_of(ratios));
}

void experiment_fig7(const ScenarioConfig& config, uint64_t seed, const std::string& out_dir,
                     int n_probe, const ExperimentOptions& opts) {
    if (opts.power_dataset_path.empty()) throw ConfigError("fig7 needs --data");
    Dataset ds = load_dataset(opts.power_dataset_path);
    if (ds.kind != DatasetKind::power) throw ConfigError("fig7 needs a power dataset");

    OracleConfig oracle;
    auto points = build_test_points(config, seed, n_probe, oracle);

    PowerNetConfig net_cfg;
    net_cfg.train.seed = derive_seed(seed, 0xF16u);
    MlpModel model = make_mlp(ds.features.cols, net_cfg.hidden, ds.labels.cols, 1.0,
                              derive_seed(net_cfg.train.seed, 0xA1u));
    bind_normalization(model, ds.features);
    Matrix nx = normalize_matrix(model, ds.features);
    Vec mean_copy = model.feat_mean, std_copy = model.feat_std;
    Trainer trainer(std::move(model), net_cfg.train);

    CsvFile curve(join_path(out_dir, "fig7_training_curve.csv"));
    curve.header("epoch,train_mse,mean_ee_dnn_bits_per_joule,mean_ee_gradient_bits_per_joule\n");
    double oracle_ee = 0.0;
    for (auto& pt : points)
        oracle_ee += energy_efficiency(pt.sc, pt.oracle.x, pt.oracle.s, pt.oracle.p);
    oracle_ee /= points.size();

    for (int e = 1; e <= net_cfg.train.epochs; ++e) {
        double loss = trainer.run_epoch(nx, ds.labels);
        MlpModel probe = trainer.model();
        probe.feat_mean = mean_copy;
        probe.feat_std = std_copy;
        double acc = 0.0;
        for (auto& pt : points) {
            PowerAlloc p = cap_cross_interference(
                pt.sc, pt.oracle.x, pt.oracle.s,
                predict_power(probe, pt.sc, pt.oracle.x, pt.oracle.s));
            acc += energy_efficiency(pt.sc, pt.oracle.x, pt.oracle.s, p);
        }
        curve.line("%d,%.12g,%.12g,%.12g\n", e, loss, acc / points.size(), oracle_ee);
    }
}

void experiment_fig8(const ScenarioConfig& config, uint64_t seed, const std::string& out_dir,
                     int n, const ExperimentOptions& opts) {
    if (opts.power_model_path.empty() || opts.ensemble_path.empty())
        throw ConfigError("fig8 needs --power-model and --ensemble");
    MlpModel power_net = MlpModel::load(opts.power_model_path);
    SubchannelEnsemble ensemble = SubchannelEnsemble::load(opts.ensemble_path);

    OracleConfig oracle;
    auto points = build_test_points(config, seed, n, oracle);
    Vec ee_grad, ee_equal, ee_random, ee_dnn, ee_semi;
    auto seeds = test_seeds(seed, n);
    for (int i = 0; i < n; ++i) {
        auto& pt = points[i];
        const Scenario& sc = pt.sc;
        const Association& x = pt.oracle.x;
        const SubchannelAlloc& s = pt.oracle.s;

        ee_grad.push_back(energy_efficiency(sc, x, s, pt.oracle.p));

        PowerAlloc pe = cap_cross_interference(sc, x, s, equal_power(sc, x, s));
        ee_equal.push_back(energy_efficiency(sc, x, s, pe));

        PowerAlloc prand = cap_cross_interference(
            sc, x, s, random_power(sc, x, s, derive_seed(seeds[i], 0x52414E44ull)));
        ee_random.push_back(energy_efficiency(sc, x, s, prand));

        PowerAlloc pdnn =
            cap_cross_interference(sc, x, s, predict_power(power_net, sc, x, s));
        ee_dnn.push_back(energy_efficiency(sc, x, s, pdnn));

        SubchannelAlloc s_semi = predict_subchannels(ensemble, sc, x);
        PowerAlloc psemi =
            cap_cross_interference(sc, x, s_semi, predict_power(power_net, sc, x, s_semi));
        ee_semi.push_back(energy_efficiency(sc, x, s_semi, psemi));
    }

    auto emit = [&](const char* scheme, const Vec& v) {
        CdfSeries cdf = compute_cdf(v);
        cdf.metric = "ee_bits_per_joule";
        cdf.scheme = scheme;
        write_cdf_csv(join_path(out_dir, std::string("fig8_ee_cdf_") + scheme + ".csv"), cdf);
    };
    emit("gradient", ee_grad);
    emit("equal", ee_equal);
    emit("random", ee_random);
    emit("power_dnn", ee_dnn);
    emit("semi_dnn", ee_semi);

    CsvFile summary(join_path(out_dir, "fig8_summary.csv"));
    summary.header("scheme,mean_ee_bits_per_joule,median_ee_bits_per_joule\n");
    summary.line("gradient,%.12g,%.12g\n", mean_of(ee_grad), median_of(ee_grad));
    summary.line("equal,%.12g,%.12g\n", mean_of(ee_equal), median_of(ee_equal));
    summary.line("random,%.12g,%.12g\n", mean_of(ee_random), median_of(ee_random));
    summary.line("power_dnn,%.12g,%.12g\n", mean_of(ee_dnn), median_of(ee_dnn));
    summary.line("semi_dnn,%.12g,%.12g\n", mean_of(ee_semi), median_of(ee_semi));
}

}  // namespace

void run_experiment(const std::string& name, const ScenarioConfig& config, uint64_t seed,
                    const std::string& out_dir, const ExperimentOptions& opts) {
    std::filesystem::create_directories(out_dir);
    if (name == "fig4") {
        experiment_fig4(config, seed, out_dir, opts.n_scenarios > 0 ? opts.n_scenarios : 20);
    } else if (name == "fig5") {
        experiment_fig5(config, seed, out_dir, opts.n_scenarios > 0 ? opts.n_scenarios : 200,
                        opts);
    } else if (name == "fig6") {
        experiment_fig6(config, seed, out_dir, opts.n_scenarios > 0 ? opts.n_scenarios : 200,
                        opts);
    } else if (name == "fig7") {
        experiment_fig7(config, seed, out_dir, opts.n_scenarios > 0 ? opts.n_scenarios : 30,
                        opts);
    } else if (name == "fig8") {
        experiment_fig8(config, seed, out_dir, opts.n_scenarios > 0 ? opts.n_scenarios : 200,
                        opts);
    } else {
        throw ConfigError("unknown experiment name: " + name);
    }
}

}  // namespace noma
