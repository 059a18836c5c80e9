// Command-line front end: dataset generation, model training, experiment
// evaluation and single-scenario oracle runs. Exit codes: 0 ok, 1 bad
// configuration, 2 infeasible instance, 3 I/O failure.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "noma/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string scale = "desk";
};

noma::ScenarioConfig resolve_config(const CommonArgs& args) {
    noma::ScenarioConfig cfg;
    if (args.scale == "desk") cfg = noma::ScenarioConfig::desk_scale();
    else if (args.scale == "paper") cfg = noma::ScenarioConfig::paper_scale();
    else throw noma::ConfigError("unknown scale: " + args.scale);
    if (!args.config_path.empty()) cfg = noma::ScenarioConfig::from_file(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Scenario config file (key = value lines)");
    cmd->add_option("--seed", args.seed, "Master seed")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--scale", args.scale, "Built-in preset when no config file is given")
        ->check(CLI::IsMember({"desk", "paper"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-efficiency resource management toolkit for NOMA heterogeneous networks"};
    app.require_subcommand(1);

    // --- gen ---------------------------------------------------------------
    CommonArgs gen_args;
    std::string gen_kind = "subchannel";
    int gen_n = 2000;
    std::string gen_out = "dataset.bin";
    auto* gen = app.add_subcommand("gen", "Generate a dataset");
    add_common(gen, gen_args);
    gen->add_option("--kind", gen_kind, "subchannel | power | unlabeled")
        ->check(CLI::IsMember({"subchannel", "power", "unlabeled"}));
    gen->add_option("--n", gen_n, "Number of scenarios");
    gen->add_option("--out", gen_out, "Output dataset file")->required();

    // --- train --------------------------------------------------------------
    std::string train_mode = "power-dnn";
    std::string train_data, train_unlabeled, train_out = "model.bin";
    int train_epochs = 0, train_batch = 0, cot_pool = 0, cot_rounds = -1, cot_init_epochs = 0;
    double train_lr = 0.0;
    uint64_t train_seed = 1;
    auto* tr = app.add_subcommand("train", "Train a model from a dataset");
    tr->add_option("--mode", train_mode, "power-dnn | subchannel-dnn | cotrain")
        ->check(CLI::IsMember({"power-dnn", "subchannel-dnn", "cotrain"}));
    tr->add_option("--data", train_data, "Labeled dataset")->required();
    tr->add_option("--unlabeled", train_unlabeled, "Unlabeled dataset (cotrain)");
    tr->add_option("--out", train_out, "Output model file")->required();
    tr->add_option("--epochs", train_epochs, "Override training epochs");
    tr->add_option("--batch", train_batch, "Override batch size");
    tr->add_option("--lr", train_lr, "Override learning rate");
    tr->add_option("--pool", cot_pool, "Co-training pool size");
    tr->add_option("--rounds", cot_rounds, "Co-training round cap");
    tr->add_option("--init-epochs", cot_init_epochs, "Co-training initial epochs");
    tr->add_option("--train-seed", train_seed, "Training seed");

    // --- eval ---------------------------------------------------------------
    CommonArgs eval_args;
    std::string eval_name, eval_out = "results";
    noma::ExperimentOptions eval_opts;
    auto* ev = app.add_subcommand("eval", "Run a named experiment");
    add_common(ev, eval_args);
    ev->add_option("--name", eval_name, "fig4 | fig5 | fig6 | fig7 | fig8")->required();
    ev->add_option("--out", eval_out, "Output directory");
    ev->add_option("--n", eval_opts.n_scenarios, "Number of evaluation scenarios");
    ev->add_option("--power-model", eval_opts.power_model_path, "Trained power net");
    ev->add_option("--ensemble", eval_opts.ensemble_path, "Trained co-training ensemble");
    ev->add_option("--subchannel-model", eval_opts.subchannel_model_path,
                   "Trained single subchannel net");
    ev->add_option("--data", eval_opts.power_dataset_path, "Power dataset (fig7)");

    // --- oracle ---------------------------------------------------------------
    CommonArgs oracle_args;
    std::string oracle_out;
    auto* orc = app.add_subcommand("oracle", "Run one scenario through the classical pipeline");
    add_common(orc, oracle_args);
    orc->add_option("--out", oracle_out, "Directory for trace CSVs and the scenario dump");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            noma::ScenarioConfig cfg = resolve_config(gen_args);
            uint64_t seed = gen_args.seed_set ? gen_args.seed : cfg.seed;
            noma::Dataset ds;
            if (gen_kind == "unlabeled") {
                ds = noma::generate_unlabeled(cfg, gen_n, seed);
            } else {
                auto kind = gen_kind == "power" ? noma::DatasetKind::power
                                                : noma::DatasetKind::subchannel;
                ds = noma::generate_labeled(cfg, gen_n, kind, seed);
            }
            noma::save_dataset(ds, gen_out);
            std::printf("wrote %s: %d scenarios, %d rows, %d features\n", gen_out.c_str(),
                        ds.n_scenarios(), ds.features.rows, ds.features.cols);
        } else if (tr->parsed()) {
            noma::Dataset ds = noma::load_dataset(train_data);
            if (train_mode == "power-dnn") {
                noma::PowerNetConfig cfg;
                cfg.train.seed = train_seed;
                if (train_epochs > 0) cfg.train.epochs = train_epochs;
                if (train_batch > 0) cfg.train.batch_size = train_batch;
                if (train_lr > 0) cfg.train.learn_rate = train_lr;
                noma::MlpModel model = noma::train_power_model(ds, cfg);
                model.save(train_out);
                std::printf("wrote %s\n", train_out.c_str());
            } else if (train_mode == "subchannel-dnn") {
                noma::SubchannelNetConfig cfg;
                cfg.train.seed = train_seed;
                if (train_epochs > 0) cfg.train.epochs = train_epochs;
                if (train_batch > 0) cfg.train.batch_size = train_batch;
                if (train_lr > 0) cfg.train.learn_rate = train_lr;
                noma::MlpModel model = noma::train_subchannel_model(ds, cfg);
                model.save(train_out);
                std::printf("wrote %s\n", train_out.c_str());
            } else {
                if (train_unlabeled.empty())
                    throw noma::ConfigError("cotrain needs --unlabeled");
                noma::Dataset unlabeled = noma::load_dataset(train_unlabeled);
                noma::CoTrainConfig cfg;
                cfg.seed = train_seed;
                if (cot_pool > 0) cfg.pool_size = cot_pool;
                if (cot_rounds >= 0) cfg.t_max = cot_rounds;
                if (cot_init_epochs > 0) cfg.init_epochs = cot_init_epochs;
                noma::CoTrainResult result = noma::cotrain_subchannel(ds, unlabeled, cfg);
                result.ensemble.save(train_out);
                noma::write_cotrain_log_csv(train_out + ".rounds.csv", result.log);
                std::printf("wrote %s (%zu rounds)\n", train_out.c_str(), result.log.size());
            }
        } else if (ev->parsed()) {
            noma::ScenarioConfig cfg = resolve_config(eval_args);
            uint64_t seed = eval_args.seed_set ? eval_args.seed : cfg.seed;
            noma::run_experiment(eval_name, cfg, seed, eval_out, eval_opts);
            std::printf("experiment %s written to %s\n", eval_name.c_str(), eval_out.c_str());
        } else if (orc->parsed()) {
            noma::ScenarioConfig cfg = resolve_config(oracle_args);
            uint64_t seed = oracle_args.seed_set ? oracle_args.seed : cfg.seed;
            noma::Scenario sc = noma::generate_scenario(cfg, seed);
            noma::OracleRun run = noma::run_oracle(sc, {});
            noma::ConstraintReport rep = noma::check_constraints(sc, run.x, run.s, run.p);
            std::printf("sum_rate_bits_per_s,%.12g\n", noma::sum_rate(sc, run.x, run.s, run.p));
            std::printf("total_power_watts,%.12g\n", noma::total_power(sc, run.x, run.s, run.p));
            std::printf("ee_bits_per_joule,%.12g\n",
                        noma::energy_efficiency(sc, run.x, run.s, run.p));
            std::printf("macro_users,%d\n", run.x.load(0));
            std::printf("feasible_core,%s\n", rep.core_pass() ? "yes" : "no");
            std::printf("qos_satisfied_fraction,%.12g\n", rep.qos_satisfied_fraction);
            if (!oracle_out.empty()) {
                std::filesystem::create_directories(oracle_out);
                sc.save((std::filesystem::path(oracle_out) / "scenario.bin").string());
                noma::write_assoc_trace_csv(
                    (std::filesystem::path(oracle_out) / "association_trace.csv").string(),
                    run.assoc_trace);
                std::FILE* f = std::fopen(
                    (std::filesystem::path(oracle_out) / "power_trace.csv").string().c_str(),
                    "w");
                if (!f) throw noma::IoError("cannot write power trace");
                std::fprintf(f, "sweep,objective\n");
                for (size_t i = 0; i < run.objective_trace.size(); ++i)
                    std::fprintf(f, "%zu,%.12g\n", i, run.objective_trace[i]);
                std::fclose(f);
            }
        }
    } catch (const noma::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
