// Experiment driver: every protocol is a subcommand over a declarative JSON
// config, with flags overriding individual fields.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stgllm/checkpoint.hpp"
#include "stgllm/experiments.hpp"

namespace fs = std::filesystem;
using namespace stgllm;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string dataset;
    std::string checkpoint;
    std::string variant;
    std::string prompt_template;
    std::string seeds_csv;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON experiment config");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--dataset", f.dataset, "dataset directory");
    cmd->add_option("--checkpoint", f.checkpoint, "checkpoint directory");
    cmd->add_option("--variant", f.variant, "full|no-llm|no-pe|no-tokenizer|no-adapter");
    cmd->add_option("--prompt-template", f.prompt_template, "prompt template file");
    cmd->add_option("--seed", f.seeds_csv, "comma-separated seed list");
}

std::vector<uint64_t> parse_seeds(const std::string& csv) {
    std::vector<uint64_t> seeds;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        seeds.push_back(std::stoull(csv.substr(pos, next - pos)));
        pos = next + 1;
    }
    require(!seeds.empty(), ErrorCode::InvalidConfig, "--seed: empty list");
    return seeds;
}

ExperimentConfig resolve_config(const CommonFlags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) cfg = ExperimentConfig::from_file(f.config_path);
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (!f.dataset.empty()) cfg.dataset_dir = f.dataset;
    if (!f.checkpoint.empty()) cfg.checkpoint = f.checkpoint;
    if (!f.variant.empty()) cfg.variant = f.variant;
    if (!f.prompt_template.empty()) cfg.prompt_template_path = f.prompt_template;
    if (!f.seeds_csv.empty()) cfg.seeds = parse_seeds(f.seeds_csv);
    return cfg;
}

void emit_error_record(const std::string& out_dir, ErrorCode code, const std::string& message) {
    nlohmann::json j;
    j["error"] = {{"code", error_code_name(code)}, {"message", message}};
    std::cerr << j.dump() << "\n";
    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (!ec) {
            std::ofstream out(fs::path(out_dir) / "error.json");
            out << j.dump(2) << "\n";
        }
    }
}

void print_seed_summary(const char* metric_file, const std::vector<double>& maes) {
    if (maes.size() > 1)
        std::printf("median test MAE over %zu seeds: %.6f\n", maes.size(), median(maes));
    std::printf("reports written to %s\n", metric_file);
}

int cmd_synth(const std::string& preset, int nodes, int64_t steps, double coupling, uint64_t seed,
              const std::string& out_dir, bool as_csv) {
    SeriesDataset ds;
    if (preset == "exchange") {
        ds = generate_exchange_like(seed);
    } else {
        ds = generate_synthetic(nodes, steps, coupling, seed);
    }
    save_dataset(ds, out_dir, as_csv);
    std::printf("wrote %s: T=%lld N=%d F=%d interval=%dmin\n", out_dir.c_str(),
                static_cast<long long>(ds.num_steps), ds.num_nodes, ds.num_features,
                ds.interval_minutes);
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    require(!cfg.dataset_dir.empty(), ErrorCode::InvalidConfig, "train: --dataset required");
    const SeriesDataset ds = load_dataset(cfg.dataset_dir);
    std::vector<double> maes;
    for (uint64_t seed : cfg.seeds) {
        const std::string run_dir = cfg.out_dir + "/seed_" + std::to_string(seed);
        const TrainRunResult res = run_train_experiment(cfg, ds, seed, run_dir);
        maes.push_back(res.test_metrics.mae);
        std::printf("seed %llu: best epoch %d, test MAE %.6f RMSE %.6f (persistence MAE %.6f)\n",
                    static_cast<unsigned long long>(seed), res.train.best_epoch,
                    res.test_metrics.mae, res.test_metrics.rmse, res.persistence.mae);
    }
    print_seed_summary((cfg.out_dir + "/seed_*/metrics.json").c_str(), maes);
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg) {
    cfg.validate();
    require(!cfg.checkpoint.empty(), ErrorCode::InvalidConfig, "eval: --checkpoint required");
    require(!cfg.dataset_dir.empty(), ErrorCode::InvalidConfig, "eval: --dataset required");
    const SeriesDataset ds = load_dataset(cfg.dataset_dir);
    ForecastModel model = ForecastModel::from_checkpoint(cfg.checkpoint);
    model.attach_dataset(ds);
    const SplitResult split = split_and_window(ds, cfg.split);
    write_manifest(cfg.out_dir, "eval", cfg);
    MetricsReport rep = evaluate_model(model, split.test, cfg.train.mape_mask_threshold);
    rep.config_fingerprint = cfg.fingerprint();
    write_text_file(cfg.out_dir + "/metrics.json", metrics_to_json(rep) + "\n");
    std::printf("test MAE %.6f RMSE %.6f MAPE %s%%\n", rep.mae, rep.rmse,
                rep.mape ? std::to_string(*rep.mape).c_str() : "n/a");
    return 0;
}

int cmd_few_shot(const ExperimentConfig& cfg) {
    cfg.validate();
    require(!cfg.checkpoint.empty(), ErrorCode::InvalidConfig,
            "few-shot: --checkpoint (source model) required");
    const std::string target_dir =
        !cfg.target_dataset_dir.empty() ? cfg.target_dataset_dir : cfg.dataset_dir;
    require(!target_dir.empty(), ErrorCode::InvalidConfig, "few-shot: --dataset required");
    const SeriesDataset target = load_dataset(target_dir);
    const auto rows = run_few_shot_experiment(cfg, cfg.checkpoint, target, cfg.out_dir);
    for (const auto& r : rows)
        std::printf("seed %llu n=%lld: MAE %.6f RMSE %.6f\n",
                    static_cast<unsigned long long>(r.seed), static_cast<long long>(r.n),
                    r.report.mae, r.report.rmse);
    std::printf("reports written to %s/fewshot.{csv,json}\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
    cfg.validate();
    require(!cfg.dataset_dir.empty(), ErrorCode::InvalidConfig, "ablate: --dataset required");
    const SeriesDataset ds = load_dataset(cfg.dataset_dir);
    const auto rows = run_ablation_experiment(cfg, ds, cfg.out_dir);
    for (const auto& r : rows)
        std::printf("seed %llu %-13s MAE %.6f RMSE %.6f\n",
                    static_cast<unsigned long long>(r.seed), r.variant.c_str(), r.report.mae,
                    r.report.rmse);
    std::printf("reports written to %s/ablate.csv\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_prompt_compare(const ExperimentConfig& cfg) {
    cfg.validate();
    require(!cfg.dataset_dir.empty(), ErrorCode::InvalidConfig,
            "prompt-compare: --dataset required");
    const SeriesDataset ds = load_dataset(cfg.dataset_dir);
    const auto rows = run_prompt_compare_experiment(cfg, ds, cfg.out_dir);
    for (const auto& r : rows)
        std::printf("seed %llu %-9s MAE %.6f RMSE %.6f\n",
                    static_cast<unsigned long long>(r.seed),
                    r.with_prompt ? "prompt" : "no-prompt", r.report.mae, r.report.rmse);
    std::printf("reports written to %s/prompt_compare.csv\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_count_params(const std::string& config_arg, const std::string& variant,
                     const std::string& out_dir) {
    // --config accepts the preset names "reference"/"desk" or a config path
    ModelConfig mc;
    if (config_arg == "reference" || config_arg.empty()) {
        mc = ModelConfig::reference();
    } else if (config_arg == "desk") {
        mc = ModelConfig::desk();
    } else {
        const ExperimentConfig cfg = ExperimentConfig::from_file(config_arg);
        mc = cfg.backbone == "reference" ? ModelConfig::reference() : ModelConfig::desk();
        mc.c1 = cfg.c1;
        mc.c2 = cfg.c2;
        mc.input_len = cfg.split.input_len;
        mc.horizon = cfg.split.horizon;
    }
    if (!variant.empty()) mc = build_variant(variant, mc);
    const CountLedger led = count_parameters(build_param_specs(mc));
    std::fputs(ledger_to_text(led).c_str(), stdout);
    if (!out_dir.empty()) write_text_file(out_dir + "/params.json", ledger_to_json(led) + "\n");
    return 0;
}

int cmd_grad_check(uint64_t seed, int points, const std::string& out_dir) {
    GradCheckConfig gc;
    gc.seed = seed;
    gc.n_points = points;
    const GradCheckReport rep = run_grad_check(gc);
    std::printf("max relative error: %.3e (tensor %s, %d points)\n", rep.max_rel_err,
                rep.worst_tensor.c_str(), rep.points);
    if (!out_dir.empty()) write_text_file(out_dir + "/gradcheck.json", grad_check_to_json(rep) + "\n");
    return rep.max_rel_err < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STG-LLM spatial-temporal forecasting experiments"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_preset = "traffic";
    int synth_nodes = 20;
    int64_t synth_steps = 8064;
    double synth_coupling = 0.7;
    uint64_t synth_seed = 1;
    std::string synth_out = "data/synthetic";
    bool synth_csv = false;
    synth->add_option("--preset", synth_preset, "traffic|exchange");
    synth->add_option("--nodes", synth_nodes, "node count");
    synth->add_option("--steps", synth_steps, "time steps");
    synth->add_option("--coupling", synth_coupling, "cross-node coupling in [0,1]");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output dataset directory");
    synth->add_flag("--csv", synth_csv, "write data.csv instead of data.bin");

    CommonFlags train_f, eval_f, few_f, abl_f, prompt_f;
    auto* train_cmd = app.add_subcommand("train", "fine-tune on a dataset");
    add_common(train_cmd, train_f);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(eval_cmd, eval_f);
    auto* few_cmd = app.add_subcommand("few-shot", "fine-tune a source checkpoint on n samples");
    add_common(few_cmd, few_f);
    auto* abl_cmd = app.add_subcommand("ablate", "train and evaluate all ablation variants");
    add_common(abl_cmd, abl_f);
    auto* prompt_cmd =
        app.add_subcommand("prompt-compare", "time prompt vs none, temporal embeddings off");
    add_common(prompt_cmd, prompt_f);

    auto* count_cmd = app.add_subcommand("count-params", "parameter-count ledger");
    std::string count_config = "reference";
    std::string count_variant;
    std::string count_out;
    count_cmd->add_option("--config", count_config, "'reference', 'desk', or a config path");
    count_cmd->add_option("--variant", count_variant, "ablation variant");
    count_cmd->add_option("--out", count_out, "output directory");

    auto* grad_cmd = app.add_subcommand("grad-check", "finite-difference gradient check");
    uint64_t grad_seed = 7;
    int grad_points = 21;
    std::string grad_out;
    grad_cmd->add_option("--seed", grad_seed, "seed");
    grad_cmd->add_option("--points", grad_points, "parameter points to test");
    grad_cmd->add_option("--out", grad_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    std::string active_out;
    try {
        if (synth->parsed()) {
            active_out = synth_out;
            return cmd_synth(synth_preset, synth_nodes, synth_steps, synth_coupling, synth_seed,
                             synth_out, synth_csv);
        }
        if (train_cmd->parsed()) {
            const auto cfg = resolve_config(train_f);
            active_out = cfg.out_dir;
            return cmd_train(cfg);
        }
        if (eval_cmd->parsed()) {
            const auto cfg = resolve_config(eval_f);
            active_out = cfg.out_dir;
            return cmd_eval(cfg);
        }
        if (few_cmd->parsed()) {
            const auto cfg = resolve_config(few_f);
            active_out = cfg.out_dir;
            return cmd_few_shot(cfg);
        }
        if (abl_cmd->parsed()) {
            const auto cfg = resolve_config(abl_f);
            active_out = cfg.out_dir;
            return cmd_ablate(cfg);
        }
        if (prompt_cmd->parsed()) {
            const auto cfg = resolve_config(prompt_f);
            active_out = cfg.out_dir;
            return cmd_prompt_compare(cfg);
        }
        if (count_cmd->parsed()) {
            active_out = count_out;
            return cmd_count_params(count_config, count_variant, count_out);
        }
        if (grad_cmd->parsed()) {
            active_out = grad_out;
            return cmd_grad_check(grad_seed, grad_points, grad_out);
        }
    } catch (const StgError& e) {
        emit_error_record(active_out, e.code(), e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error_record(active_out, ErrorCode::IoFailure, e.what());
        return 2;
    }
    return 0;
}
