#include "stgllm/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

#ifndef STGLLM_SOURCE_REV
#define STGLLM_SOURCE_REV "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace stgllm {

namespace {

json to_json(const ExperimentConfig& c) {
    return {
        {"dataset_dir", c.dataset_dir},
        {"target_dataset_dir", c.target_dataset_dir},
        {"checkpoint", c.checkpoint},
        {"variant", c.variant},
        {"backbone", c.backbone},
        {"split",
         {{"train_ratio", c.split.train_ratio},
          {"val_ratio", c.split.val_ratio},
          {"test_ratio", c.split.test_ratio},
          {"input_len", c.split.input_len},
          {"horizon", c.split.horizon}}},
        {"train",
         {{"epochs", c.train.epochs},
          {"patience", c.train.patience},
          {"batch_size", c.train.batch_size},
          {"lr", c.train.lr},
          {"weight_decay", c.train.weight_decay},
          {"huber_delta", c.train.huber_delta},
          {"beta1", c.train.beta1},
          {"beta2", c.train.beta2},
          {"adam_eps", c.train.adam_eps},
          {"mape_mask_threshold", c.train.mape_mask_threshold}}},
        {"c1", c.c1},
        {"c2", c.c2},
        {"use_prompt", c.use_prompt},
        {"use_temporal_embeddings", c.use_temporal_embeddings},
        {"bidirectional_graph_span", c.bidirectional_graph_span},
        {"prompt_template_path", c.prompt_template_path},
        {"few_shot_sizes", c.few_shot_sizes},
        {"few_shot_refit_scaler", c.few_shot_refit_scaler},
        {"out_dir", c.out_dir},
        {"seeds", c.seeds},
    };
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    c.dataset_dir = j.value("dataset_dir", std::string());
    c.target_dataset_dir = j.value("target_dataset_dir", std::string());
    c.checkpoint = j.value("checkpoint", std::string());
    c.variant = j.value("variant", std::string("full"));
    c.backbone = j.value("backbone", std::string("desk"));
    if (j.contains("split")) {
        const auto& s = j.at("split");
        c.split.train_ratio = s.value("train_ratio", 0.6);
        c.split.val_ratio = s.value("val_ratio", 0.2);
        c.split.test_ratio = s.value("test_ratio", 0.2);
        c.split.input_len = s.value("input_len", 12);
        c.split.horizon = s.value("horizon", 12);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        c.train.epochs = t.value("epochs", 200);
        c.train.patience = t.value("patience", 50);
        c.train.batch_size = t.value("batch_size", 64);
        c.train.lr = t.value("lr", 1e-3);
        c.train.weight_decay = t.value("weight_decay", 0.05);
        c.train.huber_delta = t.value("huber_delta", 1.0);
        c.train.beta1 = t.value("beta1", 0.9);
        c.train.beta2 = t.value("beta2", 0.999);
        c.train.adam_eps = t.value("adam_eps", 1e-8);
        c.train.mape_mask_threshold = t.value("mape_mask_threshold", 0.1);
    }
    c.c1 = j.value("c1", 64);
    c.c2 = j.value("c2", 64);
    c.use_prompt = j.value("use_prompt", false);
    c.use_temporal_embeddings = j.value("use_temporal_embeddings", true);
    c.bidirectional_graph_span = j.value("bidirectional_graph_span", false);
    c.prompt_template_path = j.value("prompt_template_path", std::string());
    if (j.contains("few_shot_sizes"))
        c.few_shot_sizes = j.at("few_shot_sizes").get<std::vector<int64_t>>();
    c.few_shot_refit_scaler = j.value("few_shot_refit_scaler", true);
    c.out_dir = j.value("out_dir", std::string("out"));
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    return c;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json metrics_json(const MetricsReport& rep) {
    json j;
    j["mae"] = rep.mae;
    j["rmse"] = rep.rmse;
    if (rep.mape)
        j["mape_pct"] = *rep.mape;
    else
        j["mape_pct"] = nullptr;
    j["per_horizon_mae"] = rep.per_horizon_mae;
    j["per_horizon_rmse"] = rep.per_horizon_rmse;
    json ph = json::array();
    for (const auto& m : rep.per_horizon_mape) {
        if (m)
            ph.push_back(*m);
        else
            ph.push_back(nullptr);
    }
    j["per_horizon_mape_pct"] = ph;
    j["count"] = rep.count;
    j["mape_count"] = rep.mape_count;
    j["mask_threshold"] = rep.mask_threshold;
    j["config_fingerprint"] = rep.config_fingerprint;
    return j;
}

std::string csv_value(const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("nan");
}

void append_csv(const std::string& path, const std::string& header, const std::string& row) {
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
    if (fresh) out << header << "\n";
    out << row << "\n";
}

TrainConfig seeded(TrainConfig t, uint64_t seed) {
    t.seed = seed;
    return t;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_json_text(read_text_file(path));
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::BadMeta, std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

std::string ExperimentConfig::to_json_text() const { return to_json(*this).dump(2); }

std::string ExperimentConfig::fingerprint() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(to_json(*this).dump())));
    return buf;
}

void ExperimentConfig::validate() const {
    split.validate();
    train.validate();
    require(!seeds.empty(), ErrorCode::InvalidConfig, "config: seed list is empty");
    require(backbone == "desk" || backbone == "reference", ErrorCode::InvalidConfig,
            "config: backbone must be 'desk' or 'reference'");
    parse_variant(variant);
    if (!dataset_dir.empty())
        require(fs::exists(dataset_dir), ErrorCode::MissingFile,
                "config: dataset_dir does not exist: " + dataset_dir);
    if (!target_dataset_dir.empty())
        require(fs::exists(target_dataset_dir), ErrorCode::MissingFile,
                "config: target_dataset_dir does not exist: " + target_dataset_dir);
    if (!checkpoint.empty())
        require(fs::exists(checkpoint), ErrorCode::MissingFile,
                "config: checkpoint does not exist: " + checkpoint);
    if (!prompt_template_path.empty())
        require(fs::exists(prompt_template_path), ErrorCode::MissingFile,
                "config: prompt template does not exist: " + prompt_template_path);
}

ModelConfig make_model_config(const ExperimentConfig& cfg, const SeriesDataset& ds) {
    ModelConfig m;
    m.backbone = cfg.backbone == "reference" ? BackboneConfig::reference() : BackboneConfig::desk();
    m.backbone.bidirectional_graph_span = cfg.bidirectional_graph_span;
    m.input_len = cfg.split.input_len;
    m.num_features = ds.num_features;
    m.horizon = cfg.split.horizon;
    m.k1 = ds.steps_per_day();
    m.k2 = 7;
    m.c1 = cfg.c1;
    m.c2 = cfg.c2;
    m.variant = parse_variant(cfg.variant);
    m.use_prompt = cfg.use_prompt && m.variant != VariantKind::NoLlm;
    m.use_temporal_embeddings = cfg.use_temporal_embeddings;
    if (!cfg.prompt_template_path.empty())
        m.prompt_template = read_text_file(cfg.prompt_template_path);

    if (m.variant == VariantKind::NoAdapter) {
        // padding needs token width ≤ d_model; shrink the embedding widths if required
        const int room = m.backbone.d_model - m.series_width();
        require(room >= 0, ErrorCode::InvalidConfig,
                "no-adapter: L·F alone exceeds d_model; padding impossible");
        if (m.c1 + m.c2 > room) {
            m.c1 = room / 2;
            m.c2 = room - m.c1;
        }
    }
    m.validate();
    return m;
}

ForecastModel build_model(const ExperimentConfig& cfg, const SeriesDataset& ds, uint64_t seed) {
    const ModelConfig mc = make_model_config(cfg, ds);
    ForecastModel model = ForecastModel::random_init(mc, seed);
    model.attach_dataset(ds);
    return model;
}

MetricsReport evaluate_model(const ForecastModel& model, const std::vector<WindowSample>& windows,
                             double mask_threshold) {
    require(!windows.empty(), ErrorCode::EmptyTrainingSet, "evaluate: no windows");
    std::vector<Mat> preds(windows.size()), targets(windows.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(windows.size()); ++i) {
        preds[static_cast<size_t>(i)] = model.predict(windows[static_cast<size_t>(i)]);
        targets[static_cast<size_t>(i)] = target_of(windows[static_cast<size_t>(i)]);
    }
    return compute_metrics(preds, targets, mask_threshold);
}

TrainRunResult run_train_experiment(const ExperimentConfig& cfg, const SeriesDataset& ds,
                                    uint64_t seed, const std::string& run_dir) {
    fs::create_directories(run_dir);
    write_manifest(run_dir, "train", cfg);

    const SplitResult split = split_and_window(ds, cfg.split);
    ForecastModel model = build_model(cfg, ds, seed);
    if (!cfg.checkpoint.empty()) {
        model = ForecastModel::from_checkpoint(cfg.checkpoint);
        model.attach_dataset(ds);
    }
    model.set_scaler(split.scaler);

    TrainRunResult out;
    out.train = train(model, split.train, split.val, seeded(cfg.train, seed));
    write_text_file(run_dir + "/train_log.jsonl", train_log_to_jsonl(out.train));

    out.checkpoint_dir = run_dir + "/checkpoint";
    model.save(out.checkpoint_dir);

    out.test_metrics = evaluate_model(model, split.test, cfg.train.mape_mask_threshold);
    out.test_metrics.config_fingerprint = cfg.fingerprint();
    const Baselines base = Baselines::fit(ds, split.train_seg);
    out.persistence = evaluate_baseline(base, BaselineKind::Persistence, split.test,
                                        cfg.train.mape_mask_threshold);

    json j;
    j["dataset"] = ds.name;
    j["variant"] = cfg.variant;
    j["seed"] = seed;
    j["test"] = metrics_json(out.test_metrics);
    j["persistence_baseline"] = metrics_json(out.persistence);
    j["best_epoch"] = out.train.best_epoch;
    j["best_val_mae"] = out.train.best_val_mae;
    write_text_file(run_dir + "/metrics.json", j.dump(2) + "\n");
    append_csv(run_dir + "/metrics.csv", "dataset,variant,seed,mae,rmse,mape_pct,mask_threshold",
               ds.name + "," + cfg.variant + "," + std::to_string(seed) + "," +
                   std::to_string(out.test_metrics.mae) + "," +
                   std::to_string(out.test_metrics.rmse) + "," +
                   csv_value(out.test_metrics.mape) + "," +
                   std::to_string(out.test_metrics.mask_threshold));
    return out;
}

std::vector<FewShotRow> run_few_shot_experiment(const ExperimentConfig& cfg,
                                                const std::string& source_ckpt,
                                                const SeriesDataset& target,
                                                const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_manifest(out_dir, "few-shot", cfg);
    const SplitResult split = split_and_window(target, cfg.split);

    std::vector<FewShotRow> rows;
    for (uint64_t seed : cfg.seeds) {
        for (int64_t n : cfg.few_shot_sizes) {
            ForecastModel model = ForecastModel::from_checkpoint(source_ckpt);
            model.attach_dataset(target);
            if (cfg.few_shot_refit_scaler) model.set_scaler(split.scaler);
            if (n > 0) {
                const auto sample = sample_few_shot(split.train, n, seed);
                train(model, sample, split.val, seeded(cfg.train, seed));
            }
            FewShotRow row;
            row.seed = seed;
            row.n = n;
            row.report = evaluate_model(model, split.test, cfg.train.mape_mask_threshold);
            row.report.config_fingerprint = cfg.fingerprint();
            rows.push_back(std::move(row));
            append_csv(out_dir + "/fewshot.csv",
                       "dataset,variant,seed,n,mae,rmse,mape_pct",
                       target.name + "," + cfg.variant + "," + std::to_string(seed) + "," +
                           std::to_string(n) + "," + std::to_string(rows.back().report.mae) + "," +
                           std::to_string(rows.back().report.rmse) + "," +
                           csv_value(rows.back().report.mape));
        }
    }

    json j = json::array();
    for (const auto& r : rows) {
        json e;
        e["seed"] = r.seed;
        e["n"] = r.n;
        e["metrics"] = metrics_json(r.report);
        j.push_back(e);
    }
    write_text_file(out_dir + "/fewshot.json", j.dump(2) + "\n");
    return rows;
}

std::vector<VariantRow> run_ablation_experiment(const ExperimentConfig& cfg,
                                                const SeriesDataset& ds,
                                                const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_manifest(out_dir, "ablate", cfg);
    static const char* kVariants[] = {"full", "no-llm", "no-pe", "no-tokenizer", "no-adapter"};

    std::vector<VariantRow> rows;
    for (uint64_t seed : cfg.seeds) {
        for (const char* v : kVariants) {
            ExperimentConfig vc = cfg;
            vc.variant = v;
            const std::string run_dir =
                out_dir + "/" + v + "_seed" + std::to_string(seed);
            const TrainRunResult res = run_train_experiment(vc, ds, seed, run_dir);
            VariantRow row;
            row.seed = seed;
            row.variant = v;
            row.report = res.test_metrics;
            rows.push_back(std::move(row));
            append_csv(out_dir + "/ablate.csv", "dataset,variant,seed,mae,rmse,mape_pct",
                       ds.name + "," + std::string(v) + "," + std::to_string(seed) + "," +
                           std::to_string(rows.back().report.mae) + "," +
                           std::to_string(rows.back().report.rmse) + "," +
                           csv_value(rows.back().report.mape));
        }
    }
    return rows;
}

std::vector<PromptCompareRow> run_prompt_compare_experiment(const ExperimentConfig& cfg,
                                                            const SeriesDataset& ds,
                                                            const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_manifest(out_dir, "prompt-compare", cfg);

    std::vector<PromptCompareRow> rows;
    for (uint64_t seed : cfg.seeds) {
        for (const bool with_prompt : {true, false}) {
            ExperimentConfig pc = cfg;
            pc.use_temporal_embeddings = false;  // the prompt carries the calendar instead
            pc.use_prompt = with_prompt;
            const std::string run_dir = out_dir + "/" +
                                        (with_prompt ? "with_prompt" : "without_prompt") +
                                        "_seed" + std::to_string(seed);
            const TrainRunResult res = run_train_experiment(pc, ds, seed, run_dir);
            PromptCompareRow row;
            row.seed = seed;
            row.with_prompt = with_prompt;
            row.report = res.test_metrics;
            rows.push_back(std::move(row));
            append_csv(out_dir + "/prompt_compare.csv",
                       "dataset,prompt,seed,mae,rmse,mape_pct",
                       ds.name + "," + (with_prompt ? "with" : "without") + "," +
                           std::to_string(seed) + "," + std::to_string(rows.back().report.mae) +
                           "," + std::to_string(rows.back().report.rmse) + "," +
                           csv_value(rows.back().report.mape));
        }
    }
    return rows;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const ExperimentConfig& cfg) {
    fs::create_directories(out_dir);
    json j;
    j["command"] = command;
    j["config"] = to_json(cfg);
    j["config_fingerprint"] = cfg.fingerprint();
    j["source_rev"] = STGLLM_SOURCE_REV;
    write_text_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

void write_text_file(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
    out << content;
}

std::string metrics_to_json(const MetricsReport& rep) { return metrics_json(rep).dump(2); }

std::string ledger_to_text(const CountLedger& led) {
    static const std::pair<const char*, const char*> kLabels[] = {
        {groups::kTokenizer, "STG-Tokenizer"},       {groups::kAdapter, "STG-Adapter"},
        {groups::kPositional, "Position Embeddings"}, {groups::kLayerNorm, "Layer Norm"},
        {groups::kTokenEmbedding, "Token Embeddings"}, {groups::kAttentionFfn, "Attention+FFN"},
    };
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-22s %14s %10s %10s\n", "group", "params", "ratio(%)",
                  "trainable");
    out << line;
    for (const auto& row : led.rows) {
        const char* label = row.group.c_str();
        for (const auto& [key, text] : kLabels)
            if (row.group == key) label = text;
        std::snprintf(line, sizeof(line), "%-22s %14lld %10.2f %10s\n", label,
                      static_cast<long long>(row.count), row.ratio_pct,
                      row.trainable ? "yes" : "no");
        out << line;
    }
    std::snprintf(line, sizeof(line), "%-22s %14lld %10.2f\n", "trainable total",
                  static_cast<long long>(led.trainable_total), led.trainable_pct);
    out << line;
    std::snprintf(line, sizeof(line), "%-22s %14lld\n", "total",
                  static_cast<long long>(led.total));
    out << line;
    return out.str();
}

std::string ledger_to_json(const CountLedger& led) {
    json rows = json::array();
    for (const auto& r : led.rows) {
        rows.push_back({{"group", r.group},
                        {"count", r.count},
                        {"trainable", r.trainable},
                        {"ratio_pct", r.ratio_pct}});
    }
    json j;
    j["rows"] = rows;
    j["total"] = led.total;
    j["trainable_total"] = led.trainable_total;
    j["trainable_pct"] = led.trainable_pct;
    return j.dump(2);
}

std::string grad_check_to_json(const GradCheckReport& rep) {
    json tensors = json::array();
    for (const auto& t : rep.tensors)
        tensors.push_back({{"name", t.name}, {"rel_err", t.rel_err}});
    json j;
    j["max_rel_err"] = rep.max_rel_err;
    j["worst_tensor"] = rep.worst_tensor;
    j["points"] = rep.points;
    j["tensors"] = tensors;
    return j.dump(2);
}

double median(std::vector<double> values) {
    require(!values.empty(), ErrorCode::InvalidConfig, "median of empty set");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace stgllm
