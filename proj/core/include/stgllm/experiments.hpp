#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stgllm/dataset.hpp"
#include "stgllm/gradcheck.hpp"
#include "stgllm/metrics.hpp"
#include "stgllm/model.hpp"
#include "stgllm/training.hpp"

namespace stgllm {

// Declarative experiment description; every §-protocol hyperparameter is a
// named field with the reference value as default.
struct ExperimentConfig {
    std::string dataset_dir;
    std::string target_dataset_dir;  // few-shot target
    std::string checkpoint;          // warm start / eval / few-shot source
    std::string variant = "full";
    std::string backbone = "desk";  // "desk" or "reference"
    SplitSpec split;
    TrainConfig train;
    int c1 = 64;
    int c2 = 64;
    bool use_prompt = false;
    bool use_temporal_embeddings = true;
    bool bidirectional_graph_span = false;
    std::string prompt_template_path;
    std::vector<int64_t> few_shot_sizes = {0, 20, 50, 100, 200, 500, 1000, 2000};
    bool few_shot_refit_scaler = true;
    std::string out_dir = "out";
    std::vector<uint64_t> seeds = {1};

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
    std::string fingerprint() const;  // stable hash of the resolved config
    void validate() const;
};

// Model configuration for a dataset under this experiment. For the no-adapter
// variant the embedding widths shrink (if needed) so the token fits d_model.
ModelConfig make_model_config(const ExperimentConfig& cfg, const SeriesDataset& ds);

ForecastModel build_model(const ExperimentConfig& cfg, const SeriesDataset& ds, uint64_t seed);

MetricsReport evaluate_model(const ForecastModel& model, const std::vector<WindowSample>& windows,
                             double mask_threshold);

struct TrainRunResult {
    TrainResult train;
    MetricsReport test_metrics;
    MetricsReport persistence;
    std::string checkpoint_dir;
};

// Full training run for one seed. Writes manifest.json, train_log.jsonl,
// checkpoint/ and metrics.{json,csv} under run_dir.
TrainRunResult run_train_experiment(const ExperimentConfig& cfg, const SeriesDataset& ds,
                                    uint64_t seed, const std::string& run_dir);

struct FewShotRow {
    uint64_t seed = 0;
    int64_t n = 0;
    MetricsReport report;
};

// Table-3 protocol: per n, reload the source checkpoint, re-fit the target
// scaler (configurable), fine-tune on n sampled windows, evaluate on the
// target test split. n=0 skips fine-tuning.
std::vector<FewShotRow> run_few_shot_experiment(const ExperimentConfig& cfg,
                                                const std::string& source_ckpt,
                                                const SeriesDataset& target,
                                                const std::string& out_dir);

struct VariantRow {
    uint64_t seed = 0;
    std::string variant;
    MetricsReport report;
};

// Trains and evaluates full + the four ablation variants.
std::vector<VariantRow> run_ablation_experiment(const ExperimentConfig& cfg,
                                                const SeriesDataset& ds,
                                                const std::string& out_dir);

struct PromptCompareRow {
    uint64_t seed = 0;
    bool with_prompt = false;
    MetricsReport report;
};

// Table-4 protocol: temporal embeddings disabled in both arms; the time
// prompt is the only difference.
std::vector<PromptCompareRow> run_prompt_compare_experiment(const ExperimentConfig& cfg,
                                                            const SeriesDataset& ds,
                                                            const std::string& out_dir);

void write_manifest(const std::string& out_dir, const std::string& command,
                    const ExperimentConfig& cfg);
void write_text_file(const std::string& path, const std::string& content);

std::string metrics_to_json(const MetricsReport& rep);
std::string ledger_to_text(const CountLedger& led);
std::string ledger_to_json(const CountLedger& led);
std::string grad_check_to_json(const GradCheckReport& rep);

double median(std::vector<double> values);

}  // namespace stgllm
