#pragma once

#include <optional>
#include <string>

#include "stgllm/adapter.hpp"
#include "stgllm/backbone.hpp"
#include "stgllm/checkpoint.hpp"
#include "stgllm/config.hpp"
#include "stgllm/dataset.hpp"
#include "stgllm/params.hpp"
#include "stgllm/prompt.hpp"
#include "stgllm/tokenizer.hpp"

namespace stgllm {

struct PipelineCache {
    Cube slab;  // normalized input window
    GraphTokens toks;
    Mat patch_in;  // (N·np)×(patch_len·F), no-tokenizer variant
    Mat t_q;       // graph tokens at backbone width
    int prompt_rows = 0;
    Mat combined;
    BackboneCache bb;
    Mat h;        // backbone output (or combined tokens when the backbone is absent)
    Mat h_graph;  // last graph rows of h
    Mat h_node;   // per-node rows driving the decoder
    Mat mid;      // (H·W2 + b2) + T_e
    Mat pred_n;   // N×P, normalized units
};

// The composed forecasting map: normalize → tokenize → encode → [prompt ∥ ·]
// → backbone → decode → de-normalize. Immutable during prediction; the
// training loop mutates parameters between calls.
class ForecastModel {
public:
    static ForecastModel random_init(const ModelConfig& cfg, uint64_t seed);
    static ForecastModel from_checkpoint(const std::string& dir);
    void save(const std::string& dir) const;

    const ModelConfig& config() const { return cfg_; }
    // Table-4 toggle: flips the prompt pathway without touching parameters.
    void set_use_prompt(bool on) {
        require(!(on && cfg_.variant == VariantKind::NoLlm), ErrorCode::InvalidConfig,
                "no-llm: prompt pathway unavailable");
        cfg_.use_prompt = on;
    }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const Scaler& scaler() const { return scaler_; }
    void set_scaler(const Scaler& s) { scaler_ = s; }
    const TextVocab& vocab() const { return vocab_; }
    void set_vocab(TextVocab v);
    void set_calendar(const CalendarMeta& cal) { cal_ = cal; }
    void attach_dataset(const SeriesDataset& ds) {
        set_calendar(CalendarMeta{ds.interval_minutes, ds.steps_per_day()});
    }

    TokenizerParams tokenizer_params() const;
    AdapterParams adapter_params() const;

    // N×P forecast in de-normalized units.
    Mat predict(const WindowSample& w) const;

    // Training-facing forward with cache; same result as predict.
    Mat forward(const WindowSample& w, PipelineCache& cache) const;
    // d_pred is the loss gradient w.r.t. the de-normalized forecast.
    void backward(const WindowSample& w, const PipelineCache& cache, const Mat& d_pred,
                  GradStore& grads) const;

private:
    ModelConfig cfg_;
    ParamStore store_;
    Scaler scaler_;
    TextVocab vocab_ = TextVocab::byte_level();
    std::optional<CalendarMeta> cal_;
};

// window.y (P×N) transposed into the N×P layout predictions use
Mat target_of(const WindowSample& w);

}  // namespace stgllm
