#pragma once

#include <string>

#include "stgllm/common.hpp"

namespace stgllm {

// GPT-2-architecture decoder: pre-norm blocks, causal multi-head attention,
// GELU feed-forward of width ffn_mult·D, learned absolute positions.
struct BackboneConfig {
    int n_layers = 2;
    int d_model = 64;
    int n_heads = 4;
    int context_len = 256;
    int vocab_size = 257;
    int ffn_mult = 4;
    double ln_eps = 1e-5;
    // Experimental: let graph-token positions attend each other both ways.
    // Default off; the frozen decoder was shaped by causal attention.
    bool bidirectional_graph_span = false;

    static BackboneConfig desk() { return BackboneConfig{}; }
    static BackboneConfig reference() {
        BackboneConfig c;
        c.n_layers = 3;
        c.d_model = 768;
        c.n_heads = 12;
        c.context_len = 1024;
        c.vocab_size = 50257;
        return c;
    }
    void validate() const {
        require(n_layers >= 0 && d_model > 0 && n_heads > 0 && context_len > 0 && vocab_size > 0 &&
                    ffn_mult > 0,
                ErrorCode::InvalidConfig, "backbone: non-positive dimension");
        require(d_model % n_heads == 0, ErrorCode::InvalidConfig,
                "backbone: d_model must be divisible by n_heads");
    }
};

enum class VariantKind {
    Full,
    NoLlm,        // backbone removed; decoder consumes the encoded tokens directly
    NoPe,         // positional embeddings frozen
    NoTokenizer,  // per-node time-patch tokens instead of graph tokens
    NoAdapter,    // zero-pad tokens to width D; single linear output layer
};

VariantKind parse_variant(const std::string& name);
const char* variant_name(VariantKind v);

struct ModelConfig {
    BackboneConfig backbone;
    int input_len = 12;     // L
    int num_features = 1;   // F
    int horizon = 12;       // P
    int c1 = 64;            // TD-Embedding width
    int c2 = 64;            // DW-Embedding width
    int k1 = 288;           // time-of-day slots
    int k2 = 7;             // day-of-week slots
    VariantKind variant = VariantKind::Full;
    bool use_prompt = false;
    bool use_temporal_embeddings = true;
    int patch_len = 4;    // NoTokenizer variant
    int patch_stride = 2;
    std::string prompt_template;  // empty → built-in template chosen by interval

    int series_width() const { return input_len * num_features; }
    bool temporal_enabled() const {
        return use_temporal_embeddings && variant != VariantKind::NoTokenizer && (c1 > 0 || c2 > 0);
    }
    // width of the enriched token T_e (the decoder residual)
    int token_width() const {
        if (variant == VariantKind::NoTokenizer) return series_width();
        return series_width() + (temporal_enabled() ? c1 + c2 : 0);
    }
    int num_patches() const { return (input_len - patch_len) / patch_stride + 1; }
    int tokens_per_node() const { return variant == VariantKind::NoTokenizer ? num_patches() : 1; }

    void validate() const;

    static ModelConfig desk() { return ModelConfig{}; }
    static ModelConfig reference() {
        ModelConfig c;
        c.backbone = BackboneConfig::reference();
        return c;
    }
    // 2 heads over D=8, one layer — the gradient-check configuration
    static ModelConfig tiny();
};

// Ablation variants per experiment protocol; unknown names are an error.
ModelConfig build_variant(const std::string& name, const ModelConfig& base);

}  // namespace stgllm
