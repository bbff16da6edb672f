#include "stgllm/config.hpp"

namespace stgllm {

VariantKind parse_variant(const std::string& name) {
    if (name == "full") return VariantKind::Full;
    if (name == "no-llm") return VariantKind::NoLlm;
    if (name == "no-pe") return VariantKind::NoPe;
    if (name == "no-tokenizer") return VariantKind::NoTokenizer;
    if (name == "no-adapter") return VariantKind::NoAdapter;
    fail(ErrorCode::UnknownVariant, "unknown variant '" + name + "'");
}

const char* variant_name(VariantKind v) {
    switch (v) {
        case VariantKind::Full: return "full";
        case VariantKind::NoLlm: return "no-llm";
        case VariantKind::NoPe: return "no-pe";
        case VariantKind::NoTokenizer: return "no-tokenizer";
        case VariantKind::NoAdapter: return "no-adapter";
    }
    return "?";
}

void ModelConfig::validate() const {
    backbone.validate();
    require(input_len > 0 && num_features > 0 && horizon > 0, ErrorCode::InvalidConfig,
            "model: L, F, P must be positive");
    require(k1 >= 1 && k2 >= 1 && c1 >= 0 && c2 >= 0, ErrorCode::InvalidConfig,
            "model: bad embedding table dimensions");
    if (variant == VariantKind::NoTokenizer) {
        require(patch_len > 0 && patch_stride > 0 && patch_len <= input_len,
                ErrorCode::InvalidConfig, "model: bad patch dimensions");
        require(num_patches() >= 1, ErrorCode::InvalidConfig, "model: zero patches");
    }
    if (variant == VariantKind::NoAdapter) {
        require(token_width() <= backbone.d_model, ErrorCode::InvalidConfig,
                "no-adapter: token width " + std::to_string(token_width()) +
                    " exceeds d_model " + std::to_string(backbone.d_model) +
                    " (reduce C1/C2 so padding is possible)");
    }
    if (variant == VariantKind::NoLlm) {
        require(!use_prompt, ErrorCode::InvalidConfig,
                "no-llm: prompt tokens have nothing to flow through; disable use_prompt");
    }
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.backbone.n_layers = 1;
    c.backbone.d_model = 8;
    c.backbone.n_heads = 2;
    c.backbone.context_len = 64;
    c.backbone.vocab_size = 257;
    c.input_len = 2;
    c.num_features = 1;
    c.horizon = 2;
    c.c1 = 2;
    c.c2 = 2;
    c.k1 = 4;
    c.k2 = 7;
    return c;
}

ModelConfig build_variant(const std::string& name, const ModelConfig& base) {
    ModelConfig c = base;
    c.variant = parse_variant(name);
    if (c.variant == VariantKind::NoLlm) c.use_prompt = false;
    c.validate();
    return c;
}

}  // namespace stgllm
