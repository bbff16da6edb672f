#pragma once

// Internal JSON (de)serialization helpers; not installed.

#include <nlohmann/json.hpp>

#include "stgllm/config.hpp"
#include "stgllm/dataset.hpp"

namespace stgllm {

inline nlohmann::json to_json(const BackboneConfig& c) {
    return {
        {"n_layers", c.n_layers},
        {"d_model", c.d_model},
        {"n_heads", c.n_heads},
        {"context_len", c.context_len},
        {"vocab_size", c.vocab_size},
        {"ffn_mult", c.ffn_mult},
        {"ln_eps", c.ln_eps},
        {"bidirectional_graph_span", c.bidirectional_graph_span},
    };
}

inline BackboneConfig backbone_from_json(const nlohmann::json& j) {
    BackboneConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.context_len = j.at("context_len").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.ffn_mult = j.value("ffn_mult", 4);
    c.ln_eps = j.value("ln_eps", 1e-5);
    c.bidirectional_graph_span = j.value("bidirectional_graph_span", false);
    return c;
}

inline nlohmann::json to_json(const ModelConfig& c) {
    return {
        {"backbone", to_json(c.backbone)},
        {"input_len", c.input_len},
        {"num_features", c.num_features},
        {"horizon", c.horizon},
        {"c1", c.c1},
        {"c2", c.c2},
        {"k1", c.k1},
        {"k2", c.k2},
        {"variant", variant_name(c.variant)},
        {"use_prompt", c.use_prompt},
        {"use_temporal_embeddings", c.use_temporal_embeddings},
        {"patch_len", c.patch_len},
        {"patch_stride", c.patch_stride},
        {"prompt_template", c.prompt_template},
    };
}

inline ModelConfig model_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.backbone = backbone_from_json(j.at("backbone"));
    c.input_len = j.at("input_len").get<int>();
    c.num_features = j.at("num_features").get<int>();
    c.horizon = j.at("horizon").get<int>();
    c.c1 = j.at("c1").get<int>();
    c.c2 = j.at("c2").get<int>();
    c.k1 = j.at("k1").get<int>();
    c.k2 = j.at("k2").get<int>();
    c.variant = parse_variant(j.value("variant", "full"));
    c.use_prompt = j.value("use_prompt", false);
    c.use_temporal_embeddings = j.value("use_temporal_embeddings", true);
    c.patch_len = j.value("patch_len", 4);
    c.patch_stride = j.value("patch_stride", 2);
    c.prompt_template = j.value("prompt_template", std::string());
    return c;
}

inline nlohmann::json to_json(const Scaler& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline Scaler scaler_from_json(const nlohmann::json& j) {
    return Scaler{j.at("mean").get<double>(), j.at("std").get<double>()};
}

}  // namespace stgllm
