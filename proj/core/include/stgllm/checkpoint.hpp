#pragma once

#include <string>

#include "stgllm/config.hpp"
#include "stgllm/dataset.hpp"
#include "stgllm/params.hpp"

namespace stgllm {

// Archive layout: <dir>/index.json maps tensor name → {dtype:"f32", shape,
// byte_offset, byte_len} and embeds the model config and scaler;
// <dir>/tensors.bin holds the concatenated little-endian row-major payloads.
struct Checkpoint {
    ModelConfig config;
    Scaler scaler;
    ParamStore params;
};

void save_checkpoint(const ParamStore& params, const ModelConfig& config, const Scaler& scaler,
                     const std::string& dir);

// Errors: missing archive files, tensors absent from the archive (named),
// name/shape mismatches, truncated payload.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace stgllm
