#pragma once

#include <string>
#include <vector>

#include "stgllm/model.hpp"
#include "stgllm/training.hpp"

namespace stgllm {

// Central finite differences against the analytic backward pass. Steps are
// applied in the parameters' f32 grid and measured exactly in double, so the
// only error left is the O(h²) truncation term.
struct GradCheckConfig {
    ModelConfig model = ModelConfig::tiny();
    int n_nodes = 2;
    int batch = 2;
    int n_points = 21;  // initialization plus random parameter points
    double fd_step = 1e-3;
    double huber_delta = 1.0;
    uint64_t seed = 7;
};

struct GradCheckReport {
    // per-tensor relative error: max_i |ga−gfd| / max(‖ga‖∞, ‖gfd‖∞, 1e-10),
    // worst over all evaluation points
    struct TensorResult {
        std::string name;
        double rel_err = 0.0;
    };
    std::vector<TensorResult> tensors;
    double max_rel_err = 0.0;
    std::string worst_tensor;
    int points = 0;
};

GradCheckReport run_grad_check(const GradCheckConfig& cfg);

// Mean batch Huber loss, forward only (the finite-difference probe).
double batch_loss(const ForecastModel& model, const std::vector<WindowSample>& batch,
                  double huber_delta);

// Random raw-unit windows consistent with a model config; the fabricated
// scaler exercises the de-normalization chain.
std::vector<WindowSample> make_random_windows(const ModelConfig& cfg, int n_nodes, int count,
                                              uint64_t seed);

}  // namespace stgllm
