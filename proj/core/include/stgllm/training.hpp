#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stgllm/dataset.hpp"
#include "stgllm/model.hpp"
#include "stgllm/params.hpp"

namespace stgllm {

struct TrainConfig {
    int epochs = 200;
    int patience = 50;  // validation rounds without improvement
    int batch_size = 64;
    double lr = 1e-3;
    double weight_decay = 0.05;  // classic L2, coupled into the gradient
    double huber_delta = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double mape_mask_threshold = 0.1;
    uint64_t seed = 1;

    void validate() const {
        require(epochs > 0 && patience > 0 && batch_size > 0, ErrorCode::InvalidConfig,
                "train: epochs, patience, batch_size must be positive");
        require(patience <= epochs, ErrorCode::InvalidConfig, "train: patience must be <= epochs");
        require(lr > 0 && huber_delta > 0 && weight_decay >= 0, ErrorCode::InvalidConfig,
                "train: bad lr/delta/decay");
    }
};

// Mean Huber loss over all entries, in de-normalized units.
double huber_loss(const Mat& pred, const Mat& target, double delta);
// d(loss)/d(pred) for the mean Huber loss.
Mat huber_loss_grad(const Mat& pred, const Mat& target, double delta);

// Adam moments exist only for trainable tensors.
struct TrainState {
    std::unordered_map<std::string, std::vector<double>> m, v;
    int64_t step = 0;
    double best_val_metric = 0.0;
    int epochs_since_improvement = 0;
    uint64_t rng_state = 0;
};

// One Adam update from accumulated gradients. Weight decay is skipped for
// biases and layer-norm gains/biases (decay_exempt tensors).
void adam_step(ParamStore& store, const GradStore& grads, TrainState& state,
               const TrainConfig& cfg);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
    double val_rmse = 0.0;
    double val_mape = 0.0;  // NaN when fully masked
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_val_mae = 0.0;
    int steps_taken = 0;
};

// Mean Huber training with early stopping on validation MAE; the model is
// left holding the best-validation parameters. Deterministic per seed.
TrainResult train(ForecastModel& model, const std::vector<WindowSample>& train_set,
                  const std::vector<WindowSample>& val_set, const TrainConfig& cfg);

// Per-window gradient slots, reusable across batches to avoid reallocation.
struct BatchWorkspace {
    std::vector<GradStore> slots;
};

// Forward/backward over a batch; returns the mean loss and fills `grads`
// with d(mean loss)/dθ. Exposed for gradient checks and step-limited runs.
double batch_forward_backward(const ForecastModel& model,
                              const std::vector<const WindowSample*>& batch, double huber_delta,
                              GradStore& grads, BatchWorkspace* ws = nullptr);

std::string train_log_to_jsonl(const TrainResult& result);

}  // namespace stgllm
