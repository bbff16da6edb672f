#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stgllm/tensor.hpp"

namespace stgllm {

// Raw observations T×N×F plus calendar metadata. The edge list is carried as
// metadata only: the model never consumes it (the synthetic generator emits
// the neighbor pairs it used, and nothing downstream reads them).
struct SeriesDataset {
    std::string name;
    int64_t num_steps = 0;   // T
    int num_nodes = 0;       // N
    int num_features = 1;    // F
    int interval_minutes = 5;
    int first_step_day_of_week = 0;   // 0 = Monday
    int first_step_index_in_day = 0;  // in [0, steps_per_day)
    std::vector<std::pair<int, int>> edges;
    Tensor values;  // T×N×F

    int steps_per_day() const;  // 1440/interval for sub-daily data, 1 for daily
    float value(int64_t t, int node, int feat) const { return values.at3(t, node, feat); }
    void validate() const;  // throws on NaN/Inf, bad calendar fields, bad edges
};

struct SplitSpec {
    double train_ratio = 0.6;
    double val_ratio = 0.2;
    double test_ratio = 0.2;
    int input_len = 12;  // L
    int horizon = 12;    // P
    void validate() const;
};

// Scalar z-score over feature 0 of the training segment.
struct Scaler {
    double mean = 0.0;
    double std = 1.0;
    double transform(double x) const { return (x - mean) / std; }
    double inverse(double x) const { return x * std + mean; }
};

struct WindowSample {
    Tensor x;  // L×N×F, raw units
    Tensor y;  // P×N, feature 0, raw units
    int64_t t_last = 0;
    int tod_index = 0;
    int dow_index = 0;

    int input_len() const { return static_cast<int>(x.dim(0)); }
    int num_nodes() const { return static_cast<int>(x.dim(1)); }
    int num_features() const { return static_cast<int>(x.dim(2)); }
    int horizon() const { return static_cast<int>(y.dim(0)); }
};

struct Segment {
    int64_t begin = 0;
    int64_t end = 0;  // exclusive
    int64_t length() const { return end - begin; }
};

struct SplitResult {
    std::vector<WindowSample> train, val, test;
    Scaler scaler;
    Segment train_seg, val_seg, test_seg;
};

// Directory with meta.json plus data.bin (row-major float32 LE, T×N×F) or
// data.csv (T rows, N·F columns, optional header).
SeriesDataset load_dataset(const std::string& dir);
void save_dataset(const SeriesDataset& ds, const std::string& dir, bool as_csv = false);

// Contiguous raw-timeline split floor(r_train·T)/floor(r_val·T)/remainder;
// windows never cross a segment boundary; scaler fit on the train segment only.
SplitResult split_and_window(const SeriesDataset& ds, const SplitSpec& spec);

Scaler fit_scaler(const SeriesDataset& ds, Segment seg);

// Traffic-like synthetic data: 5-minute steps, per-node daily sinusoid plus
// weekly modulation, cross-node coupling through a fixed random neighbor set
// (lag 1, centered), Gaussian noise. Deterministic per seed.
SeriesDataset generate_synthetic(int n_nodes, int64_t n_steps, double coupling, uint64_t seed);

// Amplitude constants of the synthetic generator, exposed for oracle tests.
inline constexpr double kSyntheticNoiseSigma = 5.0;
inline constexpr double kSyntheticBaseLevel = 100.0;

// Daily exchange-rate-shaped stand-in: 8 nodes, 7588 steps, mean-reverting
// levels around per-node anchors in [0.5, 2] with observation noise.
SeriesDataset generate_exchange_like(uint64_t seed);

// Uniform sample of n windows without replacement, deterministic per seed.
std::vector<WindowSample> sample_few_shot(const std::vector<WindowSample>& train,
                                          int64_t n, uint64_t seed);

}  // namespace stgllm
