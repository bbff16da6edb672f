#pragma once

#include "stgllm/dataset.hpp"
#include "stgllm/tensor.hpp"

namespace stgllm {

// Trainable lookup tables. Null table pointers mean the corresponding
// embedding is disabled (width 0).
struct TokenizerParams {
    const Mat* b_td = nullptr;  // K1×C1
    const Mat* b_dw = nullptr;  // K2×C2
    int k1 = 1;
    int k2 = 7;
    int c1 = 0;
    int c2 = 0;
};

// One token per node: the flattened L×F history, then the TD and DW rows
// looked up by the window's last step and broadcast to all nodes.
struct GraphTokens {
    Mat t_g;  // N×(L·F)
    Mat t_e;  // N×(L·F + C1 + C2)
};

// x is an L×N×F slab (normalized or raw; the caller decides).
GraphTokens tokenize(const Cube& x, int tod_index, int dow_index, const TokenizerParams& p);

// Accumulates d(t_e) into the looked-up table rows. d_td/d_dw are full-table
// gradient buffers (row-major, K×C); pass nullptr for frozen/absent tables.
void tokenize_backward(const Mat& d_te, int series_width, int tod_index, int dow_index,
                       const TokenizerParams& p, std::vector<double>* d_td,
                       std::vector<double>* d_dw);

// (tod_index, dow_index) of absolute step t_last under the dataset's calendar.
std::pair<int, int> calendar_indices(int64_t t_last, const SeriesDataset& ds);

}  // namespace stgllm
