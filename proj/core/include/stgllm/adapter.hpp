#pragma once

#include "stgllm/tensor.hpp"
#include "stgllm/tokenizer.hpp"

namespace stgllm {

// Linear encoder into backbone width and the residual two-layer decoder.
// Shapes: W1 width×D, W2 D×width, W3 width×P with width = L·F+C1+C2.
struct AdapterParams {
    const Mat* w1 = nullptr;
    const Mat* b1 = nullptr;
    const Mat* w2 = nullptr;
    const Mat* b2 = nullptr;
    const Mat* w3 = nullptr;
    const Mat* b3 = nullptr;
};

// T_q = T_e·W1 + b1, row-wise. N×D.
Mat encode(const GraphTokens& tokens, const AdapterParams& p);

// T = T_p ∥ T_q, prompt rows first. context_len > 0 enforces M+N ≤ context.
Mat combine(const Mat& prompt_tokens, const Mat& graph_tokens, int context_len = 0);

// Forecast from the last N hidden rows: X̂ = ((H_g·W2 + b2) + T_e)·W3 + b3.
// Prompt positions are dropped; only graph-token rows conform with T_e.
Mat decode(const Mat& h, const GraphTokens& tokens, const AdapterParams& p);

struct AdapterGrads {  // nullptr entries are frozen
    std::vector<double>* w1 = nullptr;
    std::vector<double>* b1 = nullptr;
    std::vector<double>* w2 = nullptr;
    std::vector<double>* b2 = nullptr;
    std::vector<double>* w3 = nullptr;
    std::vector<double>* b3 = nullptr;
};

void encode_backward(const GraphTokens& tokens, const AdapterParams& p, const Mat& d_tq,
                     Mat* d_te, AdapterGrads& g);

// mid = (H_g·W2 + b2) + T_e comes from the forward cache. Accumulates into
// d_h_graph (N×D) and d_te (N×width); the residual passes d_mid through.
void decode_backward(const Mat& h_graph, const Mat& mid, const AdapterParams& p,
                     const Mat& d_pred, Mat* d_h_graph, Mat* d_te, AdapterGrads& g);

}  // namespace stgllm
