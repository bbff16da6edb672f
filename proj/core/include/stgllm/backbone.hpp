#pragma once

#include <vector>

#include "stgllm/config.hpp"
#include "stgllm/params.hpp"
#include "stgllm/tensor.hpp"

namespace stgllm {

struct BlockWeights {
    const Mat* ln1_g;
    const Mat* ln1_b;
    const Mat* qkv_w;
    const Mat* qkv_b;
    const Mat* proj_w;
    const Mat* proj_b;
    const Mat* ln2_g;
    const Mat* ln2_b;
    const Mat* fc_w;
    const Mat* fc_b;
    const Mat* fproj_w;
    const Mat* fproj_b;
};

struct BackboneWeights {
    const Mat* wte = nullptr;
    const Mat* wpe = nullptr;
    std::vector<BlockWeights> blocks;
    const Mat* lnf_g = nullptr;
    const Mat* lnf_b = nullptr;

    static BackboneWeights from_store(const ParamStore& store, int n_layers);
};

struct BlockGrads {
    std::vector<double>* ln1_g = nullptr;
    std::vector<double>* ln1_b = nullptr;
    std::vector<double>* qkv_w = nullptr;
    std::vector<double>* qkv_b = nullptr;
    std::vector<double>* proj_w = nullptr;
    std::vector<double>* proj_b = nullptr;
    std::vector<double>* ln2_g = nullptr;
    std::vector<double>* ln2_b = nullptr;
    std::vector<double>* fc_w = nullptr;
    std::vector<double>* fc_b = nullptr;
    std::vector<double>* fproj_w = nullptr;
    std::vector<double>* fproj_b = nullptr;
};

struct BackboneGrads {
    std::vector<double>* wpe = nullptr;
    std::vector<BlockGrads> blocks;
    std::vector<double>* lnf_g = nullptr;
    std::vector<double>* lnf_b = nullptr;

    static BackboneGrads from_store(GradStore& grads, int n_layers);
};

struct LayerCache {
    Mat x_in, ln1_out, qkv, probs /* (heads·S)×S, masked entries 0 */, ctx, x_mid, ln2_out,
        fc_pre, fc_tanh /* tanh(u) cached for the backward pass */, fc_act;
    std::vector<double> ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
};

struct BackboneCache {
    Mat x0;  // tokens + wpe
    std::vector<LayerCache> layers;
    Mat lnf_in;
    std::vector<double> lnf_mean, lnf_rstd;
    int graph_start = 0;
};

// y = g ⊙ (x−μ)/√(σ²+ε) + b per row; mean/rstd cached when non-null.
void layer_norm_forward(const Mat& x, const Mat& g, const Mat& b, double eps, Mat& y,
                        std::vector<double>* mean, std::vector<double>* rstd);

// H = ln_f(blockN(...block1(tokens + wpe))). graph_start marks where graph
// tokens begin (used by the bidirectional-span option). Errors on context
// overflow.
Mat backbone_forward(const Mat& tokens, const BackboneWeights& w, const BackboneConfig& cfg,
                     int graph_start, BackboneCache* cache);

// Returns d(tokens); parameter gradients land in `g` (null entries skipped).
Mat backbone_backward(const Mat& d_h, const BackboneCache& cache, const BackboneWeights& w,
                      const BackboneConfig& cfg, BackboneGrads& g);

}  // namespace stgllm
