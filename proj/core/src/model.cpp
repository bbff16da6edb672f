#include "stgllm/model.hpp"

namespace stgllm {

ForecastModel ForecastModel::random_init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ForecastModel m;
    m.cfg_ = cfg;
    for (const auto& spec : build_param_specs(cfg)) m.store_.add(spec);
    m.store_.init_random(seed);
    return m;
}

ForecastModel ForecastModel::from_checkpoint(const std::string& dir) {
    Checkpoint ck = load_checkpoint(dir);
    ForecastModel m;
    m.cfg_ = ck.config;
    m.store_ = std::move(ck.params);
    m.scaler_ = ck.scaler;
    return m;
}

void ForecastModel::save(const std::string& dir) const {
    save_checkpoint(store_, cfg_, scaler_, dir);
}

void ForecastModel::set_vocab(TextVocab v) {
    require(v.vocab_size <= cfg_.backbone.vocab_size, ErrorCode::InvalidConfig,
            "vocab larger than the embedding table");
    vocab_ = std::move(v);
}

TokenizerParams ForecastModel::tokenizer_params() const {
    TokenizerParams p;
    p.k1 = cfg_.k1;
    p.k2 = cfg_.k2;
    if (cfg_.temporal_enabled()) {
        if (cfg_.c1 > 0 && store_.has("tokenizer.B_td")) {
            p.b_td = &store_.m("tokenizer.B_td");
            p.c1 = cfg_.c1;
        }
        if (cfg_.c2 > 0 && store_.has("tokenizer.B_dw")) {
            p.b_dw = &store_.m("tokenizer.B_dw");
            p.c2 = cfg_.c2;
        }
    }
    return p;
}

AdapterParams ForecastModel::adapter_params() const {
    AdapterParams p;
    if (store_.has("adapter.W1")) {
        p.w1 = &store_.m("adapter.W1");
        p.b1 = &store_.m("adapter.b1");
    }
    if (store_.has("adapter.W2")) {
        p.w2 = &store_.m("adapter.W2");
        p.b2 = &store_.m("adapter.b2");
        p.w3 = &store_.m("adapter.W3");
        p.b3 = &store_.m("adapter.b3");
    }
    return p;
}

Mat ForecastModel::predict(const WindowSample& w) const {
    PipelineCache cache;
    return forward(w, cache);
}

Mat ForecastModel::forward(const WindowSample& w, PipelineCache& c) const {
    const int L = cfg_.input_len, F = cfg_.num_features, P = cfg_.horizon;
    require(w.input_len() == L && w.num_features() == F, ErrorCode::ShapeMismatch,
            "window shape does not match the model config");
    require(w.horizon() == P, ErrorCode::ShapeMismatch, "window horizon != model horizon");
    const int n = w.num_nodes();
    const int tpn = cfg_.tokens_per_node();

    // normalize feature 0 with the training-segment scaler; other features pass through
    c.slab = Cube(L, n, F);
    for (int t = 0; t < L; ++t)
        for (int i = 0; i < n; ++i)
            for (int f = 0; f < F; ++f) {
                const double raw = static_cast<double>(w.x.at3(t, i, f));
                c.slab(t, i, f) = f == 0 ? scaler_.transform(raw) : raw;
            }

    if (cfg_.variant == VariantKind::NoTokenizer) {
        // per-node time patches, linearly embedded to backbone width
        const int np = cfg_.num_patches();
        const int pw = cfg_.patch_len * F;
        TokenizerParams none;  // no lookup tables: t_e degenerates to t_g
        c.toks = tokenize(c.slab, 0, 0, none);
        c.patch_in = Mat(n * np, pw);
        for (int i = 0; i < n; ++i)
            for (int q = 0; q < np; ++q) {
                double* row = c.patch_in.row(i * np + q);
                const int t0 = q * cfg_.patch_stride;
                for (int t = 0; t < cfg_.patch_len; ++t)
                    for (int f = 0; f < F; ++f) row[t * F + f] = c.slab(t0 + t, i, f);
            }
        linear_forward(c.patch_in, store_.m("patch.w"), &store_.m("patch.b"), c.t_q);
    } else {
        c.toks = tokenize(c.slab, w.tod_index, w.dow_index, tokenizer_params());
        if (cfg_.variant == VariantKind::NoAdapter) {
            const int d = cfg_.backbone.d_model;
            c.t_q = Mat(n, d);
            for (int i = 0; i < n; ++i)
                std::copy(c.toks.t_e.row(i), c.toks.t_e.row(i) + c.toks.t_e.cols, c.t_q.row(i));
        } else {
            c.t_q = encode(c.toks, adapter_params());
        }
    }

    Mat prompt_tokens(0, c.t_q.cols);
    if (cfg_.use_prompt) {
        require(cal_.has_value(), ErrorCode::InvalidConfig,
                "use_prompt is set but no calendar metadata is attached");
        const std::string text = render_time_prompt(w, *cal_, n, cfg_.prompt_template);
        prompt_tokens = encode_prompt(text, vocab_, store_.m("wte"), cfg_.backbone.context_len);
    }
    c.prompt_rows = prompt_tokens.rows;

    const bool has_backbone = cfg_.variant != VariantKind::NoLlm;
    c.combined = combine(prompt_tokens, c.t_q, has_backbone ? cfg_.backbone.context_len : 0);

    if (has_backbone) {
        const auto bw = BackboneWeights::from_store(store_, cfg_.backbone.n_layers);
        c.h = backbone_forward(c.combined, bw, cfg_.backbone, c.prompt_rows, &c.bb);
    } else {
        c.h = c.combined;  // identity backbone
    }

    const int graph_rows = n * tpn;
    c.h_graph = Mat(graph_rows, c.h.cols);
    for (int i = 0; i < graph_rows; ++i) {
        const double* src = c.h.row(c.h.rows - graph_rows + i);
        std::copy(src, src + c.h.cols, c.h_graph.row(i));
    }

    if (cfg_.variant == VariantKind::NoTokenizer) {
        const int np = cfg_.num_patches();
        c.h_node = Mat(n, c.h.cols);
        for (int i = 0; i < n; ++i) {
            double* dst = c.h_node.row(i);
            for (int q = 0; q < np; ++q) {
                const double* src = c.h_graph.row(i * np + q);
                for (int j = 0; j < c.h.cols; ++j) dst[j] += src[j];
            }
            for (int j = 0; j < c.h.cols; ++j) dst[j] /= np;
        }
    } else {
        c.h_node = c.h_graph;
    }

    if (cfg_.variant == VariantKind::NoAdapter) {
        linear_forward(c.h_node, store_.m("out.w"), &store_.m("out.b"), c.pred_n);
    } else {
        const auto ap = adapter_params();
        linear_forward(c.h_node, *ap.w2, ap.b2, c.mid);
        for (int i = 0; i < n; ++i) {
            double* mi = c.mid.row(i);
            const double* te = c.toks.t_e.row(i);
            for (int j = 0; j < c.mid.cols; ++j) mi[j] += te[j];
        }
        linear_forward(c.mid, *ap.w3, ap.b3, c.pred_n);
    }

    Mat pred = c.pred_n;
    for (auto& v : pred.v) v = scaler_.inverse(v);
    return pred;
}

void ForecastModel::backward(const WindowSample& w, const PipelineCache& c, const Mat& d_pred,
                             GradStore& grads) const {
    const int n = w.num_nodes();
    const int tpn = cfg_.tokens_per_node();
    const int graph_rows = n * tpn;

    // de-normalization is x̂·std + mean
    Mat d_pred_n = d_pred;
    for (auto& v : d_pred_n.v) v *= scaler_.std;

    Mat d_h_node(c.h_node.rows, c.h_node.cols);
    Mat d_te(c.toks.t_e.rows, c.toks.t_e.cols);
    if (cfg_.variant == VariantKind::NoAdapter) {
        Mat wsc, bsc;
        auto* dw = grads.find("out.w");
        auto* db = grads.find("out.b");
        Mat* dwm = nullptr;
        Mat* dbm = nullptr;
        if (dw) {
            wsc.rows = static_cast<int>(store_.at("out.w").spec.shape[0]);
            wsc.cols = static_cast<int>(store_.at("out.w").spec.shape[1]);
            wsc.v.swap(*dw);
            dwm = &wsc;
        }
        if (db) {
            bsc.rows = 1;
            bsc.cols = static_cast<int>(store_.at("out.b").spec.shape[0]);
            bsc.v.swap(*db);
            dbm = &bsc;
        }
        linear_backward(c.h_node, store_.m("out.w"), d_pred_n, &d_h_node, dwm, dbm);
        if (dw) wsc.v.swap(*dw);
        if (db) bsc.v.swap(*db);
    } else {
        AdapterGrads ag;
        ag.w1 = grads.find("adapter.W1");
        ag.b1 = grads.find("adapter.b1");
        ag.w2 = grads.find("adapter.W2");
        ag.b2 = grads.find("adapter.b2");
        ag.w3 = grads.find("adapter.W3");
        ag.b3 = grads.find("adapter.b3");
        decode_backward(c.h_node, c.mid, adapter_params(), d_pred_n, &d_h_node, &d_te, ag);
    }

    // gradient w.r.t. the backbone output rows
    Mat d_h(c.h.rows, c.h.cols);
    if (cfg_.variant == VariantKind::NoTokenizer) {
        const int np = cfg_.num_patches();
        for (int i = 0; i < n; ++i) {
            const double* src = d_h_node.row(i);
            for (int q = 0; q < np; ++q) {
                double* dst = d_h.row(d_h.rows - graph_rows + i * np + q);
                for (int j = 0; j < d_h.cols; ++j) dst[j] += src[j] / np;
            }
        }
    } else {
        for (int i = 0; i < graph_rows; ++i) {
            const double* src = d_h_node.row(i);
            double* dst = d_h.row(d_h.rows - graph_rows + i);
            std::copy(src, src + d_h.cols, dst);
        }
    }

    Mat d_tokens;
    if (cfg_.variant != VariantKind::NoLlm) {
        const auto bw = BackboneWeights::from_store(store_, cfg_.backbone.n_layers);
        auto bg = BackboneGrads::from_store(grads, cfg_.backbone.n_layers);
        d_tokens = backbone_backward(d_h, c.bb, bw, cfg_.backbone, bg);
    } else {
        d_tokens = std::move(d_h);
    }

    // prompt rows feed only the frozen wte; their gradient is dropped
    Mat d_tq(graph_rows, d_tokens.cols);
    for (int i = 0; i < graph_rows; ++i) {
        const double* src = d_tokens.row(d_tokens.rows - graph_rows + i);
        std::copy(src, src + d_tokens.cols, d_tq.row(i));
    }

    if (cfg_.variant == VariantKind::NoTokenizer) {
        Mat wsc, bsc;
        auto* dw = grads.find("patch.w");
        auto* db = grads.find("patch.b");
        Mat* dwm = nullptr;
        Mat* dbm = nullptr;
        if (dw) {
            wsc.rows = static_cast<int>(store_.at("patch.w").spec.shape[0]);
            wsc.cols = static_cast<int>(store_.at("patch.w").spec.shape[1]);
            wsc.v.swap(*dw);
            dwm = &wsc;
        }
        if (db) {
            bsc.rows = 1;
            bsc.cols = static_cast<int>(store_.at("patch.b").spec.shape[0]);
            bsc.v.swap(*db);
            dbm = &bsc;
        }
        linear_backward(c.patch_in, store_.m("patch.w"), d_tq, nullptr, dwm, dbm);
        if (dw) wsc.v.swap(*dw);
        if (db) bsc.v.swap(*db);
        return;  // the residual t_g has no parameters behind it
    }

    if (cfg_.variant == VariantKind::NoAdapter) {
        // padding backward: take the first token_width columns
        for (int i = 0; i < n; ++i) {
            const double* src = d_tq.row(i);
            double* dst = d_te.row(i);
            for (int j = 0; j < d_te.cols; ++j) dst[j] += src[j];
        }
    } else {
        AdapterGrads ag;
        ag.w1 = grads.find("adapter.W1");
        ag.b1 = grads.find("adapter.b1");
        encode_backward(c.toks, adapter_params(), d_tq, &d_te, ag);
    }

    if (cfg_.temporal_enabled()) {
        tokenize_backward(d_te, cfg_.series_width(), w.tod_index, w.dow_index, tokenizer_params(),
                          grads.find("tokenizer.B_td"), grads.find("tokenizer.B_dw"));
    }
}

Mat target_of(const WindowSample& w) {
    const int p = w.horizon(), n = w.num_nodes();
    Mat t(n, p);
    for (int h = 0; h < p; ++h)
        for (int i = 0; i < n; ++i) t(i, h) = static_cast<double>(w.y.at2(h, i));
    return t;
}

}  // namespace stgllm
