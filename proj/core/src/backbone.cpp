#include "stgllm/backbone.hpp"

#include <cmath>

namespace stgllm {

BackboneWeights BackboneWeights::from_store(const ParamStore& store, int n_layers) {
    BackboneWeights w;
    w.wte = &store.m("wte");
    w.wpe = &store.m("wpe");
    for (int l = 0; l < n_layers; ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        BlockWeights b;
        b.ln1_g = &store.m(p + "ln1.g");
        b.ln1_b = &store.m(p + "ln1.b");
        b.qkv_w = &store.m(p + "attn.qkv.w");
        b.qkv_b = &store.m(p + "attn.qkv.b");
        b.proj_w = &store.m(p + "attn.proj.w");
        b.proj_b = &store.m(p + "attn.proj.b");
        b.ln2_g = &store.m(p + "ln2.g");
        b.ln2_b = &store.m(p + "ln2.b");
        b.fc_w = &store.m(p + "ffn.fc.w");
        b.fc_b = &store.m(p + "ffn.fc.b");
        b.fproj_w = &store.m(p + "ffn.proj.w");
        b.fproj_b = &store.m(p + "ffn.proj.b");
        w.blocks.push_back(b);
    }
    w.lnf_g = &store.m("ln_f.g");
    w.lnf_b = &store.m("ln_f.b");
    return w;
}

BackboneGrads BackboneGrads::from_store(GradStore& grads, int n_layers) {
    BackboneGrads g;
    g.wpe = grads.find("wpe");
    for (int l = 0; l < n_layers; ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        BlockGrads b;
        b.ln1_g = grads.find(p + "ln1.g");
        b.ln1_b = grads.find(p + "ln1.b");
        b.qkv_w = grads.find(p + "attn.qkv.w");
        b.qkv_b = grads.find(p + "attn.qkv.b");
        b.proj_w = grads.find(p + "attn.proj.w");
        b.proj_b = grads.find(p + "attn.proj.b");
        b.ln2_g = grads.find(p + "ln2.g");
        b.ln2_b = grads.find(p + "ln2.b");
        b.fc_w = grads.find(p + "ffn.fc.w");
        b.fc_b = grads.find(p + "ffn.fc.b");
        b.fproj_w = grads.find(p + "ffn.proj.w");
        b.fproj_b = grads.find(p + "ffn.proj.b");
        g.blocks.push_back(b);
    }
    g.lnf_g = grads.find("ln_f.g");
    g.lnf_b = grads.find("ln_f.b");
    return g;
}

void layer_norm_forward(const Mat& x, const Mat& g, const Mat& b, double eps, Mat& y,
                        std::vector<double>* mean, std::vector<double>* rstd) {
    const int d = x.cols;
    if (y.rows != x.rows || y.cols != d) y = Mat(x.rows, d);
    const double* gv = g.row(0);
    const double* bv = b.row(0);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = x.row(i);
        double m = 0.0;
        for (int j = 0; j < d; ++j) m += xi[j];
        m /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xi[j] - m;
            var += c * c;
        }
        var /= d;
        const double rs = 1.0 / std::sqrt(var + eps);
        double* yi = y.row(i);
        for (int j = 0; j < d; ++j) yi[j] = gv[j] * ((xi[j] - m) * rs) + bv[j];
        if (mean) (*mean)[static_cast<size_t>(i)] = m;
        if (rstd) (*rstd)[static_cast<size_t>(i)] = rs;
    }
}

namespace {

// dx += ln backward; dg/db accumulate when non-null
void layer_norm_backward(const Mat& dy, const Mat& x, const Mat& g,
                         const std::vector<double>& mean, const std::vector<double>& rstd,
                         Mat& dx, std::vector<double>* dg, std::vector<double>* db) {
    const int d = x.cols;
    const double* gv = g.row(0);
    for (int i = 0; i < x.rows; ++i) {
        const double* dyi = dy.row(i);
        const double* xi = x.row(i);
        const double m = mean[static_cast<size_t>(i)];
        const double rs = rstd[static_cast<size_t>(i)];
        double dnorm_mean = 0.0, dnorm_norm_mean = 0.0;
        for (int j = 0; j < d; ++j) {
            const double norm = (xi[j] - m) * rs;
            const double dnorm = gv[j] * dyi[j];
            dnorm_mean += dnorm;
            dnorm_norm_mean += dnorm * norm;
        }
        dnorm_mean /= d;
        dnorm_norm_mean /= d;
        double* dxi = dx.row(i);
        for (int j = 0; j < d; ++j) {
            const double norm = (xi[j] - m) * rs;
            const double dnorm = gv[j] * dyi[j];
            dxi[j] += (dnorm - dnorm_mean - norm * dnorm_norm_mean) * rs;
            if (dg) (*dg)[static_cast<size_t>(j)] += norm * dyi[j];
            if (db) (*db)[static_cast<size_t>(j)] += dyi[j];
        }
    }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu_inner_tanh(double x) {
    return std::tanh(kGeluC * (x + kGeluA * x * x * x));
}

inline double gelu_from_tanh(double x, double t) { return 0.5 * x * (1.0 + t); }

inline double gelu_grad_from_tanh(double x, double t) {
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

inline bool attn_allowed(int i, int j, int graph_start, bool bidirectional) {
    if (j <= i) return true;
    return bidirectional && i >= graph_start && j >= graph_start;
}

void attention_forward(const Mat& qkv, const BackboneConfig& cfg, int graph_start, Mat& probs,
                       Mat& ctx) {
    const int s = qkv.rows;
    const int d = cfg.d_model;
    const int nh = cfg.n_heads;
    const int dh = d / nh;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    if (probs.rows != nh * s || probs.cols != s) probs = Mat(nh * s, s);
    probs.zero();
    if (ctx.rows != s || ctx.cols != d) ctx = Mat(s, d);

    std::vector<double> scores(static_cast<size_t>(s));
    for (int h = 0; h < nh; ++h) {
        const int qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
        for (int i = 0; i < s; ++i) {
            const double* qi = qkv.row(i) + qo;
            double maxv = -1e300;
            int hi = 0;
            for (int j = 0; j < s; ++j) {
                if (!attn_allowed(i, j, graph_start, cfg.bidirectional_graph_span)) continue;
                const double* kj = qkv.row(j) + ko;
                double dot = 0.0;
                for (int e = 0; e < dh; ++e) dot += qi[e] * kj[e];
                dot *= scale;
                scores[static_cast<size_t>(j)] = dot;
                if (dot > maxv) maxv = dot;
                hi = j;
            }
            double* pr = probs.row(h * s + i);
            double sum = 0.0;
            for (int j = 0; j <= hi; ++j) {
                if (!attn_allowed(i, j, graph_start, cfg.bidirectional_graph_span)) continue;
                const double e = std::exp(scores[static_cast<size_t>(j)] - maxv);
                pr[j] = e;
                sum += e;
            }
            const double inv = 1.0 / sum;
            double* ci = ctx.row(i) + h * dh;
            std::fill(ci, ci + dh, 0.0);
            for (int j = 0; j <= hi; ++j) {
                if (pr[j] == 0.0) continue;
                pr[j] *= inv;
                const double* vj = qkv.row(j) + vo;
                for (int e = 0; e < dh; ++e) ci[e] += pr[j] * vj[e];
            }
        }
    }
}

void attention_backward(const Mat& qkv, const Mat& probs, const Mat& d_ctx,
                        const BackboneConfig& cfg, int graph_start, Mat& d_qkv) {
    const int s = qkv.rows;
    const int d = cfg.d_model;
    const int nh = cfg.n_heads;
    const int dh = d / nh;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> dp(static_cast<size_t>(s));

    for (int h = 0; h < nh; ++h) {
        const int qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
        for (int i = 0; i < s; ++i) {
            const double* pr = probs.row(h * s + i);
            const double* dci = d_ctx.row(i) + h * dh;
            double dsum = 0.0;
            for (int j = 0; j < s; ++j) {
                if (!attn_allowed(i, j, graph_start, cfg.bidirectional_graph_span)) continue;
                const double* vj = qkv.row(j) + vo;
                double acc = 0.0;
                for (int e = 0; e < dh; ++e) acc += dci[e] * vj[e];
                dp[static_cast<size_t>(j)] = acc;
                dsum += pr[j] * acc;
                // dv
                double* dvj = d_qkv.row(j) + vo;
                for (int e = 0; e < dh; ++e) dvj[e] += pr[j] * dci[e];
            }
            const double* qi = qkv.row(i) + qo;
            double* dqi = d_qkv.row(i) + qo;
            for (int j = 0; j < s; ++j) {
                if (!attn_allowed(i, j, graph_start, cfg.bidirectional_graph_span)) continue;
                const double ds = pr[j] * (dp[static_cast<size_t>(j)] - dsum) * scale;
                if (ds == 0.0) continue;
                const double* kj = qkv.row(j) + ko;
                double* dkj = d_qkv.row(j) + ko;
                for (int e = 0; e < dh; ++e) {
                    dqi[e] += ds * kj[e];
                    dkj[e] += ds * qi[e];
                }
            }
        }
    }
}

Mat* as_mat(std::vector<double>* buf, int rows, int cols, Mat& scratch) {
    if (!buf) return nullptr;
    scratch.rows = rows;
    scratch.cols = cols;
    scratch.v.swap(*buf);
    return &scratch;
}

void release_mat(std::vector<double>* buf, Mat& scratch) {
    if (buf) scratch.v.swap(*buf);
}

}  // namespace

Mat backbone_forward(const Mat& tokens, const BackboneWeights& w, const BackboneConfig& cfg,
                     int graph_start, BackboneCache* cache) {
    cfg.validate();
    const int s = tokens.rows;
    const int d = cfg.d_model;
    require(tokens.cols == d, ErrorCode::WidthMismatch, "backbone: token width != d_model");
    require(s <= cfg.context_len, ErrorCode::ContextOverflow,
            "backbone: " + std::to_string(s) + " tokens exceed context " +
                std::to_string(cfg.context_len));

    BackboneCache local;
    BackboneCache& c = cache ? *cache : local;
    c.graph_start = graph_start;
    c.layers.resize(static_cast<size_t>(cfg.n_layers));

    c.x0 = tokens;
    for (int i = 0; i < s; ++i) {
        double* xi = c.x0.row(i);
        const double* pe = w.wpe->row(i);
        for (int j = 0; j < d; ++j) xi[j] += pe[j];
    }

    Mat x = c.x0;
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerCache& lc = c.layers[static_cast<size_t>(l)];
        const BlockWeights& bw = w.blocks[static_cast<size_t>(l)];
        lc.x_in = x;
        lc.ln1_mean.resize(static_cast<size_t>(s));
        lc.ln1_rstd.resize(static_cast<size_t>(s));
        layer_norm_forward(lc.x_in, *bw.ln1_g, *bw.ln1_b, cfg.ln_eps, lc.ln1_out, &lc.ln1_mean,
                           &lc.ln1_rstd);
        linear_forward(lc.ln1_out, *bw.qkv_w, bw.qkv_b, lc.qkv);
        attention_forward(lc.qkv, cfg, graph_start, lc.probs, lc.ctx);
        Mat att_out;
        linear_forward(lc.ctx, *bw.proj_w, bw.proj_b, att_out);
        lc.x_mid = lc.x_in;
        for (size_t i = 0; i < lc.x_mid.v.size(); ++i) lc.x_mid.v[i] += att_out.v[i];

        lc.ln2_mean.resize(static_cast<size_t>(s));
        lc.ln2_rstd.resize(static_cast<size_t>(s));
        layer_norm_forward(lc.x_mid, *bw.ln2_g, *bw.ln2_b, cfg.ln_eps, lc.ln2_out, &lc.ln2_mean,
                           &lc.ln2_rstd);
        linear_forward(lc.ln2_out, *bw.fc_w, bw.fc_b, lc.fc_pre);
        lc.fc_tanh = Mat(lc.fc_pre.rows, lc.fc_pre.cols);
        lc.fc_act = Mat(lc.fc_pre.rows, lc.fc_pre.cols);
        for (size_t i = 0; i < lc.fc_pre.v.size(); ++i) {
            lc.fc_tanh.v[i] = gelu_inner_tanh(lc.fc_pre.v[i]);
            lc.fc_act.v[i] = gelu_from_tanh(lc.fc_pre.v[i], lc.fc_tanh.v[i]);
        }
        Mat ffn_out;
        linear_forward(lc.fc_act, *bw.fproj_w, bw.fproj_b, ffn_out);
        x = lc.x_mid;
        for (size_t i = 0; i < x.v.size(); ++i) x.v[i] += ffn_out.v[i];
    }

    c.lnf_in = x;
    c.lnf_mean.resize(static_cast<size_t>(s));
    c.lnf_rstd.resize(static_cast<size_t>(s));
    Mat h;
    layer_norm_forward(c.lnf_in, *w.lnf_g, *w.lnf_b, cfg.ln_eps, h, &c.lnf_mean, &c.lnf_rstd);
    return h;
}

Mat backbone_backward(const Mat& d_h, const BackboneCache& cache, const BackboneWeights& w,
                      const BackboneConfig& cfg, BackboneGrads& g) {
    const int s = d_h.rows;
    const int d = cfg.d_model;

    Mat dx(s, d);
    layer_norm_backward(d_h, cache.lnf_in, *w.lnf_g, cache.lnf_mean, cache.lnf_rstd, dx, g.lnf_g,
                        g.lnf_b);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const LayerCache& lc = cache.layers[static_cast<size_t>(l)];
        const BlockWeights& bw = w.blocks[static_cast<size_t>(l)];
        BlockGrads& bg = g.blocks[static_cast<size_t>(l)];

        // FFN branch; dx is the gradient at the block output
        Mat d_fc_act(s, cfg.ffn_mult * d);
        {
            Mat wsc, bsc;
            Mat* dwp = as_mat(bg.fproj_w, bw.fproj_w->rows, bw.fproj_w->cols, wsc);
            Mat* dbp = as_mat(bg.fproj_b, 1, bw.fproj_b->cols, bsc);
            linear_backward(lc.fc_act, *bw.fproj_w, dx, &d_fc_act, dwp, dbp);
            release_mat(bg.fproj_w, wsc);
            release_mat(bg.fproj_b, bsc);
        }
        for (size_t i = 0; i < d_fc_act.v.size(); ++i)
            d_fc_act.v[i] *= gelu_grad_from_tanh(lc.fc_pre.v[i], lc.fc_tanh.v[i]);
        Mat d_ln2_out(s, d);
        {
            Mat wsc, bsc;
            Mat* dwp = as_mat(bg.fc_w, bw.fc_w->rows, bw.fc_w->cols, wsc);
            Mat* dbp = as_mat(bg.fc_b, 1, bw.fc_b->cols, bsc);
            linear_backward(lc.ln2_out, *bw.fc_w, d_fc_act, &d_ln2_out, dwp, dbp);
            release_mat(bg.fc_w, wsc);
            release_mat(bg.fc_b, bsc);
        }
        // d(x_mid) = dx (residual) + ln2 backward
        Mat dx_mid = dx;
        layer_norm_backward(d_ln2_out, lc.x_mid, *bw.ln2_g, lc.ln2_mean, lc.ln2_rstd, dx_mid,
                            bg.ln2_g, bg.ln2_b);

        // attention branch
        Mat d_ctx(s, d);
        {
            Mat wsc, bsc;
            Mat* dwp = as_mat(bg.proj_w, bw.proj_w->rows, bw.proj_w->cols, wsc);
            Mat* dbp = as_mat(bg.proj_b, 1, bw.proj_b->cols, bsc);
            linear_backward(lc.ctx, *bw.proj_w, dx_mid, &d_ctx, dwp, dbp);
            release_mat(bg.proj_w, wsc);
            release_mat(bg.proj_b, bsc);
        }
        Mat d_qkv(s, 3 * d);
        attention_backward(lc.qkv, lc.probs, d_ctx, cfg, cache.graph_start, d_qkv);
        Mat d_ln1_out(s, d);
        {
            Mat wsc, bsc;
            Mat* dwp = as_mat(bg.qkv_w, bw.qkv_w->rows, bw.qkv_w->cols, wsc);
            Mat* dbp = as_mat(bg.qkv_b, 1, bw.qkv_b->cols, bsc);
            linear_backward(lc.ln1_out, *bw.qkv_w, d_qkv, &d_ln1_out, dwp, dbp);
            release_mat(bg.qkv_w, wsc);
            release_mat(bg.qkv_b, bsc);
        }
        Mat dx_in = dx_mid;  // residual into the block input
        layer_norm_backward(d_ln1_out, lc.x_in, *bw.ln1_g, lc.ln1_mean, lc.ln1_rstd, dx_in,
                            bg.ln1_g, bg.ln1_b);
        dx = std::move(dx_in);
    }

    if (g.wpe) {
        for (int i = 0; i < s; ++i) {
            const double* dxi = dx.row(i);
            double* dpe = g.wpe->data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) dpe[j] += dxi[j];
        }
    }
    return dx;  // gradient w.r.t. the input tokens
}

}  // namespace stgllm
