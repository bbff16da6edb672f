#include "stgllm/adapter.hpp"

namespace stgllm {

namespace {

Mat* grad_mat_view(std::vector<double>* buf, int rows, int cols, Mat& scratch) {
    if (!buf) return nullptr;
    scratch.rows = rows;
    scratch.cols = cols;
    scratch.v.swap(*buf);
    return &scratch;
}

void grad_mat_release(std::vector<double>* buf, Mat& scratch) {
    if (buf) scratch.v.swap(*buf);
}

}  // namespace

Mat encode(const GraphTokens& tokens, const AdapterParams& p) {
    require(p.w1 && p.b1, ErrorCode::InvalidConfig, "encode: missing W1/b1");
    require(tokens.t_e.cols == p.w1->rows, ErrorCode::WidthMismatch,
            "encode: token width " + std::to_string(tokens.t_e.cols) + " != W1 rows " +
                std::to_string(p.w1->rows));
    Mat tq;
    linear_forward(tokens.t_e, *p.w1, p.b1, tq);
    return tq;
}

Mat combine(const Mat& prompt_tokens, const Mat& graph_tokens, int context_len) {
    if (prompt_tokens.rows > 0)
        require(prompt_tokens.cols == graph_tokens.cols, ErrorCode::WidthMismatch,
                "combine: prompt width != graph token width");
    const int m = prompt_tokens.rows, n = graph_tokens.rows;
    if (context_len > 0 && m + n > context_len)
        fail(ErrorCode::ContextOverflow, "combine: " + std::to_string(m) + "+" +
                                             std::to_string(n) + " tokens exceed context " +
                                             std::to_string(context_len));
    Mat t(m + n, graph_tokens.cols);
    for (int i = 0; i < m; ++i)
        std::copy(prompt_tokens.row(i), prompt_tokens.row(i) + t.cols, t.row(i));
    for (int i = 0; i < n; ++i)
        std::copy(graph_tokens.row(i), graph_tokens.row(i) + t.cols, t.row(m + i));
    return t;
}

Mat decode(const Mat& h, const GraphTokens& tokens, const AdapterParams& p) {
    require(p.w2 && p.b2 && p.w3 && p.b3, ErrorCode::InvalidConfig, "decode: missing W2/W3");
    const int n = tokens.t_e.rows;
    require(h.rows >= n, ErrorCode::ShapeMismatch, "decode: fewer hidden rows than tokens");
    require(h.cols == p.w2->rows, ErrorCode::WidthMismatch, "decode: hidden width != W2 rows");
    require(p.w2->cols == tokens.t_e.cols, ErrorCode::WidthMismatch,
            "decode: W2 cols != token width");

    Mat h_graph(n, h.cols);
    for (int i = 0; i < n; ++i)
        std::copy(h.row(h.rows - n + i), h.row(h.rows - n + i) + h.cols, h_graph.row(i));

    Mat mid;
    linear_forward(h_graph, *p.w2, p.b2, mid);
    for (int i = 0; i < n; ++i) {
        double* mi = mid.row(i);
        const double* te = tokens.t_e.row(i);
        for (int j = 0; j < mid.cols; ++j) mi[j] += te[j];
    }
    Mat pred;
    linear_forward(mid, *p.w3, p.b3, pred);
    return pred;
}

void encode_backward(const GraphTokens& tokens, const AdapterParams& p, const Mat& d_tq,
                     Mat* d_te, AdapterGrads& g) {
    Mat w1_scratch, b1_scratch;
    Mat* dw1 = grad_mat_view(g.w1, p.w1->rows, p.w1->cols, w1_scratch);
    Mat* db1 = grad_mat_view(g.b1, 1, p.b1->cols, b1_scratch);
    linear_backward(tokens.t_e, *p.w1, d_tq, d_te, dw1, db1);
    grad_mat_release(g.w1, w1_scratch);
    grad_mat_release(g.b1, b1_scratch);
}

void decode_backward(const Mat& h_graph, const Mat& mid, const AdapterParams& p,
                     const Mat& d_pred, Mat* d_h_graph, Mat* d_te, AdapterGrads& g) {
    Mat w3_scratch, b3_scratch, w2_scratch, b2_scratch;
    Mat* dw3 = grad_mat_view(g.w3, p.w3->rows, p.w3->cols, w3_scratch);
    Mat* db3 = grad_mat_view(g.b3, 1, p.b3->cols, b3_scratch);

    Mat d_mid(mid.rows, mid.cols);
    linear_backward(mid, *p.w3, d_pred, &d_mid, dw3, db3);
    grad_mat_release(g.w3, w3_scratch);
    grad_mat_release(g.b3, b3_scratch);

    // residual: d_te gets d_mid directly
    if (d_te) {
        for (int i = 0; i < d_mid.rows; ++i) {
            const double* s = d_mid.row(i);
            double* d = d_te->row(i);
            for (int j = 0; j < d_mid.cols; ++j) d[j] += s[j];
        }
    }
    Mat* dw2 = grad_mat_view(g.w2, p.w2->rows, p.w2->cols, w2_scratch);
    Mat* db2 = grad_mat_view(g.b2, 1, p.b2->cols, b2_scratch);
    linear_backward(h_graph, *p.w2, d_mid, d_h_graph, dw2, db2);
    grad_mat_release(g.w2, w2_scratch);
    grad_mat_release(g.b2, b2_scratch);
}

}  // namespace stgllm
