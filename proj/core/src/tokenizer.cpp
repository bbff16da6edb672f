#include "stgllm/tokenizer.hpp"

namespace stgllm {

GraphTokens tokenize(const Cube& x, int tod_index, int dow_index, const TokenizerParams& p) {
    const int L = x.d0, N = x.d1, F = x.d2;
    const int c1 = p.b_td ? p.c1 : 0;
    const int c2 = p.b_dw ? p.c2 : 0;
    require(tod_index >= 0 && tod_index < p.k1, ErrorCode::IndexOutOfRange,
            "tokenize: tod_index " + std::to_string(tod_index) + " out of [0," +
                std::to_string(p.k1) + ")");
    require(dow_index >= 0 && dow_index < p.k2, ErrorCode::IndexOutOfRange,
            "tokenize: dow_index out of range");

    GraphTokens out;
    out.t_g = Mat(N, L * F);
    out.t_e = Mat(N, L * F + c1 + c2);
    for (int n = 0; n < N; ++n) {
        double* g = out.t_g.row(n);
        double* e = out.t_e.row(n);
        for (int t = 0; t < L; ++t)
            for (int f = 0; f < F; ++f) g[t * F + f] = x(t, n, f);
        std::copy(g, g + L * F, e);
        if (c1) {
            const double* td = p.b_td->row(tod_index);
            std::copy(td, td + c1, e + L * F);
        }
        if (c2) {
            const double* dw = p.b_dw->row(dow_index);
            std::copy(dw, dw + c2, e + L * F + c1);
        }
    }
    return out;
}

void tokenize_backward(const Mat& d_te, int series_width, int tod_index, int dow_index,
                       const TokenizerParams& p, std::vector<double>* d_td,
                       std::vector<double>* d_dw) {
    const int c1 = p.b_td ? p.c1 : 0;
    const int c2 = p.b_dw ? p.c2 : 0;
    // only the looked-up rows receive gradient; it sums over the N broadcasts
    if (c1 && d_td) {
        double* row = d_td->data() + static_cast<size_t>(tod_index) * c1;
        for (int n = 0; n < d_te.rows; ++n) {
            const double* e = d_te.row(n) + series_width;
            for (int j = 0; j < c1; ++j) row[j] += e[j];
        }
    }
    if (c2 && d_dw) {
        double* row = d_dw->data() + static_cast<size_t>(dow_index) * c2;
        for (int n = 0; n < d_te.rows; ++n) {
            const double* e = d_te.row(n) + series_width + c1;
            for (int j = 0; j < c2; ++j) row[j] += e[j];
        }
    }
}

std::pair<int, int> calendar_indices(int64_t t_last, const SeriesDataset& ds) {
    require(t_last >= 0 && t_last < ds.num_steps, ErrorCode::IndexOutOfRange,
            "calendar_indices: step out of range");
    const int k1 = ds.steps_per_day();
    const int64_t abs_idx = ds.first_step_index_in_day + t_last;
    const int tod = static_cast<int>(abs_idx % k1);
    const int dow = static_cast<int>((ds.first_step_day_of_week + abs_idx / k1) % 7);
    return {tod, dow};
}

}  // namespace stgllm
