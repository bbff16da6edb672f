#include "stgllm/tensor.hpp"

namespace stgllm {

void matmul(const Mat& a, const Mat& b, Mat& c) {
    require(a.cols == b.rows, ErrorCode::ShapeMismatch, "matmul: inner dims differ");
    if (c.rows != a.rows || c.cols != b.cols) c = Mat(a.rows, b.cols);
    const int k = a.cols, n = b.cols;
    for (int i = 0; i < a.rows; ++i) {
        double* ci = c.row(i);
        std::fill(ci, ci + n, 0.0);
        const double* ai = a.row(i);
        int kk = 0;
        for (; kk + 4 <= k; kk += 4) {  // block over k to cut C-row traffic
            const double a0 = ai[kk], a1 = ai[kk + 1], a2 = ai[kk + 2], a3 = ai[kk + 3];
            const double* b0 = b.row(kk);
            const double* b1 = b.row(kk + 1);
            const double* b2 = b.row(kk + 2);
            const double* b3 = b.row(kk + 3);
            for (int j = 0; j < n; ++j)
                ci[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; kk < k; ++kk) {
            const double av = ai[kk];
            const double* bk = b.row(kk);
            for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

void matmul_acc_da(Mat& da, const Mat& dc, const Mat& b) {
    // dA[i][k] += Σ_j dC[i][j]·B[k][j]
    const int k = b.rows, n = b.cols;
    for (int i = 0; i < dc.rows; ++i) {
        const double* dci = dc.row(i);
        double* dai = da.row(i);
        for (int kk = 0; kk < k; ++kk) {
            const double* bk = b.row(kk);
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += dci[j] * bk[j];
            dai[kk] += acc;
        }
    }
}

void matmul_acc_db(Mat& db, const Mat& a, const Mat& dc) {
    // dB[k][j] += Σ_i A[i][k]·dC[i][j]
    const int k = a.cols, n = dc.cols;
    int i = 0;
    for (; i + 4 <= a.rows; i += 4) {
        const double* a0 = a.row(i);
        const double* a1 = a.row(i + 1);
        const double* a2 = a.row(i + 2);
        const double* a3 = a.row(i + 3);
        const double* d0 = dc.row(i);
        const double* d1 = dc.row(i + 1);
        const double* d2 = dc.row(i + 2);
        const double* d3 = dc.row(i + 3);
        for (int kk = 0; kk < k; ++kk) {
            const double v0 = a0[kk], v1 = a1[kk], v2 = a2[kk], v3 = a3[kk];
            double* dbk = db.row(kk);
            for (int j = 0; j < n; ++j)
                dbk[j] += v0 * d0[j] + v1 * d1[j] + v2 * d2[j] + v3 * d3[j];
        }
    }
    for (; i < a.rows; ++i) {
        const double* ai = a.row(i);
        const double* dci = dc.row(i);
        for (int kk = 0; kk < k; ++kk) {
            const double av = ai[kk];
            double* dbk = db.row(kk);
            for (int j = 0; j < n; ++j) dbk[j] += av * dci[j];
        }
    }
}

void linear_forward(const Mat& x, const Mat& w, const Mat* bias, Mat& y) {
    matmul(x, w, y);
    if (bias) {
        require(bias->cols == y.cols, ErrorCode::ShapeMismatch, "linear_forward: bias width");
        const double* b = bias->row(0);
        for (int i = 0; i < y.rows; ++i) {
            double* yi = y.row(i);
            for (int j = 0; j < y.cols; ++j) yi[j] += b[j];
        }
    }
}

void linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat* dx, Mat* dw, Mat* db) {
    if (dx) matmul_acc_da(*dx, dy, w);
    if (dw) matmul_acc_db(*dw, x, dy);
    if (db) {
        double* d = db->row(0);
        for (int i = 0; i < dy.rows; ++i) {
            const double* dyi = dy.row(i);
            for (int j = 0; j < dy.cols; ++j) d[j] += dyi[j];
        }
    }
}

Mat to_mat(const Tensor& t) {
    require(t.ndim() == 1 || t.ndim() == 2, ErrorCode::ShapeMismatch, "to_mat: rank must be 1 or 2");
    Mat m;
    if (t.ndim() == 1) {
        m = Mat(1, static_cast<int>(t.dim(0)));
    } else {
        m = Mat(static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)));
    }
    for (size_t i = 0; i < t.data.size(); ++i) m.v[i] = static_cast<double>(t.data[i]);
    return m;
}

}  // namespace stgllm
