#pragma once

#include <cstdint>
#include <vector>

#include "stgllm/common.hpp"

namespace stgllm {

// f32 storage tensor: the dtype of parameters on disk and of dataset payloads.
// All arithmetic happens in double (Mat below); Tensor is storage/exchange.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    float& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    float at(int64_t i) const { return data[static_cast<size_t>(i)]; }
    float& at2(int64_t i, int64_t j) { return data[static_cast<size_t>(i * dim(1) + j)]; }
    float at2(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * dim(1) + j)]; }
    float& at3(int64_t i, int64_t j, int64_t k) {
        return data[static_cast<size_t>((i * dim(1) + j) * dim(2) + k)];
    }
    float at3(int64_t i, int64_t j, int64_t k) const {
        return data[static_cast<size_t>((i * dim(1) + j) * dim(2) + k)];
    }

    bool same_shape(const std::vector<int64_t>& s) const { return shape == s; }
};

// Row-major double matrix for activations, gradients and parameter mirrors.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

    double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }
    double& operator()(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

    void zero() { std::fill(v.begin(), v.end(), 0.0); }
    size_t size() const { return v.size(); }
};

// L×N×F double cube (window slabs).
struct Cube {
    int d0 = 0, d1 = 0, d2 = 0;
    std::vector<double> v;

    Cube() = default;
    Cube(int a, int b, int c)
        : d0(a), d1(b), d2(c), v(static_cast<size_t>(a) * b * c, 0.0) {}

    double& operator()(int i, int j, int k) {
        return v[(static_cast<size_t>(i) * d1 + j) * d2 + k];
    }
    double operator()(int i, int j, int k) const {
        return v[(static_cast<size_t>(i) * d1 + j) * d2 + k];
    }
};

// C = A·B
void matmul(const Mat& a, const Mat& b, Mat& c);
// dA += dC·Bᵀ
void matmul_acc_da(Mat& da, const Mat& dc, const Mat& b);
// dB += Aᵀ·dC
void matmul_acc_db(Mat& db, const Mat& a, const Mat& dc);

// Y = X·W, then += bias per row (bias is 1×cols; pass nullptr to skip)
void linear_forward(const Mat& x, const Mat& w, const Mat* bias, Mat& y);
// dX += dY·Wᵀ; dW += Xᵀ·dY; db += column sums of dY (any of the outputs may be null)
void linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat* dx, Mat* dw, Mat* db);

Mat to_mat(const Tensor& t);  // 2-d tensor → Mat; 1-d → 1×n

}  // namespace stgllm
