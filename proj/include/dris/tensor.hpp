#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dris/error.hpp"

namespace dris {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 tensors.
struct Tensor {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    static Tensor zeros(int r, int c) { return Tensor(r, c); }
    static Tensor full(int r, int c, double x) {
        Tensor t(r, c);
        for (double& e : t.v) e = x;
        return t;
    }
    static Tensor row(std::vector<double> vals) {
        Tensor t;
        t.rows = 1;
        t.cols = static_cast<int>(vals.size());
        t.v = std::move(vals);
        return t;
    }

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    const double* rowptr(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    double* rowptr(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
    bool finite() const {
        for (const double e : v)
            if (!std::isfinite(e)) return false;
        return true;
    }
};

// C += A * B. Shapes: (n x k) * (k x m) -> (n x m).
inline void matmul_acc(const Tensor& A, const Tensor& B, Tensor& C) {
    const int n = A.rows, k = A.cols, m = B.cols;
    for (int i = 0; i < n; ++i) {
        double* c = C.rowptr(i);
        const double* a = A.rowptr(i);
        for (int l = 0; l < k; ++l) {
            const double av = a[l];
            const double* b = B.rowptr(l);
            for (int j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

// C += A^T * B. Shapes: (n x k)^T * (n x m) -> (k x m).
inline void matmul_tn_acc(const Tensor& A, const Tensor& B, Tensor& C) {
    const int n = A.rows, k = A.cols, m = B.cols;
    for (int l = 0; l < n; ++l) {
        const double* a = A.rowptr(l);
        const double* b = B.rowptr(l);
        for (int i = 0; i < k; ++i) {
            const double av = a[i];
            double* c = C.rowptr(i);
            for (int j = 0; j < m; ++j) c[j] += av * b[j];
        }
    }
}

// C += A * B^T. Shapes: (n x m) * (k x m)^T -> (n x k).
inline void matmul_nt_acc(const Tensor& A, const Tensor& B, Tensor& C) {
    const int n = A.rows, m = A.cols, k = B.rows;
    for (int i = 0; i < n; ++i) {
        const double* a = A.rowptr(i);
        double* c = C.rowptr(i);
        for (int j = 0; j < k; ++j) {
            const double* b = B.rowptr(j);
            double s = 0.0;
            for (int l = 0; l < m; ++l) s += a[l] * b[l];
            c[j] += s;
        }
    }
}

inline Tensor matmul(const Tensor& A, const Tensor& B) {
    if (A.cols != B.rows) throw ContractViolation("matmul: inner dimensions differ");
    Tensor C(A.rows, B.cols);
    matmul_acc(A, B, C);
    return C;
}

}  // namespace dris
