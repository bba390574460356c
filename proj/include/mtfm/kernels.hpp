// kernels.hpp — the small set of dense kernels everything else is built from.
//
// All higher-level paths (training tape, inference, oracles behind the verify
// CLI excepted) funnel through these routines, so evaluation order — and with
// it bitwise reproducibility — is fixed in exactly one place.
#pragma once

#include <cmath>
#include <cstddef>

#include "mtfm/tensor.hpp"

namespace mtfm {

// C += A(m,k) * B(k,n). ikj order: streams B rows, vectorizes over n.
template <typename Real>
void gemm_nn_acc(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
    const size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k || c.rows() != m || c.cols() != n)
        throw dimension_error("gemm_nn: incompatible shapes");
    for (size_t i = 0; i < m; ++i) {
        const Real* arow = a.row(i);
        Real* crow = c.row(i);
        for (size_t p = 0; p < k; ++p) {
            const Real av = arow[p];
            if (av == Real(0)) continue;
            const Real* brow = b.row(p);
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename Real>
Tensor<Real> gemm_nn(const Tensor<Real>& a, const Tensor<Real>& b) {
    Tensor<Real> c(a.rows(), b.cols());
    gemm_nn_acc(a, b, c);
    return c;
}

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& a) {
    Tensor<Real> t(a.cols(), a.rows());
    for (size_t i = 0; i < a.rows(); ++i)
        for (size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

// C += A(m,k) * B(n,k)^T. Materializes B^T and reuses the streaming nn loop;
// the accumulation order per output element is the same as a row dot product.
template <typename Real>
void gemm_nt_acc(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
    const size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k || c.rows() != m || c.cols() != n)
        throw dimension_error("gemm_nt: incompatible shapes");
    Tensor<Real> bt = transpose(b);
    gemm_nn_acc(a, bt, c);
}

template <typename Real>
Tensor<Real> gemm_nt(const Tensor<Real>& a, const Tensor<Real>& b) {
    Tensor<Real> c(a.rows(), b.rows());
    gemm_nt_acc(a, b, c);
    return c;
}

// C += A(k,m)^T * B(k,n) — used by matmul backward for weight gradients.
template <typename Real>
void gemm_tn_acc(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
    const size_t k = a.rows(), m = a.cols(), n = b.cols();
    if (b.rows() != k || c.rows() != m || c.cols() != n)
        throw dimension_error("gemm_tn: incompatible shapes");
    for (size_t p = 0; p < k; ++p) {
        const Real* arow = a.row(p);
        const Real* brow = b.row(p);
        for (size_t i = 0; i < m; ++i) {
            const Real av = arow[i];
            if (av == Real(0)) continue;
            Real* crow = c.row(i);
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename Real>
Tensor<Real> gemm_tn(const Tensor<Real>& a, const Tensor<Real>& b) {
    Tensor<Real> c(a.cols(), b.cols());
    gemm_tn_acc(a, b, c);
    return c;
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities. silu(0) == 0 exactly, which is what makes
// multiplicative 0/1 masking inside the nonlinearity sound.
// ---------------------------------------------------------------------------

template <typename Real>
Real sigmoid_scalar(Real x) {
    if (x >= Real(0)) {
        Real e = std::exp(-x);
        return Real(1) / (Real(1) + e);
    }
    Real e = std::exp(x);
    return e / (Real(1) + e);
}

template <typename Real>
Real silu_scalar(Real x) {
    return x * sigmoid_scalar(x);
}

// d silu / dx = s(x) * (1 + x * (1 - s(x)))
template <typename Real>
Real silu_grad_scalar(Real x) {
    Real s = sigmoid_scalar(x);
    return s * (Real(1) + x * (Real(1) - s));
}

template <typename Real>
Tensor<Real> map_silu(const Tensor<Real>& a) {
    Tensor<Real> out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out[i] = silu_scalar(a[i]);
    return out;
}

template <typename Real>
Tensor<Real> map_sigmoid(const Tensor<Real>& a) {
    Tensor<Real> out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out[i] = sigmoid_scalar(a[i]);
    return out;
}

// Per-row zero-mean / unit-variance normalization (the core of layer norm).
template <typename Real>
Tensor<Real> row_normalize(const Tensor<Real>& a, Real eps) {
    Tensor<Real> out(a.rows(), a.cols());
    const size_t d = a.cols();
    for (size_t i = 0; i < a.rows(); ++i) {
        const Real* x = a.row(i);
        Real mean = Real(0);
        for (size_t j = 0; j < d; ++j) mean += x[j];
        mean /= Real(d);
        Real var = Real(0);
        for (size_t j = 0; j < d; ++j) {
            Real c = x[j] - mean;
            var += c * c;
        }
        var /= Real(d);
        Real inv = Real(1) / std::sqrt(var + eps);
        Real* y = out.row(i);
        for (size_t j = 0; j < d; ++j) y[j] = (x[j] - mean) * inv;
    }
    return out;
}

// Numerically stable softmax over each row.
template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& a) {
    Tensor<Real> out(a.rows(), a.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        const Real* x = a.row(i);
        Real* y = out.row(i);
        Real mx = x[0];
        for (size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, x[j]);
        Real sum = Real(0);
        for (size_t j = 0; j < a.cols(); ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        Real inv = Real(1) / sum;
        for (size_t j = 0; j < a.cols(); ++j) y[j] *= inv;
    }
    return out;
}

}  // namespace mtfm
