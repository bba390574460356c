// eval_ctx.hpp — immediate (non-recording) execution context.
//
// Model composition code is templated over an execution context; this one
// evaluates eagerly and frees intermediates as references die, which keeps
// long-sequence inference and benchmarking within a small memory envelope.
// The tape context in tape.hpp implements the same surface and reuses the
// same kernels, so both paths produce bitwise-identical forward values.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mtfm/kernels.hpp"
#include "mtfm/macs.hpp"
#include "mtfm/tensor.hpp"

namespace mtfm {

// Captures per-layer attention weight matrices for heatmap export.
template <typename Real>
struct TraceSink {
    struct Entry {
        std::string tag;
        Tensor<Real> values;
    };
    std::vector<Entry> entries;
};

template <typename Real>
class EvalCtx {
  public:
    using Scalar = Real;
    using V = std::shared_ptr<const Tensor<Real>>;

    MacCounter* macs = nullptr;
    TraceSink<Real>* trace = nullptr;

    static V own(Tensor<Real> t) { return std::make_shared<const Tensor<Real>>(std::move(t)); }

    // Non-owning view of externally owned storage (parameters).
    static V borrow(const Tensor<Real>& t) {
        return V(&t, [](const Tensor<Real>*) {});
    }

    const Tensor<Real>& val(const V& v) const { return *v; }

    void begin_layer(const std::string& label) {
        if (macs) macs->begin_layer(label);
    }

    V matmul(const V& a, const V& b, MacKind kind = MacKind::projection) {
        count(kind, a->rows() * a->cols() * b->cols());
        return own(gemm_nn(*a, *b));
    }

    V matmul_nt(const V& a, const V& b, MacKind kind = MacKind::projection) {
        count(kind, a->rows() * a->cols() * b->rows());
        return own(gemm_nt(*a, *b));
    }

    V add(const V& a, const V& b) {
        Tensor<Real> out(*a);
        out.add_inplace(*b);
        return own(std::move(out));
    }

    V add_rowvec(const V& a, const V& bias) {
        if (bias->rows() != 1 || bias->cols() != a->cols())
            throw dimension_error("add_rowvec: bias shape mismatch");
        Tensor<Real> out(*a);
        for (size_t i = 0; i < out.rows(); ++i) {
            Real* r = out.row(i);
            const Real* brow = bias->row(0);
            for (size_t j = 0; j < out.cols(); ++j) r[j] += brow[j];
        }
        return own(std::move(out));
    }

    V mul(const V& a, const V& b) {
        a->require_same_shape(*b, "mul");
        Tensor<Real> out(a->rows(), a->cols());
        for (size_t i = 0; i < out.size(); ++i) out[i] = (*a)[i] * (*b)[i];
        return own(std::move(out));
    }

    V mul_mask(const V& a, const Tensor<Real>& mask) {
        a->require_same_shape(mask, "mul_mask");
        Tensor<Real> out(a->rows(), a->cols());
        for (size_t i = 0; i < out.size(); ++i) out[i] = (*a)[i] * mask[i];
        return own(std::move(out));
    }

    V mul_colvec(const V& a, const V& col) {
        if (col->cols() != 1 || col->rows() != a->rows())
            throw dimension_error("mul_colvec: column shape mismatch");
        Tensor<Real> out(a->rows(), a->cols());
        for (size_t i = 0; i < a->rows(); ++i) {
            const Real c = col->at(i, 0);
            const Real* src = a->row(i);
            Real* dst = out.row(i);
            for (size_t j = 0; j < a->cols(); ++j) dst[j] = src[j] * c;
        }
        return own(std::move(out));
    }

    V scale_rows(const V& a, const std::vector<Real>& factors) {
        if (factors.size() != a->rows()) throw dimension_error("scale_rows: factor count mismatch");
        Tensor<Real> out(a->rows(), a->cols());
        for (size_t i = 0; i < a->rows(); ++i) {
            const Real c = factors[i];
            const Real* src = a->row(i);
            Real* dst = out.row(i);
            for (size_t j = 0; j < a->cols(); ++j) dst[j] = src[j] * c;
        }
        return own(std::move(out));
    }

    V scale(const V& a, Real c) {
        Tensor<Real> out(*a);
        out.scale_inplace(c);
        return own(std::move(out));
    }

    V silu(const V& a) { return own(map_silu(*a)); }
    V sigmoid(const V& a) { return own(map_sigmoid(*a)); }
    V softmax_rows(const V& a) { return own(mtfm::softmax_rows(*a)); }
    V row_normalize(const V& a, Real eps) { return own(mtfm::row_normalize(*a, eps)); }

    V group_affine(const V& x, const std::vector<int>& groups, const std::vector<V>& gains,
                   const std::vector<V>& biases) {
        if (groups.size() != x->rows()) throw dimension_error("group_affine: group index count");
        Tensor<Real> out(x->rows(), x->cols());
        for (size_t i = 0; i < x->rows(); ++i) {
            const int g = groups[i];
            const Real* gain = gains[static_cast<size_t>(g)]->row(0);
            const Real* bias = biases[static_cast<size_t>(g)]->row(0);
            const Real* src = x->row(i);
            Real* dst = out.row(i);
            for (size_t j = 0; j < x->cols(); ++j) dst[j] = src[j] * gain[j] + bias[j];
        }
        return own(std::move(out));
    }

    V slice_rows(const V& a, size_t r0, size_t r1) {
        if (r1 < r0 || r1 > a->rows()) throw dimension_error("slice_rows: bad range");
        Tensor<Real> out(r1 - r0, a->cols());
        for (size_t i = r0; i < r1; ++i)
            for (size_t j = 0; j < a->cols(); ++j) out.at(i - r0, j) = a->at(i, j);
        return own(std::move(out));
    }

    V concat_rows(const std::vector<V>& parts) {
        size_t rows = 0, cols = 0;
        for (const auto& p : parts) {
            rows += p->rows();
            if (p->rows() > 0) cols = p->cols();
        }
        Tensor<Real> out(rows, cols);
        size_t r = 0;
        for (const auto& p : parts) {
            for (size_t i = 0; i < p->rows(); ++i, ++r)
                for (size_t j = 0; j < p->cols(); ++j) out.at(r, j) = p->at(i, j);
        }
        return own(std::move(out));
    }

    V slice_cols(const V& a, size_t c0, size_t c1) {
        if (c1 < c0 || c1 > a->cols()) throw dimension_error("slice_cols: bad range");
        Tensor<Real> out(a->rows(), c1 - c0);
        for (size_t i = 0; i < a->rows(); ++i)
            for (size_t j = c0; j < c1; ++j) out.at(i, j - c0) = a->at(i, j);
        return own(std::move(out));
    }

    V concat_cols(const std::vector<V>& parts) {
        size_t cols = 0;
        const size_t rows = parts.empty() ? 0 : parts.front()->rows();
        for (const auto& p : parts) cols += p->cols();
        Tensor<Real> out(rows, cols);
        size_t c = 0;
        for (const auto& p : parts) {
            for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < p->cols(); ++j) out.at(i, c + j) = p->at(i, j);
            c += p->cols();
        }
        return own(std::move(out));
    }

    V gather_rows(const V& a, const std::vector<int>& ids) {
        Tensor<Real> out(ids.size(), a->cols());
        for (size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= a->rows())
                throw lookup_error("gather_rows: id " + std::to_string(ids[i]) + " out of range");
            for (size_t j = 0; j < a->cols(); ++j) out.at(i, j) = a->at(static_cast<size_t>(ids[i]), j);
        }
        return own(std::move(out));
    }

    V add_n(const std::vector<V>& parts) {
        Tensor<Real> out(*parts.front());
        for (size_t k = 1; k < parts.size(); ++k) out.add_inplace(*parts[k]);
        return own(std::move(out));
    }

    // Sum of numerically stable BCE terms over an (n,1) logit column.
    V bce_sum(const V& logits, const std::vector<Real>& labels) {
        if (logits->cols() != 1 || logits->rows() != labels.size())
            throw dimension_error("bce_sum: logits/labels mismatch");
        Real sum = Real(0);
        for (size_t i = 0; i < labels.size(); ++i) {
            const Real z = logits->at(i, 0);
            const Real y = labels[i];
            const Real zpos = z > Real(0) ? z : Real(0);
            const Real az = z > Real(0) ? z : -z;
            sum += zpos - z * y + std::log1p(std::exp(-az));
        }
        Tensor<Real> out(1, 1);
        out.at(0, 0) = sum;
        return own(std::move(out));
    }

    void trace_attention(const std::string& tag, const V& weights) {
        if (trace) trace->entries.push_back({tag, *weights});
    }

  private:
    void count(MacKind kind, size_t n_macs) {
        if (macs) macs->add(kind, static_cast<unsigned long long>(n_macs));
    }
};

}  // namespace mtfm
