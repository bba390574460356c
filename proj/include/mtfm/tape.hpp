// tape.hpp — reverse-mode automatic differentiation over the kernel set.
//
// A Tape implements the same execution-context surface as EvalCtx (tape.hpp
// records, eval_ctx.hpp evaluates immediately); forward values go through the
// identical kernels in the identical order, so the two paths agree bitwise.
// Parameter leaves reference external storage and accumulate their gradients
// into caller-provided sinks, which is what makes per-worker gradient buffers
// and deterministic reduction possible.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mtfm/kernels.hpp"
#include "mtfm/macs.hpp"
#include "mtfm/tensor.hpp"

namespace mtfm {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

template <typename Real>
class Tape {
  public:
    using Scalar = Real;
    using V = Var;

    MacCounter* macs = nullptr;
    struct TraceSinkRef {
        std::vector<std::pair<std::string, Tensor<Real>>>* entries = nullptr;
    };

    // ---- leaves -----------------------------------------------------------

    // Parameter leaf: value stays external, gradient flushes into *grad_sink.
    Var leaf(const Tensor<Real>* value, Tensor<Real>* grad_sink) {
        Node n;
        n.ext_value = value;
        n.ext_grad = grad_sink;
        n.needs_grad = grad_sink != nullptr;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size() - 1)};
    }

    Var constant(Tensor<Real> value) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = false;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size() - 1)};
    }

    const Tensor<Real>& val(Var v) const {
        const Node& n = nodes_[static_cast<size_t>(v.id)];
        return n.ext_value ? *n.ext_value : n.value;
    }

    void begin_layer(const std::string& label) {
        if (macs) macs->begin_layer(label);
    }

    // ---- ops --------------------------------------------------------------

    Var matmul(Var a, Var b, MacKind kind = MacKind::projection) {
        const Tensor<Real>&A = val(a), &B = val(b);
        count(kind, A.rows() * A.cols() * B.cols());
        Var out = interior(gemm_nn(A, B), {a, b});
        set_back(out, [this, a, b, out](const Tensor<Real>& g) {
            if (needs(a)) gemm_nt_acc(g, val(b), grad_of(a));
            if (needs(b)) gemm_tn_acc(val(a), g, grad_of(b));
        });
        return out;
    }

    Var matmul_nt(Var a, Var b, MacKind kind = MacKind::projection) {
        const Tensor<Real>&A = val(a), &B = val(b);
        count(kind, A.rows() * A.cols() * B.rows());
        Var out = interior(gemm_nt(A, B), {a, b});
        set_back(out, [this, a, b](const Tensor<Real>& g) {
            if (needs(a)) gemm_nn_acc(g, val(b), grad_of(a));
            if (needs(b)) gemm_tn_acc(g, val(a), grad_of(b));
        });
        return out;
    }

    Var add(Var a, Var b) {
        Tensor<Real> out(val(a));
        out.add_inplace(val(b));
        Var o = interior(std::move(out), {a, b});
        set_back(o, [this, a, b](const Tensor<Real>& g) {
            if (needs(a)) grad_of(a).add_inplace(g);
            if (needs(b)) grad_of(b).add_inplace(g);
        });
        return o;
    }

    Var add_rowvec(Var a, Var bias) {
        const Tensor<Real>&A = val(a), &B = val(bias);
        if (B.rows() != 1 || B.cols() != A.cols()) throw dimension_error("add_rowvec: bias shape");
        Tensor<Real> out(A);
        for (size_t i = 0; i < out.rows(); ++i) {
            Real* r = out.row(i);
            const Real* brow = B.row(0);
            for (size_t j = 0; j < out.cols(); ++j) r[j] += brow[j];
        }
        Var o = interior(std::move(out), {a, bias});
        set_back(o, [this, a, bias](const Tensor<Real>& g) {
            if (needs(a)) grad_of(a).add_inplace(g);
            if (needs(bias)) {
                Tensor<Real>& gb = grad_of(bias);
                for (size_t i = 0; i < g.rows(); ++i)
                    for (size_t j = 0; j < g.cols(); ++j) gb.at(0, j) += g.at(i, j);
            }
        });
        return o;
    }

    Var mul(Var a, Var b) {
        const Tensor<Real>&A = val(a), &B = val(b);
        A.require_same_shape(B, "mul");
        Tensor<Real> out(A.rows(), A.cols());
        for (size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
        Var o = interior(std::move(out), {a, b});
        set_back(o, [this, a, b](const Tensor<Real>& g) {
            if (needs(a)) {
                Tensor<Real>& ga = grad_of(a);
                const Tensor<Real>& B2 = val(b);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B2[i];
            }
            if (needs(b)) {
                Tensor<Real>& gb = grad_of(b);
                const Tensor<Real>& A2 = val(a);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A2[i];
            }
        });
        return o;
    }

    Var mul_mask(Var a, const Tensor<Real>& mask) {
        const Tensor<Real>& A = val(a);
        A.require_same_shape(mask, "mul_mask");
        Tensor<Real> out(A.rows(), A.cols());
        for (size_t i = 0; i < out.size(); ++i) out[i] = A[i] * mask[i];
        Var o = interior(std::move(out), {a});
        // The mask outlives the tape in every call path; captured by reference.
        set_back(o, [this, a, &mask](const Tensor<Real>& g) {
            if (needs(a)) {
                Tensor<Real>& ga = grad_of(a);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
            }
        });
        return o;
    }

    Var mul_colvec(Var a, Var col) {
        const Tensor<Real>&A = val(a), &C = val(col);
        if (C.cols() != 1 || C.rows() != A.rows()) throw dimension_error("mul_colvec: column shape");
        Tensor<Real> out(A.rows(), A.cols());
        for (size_t i = 0; i < A.rows(); ++i) {
            const Real c = C.at(i, 0);
            const Real* src = A.row(i);
            Real* dst = out.row(i);
            for (size_t j = 0; j < A.cols(); ++j) dst[j] = src[j] * c;
        }
        Var o = interior(std::move(out), {a, col});
        set_back(o, [this, a, col](const Tensor<Real>& g) {
            const Tensor<Real>&A2 = val(a), &C2 = val(col);
            if (needs(a)) {
                Tensor<Real>& ga = grad_of(a);
                for (size_t i = 0; i < g.rows(); ++i) {
                    const Real c = C2.at(i, 0);
                    for (size_t j = 0; j < g.cols(); ++j) ga.at(i, j) += g.at(i, j) * c;
                }
            }
            if (needs(col)) {
                Tensor<Real>& gc = grad_of(col);
                for (size_t i = 0; i < g.rows(); ++i) {
                    Real s = Real(0);
                    for (size_t j = 0; j < g.cols(); ++j) s += g.at(i, j) * A2.at(i, j);
                    gc.at(i, 0) += s;
                }
            }
        });
        return o;
    }

    Var scale_rows(Var a, const std::vector<Real>& factors) {
        const Tensor<Real>& A = val(a);
        if (factors.size() != A.rows()) throw dimension_error("scale_rows: factor count");
        Tensor<Real> out(A.rows(), A.cols());
        for (size_t i = 0; i < A.rows(); ++i) {
            const Real c = factors[i];
            const Real* src = A.row(i);
            Real* dst = out.row(i);
            for (size_t j = 0; j < A.cols(); ++j) dst[j] = src[j] * c;
        }
        Var o = interior(std::move(out), {a});
        set_back(o, [this, a, factors](const Tensor<Real>& g) {
            if (!needs(a)) return;
            Tensor<Real>& ga = grad_of(a);
            for (size_t i = 0; i < g.rows(); ++i) {
                const Real c = factors[i];
                for (size_t j = 0; j < g.cols(); ++j) ga.at(i, j) += g.at(i, j) * c;
            }
        });
        return o;
    }

    Var scale(Var a, Real c) {
        Tensor<Real> out(val(a));
        out.scale_inplace(c);
        Var o = interior(std::move(out), {a});
        set_back(o, [this, a, c](const Tensor<Real>& g) {
            if (!needs(a)) return;
            Tensor<Real>& ga = grad_of(a);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        });
        return o;
    }

    Var silu(Var a) {
        Var o = interior(map_silu(val(a)), {a});
        set_back(o, [this, a](const Tensor<Real>& g) {
            if (!needs(a)) return;
            const Tensor<Real>& X = val(a);
            Tensor<Real>& ga = grad_of(a);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * silu_grad_scalar(X[i]);
        });
        return o;
    }

    Var sigmoid(Var a) {
        Var o = interior(map_sigmoid(val(a)), {a});
        set_back(o, [this, a, o](const Tensor<Real>& g) {
            if (!needs(a)) return;
            const Tensor<Real>& Y = val(o);
            Tensor<Real>& ga = grad_of(a);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * Y[i] * (Real(1) - Y[i]);
        });
        return o;
    }

    Var softmax_rows(Var a) {
        Var o = interior(mtfm::softmax_rows(val(a)), {a});
        set_back(o, [this, a, o](const Tensor<Real>& g) {
            if (!needs(a)) return;
            const Tensor<Real>& P = val(o);
            Tensor<Real>& ga = grad_of(a);
            for (size_t i = 0; i < g.rows(); ++i) {
                Real dot = Real(0);
                for (size_t j = 0; j < g.cols(); ++j) dot += g.at(i, j) * P.at(i, j);
                for (size_t j = 0; j < g.cols(); ++j)
                    ga.at(i, j) += P.at(i, j) * (g.at(i, j) - dot);
            }
        });
        return o;
    }

    Var row_normalize(Var a, Real eps) {
        const Tensor<Real>& X = val(a);
        Var o = interior(mtfm::row_normalize(X, eps), {a});
        set_back(o, [this, a, o, eps](const Tensor<Real>& g) {
            if (!needs(a)) return;
            const Tensor<Real>& X2 = val(a);
            const Tensor<Real>& Y = val(o);  // normalized output
            Tensor<Real>& ga = grad_of(a);
            const size_t d = X2.cols();
            for (size_t i = 0; i < X2.rows(); ++i) {
                // Recompute inverse stddev of the row.
                Real mean = Real(0);
                for (size_t j = 0; j < d; ++j) mean += X2.at(i, j);
                mean /= Real(d);
                Real var = Real(0);
                for (size_t j = 0; j < d; ++j) {
                    Real c = X2.at(i, j) - mean;
                    var += c * c;
                }
                var /= Real(d);
                const Real inv = Real(1) / std::sqrt(var + eps);

                Real g_mean = Real(0), gy_mean = Real(0);
                for (size_t j = 0; j < d; ++j) {
                    g_mean += g.at(i, j);
                    gy_mean += g.at(i, j) * Y.at(i, j);
                }
                g_mean /= Real(d);
                gy_mean /= Real(d);
                for (size_t j = 0; j < d; ++j)
                    ga.at(i, j) += inv * (g.at(i, j) - g_mean - Y.at(i, j) * gy_mean);
            }
        });
        return o;
    }

    Var group_affine(Var x, const std::vector<int>& groups, const std::vector<Var>& gains,
                     const std::vector<Var>& biases) {
        const Tensor<Real>& X = val(x);
        if (groups.size() != X.rows()) throw dimension_error("group_affine: group index count");
        Tensor<Real> out(X.rows(), X.cols());
        for (size_t i = 0; i < X.rows(); ++i) {
            const int g = groups[i];
            const Real* gain = val(gains[static_cast<size_t>(g)]).row(0);
            const Real* bias = val(biases[static_cast<size_t>(g)]).row(0);
            const Real* src = X.row(i);
            Real* dst = out.row(i);
            for (size_t j = 0; j < X.cols(); ++j) dst[j] = src[j] * gain[j] + bias[j];
        }
        // Unused group slots are invalid handles; only live ones are inputs.
        std::vector<Var> inputs = {x};
        for (Var v : gains)
            if (v.valid()) inputs.push_back(v);
        for (Var v : biases)
            if (v.valid()) inputs.push_back(v);
        Var o = interior(std::move(out), inputs);
        set_back(o, [this, x, groups, gains, biases](const Tensor<Real>& g) {
            const Tensor<Real>& X2 = val(x);
            for (size_t i = 0; i < X2.rows(); ++i) {
                const size_t gi = static_cast<size_t>(groups[i]);
                const Tensor<Real>& gain = val(gains[gi]);
                if (needs(x)) {
                    Tensor<Real>& gx = grad_of(x);
                    for (size_t j = 0; j < X2.cols(); ++j)
                        gx.at(i, j) += g.at(i, j) * gain.at(0, j);
                }
                if (needs(gains[gi])) {
                    Tensor<Real>& gg = grad_of(gains[gi]);
                    for (size_t j = 0; j < X2.cols(); ++j)
                        gg.at(0, j) += g.at(i, j) * X2.at(i, j);
                }
                if (needs(biases[gi])) {
                    Tensor<Real>& gb = grad_of(biases[gi]);
                    for (size_t j = 0; j < X2.cols(); ++j) gb.at(0, j) += g.at(i, j);
                }
            }
        });
        return o;
    }

    Var slice_rows(Var a, size_t r0, size_t r1) {
        const Tensor<Real>& A = val(a);
        if (r1 < r0 || r1 > A.rows()) throw dimension_error("slice_rows: bad range");
        Tensor<Real> out(r1 - r0, A.cols());
        for (size_t i = r0; i < r1; ++i)
            for (size_t j = 0; j < A.cols(); ++j) out.at(i - r0, j) = A.at(i, j);
        Var o = interior(std::move(out), {a});
        set_back(o, [this, a, r0](const Tensor<Real>& g) {
            if (!needs(a)) return;
            Tensor<Real>& ga = grad_of(a);
            for (size_t i = 0; i < g.rows(); ++i)
                for (size_t j = 0; j < g.cols(); ++j) ga.at(r0 + i, j) += g.at(i, j);
        });
        return o;
    }

    Var concat_rows(const std::vector<Var>& parts) {
        size_t rows = 0, cols = 0;
        for (Var p : parts) {
            rows += val(p).rows();
            if (val(p).rows() > 0) cols = val(p).cols();
        }
        Tensor<Real> out(rows, cols);
        size_t r = 0;
        for (Var p : parts) {
            const Tensor<Real>& P = val(p);
            for (size_t i = 0; i < P.rows(); ++i, ++r)
                for (size_t j = 0; j < P.cols(); ++j) out.at(r, j) = P.at(i, j);
        }
        Var o = interior(std::move(out), parts);
        set_back(o, [this, parts](const Tensor<Real>& g) {
            size_t r = 0;
            for (Var p : parts) {
                const size_t pr = val(p).rows();
                if (needs(p)) {
                    Tensor<Real>& gp = grad_of(p);
                    for (size_t i = 0; i < pr; ++i)
                        for (size_t j = 0; j < g.cols(); ++j) gp.at(i, j) += g.at(r + i, j);
                }
                r += pr;
            }
        });
        return o;
    }

    Var slice_cols(Var a, size_t c0, size_t c1) {
        const Tensor<Real>& A = val(a);
        if (c1 < c0 || c1 > A.cols()) throw dimension_error("slice_cols: bad range");
        Tensor<Real> out(A.rows(), c1 - c0);
        for (size_t i = 0; i < A.rows(); ++i)
            for (size_t j = c0; j < c1; ++j) out.at(i, j - c0) = A.at(i, j);
        Var o = interior(std::move(out), {a});
        set_back(o, [this, a, c0](const Tensor<Real>& g) {
            if (!needs(a)) return;
            Tensor<Real>& ga = grad_of(a);
            for (size_t i = 0; i < g.rows(); ++i)
                for (size_t j = 0; j < g.cols(); ++j) ga.at(i, c0 + j) += g.at(i, j);
        });
        return o;
    }

    Var concat_cols(const std::vector<Var>& parts) {
        size_t cols = 0;
        const size_t rows = parts.empty() ? 0 : val(parts.front()).rows();
        for (Var p : parts) cols += val(p).cols();
        Tensor<Real> out(rows, cols);
        size_t c = 0;
        for (Var p : parts) {
            const Tensor<Real>& P = val(p);
            for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < P.cols(); ++j) out.at(i, c + j) = P.at(i, j);
            c += P.cols();
        }
        Var o = interior(std::move(out), parts);
        set_back(o, [this, parts](const Tensor<Real>& g) {
            size_t c = 0;
            for (Var p : parts) {
                const size_t pc = val(p).cols();
                if (needs(p)) {
                    Tensor<Real>& gp = grad_of(p);
                    for (size_t i = 0; i < g.rows(); ++i)
                        for (size_t j = 0; j < pc; ++j) gp.at(i, j) += g.at(i, c + j);
                }
                c += pc;
            }
        });
        return o;
    }

    Var gather_rows(Var a, const std::vector<int>& ids) {
        const Tensor<Real>& A = val(a);
        Tensor<Real> out(ids.size(), A.cols());
        for (size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= A.rows())
                throw lookup_error("gather_rows: id " + std::to_string(ids[i]) + " out of range");
            for (size_t j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(static_cast<size_t>(ids[i]), j);
        }
        Var o = interior(std::move(out), {a});
        set_back(o, [this, a, ids](const Tensor<Real>& g) {
            if (!needs(a)) return;
            Tensor<Real>& ga = grad_of(a);
            for (size_t i = 0; i < ids.size(); ++i)
                for (size_t j = 0; j < g.cols(); ++j)
                    ga.at(static_cast<size_t>(ids[i]), j) += g.at(i, j);
        });
        return o;
    }

    Var add_n(const std::vector<Var>& parts) {
        Tensor<Real> out(val(parts.front()));
        for (size_t k = 1; k < parts.size(); ++k) out.add_inplace(val(parts[k]));
        Var o = interior(std::move(out), parts);
        set_back(o, [this, parts](const Tensor<Real>& g) {
            for (Var p : parts)
                if (needs(p)) grad_of(p).add_inplace(g);
        });
        return o;
    }

    Var bce_sum(Var logits, const std::vector<Real>& labels) {
        const Tensor<Real>& Z = val(logits);
        if (Z.cols() != 1 || Z.rows() != labels.size())
            throw dimension_error("bce_sum: logits/labels mismatch");
        Real sum = Real(0);
        for (size_t i = 0; i < labels.size(); ++i) {
            const Real z = Z.at(i, 0);
            const Real y = labels[i];
            const Real zpos = z > Real(0) ? z : Real(0);
            const Real az = z > Real(0) ? z : -z;
            sum += zpos - z * y + std::log1p(std::exp(-az));
        }
        Tensor<Real> out(1, 1);
        out.at(0, 0) = sum;
        Var o = interior(std::move(out), {logits});
        set_back(o, [this, logits, labels](const Tensor<Real>& g) {
            if (!needs(logits)) return;
            const Tensor<Real>& Z2 = val(logits);
            Tensor<Real>& gz = grad_of(logits);
            const Real gs = g.at(0, 0);
            for (size_t i = 0; i < labels.size(); ++i)
                gz.at(i, 0) += gs * (sigmoid_scalar(Z2.at(i, 0)) - labels[i]);
        });
        return o;
    }

    void trace_attention(const std::string&, Var) {}  // traces come from the eval path

    // ---- backward ----------------------------------------------------------

    // Seeds d(loss)=1 and sweeps the tape in reverse; leaf gradients are then
    // flushed (added) into their external sinks.
    void backward(Var loss) {
        const Tensor<Real>& L = val(loss);
        if (L.size() != 1) throw contract_error("backward: loss must be scalar");
        grad_of(loss).at(0, 0) += Real(1);
        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (!n.needs_grad || n.grad.empty() || !n.back) continue;
            n.back(n.grad);
        }
        for (auto& n : nodes_) {
            if (n.ext_grad && !n.grad.empty()) n.ext_grad->add_inplace(n.grad);
        }
    }

    size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor<Real> value;
        const Tensor<Real>* ext_value = nullptr;
        Tensor<Real>* ext_grad = nullptr;
        Tensor<Real> grad;
        bool needs_grad = false;
        std::function<void(const Tensor<Real>&)> back;
    };

    bool needs(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }

    Tensor<Real>& grad_of(Var v) {
        Node& n = nodes_[static_cast<size_t>(v.id)];
        const Tensor<Real>& value = n.ext_value ? *n.ext_value : n.value;
        if (n.grad.empty() && value.size() > 0) n.grad = Tensor<Real>(value.rows(), value.cols());
        return n.grad;
    }

    Var interior(Tensor<Real> value, const std::vector<Var>& inputs) {
#ifndef NDEBUG
        if (!value.all_finite()) throw contract_error("tape: non-finite intermediate value");
#endif
        Node n;
        n.value = std::move(value);
        for (Var in : inputs)
            if (nodes_[static_cast<size_t>(in.id)].needs_grad) n.needs_grad = true;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size() - 1)};
    }

    void set_back(Var v, std::function<void(const Tensor<Real>&)> fn) {
        Node& n = nodes_[static_cast<size_t>(v.id)];
        if (n.needs_grad) n.back = std::move(fn);
    }

    void count(MacKind kind, size_t n_macs) {
        if (macs) macs->add(kind, static_cast<unsigned long long>(n_macs));
    }

    std::vector<Node> nodes_;
};

}  // namespace mtfm
