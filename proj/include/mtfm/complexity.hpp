// complexity.hpp — analytic MAC model for the stack and its verification
// against instrumented forwards.
//
// Per layer, attention MACs are score (rows_q * N * d_h per head) plus
// aggregation (same shape); projections are the f1/f_uq/f_kv/f2 matmuls.
// Full layers pay rows_q = N, target layers rows_q = L_T. The hybrid-vs-full
// attention ratio at equal depth is therefore
//     (K * N * L_T + N^2) / ((K + 1) * N^2)
// for a (K:1)xB stack against (0:1)x(B*(K+1)).
#pragma once

#include <chrono>
#include <cmath>
#include <deque>
#include <cstdint>
#include <string>
#include <vector>

#include "mtfm/eval_ctx.hpp"
#include "mtfm/hta.hpp"
#include "mtfm/macs.hpp"
#include "mtfm/model_config.hpp"
#include "mtfm/rng.hpp"

namespace mtfm {

struct MacReport {
    std::vector<LayerMacs> layers;  // analytic per-layer counts
    unsigned long long projection_total = 0;
    unsigned long long attention_total = 0;
    // Filled when an instrumented forward ran alongside.
    unsigned long long measured_projection = 0;
    unsigned long long measured_attention = 0;
    double measured_vs_predicted = 0.0;

    bool exact_match() const {
        return measured_projection == projection_total && measured_attention == attention_total;
    }
};

namespace detail {

inline LayerMacs analytic_layer(const HTAConfig& cfg, size_t n, size_t l_t, bool target,
                                const std::string& label) {
    const unsigned long long d = static_cast<unsigned long long>(cfg.d_model);
    const unsigned long long dh = static_cast<unsigned long long>(cfg.head_dim());
    const unsigned long long H = static_cast<unsigned long long>(cfg.heads);
    const unsigned long long hd = H * dh;
    const unsigned long long gd = static_cast<unsigned long long>(cfg.kv_heads) * dh;
    const unsigned long long N = n, LT = l_t;

    LayerMacs m;
    m.label = label;
    if (target) {
        m.projection = LT * d * (2 * hd)   // f_uq over T rows
                       + N * d * (2 * gd)  // f_kv over all rows
                       + LT * hd * d;      // f2
        m.attention = H * (LT * N * dh)    // scores
                      + H * (LT * N * dh); // aggregation
    } else {
        m.projection = N * d * (2 * hd + 2 * gd)  // f1
                       + N * hd * d;              // f2
        m.attention = H * (N * N * dh) + H * (N * N * dh);
    }
    return m;
}

}  // namespace detail

// Analytic per-layer MAC model for a (K:P)xB stack at sizes (n, l_t).
inline MacReport count_macs(const HTAConfig& cfg, size_t n, size_t l_t) {
    cfg.validate();
    if (n < 1 || l_t < 1 || l_t > n) throw config_error("count_macs: need 1 <= l_t <= n");
    MacReport r;
    for (int b = 0; b < cfg.blocks; ++b) {
        for (int k = 0; k < cfg.target_layers; ++k)
            r.layers.push_back(detail::analytic_layer(cfg, n, l_t, true,
                                                      "b" + std::to_string(b) + "/t" + std::to_string(k)));
        for (int p = 0; p < cfg.full_layers; ++p)
            r.layers.push_back(detail::analytic_layer(cfg, n, l_t, false,
                                                      "b" + std::to_string(b) + "/f" + std::to_string(p)));
    }
    for (const auto& l : r.layers) {
        r.projection_total += l.projection;
        r.attention_total += l.attention;
    }
    return r;
}

// Random-weight stack forward at the given sizes with instrumentation on.
// Context tokens are H tokens, targets are T tokens; the mask content does
// not change MAC counts.
template <typename Real>
MacCounter instrumented_stack_forward(const HTAConfig& cfg, size_t n, size_t l_t, uint64_t seed,
                                      double* tokens_per_sec = nullptr, int reps = 1) {
    std::vector<TokenMeta> metas;
    metas.reserve(n);
    for (size_t i = 0; i + l_t < n; ++i) metas.push_back({TokenKind::H, 0, static_cast<int64_t>(i), -1});
    for (size_t i = 0; i < l_t; ++i)
        metas.push_back({TokenKind::T, 0, static_cast<int64_t>(n + i), static_cast<int>(i)});

    Rng rng(seed);
    auto rand_tensor = [&](size_t r, size_t c, double bound) {
        Tensor<Real> t(r, c);
        for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(rng.uniform(-bound, bound));
        return t;
    };

    using Ctx = EvalCtx<Real>;
    using V = typename Ctx::V;
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t hd = static_cast<size_t>(cfg.heads * cfg.head_dim());
    const size_t gd = static_cast<size_t>(cfg.kv_heads * cfg.head_dim());

    // One group each for H and T suffices. Deque: stable addresses for the
    // borrowed refs as more weights are appended.
    std::deque<Tensor<Real>> owned;
    auto keep = [&](Tensor<Real> t) -> const Tensor<Real>& {
        owned.push_back(std::move(t));
        return owned.back();
    };

    StackRefs<V> refs;
    for (int b = 0; b < cfg.blocks; ++b) {
        for (int l = 0; l < cfg.layers_per_block(); ++l) {
            const bool is_target = l < cfg.target_layers;
            StackLayerRefs<V> lr;
            lr.is_target = is_target;
            const double wb = 1.0 / std::sqrt(static_cast<double>(d));
            if (is_target) {
                lr.fuq_w = Ctx::borrow(keep(rand_tensor(d, 2 * hd, wb)));
                lr.fuq_b = Ctx::borrow(keep(Tensor<Real>(1, 2 * hd)));
                lr.fkv_w = Ctx::borrow(keep(rand_tensor(d, 2 * gd, wb)));
                lr.fkv_b = Ctx::borrow(keep(Tensor<Real>(1, 2 * gd)));
            } else {
                lr.f1_w = Ctx::borrow(keep(rand_tensor(d, 2 * hd + 2 * gd, wb)));
                lr.f1_b = Ctx::borrow(keep(Tensor<Real>(1, 2 * hd + 2 * gd)));
            }
            lr.f2_w = Ctx::borrow(keep(rand_tensor(hd, d, wb)));
            lr.f2_b = Ctx::borrow(keep(Tensor<Real>(1, d)));
            for (int which = 0; which < 2; ++which) {
                auto& gln = which == 0 ? lr.gln_in : lr.gln_gate;
                const size_t width = which == 0 ? d : hd;
                gln.gains.resize(2);
                gln.biases.resize(2);
                for (int g = 0; g < 2; ++g) {
                    if (which == 1 && is_target && g == 0) continue;  // gate GLN: T rows only
                    gln.gains[static_cast<size_t>(g)] = Ctx::borrow(keep(Tensor<Real>::full(1, width, Real(1))));
                    gln.biases[static_cast<size_t>(g)] = Ctx::borrow(keep(Tensor<Real>(1, width)));
                }
            }
            refs.layers.push_back(std::move(lr));
        }
    }

    std::vector<int> token_groups(n, 0);
    for (size_t i = n - l_t; i < n; ++i) token_groups[i] = 1;
    MaskMatrix mask = build_mask(metas);
    Boundaries bounds = boundaries_of(metas);
    StackGeom<Real> geom = make_stack_geom<Real>(cfg, mask, bounds, token_groups);

    Tensor<Real> x0 = rand_tensor(n, d, 0.5);

    Ctx ctx;
    MacCounter counter;
    ctx.macs = &counter;
    auto t0 = std::chrono::steady_clock::now();
    for (int rep = 0; rep < reps; ++rep) {
        if (rep == 1) ctx.macs = nullptr;  // count once, time all reps
        V out = forward_stack(ctx, Ctx::borrow(x0), refs, geom);
        (void)out;
    }
    auto t1 = std::chrono::steady_clock::now();
    if (tokens_per_sec) {
        double secs = std::chrono::duration<double>(t1 - t0).count();
        *tokens_per_sec = secs > 0 ? static_cast<double>(n) * reps / secs : 0.0;
    }
    return counter;
}

struct ComplexityRow {
    int k = 0;
    size_t n = 0, l_t = 0;
    unsigned long long hybrid_attn = 0, full_attn = 0;
    bool hybrid_exact = false, full_exact = false;
    double measured_ratio = 0.0;
    double analytic_ratio = 0.0;
    double rel_gap = 0.0;  // |measured/analytic - 1|
};

// Compares the instrumented (K:1)xB hybrid against an equal-depth full
// attention stack ((0:1)x(B*(K+1))) across a size sweep.
template <typename Real>
std::vector<ComplexityRow> verify_complexity(HTAConfig base, int blocks,
                                             const std::vector<int>& ks,
                                             const std::vector<std::pair<size_t, size_t>>& sizes,
                                             uint64_t seed = 99) {
    std::vector<ComplexityRow> rows;
    for (int k : ks) {
        for (auto [n, lt] : sizes) {
            HTAConfig hybrid = base;
            hybrid.blocks = blocks;
            hybrid.target_layers = k;
            hybrid.full_layers = 1;
            HTAConfig full = base;
            full.blocks = blocks * (k + 1);
            full.target_layers = 0;
            full.full_layers = 1;

            MacReport hybrid_pred = count_macs(hybrid, n, lt);
            MacReport full_pred = count_macs(full, n, lt);
            MacCounter hybrid_meas = instrumented_stack_forward<Real>(hybrid, n, lt, seed);
            MacCounter full_meas = instrumented_stack_forward<Real>(full, n, lt, seed + 1);

            ComplexityRow row;
            row.k = k;
            row.n = n;
            row.l_t = lt;
            row.hybrid_attn = hybrid_meas.total_attention();
            row.full_attn = full_meas.total_attention();
            row.hybrid_exact = hybrid_meas.total_attention() == hybrid_pred.attention_total &&
                               hybrid_meas.total_projection() == hybrid_pred.projection_total;
            row.full_exact = full_meas.total_attention() == full_pred.attention_total &&
                             full_meas.total_projection() == full_pred.projection_total;
            row.measured_ratio =
                static_cast<double>(row.hybrid_attn) / static_cast<double>(row.full_attn);
            const double dn = static_cast<double>(n), dlt = static_cast<double>(lt), dk = k;
            row.analytic_ratio = (dk * dn * dlt + dn * dn) / ((dk + 1.0) * dn * dn);
            row.rel_gap = std::fabs(row.measured_ratio / row.analytic_ratio - 1.0);
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace mtfm
