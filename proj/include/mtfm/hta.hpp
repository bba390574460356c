// hta.hpp — the hybrid target attention stack.
//
// Per block: K target attention layers (update only T rows; K/V over the full
// sequence) followed by P full attention layers, gated HSTU-style:
//
//   X~ = GLN(X)
//   U, {Q_h}, {K_g, V_g} = Split(silu(f1(X~)))        split order (U, Q, K, V)
//   A_h = rowscale(silu(Q_h K_g^T . M)) V_g,  g = floor(h / (H/G))
//   out = f2(GLN(A) . U) + X
//
// Masked score entries are zeroed before the nonlinearity; silu(0) = 0, so
// invisible keys contribute exactly nothing.
#pragma once

#include <string>
#include <vector>

#include "mtfm/mask.hpp"
#include "mtfm/model_config.hpp"
#include "mtfm/tensor.hpp"
#include "mtfm/token_types.hpp"

namespace mtfm {

// Per-sample constants the layers need besides the token embeddings. Must
// outlive any tape recorded against it (the ops capture the masks by
// reference).
template <typename Real>
struct StackGeom {
    HTAConfig cfg;
    Boundaries bounds;
    Tensor<Real> mask_full;           // N x N
    Tensor<Real> mask_t;              // L_T x N
    std::vector<Real> row_scale_full; // per query row
    std::vector<Real> row_scale_t;
    std::vector<int> groups_all;      // group index per token
    std::vector<int> groups_t;        // T rows only
};

template <typename Real>
StackGeom<Real> make_stack_geom(const HTAConfig& cfg, const MaskMatrix& mask,
                                const Boundaries& bounds, const std::vector<int>& token_groups) {
    if (mask.n != static_cast<size_t>(bounds.total()))
        throw dimension_error("stack geom: mask size vs boundaries");
    StackGeom<Real> g;
    g.cfg = cfg;
    g.bounds = bounds;
    g.mask_full = mask.to_tensor<Real>();
    g.mask_t = extract_t_rows<Real>(mask, bounds);
    g.groups_all = token_groups;
    g.groups_t.assign(token_groups.begin() + bounds.l_h + bounds.l_r, token_groups.end());

    const auto counts = mask.row_valid_counts();
    g.row_scale_full.resize(mask.n, Real(1));
    for (size_t i = 0; i < mask.n; ++i) {
        switch (cfg.norm) {
            case AttnNorm::valid_count:
                g.row_scale_full[i] = Real(1) / static_cast<Real>(std::max(counts[i], 1));
                break;
            case AttnNorm::seq_len:
                g.row_scale_full[i] = Real(1) / static_cast<Real>(mask.n);
                break;
            case AttnNorm::none:
                g.row_scale_full[i] = Real(1);
                break;
        }
    }
    const size_t off = static_cast<size_t>(bounds.l_h + bounds.l_r);
    g.row_scale_t.assign(g.row_scale_full.begin() + static_cast<long>(off), g.row_scale_full.end());
    return g;
}

// ---------------------------------------------------------------------------
// Bound layer weights.
// ---------------------------------------------------------------------------

template <typename V>
struct GlnRefs {
    std::vector<V> gains;   // indexed by global group index
    std::vector<V> biases;  // entries for unused groups may be empty
};

template <typename V>
struct StackLayerRefs {
    bool is_target = false;
    // full layers: f1 packs (U | Q | K | V); target layers split the
    // projection into f_uq over T rows and f_kv over all rows.
    V f1_w, f1_b;
    V fuq_w, fuq_b, fkv_w, fkv_b;
    V f2_w, f2_b;
    GlnRefs<V> gln_in;    // before the projections
    GlnRefs<V> gln_gate;  // on A, before gating with U
};

template <typename V>
struct StackRefs {
    std::vector<StackLayerRefs<V>> layers;  // execution order
};

// ---------------------------------------------------------------------------
// Layers.
// ---------------------------------------------------------------------------

template <class Ctx, typename V = typename Ctx::V>
V gln(Ctx& ctx, const V& x, const std::vector<int>& groups, const GlnRefs<V>& refs, double eps) {
    using Real = typename Ctx::Scalar;
    return ctx.group_affine(ctx.row_normalize(x, static_cast<Real>(eps)), groups, refs.gains,
                            refs.biases);
}

namespace detail {

// Shared GQA attention body: queries (rows_q x H*d_h) against keys/values
// (n x G*d_h) under `mask` (rows_q x n). Returns (rows_q x H*d_h).
template <class Ctx, typename V = typename Ctx::V, typename Real = typename Ctx::Scalar>
V gqa_attention(Ctx& ctx, const V& q_all, const V& k_all, const V& v_all,
                const Tensor<Real>& mask, const std::vector<Real>& row_scale,
                const HTAConfig& cfg, const std::string& tag) {
    const size_t dh = static_cast<size_t>(cfg.head_dim());
    const size_t r = static_cast<size_t>(cfg.heads_per_group());
    std::vector<V> head_outputs;
    head_outputs.reserve(static_cast<size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        const size_t g = static_cast<size_t>(h) / r;
        V qh = ctx.slice_cols(q_all, static_cast<size_t>(h) * dh, (static_cast<size_t>(h) + 1) * dh);
        V kg = ctx.slice_cols(k_all, g * dh, (g + 1) * dh);
        V vg = ctx.slice_cols(v_all, g * dh, (g + 1) * dh);
        V scores = ctx.matmul_nt(qh, kg, MacKind::attention);
        V weights = ctx.scale_rows(ctx.silu(ctx.mul_mask(scores, mask)), row_scale);
        ctx.trace_attention(tag + "/head" + std::to_string(h), weights);
        head_outputs.push_back(ctx.matmul(weights, vg, MacKind::attention));
    }
    return head_outputs.size() == 1 ? head_outputs.front() : ctx.concat_cols(head_outputs);
}

}  // namespace detail

template <class Ctx, typename V = typename Ctx::V, typename Real = typename Ctx::Scalar>
V full_attention_layer(Ctx& ctx, const V& x, const StackLayerRefs<V>& w,
                       const StackGeom<Real>& geom, const std::string& tag = "full") {
    const HTAConfig& cfg = geom.cfg;
    const size_t hd = static_cast<size_t>(cfg.heads * cfg.head_dim());
    const size_t gd = static_cast<size_t>(cfg.kv_heads * cfg.head_dim());

    V xn = gln(ctx, x, geom.groups_all, w.gln_in, cfg.eps);
    V proj = ctx.silu(ctx.add_rowvec(ctx.matmul(xn, w.f1_w), w.f1_b));
    V u = ctx.slice_cols(proj, 0, hd);
    V q = ctx.slice_cols(proj, hd, 2 * hd);
    V k = ctx.slice_cols(proj, 2 * hd, 2 * hd + gd);
    V v = ctx.slice_cols(proj, 2 * hd + gd, 2 * hd + 2 * gd);

    V attn = detail::gqa_attention(ctx, q, k, v, geom.mask_full, geom.row_scale_full, cfg, tag);
    V gated = ctx.mul(gln(ctx, attn, geom.groups_all, w.gln_gate, cfg.eps), u);
    return ctx.add(ctx.add_rowvec(ctx.matmul(gated, w.f2_w), w.f2_b), x);
}

// Updates only the T rows; H/R rows pass through bitwise unchanged.
template <class Ctx, typename V = typename Ctx::V, typename Real = typename Ctx::Scalar>
V target_attention_layer(Ctx& ctx, const V& x, const StackLayerRefs<V>& w,
                         const StackGeom<Real>& geom, const std::string& tag = "target") {
    const HTAConfig& cfg = geom.cfg;
    const size_t hd = static_cast<size_t>(cfg.heads * cfg.head_dim());
    const size_t gd = static_cast<size_t>(cfg.kv_heads * cfg.head_dim());
    const size_t off = static_cast<size_t>(geom.bounds.l_h + geom.bounds.l_r);
    const size_t n = static_cast<size_t>(geom.bounds.total());

    V xn = gln(ctx, x, geom.groups_all, w.gln_in, cfg.eps);
    V xn_t = ctx.slice_rows(xn, off, n);

    V uq = ctx.silu(ctx.add_rowvec(ctx.matmul(xn_t, w.fuq_w), w.fuq_b));
    V u_t = ctx.slice_cols(uq, 0, hd);
    V q_t = ctx.slice_cols(uq, hd, 2 * hd);

    V kv = ctx.silu(ctx.add_rowvec(ctx.matmul(xn, w.fkv_w), w.fkv_b));
    V k = ctx.slice_cols(kv, 0, gd);
    V v = ctx.slice_cols(kv, gd, 2 * gd);

    V attn = detail::gqa_attention(ctx, q_t, k, v, geom.mask_t, geom.row_scale_t, cfg, tag);
    V gated = ctx.mul(gln(ctx, attn, geom.groups_t, w.gln_gate, cfg.eps), u_t);
    V t_new = ctx.add(ctx.add_rowvec(ctx.matmul(gated, w.f2_w), w.f2_b), ctx.slice_rows(x, off, n));

    if (off == 0) return t_new;
    return ctx.concat_rows({ctx.slice_rows(x, 0, off), t_new});
}

// B blocks of (K target; P full) layers. Layer weight refs must be in
// execution order and tagged is_target consistently with the config.
template <class Ctx, typename V = typename Ctx::V, typename Real = typename Ctx::Scalar>
V forward_stack(Ctx& ctx, const V& x0, const StackRefs<V>& refs, const StackGeom<Real>& geom) {
    const HTAConfig& cfg = geom.cfg;
    const size_t expected =
        static_cast<size_t>(cfg.blocks) * static_cast<size_t>(cfg.layers_per_block());
    if (refs.layers.size() != expected)
        throw dimension_error("forward_stack: layer count mismatch");
    V x = x0;
    size_t li = 0;
    for (int b = 0; b < cfg.blocks; ++b) {
        for (int k = 0; k < cfg.target_layers; ++k, ++li) {
            const std::string tag = "b" + std::to_string(b) + "/t" + std::to_string(k);
            ctx.begin_layer(tag);
            if (!refs.layers[li].is_target) throw dimension_error("forward_stack: layer kind mismatch");
            x = target_attention_layer(ctx, x, refs.layers[li], geom, tag);
        }
        for (int p = 0; p < cfg.full_layers; ++p, ++li) {
            const std::string tag = "b" + std::to_string(b) + "/f" + std::to_string(p);
            ctx.begin_layer(tag);
            if (refs.layers[li].is_target) throw dimension_error("forward_stack: layer kind mismatch");
            x = full_attention_layer(ctx, x, refs.layers[li], geom, tag);
        }
    }
    return x;
}

}  // namespace mtfm
