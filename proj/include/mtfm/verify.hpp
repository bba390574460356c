// verify.hpp — self-contained verification suites behind the `verify` CLI.
//
// Each suite builds its own micro instances (no trained model needed) and
// checks an implementation path against an independent route: the brute-force
// mask oracle, a hand-looped MHA reference, finite differences, singleton
// forwards, or the analytic MAC model.
#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "mtfm/complexity.hpp"
#include "mtfm/datagen.hpp"
#include "mtfm/model.hpp"
#include "mtfm/subgraph.hpp"

namespace mtfm {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Random instance helpers.
// ---------------------------------------------------------------------------

// Block-ordered token metadata with deliberately colliding timestamps.
inline std::vector<TokenMeta> random_metas(Rng& rng, int max_n, bool need_t = false) {
    const int n = need_t ? rng.next_int(1, max_n) : rng.next_int(0, max_n);
    int nt = need_t ? rng.next_int(1, n) : rng.next_int(0, n);
    int nh = n - nt > 0 ? rng.next_int(0, n - nt) : 0;
    int nr = n - nt - nh;
    std::vector<TokenMeta> metas;
    std::vector<int64_t> ts;
    auto draw_sorted = [&](int count) {
        ts.clear();
        for (int i = 0; i < count; ++i) ts.push_back(rng.next_int(0, 7));  // small range forces ties
        std::sort(ts.begin(), ts.end());
    };
    draw_sorted(nh);
    for (int i = 0; i < nh; ++i) metas.push_back({TokenKind::H, rng.next_int(0, 2), ts[static_cast<size_t>(i)], -1});
    draw_sorted(nr);
    for (int i = 0; i < nr; ++i) metas.push_back({TokenKind::R, rng.next_int(0, 1), ts[static_cast<size_t>(i)], -1});
    for (int i = 0; i < nt; ++i) metas.push_back({TokenKind::T, rng.next_int(0, 2), rng.next_int(0, 7), i});
    return metas;
}

// One random attention layer worth of raw weights (3 groups: H, R, T).
template <typename Real>
struct RawLayer {
    HTAConfig cfg;
    Tensor<Real> f1_w, f1_b, fuq_w, fuq_b, fkv_w, fkv_b, f2_w, f2_b;
    std::vector<Tensor<Real>> gln1_gain, gln1_bias, gln2_gain, gln2_bias;
    bool is_target = false;

    static Tensor<Real> rand(Rng& rng, size_t r, size_t c, double b) {
        Tensor<Real> t(r, c);
        for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(rng.uniform(-b, b));
        return t;
    }

    static RawLayer random_full(const HTAConfig& cfg, Rng& rng, int n_groups = 3) {
        RawLayer l;
        l.cfg = cfg;
        const size_t d = static_cast<size_t>(cfg.d_model);
        const size_t hd = static_cast<size_t>(cfg.heads * cfg.head_dim());
        const size_t gd = static_cast<size_t>(cfg.kv_heads * cfg.head_dim());
        const double b = 1.0 / std::sqrt(static_cast<double>(d));
        l.f1_w = rand(rng, d, 2 * hd + 2 * gd, b);
        l.f1_b = rand(rng, 1, 2 * hd + 2 * gd, 0.1);
        l.f2_w = rand(rng, hd, d, b);
        l.f2_b = rand(rng, 1, d, 0.1);
        for (int g = 0; g < n_groups; ++g) {
            l.gln1_gain.push_back(rand(rng, 1, d, 1.0));
            l.gln1_bias.push_back(rand(rng, 1, d, 0.2));
            l.gln2_gain.push_back(rand(rng, 1, hd, 1.0));
            l.gln2_bias.push_back(rand(rng, 1, hd, 0.2));
        }
        return l;
    }

    // Target-layer view of a full layer's weights: f_uq is the (U|Q) column
    // block of f1, f_kv is the (K|V) block. Shared GLN parameters.
    RawLayer as_target() const {
        RawLayer t = *this;
        t.is_target = true;
        const size_t hd = static_cast<size_t>(cfg.heads * cfg.head_dim());
        const size_t gd = static_cast<size_t>(cfg.kv_heads * cfg.head_dim());
        auto cols = [&](const Tensor<Real>& m, size_t c0, size_t c1) {
            Tensor<Real> out(m.rows(), c1 - c0);
            for (size_t i = 0; i < m.rows(); ++i)
                for (size_t j = c0; j < c1; ++j) out.at(i, j - c0) = m.at(i, j);
            return out;
        };
        t.fuq_w = cols(f1_w, 0, 2 * hd);
        t.fuq_b = cols(f1_b, 0, 2 * hd);
        t.fkv_w = cols(f1_w, 2 * hd, 2 * hd + 2 * gd);
        t.fkv_b = cols(f1_b, 2 * hd, 2 * hd + 2 * gd);
        return t;
    }

    StackLayerRefs<typename EvalCtx<Real>::V> refs() const {
        using Ctx = EvalCtx<Real>;
        StackLayerRefs<typename Ctx::V> r;
        r.is_target = is_target;
        if (is_target) {
            r.fuq_w = Ctx::borrow(fuq_w);
            r.fuq_b = Ctx::borrow(fuq_b);
            r.fkv_w = Ctx::borrow(fkv_w);
            r.fkv_b = Ctx::borrow(fkv_b);
        } else {
            r.f1_w = Ctx::borrow(f1_w);
            r.f1_b = Ctx::borrow(f1_b);
        }
        r.f2_w = Ctx::borrow(f2_w);
        r.f2_b = Ctx::borrow(f2_b);
        for (size_t g = 0; g < gln1_gain.size(); ++g) {
            r.gln_in.gains.push_back(Ctx::borrow(gln1_gain[g]));
            r.gln_in.biases.push_back(Ctx::borrow(gln1_bias[g]));
            r.gln_gate.gains.push_back(Ctx::borrow(gln2_gain[g]));
            r.gln_gate.biases.push_back(Ctx::borrow(gln2_bias[g]));
        }
        return r;
    }
};

// Geometry for layer-level instances: groups by kind (H=0, R=1, T=2).
template <typename Real>
StackGeom<Real> layer_geom(const HTAConfig& cfg, const std::vector<TokenMeta>& metas) {
    std::vector<int> groups;
    groups.reserve(metas.size());
    for (const auto& m : metas) groups.push_back(static_cast<int>(m.kind));
    return make_stack_geom<Real>(cfg, build_mask(metas), boundaries_of(metas), groups);
}

// ---------------------------------------------------------------------------
// Independent multi-head attention reference (plain scalar loops; no shared
// kernels, no grouping logic). Only valid for G == H.
// ---------------------------------------------------------------------------
template <typename Real>
Tensor<Real> mha_reference_layer(const Tensor<Real>& x, const RawLayer<Real>& w,
                                 const StackGeom<Real>& geom) {
    const HTAConfig& cfg = geom.cfg;
    if (cfg.kv_heads != cfg.heads) throw config_error("mha reference requires G == H");
    const size_t n = x.rows(), d = x.cols();
    const size_t dh = static_cast<size_t>(cfg.head_dim());
    const size_t hd = static_cast<size_t>(cfg.heads) * dh;

    auto norm_affine = [&](const Tensor<Real>& in, const std::vector<Tensor<Real>>& gains,
                           const std::vector<Tensor<Real>>& biases,
                           const std::vector<int>& groups) {
        Tensor<Real> out(in.rows(), in.cols());
        for (size_t i = 0; i < in.rows(); ++i) {
            double mean = 0;
            for (size_t j = 0; j < in.cols(); ++j) mean += static_cast<double>(in.at(i, j));
            mean /= static_cast<double>(in.cols());
            double var = 0;
            for (size_t j = 0; j < in.cols(); ++j) {
                double c = static_cast<double>(in.at(i, j)) - mean;
                var += c * c;
            }
            var /= static_cast<double>(in.cols());
            double inv = 1.0 / std::sqrt(var + static_cast<double>(cfg.eps));
            const auto& gain = gains[static_cast<size_t>(groups[i])];
            const auto& bias = biases[static_cast<size_t>(groups[i])];
            for (size_t j = 0; j < in.cols(); ++j)
                out.at(i, j) = static_cast<Real>(((static_cast<double>(in.at(i, j)) - mean) * inv) *
                                                     static_cast<double>(gain.at(0, j)) +
                                                 static_cast<double>(bias.at(0, j)));
        }
        return out;
    };
    auto silu_v = [](double v) { return v / (1.0 + std::exp(-v)); };

    Tensor<Real> xn = norm_affine(x, w.gln1_gain, w.gln1_bias, geom.groups_all);

    // proj = silu(xn * f1 + b1), laid out (U | Q | K | V) with G == H heads.
    const size_t width = 4 * hd;
    Tensor<Real> proj(n, width);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < width; ++j) {
            double acc = static_cast<double>(w.f1_b.at(0, j));
            for (size_t k = 0; k < d; ++k)
                acc += static_cast<double>(xn.at(i, k)) * static_cast<double>(w.f1_w.at(k, j));
            proj.at(i, j) = static_cast<Real>(silu_v(acc));
        }

    Tensor<Real> attn(n, hd);
    for (int h = 0; h < cfg.heads; ++h) {
        const size_t qo = hd + static_cast<size_t>(h) * dh;
        const size_t ko = 2 * hd + static_cast<size_t>(h) * dh;
        const size_t vo = 3 * hd + static_cast<size_t>(h) * dh;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) {
                double score = 0;
                for (size_t k = 0; k < dh; ++k)
                    score += static_cast<double>(proj.at(i, qo + k)) *
                             static_cast<double>(proj.at(j, ko + k));
                score *= static_cast<double>(geom.mask_full.at(i, j));
                const double wgt = silu_v(score) * static_cast<double>(geom.row_scale_full[i]);
                for (size_t k = 0; k < dh; ++k)
                    attn.at(i, static_cast<size_t>(h) * dh + k) +=
                        static_cast<Real>(wgt * static_cast<double>(proj.at(j, vo + k)));
            }
        }
    }

    Tensor<Real> gated = norm_affine(attn, w.gln2_gain, w.gln2_bias, geom.groups_all);
    Tensor<Real> out(n, d);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) {
            double acc = static_cast<double>(w.f2_b.at(0, j));
            for (size_t k = 0; k < hd; ++k)
                acc += static_cast<double>(gated.at(i, k)) * static_cast<double>(proj.at(i, k)) *
                       static_cast<double>(w.f2_w.at(k, j));
            out.at(i, j) = static_cast<Real>(acc + static_cast<double>(x.at(i, j)));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Micro model fixtures (also used by the gradient check).
// ---------------------------------------------------------------------------

inline SchemaSet micro_schemas() {
    SchemaSet s;
    s.hist = {{0, {5, 5}}};
    s.rt = {{0, {5, 5}}};
    ScenarioSchema a;
    a.scenario_id = 0;
    a.user_feature_vocabs = {5, 5};
    a.cross_feature_vocabs = {5};
    a.item_feature_vocabs = {5, 5};
    a.tasks = {"ctr", "ctcvr"};
    ScenarioSchema b;
    b.scenario_id = 1;
    b.user_feature_vocabs = {5};
    b.cross_feature_vocabs = {5, 5};
    b.item_feature_vocabs = {5};
    b.tasks = {"ctr", "ctcvr", "imd", "write"};
    s.scenarios = {a, b};
    return s;
}

inline ModelConfig micro_model_config() {
    ModelConfig c;
    c.hta.d_model = 16;
    c.hta.blocks = 1;
    c.hta.target_layers = 1;
    c.hta.full_layers = 1;
    c.hta.heads = 2;
    c.hta.kv_heads = 1;
    c.d_emb = 4;
    c.experts = 2;
    c.d_expert = 8;
    return c;
}

inline UserSample micro_sample() {
    UserSample s;
    s.user_id = 1;
    s.historical_sequences = {{0, {{{1, 2}, 10}, {{3, 0}, 20}}}};
    s.realtime_sequences = {{0, {{{2, 4}, 900}, {{0, 1}, 1500}}}};
    Exposure e0;
    e0.scenario_id = 0;
    e0.user_features = {1, 3};
    e0.cross_features = {2};
    e0.item_features = {4, 0};
    e0.timestamp = 1000;
    e0.labels = {{"ctr", 1}, {"ctcvr", 0}};
    Exposure e1 = e0;
    e1.item_features = {2, 2};
    e1.timestamp = 1200;
    e1.labels = {{"ctr", 1}, {"ctcvr", 1}};
    Exposure e2;
    e2.scenario_id = 1;
    e2.user_features = {2};
    e2.cross_features = {0, 4};
    e2.item_features = {3};
    e2.timestamp = 1100;
    e2.labels = {{"ctr", 0}, {"ctcvr", 0}, {"imd", 0}, {"write", 0}};
    s.exposures = {e0, e1, e2};
    return s;
}

// ---------------------------------------------------------------------------
// Gradient check: analytic tape gradients vs central finite differences.
// ---------------------------------------------------------------------------

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    size_t n_checked = 0;
};

inline GradCheckResult grad_check(Model<double>& model, const UserSample& sample,
                                  double step = 1e-5) {
    auto loss_value = [&]() {
        Tape<double> tape;
        auto refs = model.bind_tape(tape, model.params, nullptr);
        std::unique_ptr<StackGeom<double>> geom;
        auto sl = model.build_loss(tape, refs, sample, geom);
        return tape.val(sl.loss).at(0, 0);
    };

    auto bufs = model.params.make_grad_buffers();
    {
        Tape<double> tape;
        auto refs = model.bind_tape(tape, model.params, &bufs);
        std::unique_ptr<StackGeom<double>> geom;
        auto sl = model.build_loss(tape, refs, sample, geom);
        tape.backward(sl.loss);
    }

    GradCheckResult res;
    for (size_t p = 0; p < model.params.size(); ++p) {
        auto& entry = model.params.at(p);
        for (size_t i = 0; i < entry.value.size(); ++i) {
            const double orig = entry.value[i];
            entry.value[i] = orig + step;
            const double lp = loss_value();
            entry.value[i] = orig - step;
            const double lm = loss_value();
            entry.value[i] = orig;
            const double numeric = (lp - lm) / (2.0 * step);
            const double analytic = bufs[p].at(i / entry.value.cols(), i % entry.value.cols());
            const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-4});
            const double rel = std::fabs(numeric - analytic) / denom;
            ++res.n_checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = entry.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Suites.
// ---------------------------------------------------------------------------

inline CheckResult verify_masks(int trials = 1000, int max_n = 32, uint64_t seed = 2024) {
    Rng rng(seed);
    int failures = 0;
    for (int t = 0; t < trials; ++t) {
        auto metas = random_metas(rng, max_n);
        MaskMatrix fast = build_mask(metas);
        MaskMatrix oracle = build_mask_oracle(metas);
        if (!(fast == oracle)) ++failures;
        if (!metas.empty()) {
            Boundaries b = boundaries_of(metas);
            if (b.l_t > 0) {
                auto rows = extract_t_rows<double>(fast, b);
                for (size_t i = 0; i < rows.rows(); ++i)
                    for (size_t j = 0; j < rows.cols(); ++j)
                        if (rows.at(i, j) !=
                            static_cast<double>(oracle.at(static_cast<size_t>(b.l_h + b.l_r) + i, j)))
                            ++failures;
            }
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%d trials, %d failures", trials, failures);
    return {"mask-oracle", failures == 0, detail};
}

inline CheckResult verify_restriction(int trials = 200, uint64_t seed = 31) {
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        HTAConfig cfg;
        cfg.d_model = 16;
        cfg.heads = 2;
        cfg.kv_heads = rng.bernoulli(0.5) ? 1 : 2;
        cfg.blocks = 1;
        auto metas = random_metas(rng, 14, /*need_t=*/true);
        auto geom = layer_geom<double>(cfg, metas);
        auto full = RawLayer<double>::random_full(cfg, rng);
        auto target = full.as_target();

        Tensor<double> x = RawLayer<double>::rand(rng, metas.size(), static_cast<size_t>(cfg.d_model), 1.0);
        EvalCtx<double> ctx;
        auto out_full = ctx.val(full_attention_layer(ctx, EvalCtx<double>::borrow(x), full.refs(), geom));
        auto out_target =
            ctx.val(target_attention_layer(ctx, EvalCtx<double>::borrow(x), target.refs(), geom));

        const size_t off = static_cast<size_t>(geom.bounds.l_h + geom.bounds.l_r);
        for (size_t i = off; i < x.rows(); ++i)
            for (size_t j = 0; j < x.cols(); ++j)
                worst = std::max(worst, std::fabs(out_full.at(i, j) - out_target.at(i, j)));
        // H/R rows of the target layer output must be bitwise the input rows.
        for (size_t i = 0; i < off; ++i)
            for (size_t j = 0; j < x.cols(); ++j)
                if (out_target.at(i, j) != x.at(i, j)) worst = 1.0;
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%d trials, max |delta| = %.3e", trials, worst);
    return {"target-restriction", worst <= 1e-6, detail};
}

inline CheckResult verify_gqa(int trials = 50, uint64_t seed = 47) {
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        HTAConfig cfg;
        cfg.d_model = 16;
        cfg.heads = 2;
        cfg.kv_heads = 2;  // G = H
        cfg.blocks = 1;
        auto metas = random_metas(rng, 12, true);
        auto geom = layer_geom<double>(cfg, metas);
        auto layer = RawLayer<double>::random_full(cfg, rng);
        Tensor<double> x = RawLayer<double>::rand(rng, metas.size(), static_cast<size_t>(cfg.d_model), 1.0);

        EvalCtx<double> ctx;
        auto ours = ctx.val(full_attention_layer(ctx, EvalCtx<double>::borrow(x), layer.refs(), geom));
        auto ref = mha_reference_layer(x, layer, geom);
        worst = std::max(worst, ours.max_abs_diff(ref));
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%d trials, max |delta| = %.3e vs reference", trials, worst);
    return {"gqa-degeneracy", worst <= 1e-12, detail};
}

inline CheckResult verify_gradients(uint64_t seed = 5) {
    auto model = Model<double>::build(micro_schemas(), micro_model_config(), seed);
    auto res = grad_check(model, micro_sample());
    char detail[160];
    std::snprintf(detail, sizeof(detail), "%zu params, max rel err = %.3e (worst: %s)",
                  res.n_checked, res.max_rel_err, res.worst_param.c_str());
    return {"gradient-check", res.max_rel_err <= 1e-4, detail};
}

inline CheckResult verify_aggregation(int n_samples = 200, uint64_t seed = 71) {
    GeneratorConfig gc;
    gc.n_users = n_samples;
    gc.seq_len_min = 0;
    gc.seq_len_max = 5;
    gc.seed = seed;
    Dataset data = generate_dataset(gc);

    ModelConfig mc;
    mc.hta.d_model = 32;
    mc.hta.blocks = 2;
    mc.hta.target_layers = 1;
    mc.hta.full_layers = 1;
    mc.hta.heads = 2;
    mc.hta.kv_heads = 1;
    mc.d_emb = 8;
    mc.d_expert = 16;
    auto model = Model<double>::build(SchemaSet::from(data), mc, seed + 1);

    double worst = 0.0;
    for (const auto& sample : data.samples) {
        auto agg = model.forward_sample(sample);
        for (size_t ei = 0; ei < sample.exposures.size(); ++ei) {
            UserSample single = sample;
            single.exposures = {sample.exposures[ei]};
            auto solo = model.forward_sample(single);
            for (const auto& rec : agg) {
                if (rec.exposure_index != static_cast<int>(ei)) continue;
                bool found = false;
                for (const auto& srec : solo) {
                    if (srec.task != rec.task) continue;
                    found = true;
                    worst = std::max(worst, std::fabs(srec.probability - rec.probability));
                }
                if (!found) worst = 1.0;
            }
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%d samples, max |delta| = %.3e", n_samples, worst);
    return {"aggregation-equivalence", worst <= 1e-6, detail};
}

inline CheckResult verify_subgraph(int n_requests = 100, uint64_t seed = 83) {
    GeneratorConfig gc;
    gc.n_scenarios = 3;
    gc.n_users = n_requests;
    gc.seq_len_min = 1;
    gc.seq_len_max = 5;
    gc.seed = seed;
    Dataset data = generate_dataset(gc);

    ModelConfig mc;
    mc.hta.d_model = 32;
    mc.hta.blocks = 2;
    mc.hta.target_layers = 1;
    mc.hta.full_layers = 1;
    mc.hta.heads = 2;
    mc.hta.kv_heads = 1;
    mc.d_emb = 8;
    mc.d_expert = 16;
    auto model = Model<double>::build(SchemaSet::from(data), mc, seed + 9);

    std::vector<ScenarioSubgraph<double>> subs;
    for (const auto& sc : data.scenarios) subs.push_back(extract_subgraph(model, sc.scenario_id));

    Rng rng(seed + 17);
    double worst = 0.0;
    for (int t = 0; t < n_requests; ++t) {
        const UserSample& donor = data.samples[static_cast<size_t>(t) % data.samples.size()];
        const int sid = static_cast<int>(rng.next_below(data.scenarios.size()));
        const ScenarioSchema& sc = data.scenario(sid);

        InferenceRequest req;
        req.user_id = donor.user_id;
        req.scenario_id = sid;
        req.timestamp = 1500;
        req.historical_sequences = donor.historical_sequences;
        req.realtime_sequences = donor.realtime_sequences;
        const int n_cand = rng.next_int(1, 6);
        auto draw = [&](const std::vector<int>& vocabs) {
            std::vector<int> ids;
            for (int v : vocabs) ids.push_back(static_cast<int>(rng.next_below(static_cast<uint64_t>(v))));
            return ids;
        };
        for (int c = 0; c < n_cand; ++c)
            req.candidates.push_back({draw(sc.user_feature_vocabs), draw(sc.cross_feature_vocabs),
                                      draw(sc.item_feature_vocabs)});
        validate_request(data, req);

        typename Model<double>::ForwardOptions opt;
        opt.attach_labels = false;
        auto full = model.forward_with(model.params, sample_view_of_request(req), opt);
        auto sub = infer_request(model, subs[static_cast<size_t>(sid)], req);
        if (full.size() != sub.size()) {
            worst = 1.0;
            continue;
        }
        for (size_t i = 0; i < full.size(); ++i) {
            if (full[i].exposure_index != sub[i].exposure_index || full[i].task != sub[i].task)
                worst = 1.0;
            worst = std::max(worst, std::fabs(full[i].probability - sub[i].probability));
        }
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%d requests, max |delta| = %.3e", n_requests, worst);
    return {"subgraph-equivalence", worst <= 1e-6, detail};
}

inline CheckResult verify_macs(uint64_t seed = 99) {
    HTAConfig base;
    base.d_model = 32;
    base.heads = 2;
    base.kv_heads = 1;
    auto rows = verify_complexity<float>(base, /*blocks=*/2, {1, 3, 5},
                                         {{512, 16}, {1024, 32}, {2048, 64}}, seed);
    bool all_exact = true;
    double worst_gap = 0.0;
    for (const auto& r : rows) {
        all_exact = all_exact && r.hybrid_exact && r.full_exact;
        worst_gap = std::max(worst_gap, r.rel_gap);
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "%zu configs, exact=%s, worst ratio gap = %.3e",
                  rows.size(), all_exact ? "yes" : "no", worst_gap);
    return {"mac-accounting", all_exact && worst_gap <= 0.10, detail};
}

inline std::vector<CheckResult> run_all_verifications() {
    return {verify_masks(),     verify_restriction(), verify_gqa(), verify_gradients(),
            verify_aggregation(), verify_subgraph(),  verify_macs()};
}

}  // namespace mtfm
