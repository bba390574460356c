// model.hpp — full model assembly: parameters, binding, forward and loss.
#pragma once

#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mtfm/eval_ctx.hpp"
#include "mtfm/groups.hpp"
#include "mtfm/heads.hpp"
#include "mtfm/hta.hpp"
#include "mtfm/mask.hpp"
#include "mtfm/model_config.hpp"
#include "mtfm/params.hpp"
#include "mtfm/records.hpp"
#include "mtfm/rng.hpp"
#include "mtfm/schema.hpp"
#include "mtfm/tape.hpp"
#include "mtfm/tokenizer.hpp"

namespace mtfm {

struct SchemaSet {
    std::vector<SequenceSchema> hist, rt;
    std::vector<ScenarioSchema> scenarios;

    static SchemaSet from(const Dataset& d) { return {d.hist_seq_schemas, d.rt_seq_schemas, d.scenarios}; }

    std::map<int, std::vector<std::string>> tasks_by_scenario() const {
        std::map<int, std::vector<std::string>> out;
        for (const auto& s : scenarios) out[s.scenario_id] = s.tasks;
        return out;
    }

    const ScenarioSchema& scenario(int sid) const {
        for (const auto& s : scenarios)
            if (s.scenario_id == sid) return s;
        throw integrity_error("unknown scenario " + std::to_string(sid));
    }

    bool operator==(const SchemaSet&) const = default;
};

// ---------------------------------------------------------------------------
// Parameter naming. Scenario-owned parameters always carry a path component
// "s<id>" (tokenizers, heads) or "t<id>" (scenario GLN groups); everything
// else is shared. Subgraph extraction keys on exactly this rule.
// ---------------------------------------------------------------------------
namespace names {

inline std::string seq_tok(bool hist, int sid) {
    return std::string("tok/") + (hist ? "h" : "r") + std::to_string(sid);
}
inline std::string scen_tok(int sid) { return "tok/s" + std::to_string(sid); }
inline std::string layer(int block, int l) {
    return "hta/b" + std::to_string(block) + "/l" + std::to_string(l);
}
inline std::string gln(const std::string& layer_prefix, int which, const std::string& group_key,
                       bool gain) {
    return layer_prefix + "/gln" + std::to_string(which) + "/" + group_key + (gain ? "/gain" : "/bias");
}
inline std::string expert(int e) { return "head/expert" + std::to_string(e); }
inline std::string task_head(int sid, const std::string& task) {
    return "head/s" + std::to_string(sid) + "/" + task;
}

// Scenario id owning this parameter, or -1 when shared.
inline int owner_scenario(const std::string& name) {
    size_t pos = 0;
    while (pos < name.size()) {
        size_t end = name.find('/', pos);
        if (end == std::string::npos) end = name.size();
        if (end > pos + 1 && (name[pos] == 's' || name[pos] == 't')) {
            bool digits = true;
            for (size_t i = pos + 1; i < end; ++i)
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
            if (digits) return std::stoi(name.substr(pos + 1, end - pos - 1));
        }
        pos = end + 1;
    }
    return -1;
}

}  // namespace names

template <typename V>
struct ModelRefs {
    TokenizerRefs<V> tok;
    StackRefs<V> stack;
    HeadsRefs<V> heads;
};

// Analytic parameter count of the attention stack, matching registration.
inline size_t hta_stack_param_count(const HTAConfig& cfg, int n_groups, int n_scenario_groups) {
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t hd = static_cast<size_t>(cfg.heads * cfg.head_dim());
    const size_t gd = static_cast<size_t>(cfg.kv_heads * cfg.head_dim());
    const size_t gln = 2 * d;  // gain + bias per group
    const size_t full = d * (2 * hd + 2 * gd) + (2 * hd + 2 * gd)  // f1
                        + hd * d + d                               // f2
                        + static_cast<size_t>(n_groups) * gln * 2; // gln1 + gln2
    const size_t target = d * 2 * hd + 2 * hd      // f_uq
                          + d * 2 * gd + 2 * gd    // f_kv
                          + hd * d + d             // f2
                          + static_cast<size_t>(n_groups) * gln            // gln1
                          + static_cast<size_t>(n_scenario_groups) * gln;  // gln2 (T rows only)
    return static_cast<size_t>(cfg.blocks) *
           (static_cast<size_t>(cfg.target_layers) * target +
            static_cast<size_t>(cfg.full_layers) * full);
}

template <typename Real>
class Model {
  public:
    ModelConfig cfg;
    SchemaSet schemas;
    GroupTable groups;
    ParamStore<Real> params;

    Model() = default;

    static Model build(const SchemaSet& schemas, const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        m.schemas = schemas;
        m.groups = GroupTable(schemas.hist, schemas.rt, schemas.scenarios);
        Rng rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
        m.register_params(rng);
        return m;
    }

    // ---- binding ----------------------------------------------------------

    // Builds the bound-weights view through an arbitrary name -> V getter.
    // When only_scenario >= 0, refs owned by other scenarios stay default —
    // that is the scenario-subgraph restriction.
    template <typename V, typename Fn>
    ModelRefs<V> make_refs(Fn&& get, int only_scenario = -1) const {
        const HTAConfig& h = cfg.hta;
        ModelRefs<V> r;

        auto bind_source = [&](const SequenceSchema& s, bool hist) {
            SourceTokenizerRefs<V> t;
            const std::string base = names::seq_tok(hist, s.seq_id);
            for (size_t slot = 0; slot < s.feature_vocabs.size(); ++slot)
                t.emb.push_back(get(base + "/emb" + std::to_string(slot)));
            t.mlp = {get(base + "/mlp_w1"), get(base + "/mlp_b1"), get(base + "/mlp_w2"),
                     get(base + "/mlp_b2")};
            return t;
        };
        for (const auto& s : schemas.hist) r.tok.hist[s.seq_id] = bind_source(s, true);
        for (const auto& s : schemas.rt) r.tok.rt[s.seq_id] = bind_source(s, false);
        for (const auto& s : schemas.scenarios) {
            if (only_scenario >= 0 && s.scenario_id != only_scenario) continue;
            ScenarioTokenizerRefs<V> t;
            const std::string base = names::scen_tok(s.scenario_id);
            for (size_t i = 0; i < s.user_feature_vocabs.size(); ++i)
                t.emb_user.push_back(get(base + "/emb_u" + std::to_string(i)));
            for (size_t i = 0; i < s.cross_feature_vocabs.size(); ++i)
                t.emb_cross.push_back(get(base + "/emb_c" + std::to_string(i)));
            for (size_t i = 0; i < s.item_feature_vocabs.size(); ++i)
                t.emb_item.push_back(get(base + "/emb_i" + std::to_string(i)));
            t.mlp = {get(base + "/mlp_w1"), get(base + "/mlp_b1"), get(base + "/mlp_w2"),
                     get(base + "/mlp_b2")};
            r.tok.scenario[s.scenario_id] = std::move(t);
        }

        for (int b = 0; b < h.blocks; ++b) {
            for (int l = 0; l < h.layers_per_block(); ++l) {
                const bool is_target = l < h.target_layers;
                const std::string base = names::layer(b, l);
                StackLayerRefs<V> lr;
                lr.is_target = is_target;
                if (is_target) {
                    lr.fuq_w = get(base + "/fuq_w");
                    lr.fuq_b = get(base + "/fuq_b");
                    lr.fkv_w = get(base + "/fkv_w");
                    lr.fkv_b = get(base + "/fkv_b");
                } else {
                    lr.f1_w = get(base + "/f1_w");
                    lr.f1_b = get(base + "/f1_b");
                }
                lr.f2_w = get(base + "/f2_w");
                lr.f2_b = get(base + "/f2_b");
                lr.gln_in.gains.resize(static_cast<size_t>(groups.size()));
                lr.gln_in.biases.resize(static_cast<size_t>(groups.size()));
                lr.gln_gate.gains.resize(static_cast<size_t>(groups.size()));
                lr.gln_gate.biases.resize(static_cast<size_t>(groups.size()));
                for (int g = 0; g < groups.size(); ++g) {
                    int gsid = -1;
                    const bool scen_group = groups.is_scenario_group(g, &gsid);
                    if (only_scenario >= 0 && scen_group && gsid != only_scenario) continue;
                    const std::string& key = groups.key(g);
                    lr.gln_in.gains[static_cast<size_t>(g)] = get(names::gln(base, 1, key, true));
                    lr.gln_in.biases[static_cast<size_t>(g)] = get(names::gln(base, 1, key, false));
                    // Target layers normalize only T rows before gating, so
                    // they own gate-GLN parameters for scenario groups only.
                    if (!is_target || scen_group) {
                        lr.gln_gate.gains[static_cast<size_t>(g)] = get(names::gln(base, 2, key, true));
                        lr.gln_gate.biases[static_cast<size_t>(g)] = get(names::gln(base, 2, key, false));
                    }
                }
                r.stack.layers.push_back(std::move(lr));
            }
        }

        for (int e = 0; e < cfg.experts; ++e)
            r.heads.experts.push_back({get(names::expert(e) + "_w"), get(names::expert(e) + "_b")});
        for (const auto& s : schemas.scenarios) {
            if (only_scenario >= 0 && s.scenario_id != only_scenario) continue;
            for (const auto& task : s.tasks) {
                const std::string base = names::task_head(s.scenario_id, task);
                r.heads.task_heads[{s.scenario_id, task}] = {get(base + "/gate_w"), get(base + "/gate_b"),
                                                             get(base + "/tower_w"), get(base + "/tower_b")};
            }
        }
        return r;
    }

    ModelRefs<typename EvalCtx<Real>::V> bind_eval(const ParamStore<Real>& store,
                                                   int only_scenario = -1) const {
        return make_refs<typename EvalCtx<Real>::V>(
            [&](const std::string& n) { return EvalCtx<Real>::borrow(store.at(n).value); },
            only_scenario);
    }

    // Tape binding with per-worker gradient sinks (buffers indexed like the store).
    ModelRefs<Var> bind_tape(Tape<Real>& tape, const ParamStore<Real>& store,
                             std::vector<Tensor<Real>>* grad_buffers) const {
        return make_refs<Var>([&](const std::string& n) {
            const size_t i = store.index_of(n);
            Tensor<Real>* sink = grad_buffers ? &(*grad_buffers)[i] : nullptr;
            return tape.leaf(&store.at(i).value, sink);
        });
    }

    // ---- forward ----------------------------------------------------------

    struct ForwardOptions {
        MacCounter* stack_macs = nullptr;       // scoped to the attention stack
        TraceSink<Real>* trace = nullptr;       // per-layer attention matrices
        bool attach_labels = true;
        Tensor<Real>* x_final_out = nullptr;    // final embeddings of all tokens
    };

    std::vector<PredictionRecord> forward_sample(const UserSample& sample,
                                                 const ForwardOptions& opt = {}) const {
        return forward_with(params, sample, opt);
    }

    // Forward against an arbitrary parameter store (e.g. a scenario subgraph).
    std::vector<PredictionRecord> forward_with(const ParamStore<Real>& store,
                                               const UserSample& sample,
                                               const ForwardOptions& opt = {}) const {
        return forward_scoped(store, sample, -1, opt);
    }

    // As forward_with, but binds only the given scenario's specific weights;
    // required when `store` is a scenario subgraph.
    std::vector<PredictionRecord> forward_scoped(const ParamStore<Real>& store,
                                                 const UserSample& sample, int only_scenario,
                                                 const ForwardOptions& opt = {}) const {
        using Ctx = EvalCtx<Real>;
        using V = typename Ctx::V;
        Ctx ctx;
        ctx.trace = opt.trace;
        ModelRefs<V> refs = bind_eval(store, only_scenario);

        TokenPlan plan = plan_tokens(sample);
        V x0 = assemble_tokens(ctx, sample, plan, refs.tok);
        StackGeom<Real> geom = make_geom(plan);

        ctx.macs = opt.stack_macs;
        V xf = forward_stack(ctx, x0, refs.stack, geom);
        ctx.macs = nullptr;

        if (opt.x_final_out) *opt.x_final_out = ctx.val(xf);

        const size_t off = static_cast<size_t>(plan.bounds.l_h + plan.bounds.l_r);
        V t_rows = ctx.slice_rows(xf, off, static_cast<size_t>(plan.bounds.total()));
        std::vector<TokenMeta> t_metas(plan.metas.begin() + static_cast<long>(off), plan.metas.end());

        HeadLogits<V> logits =
            mmoe_forward(ctx, t_rows, t_metas, schemas.tasks_by_scenario(), refs.heads);

        std::vector<PredictionRecord> records;
        for (const auto& col : logits.columns) {
            const Tensor<Real>& z = ctx.val(col.logits);
            for (size_t i = 0; i < z.rows(); ++i) {
                PredictionRecord rec;
                rec.user_id = sample.user_id;
                rec.scenario_id = col.scenario_id;
                rec.exposure_index = col.exposure_refs[i];
                rec.task = col.task;
                double p = static_cast<double>(sigmoid_scalar(z.at(i, 0)));
                rec.probability = std::min(1.0 - 1e-12, std::max(1e-12, p));
                if (opt.attach_labels) {
                    const auto& labels =
                        sample.exposures[static_cast<size_t>(col.exposure_refs[i])].labels;
                    auto it = labels.find(col.task);
                    rec.label = it == labels.end() ? -1 : it->second;
                }
                records.push_back(std::move(rec));
            }
        }
        return records;
    }

    // ---- training loss ----------------------------------------------------

    struct SampleLoss {
        Var loss;            // scalar (sum of BCE terms / record count)
        size_t n_records = 0;
    };

    // Records the loss graph for one sample on the tape. The returned geometry
    // holder must stay alive until after tape.backward().
    SampleLoss build_loss(Tape<Real>& tape, const ModelRefs<Var>& refs, const UserSample& sample,
                          std::unique_ptr<StackGeom<Real>>& geom_holder) const {
        TokenPlan plan = plan_tokens(sample);
        Var x0 = assemble_tokens(tape, sample, plan, refs.tok);
        geom_holder = std::make_unique<StackGeom<Real>>(make_geom(plan));

        Var xf = forward_stack(tape, x0, refs.stack, *geom_holder);
        const size_t off = static_cast<size_t>(plan.bounds.l_h + plan.bounds.l_r);
        Var t_rows = tape.slice_rows(xf, off, static_cast<size_t>(plan.bounds.total()));
        std::vector<TokenMeta> t_metas(plan.metas.begin() + static_cast<long>(off), plan.metas.end());

        HeadLogits<Var> logits =
            mmoe_forward(tape, t_rows, t_metas, schemas.tasks_by_scenario(), refs.heads);

        std::vector<Var> sums;
        size_t n_records = 0;
        for (const auto& col : logits.columns) {
            std::vector<Real> labels;
            labels.reserve(col.exposure_refs.size());
            for (int ref : col.exposure_refs) {
                const auto& lab = sample.exposures[static_cast<size_t>(ref)].labels;
                auto it = lab.find(col.task);
                if (it == lab.end())
                    throw integrity_error("missing label for task " + col.task);
                labels.push_back(static_cast<Real>(it->second));
            }
            n_records += labels.size();
            sums.push_back(tape.bce_sum(col.logits, labels));
        }
        if (sums.empty()) throw contract_error("build_loss: sample produced no records");
        Var total = sums.size() == 1 ? sums.front() : tape.add_n(sums);
        SampleLoss out;
        out.loss = tape.scale(total, Real(1) / static_cast<Real>(n_records));
        out.n_records = n_records;
        return out;
    }

    StackGeom<Real> make_geom(const TokenPlan& plan) const {
        std::vector<int> token_groups;
        token_groups.reserve(plan.metas.size());
        for (const auto& m : plan.metas) token_groups.push_back(groups.group_of(m));
        MaskMatrix mask = build_mask(plan.metas);
        return make_stack_geom<Real>(cfg.hta, mask, plan.bounds, token_groups);
    }

  private:
    // ---- registration -----------------------------------------------------

    Tensor<Real> uniform_init(Rng& rng, size_t rows, size_t cols, double bound) {
        Tensor<Real> t(rows, cols);
        for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(rng.uniform(-bound, bound));
        return t;
    }

    void register_params(Rng& rng) {
        const HTAConfig& h = cfg.hta;
        const size_t d = static_cast<size_t>(h.d_model);
        const size_t de = static_cast<size_t>(cfg.d_emb);
        const size_t hd = static_cast<size_t>(h.heads * h.head_dim());
        const size_t gd = static_cast<size_t>(h.kv_heads * h.head_dim());

        auto add_weight = [&](const std::string& name, size_t in, size_t out) {
            params.add(name, uniform_init(rng, in, out, 1.0 / std::sqrt(static_cast<double>(in))));
        };
        auto add_bias = [&](const std::string& name, size_t n) { params.add(name, Tensor<Real>(1, n)); };
        auto add_mlp2 = [&](const std::string& base, size_t in) {
            add_weight(base + "/mlp_w1", in, 2 * d);
            add_bias(base + "/mlp_b1", 2 * d);
            add_weight(base + "/mlp_w2", 2 * d, d);
            add_bias(base + "/mlp_b2", d);
        };
        auto add_emb = [&](const std::string& name, size_t vocab) {
            params.add(name, uniform_init(rng, vocab, de, 1.0 / std::sqrt(static_cast<double>(de))));
        };

        for (const auto& s : schemas.hist) {
            const std::string base = names::seq_tok(true, s.seq_id);
            for (size_t slot = 0; slot < s.feature_vocabs.size(); ++slot)
                add_emb(base + "/emb" + std::to_string(slot), static_cast<size_t>(s.feature_vocabs[slot]));
            add_mlp2(base, s.feature_vocabs.size() * de);
        }
        for (const auto& s : schemas.rt) {
            const std::string base = names::seq_tok(false, s.seq_id);
            for (size_t slot = 0; slot < s.feature_vocabs.size(); ++slot)
                add_emb(base + "/emb" + std::to_string(slot), static_cast<size_t>(s.feature_vocabs[slot]));
            add_mlp2(base, s.feature_vocabs.size() * de);
        }
        for (const auto& s : schemas.scenarios) {
            const std::string base = names::scen_tok(s.scenario_id);
            for (size_t i = 0; i < s.user_feature_vocabs.size(); ++i)
                add_emb(base + "/emb_u" + std::to_string(i), static_cast<size_t>(s.user_feature_vocabs[i]));
            for (size_t i = 0; i < s.cross_feature_vocabs.size(); ++i)
                add_emb(base + "/emb_c" + std::to_string(i), static_cast<size_t>(s.cross_feature_vocabs[i]));
            for (size_t i = 0; i < s.item_feature_vocabs.size(); ++i)
                add_emb(base + "/emb_i" + std::to_string(i), static_cast<size_t>(s.item_feature_vocabs[i]));
            add_mlp2(base, (s.user_feature_vocabs.size() + s.cross_feature_vocabs.size() +
                            s.item_feature_vocabs.size()) *
                               de);
        }

        for (int b = 0; b < h.blocks; ++b) {
            for (int l = 0; l < h.layers_per_block(); ++l) {
                const bool is_target = l < h.target_layers;
                const std::string base = names::layer(b, l);
                if (is_target) {
                    add_weight(base + "/fuq_w", d, 2 * hd);
                    add_bias(base + "/fuq_b", 2 * hd);
                    add_weight(base + "/fkv_w", d, 2 * gd);
                    add_bias(base + "/fkv_b", 2 * gd);
                } else {
                    add_weight(base + "/f1_w", d, 2 * hd + 2 * gd);
                    add_bias(base + "/f1_b", 2 * hd + 2 * gd);
                }
                add_weight(base + "/f2_w", hd, d);
                add_bias(base + "/f2_b", d);
                for (int g = 0; g < groups.size(); ++g) {
                    const std::string& key = groups.key(g);
                    params.add(names::gln(base, 1, key, true), Tensor<Real>::full(1, d, Real(1)));
                    params.add(names::gln(base, 1, key, false), Tensor<Real>(1, d));
                    if (!is_target || groups.is_scenario_group(g)) {
                        params.add(names::gln(base, 2, key, true), Tensor<Real>::full(1, hd, Real(1)));
                        params.add(names::gln(base, 2, key, false), Tensor<Real>(1, hd));
                    }
                }
            }
        }

        for (int e = 0; e < cfg.experts; ++e) {
            add_weight(names::expert(e) + "_w", d, static_cast<size_t>(cfg.d_expert));
            add_bias(names::expert(e) + "_b", static_cast<size_t>(cfg.d_expert));
        }
        for (const auto& s : schemas.scenarios) {
            for (const auto& task : s.tasks) {
                const std::string base = names::task_head(s.scenario_id, task);
                add_weight(base + "/gate_w", d, static_cast<size_t>(cfg.experts));
                add_bias(base + "/gate_b", static_cast<size_t>(cfg.experts));
                add_weight(base + "/tower_w", static_cast<size_t>(cfg.d_expert), 1);
                add_bias(base + "/tower_b", 1);
            }
        }
    }
};

}  // namespace mtfm
