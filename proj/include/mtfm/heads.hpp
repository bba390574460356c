// heads.hpp — MMoE multi-scenario / multi-task prediction heads.
//
// E experts are shared across scenarios; each (scenario, task) pair owns a
// softmax gate over the experts and a scalar tower. A T token only produces
// outputs for its own scenario's tasks.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtfm/model_config.hpp"
#include "mtfm/schema.hpp"
#include "mtfm/token_types.hpp"

namespace mtfm {

template <typename V>
struct ExpertRefs {
    V w, b;  // d_model -> d_expert, silu activation
};

template <typename V>
struct TaskHeadRefs {
    V gate_w, gate_b;    // d_model -> E, softmax
    V tower_w, tower_b;  // d_expert -> 1
};

template <typename V>
struct HeadsRefs {
    std::vector<ExpertRefs<V>> experts;
    std::map<std::pair<int, std::string>, TaskHeadRefs<V>> task_heads;  // (scenario, task)
};

// One logit column per (scenario, task) over that scenario's T tokens.
template <typename V>
struct HeadLogits {
    struct Column {
        int scenario_id = 0;
        std::string task;
        std::vector<int> exposure_refs;  // per row, into the sample's exposures
        V logits;                        // (n, 1)
    };
    std::vector<Column> columns;
};

template <class Ctx, typename V = typename Ctx::V>
HeadLogits<V> mmoe_forward(Ctx& ctx, const V& t_tokens, const std::vector<TokenMeta>& t_metas,
                           const std::map<int, std::vector<std::string>>& tasks_by_scenario,
                           const HeadsRefs<V>& refs) {
    if (ctx.val(t_tokens).rows() != t_metas.size())
        throw dimension_error("mmoe_forward: T row count vs metas");

    // Group T rows per scenario, keeping row order.
    std::map<int, std::vector<int>> rows_by_scenario;
    for (size_t i = 0; i < t_metas.size(); ++i) {
        if (t_metas[i].kind != TokenKind::T)
            throw dimension_error("mmoe_forward: non-T token meta");
        rows_by_scenario[t_metas[i].group_id].push_back(static_cast<int>(i));
    }

    HeadLogits<V> out;
    for (const auto& [sid, rows] : rows_by_scenario) {
        auto tasks_it = tasks_by_scenario.find(sid);
        if (tasks_it == tasks_by_scenario.end())
            throw config_error("mmoe_forward: no tasks registered for scenario " +
                               std::to_string(sid));

        V xs = ctx.gather_rows(t_tokens, rows);

        std::vector<V> expert_out;
        expert_out.reserve(refs.experts.size());
        for (const auto& ex : refs.experts)
            expert_out.push_back(ctx.silu(ctx.add_rowvec(ctx.matmul(xs, ex.w), ex.b)));

        for (const auto& task : tasks_it->second) {
            auto head_it = refs.task_heads.find({sid, task});
            if (head_it == refs.task_heads.end())
                throw config_error("mmoe_forward: no head for scenario " + std::to_string(sid) +
                                   " task " + task);
            const auto& head = head_it->second;

            V gate = ctx.softmax_rows(ctx.add_rowvec(ctx.matmul(xs, head.gate_w), head.gate_b));
            std::vector<V> weighted;
            weighted.reserve(expert_out.size());
            for (size_t e = 0; e < expert_out.size(); ++e)
                weighted.push_back(ctx.mul_colvec(expert_out[e], ctx.slice_cols(gate, e, e + 1)));
            V mixture = weighted.size() == 1 ? weighted.front() : ctx.add_n(weighted);

            typename HeadLogits<V>::Column col;
            col.scenario_id = sid;
            col.task = task;
            for (int r : rows) col.exposure_refs.push_back(t_metas[static_cast<size_t>(r)].exposure_ref);
            col.logits = ctx.add_rowvec(ctx.matmul(mixture, head.tower_w), head.tower_b);
            out.columns.push_back(std::move(col));
        }
    }
    return out;
}

}  // namespace mtfm
