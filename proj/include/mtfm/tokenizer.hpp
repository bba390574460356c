// tokenizer.hpp — heterogeneous tokenization.
//
// Every source keeps its own embedding tables and tokenizer MLP: one per
// historical sequence type, one per realtime sequence type, one per scenario.
// Feature embeddings are column-concatenated, pushed through the source's MLP
// into d_model, and the resulting H/R/T tokens are stacked chronologically
// into X0 = (H; R; T). No cross-scenario padding or alignment anywhere.
#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "mtfm/model_config.hpp"
#include "mtfm/schema.hpp"
#include "mtfm/token_types.hpp"

namespace mtfm {

// ---------------------------------------------------------------------------
// Token planning (pure metadata, shared by the tape and eval paths).
// ---------------------------------------------------------------------------

struct TokenPlan {
    std::vector<TokenMeta> metas;  // final (H; R; T) order
    Boundaries bounds;

    // Pile layout: per-source matrices are produced in this order and then
    // permuted into the final order. pile_to_final[p] = final row of pile row p
    // is implied by final_to_pile (the gather index list).
    std::vector<int> final_to_pile;

    // Sources in pile order.
    struct SeqPiece {
        bool historical = true;
        int list_index = 0;  // into sample.historical_sequences / realtime_sequences
        int seq_schema_id = 0;
    };
    std::vector<SeqPiece> seq_pieces;

    // T tokens grouped per scenario in pile order.
    struct ScenarioPiece {
        int scenario_id = 0;
        std::vector<int> exposure_indices;  // original order within the sample
    };
    std::vector<ScenarioPiece> scenario_pieces;
};

// Chronological H/R merge and canonical T ordering by
// (timestamp, scenario_id, original exposure index).
inline TokenPlan plan_tokens(const UserSample& sample) {
    TokenPlan plan;

    struct Pending {
        TokenMeta meta;
        int pile_row;
    };
    std::vector<Pending> h_tokens, r_tokens, t_tokens;
    int pile_row = 0;

    auto eat_sequences = [&](const std::vector<SequenceRecord>& seqs, bool historical,
                             std::vector<Pending>& sink) {
        for (size_t li = 0; li < seqs.size(); ++li) {
            const auto& rec = seqs[li];
            if (rec.events.empty()) continue;
            plan.seq_pieces.push_back({historical, static_cast<int>(li), rec.seq_schema_id});
            for (const auto& ev : rec.events) {
                TokenMeta m;
                m.kind = historical ? TokenKind::H : TokenKind::R;
                m.group_id = rec.seq_schema_id;
                m.timestamp = ev.timestamp;
                sink.push_back({m, pile_row++});
            }
        }
    };
    eat_sequences(sample.historical_sequences, true, h_tokens);
    eat_sequences(sample.realtime_sequences, false, r_tokens);

    // Canonical exposure order; ties broken by scenario then insertion index.
    std::vector<int> order(sample.exposures.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const Exposure& ea = sample.exposures[static_cast<size_t>(a)];
        const Exposure& eb = sample.exposures[static_cast<size_t>(b)];
        if (ea.timestamp != eb.timestamp) return ea.timestamp < eb.timestamp;
        if (ea.scenario_id != eb.scenario_id) return ea.scenario_id < eb.scenario_id;
        return a < b;
    });

    // T tokens are produced per scenario (one tokenizer batch each); remember
    // each exposure's pile row for the final permutation.
    std::map<int, std::vector<int>> by_scenario;
    for (const auto& e : sample.exposures) by_scenario[e.scenario_id];  // keep scenario order stable
    for (int idx : order) by_scenario[sample.exposures[static_cast<size_t>(idx)].scenario_id].push_back(idx);

    std::map<int, int> exposure_pile_row;
    for (const auto& [sid, indices] : by_scenario) {
        if (indices.empty()) continue;
        TokenPlan::ScenarioPiece piece;
        piece.scenario_id = sid;
        piece.exposure_indices = indices;
        for (int idx : indices) exposure_pile_row[idx] = pile_row++;
        plan.scenario_pieces.push_back(std::move(piece));
    }
    for (int idx : order) {
        const Exposure& e = sample.exposures[static_cast<size_t>(idx)];
        TokenMeta m;
        m.kind = TokenKind::T;
        m.group_id = e.scenario_id;
        m.timestamp = e.timestamp;
        m.exposure_ref = idx;
        t_tokens.push_back({m, exposure_pile_row.at(idx)});
    }

    auto chrono = [](std::vector<Pending>& v) {
        std::stable_sort(v.begin(), v.end(), [](const Pending& a, const Pending& b) {
            return a.meta.timestamp < b.meta.timestamp;
        });
    };
    chrono(h_tokens);
    chrono(r_tokens);

    for (const auto& list : {&h_tokens, &r_tokens, &t_tokens}) {
        for (const auto& p : *list) {
            plan.metas.push_back(p.meta);
            plan.final_to_pile.push_back(p.pile_row);
        }
    }
    plan.bounds = boundaries_of(plan.metas);
    check_meta_order(plan.metas);
    return plan;
}

// Exposure-shaped view of an inference request; candidates share the request
// timestamp and carry no labels.
inline UserSample sample_view_of_request(const InferenceRequest& r) {
    UserSample s;
    s.user_id = r.user_id;
    s.historical_sequences = r.historical_sequences;
    s.realtime_sequences = r.realtime_sequences;
    for (const auto& c : r.candidates) {
        Exposure e;
        e.scenario_id = r.scenario_id;
        e.user_features = c.user_features;
        e.cross_features = c.cross_features;
        e.item_features = c.item_features;
        e.timestamp = r.timestamp;
        s.exposures.push_back(std::move(e));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Bound tokenizer weights (V = Var on the tape, shared tensor in eval).
// ---------------------------------------------------------------------------

template <typename V>
struct MlpRefs {
    V w1, b1, w2, b2;
};

template <typename V>
struct SourceTokenizerRefs {
    std::vector<V> emb;  // one table per feature slot
    MlpRefs<V> mlp;
};

template <typename V>
struct ScenarioTokenizerRefs {
    std::vector<V> emb_user, emb_cross, emb_item;
    MlpRefs<V> mlp;
};

template <typename V>
struct TokenizerRefs {
    std::map<int, SourceTokenizerRefs<V>> hist;  // by seq_schema_id
    std::map<int, SourceTokenizerRefs<V>> rt;
    std::map<int, ScenarioTokenizerRefs<V>> scenario;  // by scenario_id
};

// hidden = silu(x W1 + b1); out = hidden W2 + b2
template <class Ctx, typename V = typename Ctx::V>
V apply_mlp(Ctx& ctx, const V& x, const MlpRefs<V>& mlp) {
    V h = ctx.silu(ctx.add_rowvec(ctx.matmul(x, mlp.w1), mlp.b1));
    return ctx.add_rowvec(ctx.matmul(h, mlp.w2), mlp.b2);
}

namespace detail {

// Embeds a batch of id rows: per slot a row gather, then column concat.
template <class Ctx, typename V = typename Ctx::V>
V embed_rows(Ctx& ctx, const std::vector<V>& tables, const std::vector<std::vector<int>>& ids) {
    std::vector<V> cols;
    cols.reserve(tables.size());
    const size_t n_rows = ids.size();
    for (size_t slot = 0; slot < tables.size(); ++slot) {
        std::vector<int> slot_ids(n_rows);
        for (size_t r = 0; r < n_rows; ++r) {
            if (slot >= ids[r].size()) throw dimension_error("embed_rows: feature slot missing");
            slot_ids[r] = ids[r][slot];
        }
        cols.push_back(ctx.gather_rows(tables[slot], slot_ids));
    }
    return ctx.concat_cols(cols);
}

}  // namespace detail

// One H or R sequence record -> (n_events, d_model) token rows.
template <class Ctx, typename V = typename Ctx::V>
V tokenize_sequence(Ctx& ctx, const SequenceRecord& rec, const SourceTokenizerRefs<V>& refs) {
    std::vector<std::vector<int>> ids;
    ids.reserve(rec.events.size());
    for (const auto& ev : rec.events) ids.push_back(ev.item_features);
    return apply_mlp(ctx, detail::embed_rows(ctx, refs.emb, ids), refs.mlp);
}

// A batch of same-scenario exposures -> (n, d_model) T-token rows. Embedded
// user, cross and item blocks are column-concatenated before the scenario MLP.
template <class Ctx, typename V = typename Ctx::V>
V tokenize_exposures(Ctx& ctx, const std::vector<const Exposure*>& exposures,
                     const ScenarioTokenizerRefs<V>& refs) {
    std::vector<std::vector<int>> u, c, i;
    for (const auto* e : exposures) {
        u.push_back(e->user_features);
        c.push_back(e->cross_features);
        i.push_back(e->item_features);
    }
    std::vector<V> blocks;
    if (!refs.emb_user.empty()) blocks.push_back(detail::embed_rows(ctx, refs.emb_user, u));
    if (!refs.emb_cross.empty()) blocks.push_back(detail::embed_rows(ctx, refs.emb_cross, c));
    if (!refs.emb_item.empty()) blocks.push_back(detail::embed_rows(ctx, refs.emb_item, i));
    return apply_mlp(ctx, ctx.concat_cols(blocks), refs.mlp);
}

// Full assembly: X0 = (H; R; T), rows permuted from the per-source pile into
// the plan's chronological order.
template <class Ctx, typename V = typename Ctx::V>
V assemble_tokens(Ctx& ctx, const UserSample& sample, const TokenPlan& plan,
                  const TokenizerRefs<V>& refs) {
    std::vector<V> pile;
    for (const auto& piece : plan.seq_pieces) {
        const auto& seqs = piece.historical ? sample.historical_sequences : sample.realtime_sequences;
        const auto& rec = seqs[static_cast<size_t>(piece.list_index)];
        const auto& table = piece.historical ? refs.hist : refs.rt;
        auto it = table.find(piece.seq_schema_id);
        if (it == table.end())
            throw integrity_error("no tokenizer for sequence schema " +
                                  std::to_string(piece.seq_schema_id));
        pile.push_back(tokenize_sequence(ctx, rec, it->second));
    }
    for (const auto& piece : plan.scenario_pieces) {
        auto it = refs.scenario.find(piece.scenario_id);
        if (it == refs.scenario.end())
            throw integrity_error("no tokenizer for scenario " +
                                  std::to_string(piece.scenario_id));
        std::vector<const Exposure*> exp;
        exp.reserve(piece.exposure_indices.size());
        for (int idx : piece.exposure_indices)
            exp.push_back(&sample.exposures[static_cast<size_t>(idx)]);
        pile.push_back(tokenize_exposures(ctx, exp, it->second));
    }
    if (pile.empty()) throw contract_error("assemble_tokens: sample has no tokens");
    V stacked = pile.size() == 1 ? pile.front() : ctx.concat_rows(pile);
    return ctx.gather_rows(stacked, plan.final_to_pile);
}

}  // namespace mtfm
