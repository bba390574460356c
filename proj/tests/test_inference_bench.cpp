#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mtfm/bench.hpp"
#include "mtfm/datagen.hpp"
#include "mtfm/metrics.hpp"
#include "mtfm/prune.hpp"
#include "mtfm/subgraph.hpp"
#include "mtfm/verify.hpp"

using namespace mtfm;

namespace {

Dataset small_3scenario_dataset(uint64_t seed = 41) {
    GeneratorConfig gc;
    gc.n_scenarios = 3;
    gc.n_users = 30;
    gc.seq_len_min = 1;
    gc.seq_len_max = 4;
    gc.seed = seed;
    return generate_dataset(gc);
}

ModelConfig small_model_config() {
    ModelConfig mc;
    mc.hta.d_model = 32;
    mc.hta.blocks = 2;
    mc.hta.target_layers = 1;
    mc.hta.full_layers = 1;
    mc.hta.heads = 2;
    mc.hta.kv_heads = 1;
    mc.d_emb = 8;
    mc.d_expert = 16;
    return mc;
}

InferenceRequest request_from(const Dataset& d, const UserSample& donor, int sid, int n_cand,
                              uint64_t seed) {
    Rng rng(seed);
    const auto& sc = d.scenario(sid);
    InferenceRequest req;
    req.user_id = donor.user_id;
    req.scenario_id = sid;
    req.timestamp = 1600;
    req.historical_sequences = donor.historical_sequences;
    req.realtime_sequences = donor.realtime_sequences;
    auto draw = [&](const std::vector<int>& vocabs) {
        std::vector<int> ids;
        for (int v : vocabs) ids.push_back(static_cast<int>(rng.next_below(static_cast<uint64_t>(v))));
        return ids;
    };
    for (int c = 0; c < n_cand; ++c)
        req.candidates.push_back(
            {draw(sc.user_feature_vocabs), draw(sc.cross_feature_vocabs), draw(sc.item_feature_vocabs)});
    return req;
}

}  // namespace

TEST_CASE("subgraph: parameter count shrinks iff other scenarios exist") {
    auto d3 = small_3scenario_dataset();
    auto m3 = Model<double>::build(SchemaSet::from(d3), small_model_config(), 6);
    auto sub = extract_subgraph(m3, 1);
    CHECK(sub.scalar_count() < m3.params.scalar_count());
    // No parameter owned by another scenario leaks in.
    for (const auto& e : sub.params) {
        int owner = names::owner_scenario(e.name);
        CHECK((owner == -1 || owner == 1));
    }

    GeneratorConfig gc;
    gc.n_scenarios = 1;
    gc.n_users = 5;
    gc.seed = 42;
    Dataset d1 = generate_dataset(gc);
    auto m1 = Model<double>::build(SchemaSet::from(d1), small_model_config(), 6);
    auto sub1 = extract_subgraph(m1, 0);
    CHECK(sub1.scalar_count() == m1.params.scalar_count());
    CHECK(sub1.params.size() == m1.params.size());

    CHECK_THROWS_AS(extract_subgraph(m3, 17), config_error);
}

TEST_CASE("subgraph: predictions equal the full multi-scenario graph") {
    auto res = verify_subgraph(30, 4242);
    INFO(res.detail);
    CHECK(res.pass);
}

TEST_CASE("infer: single candidate equals the training-path singleton forward") {
    auto d = small_3scenario_dataset();
    auto model = Model<double>::build(SchemaSet::from(d), small_model_config(), 6);
    auto req = request_from(d, d.samples[0], 2, 1, 77);
    auto sub = extract_subgraph(model, 2);
    auto inferred = infer_request(model, sub, req);

    // Same tokens through the training path: one exposure, same timestamp.
    UserSample s;
    s.user_id = req.user_id;
    s.historical_sequences = req.historical_sequences;
    s.realtime_sequences = req.realtime_sequences;
    Exposure e;
    e.scenario_id = 2;
    e.user_features = req.candidates[0].user_features;
    e.cross_features = req.candidates[0].cross_features;
    e.item_features = req.candidates[0].item_features;
    e.timestamp = req.timestamp;
    for (const auto& t : d.scenario(2).tasks) e.labels[t] = 0;
    s.exposures = {e};
    auto trained_path = model.forward_sample(s);

    REQUIRE(inferred.size() == trained_path.size());
    for (const auto& a : inferred) {
        bool found = false;
        for (const auto& b : trained_path)
            if (a.task == b.task) {
                CHECK(std::fabs(a.probability - b.probability) <= 1e-6);
                found = true;
            }
        CHECK(found);
    }
}

TEST_CASE("infer: candidate count times task count records; permutation permutes") {
    auto d = small_3scenario_dataset();
    auto model = Model<double>::build(SchemaSet::from(d), small_model_config(), 6);
    auto req = request_from(d, d.samples[1], 1, 30, 78);
    auto sub = extract_subgraph(model, 1);
    auto recs = infer_request(model, sub, req);
    CHECK(recs.size() == 30 * d.scenario(1).tasks.size());
    for (const auto& r : recs) CHECK(r.label == -1);

    InferenceRequest perm = req;
    std::swap(perm.candidates[0], perm.candidates[17]);
    std::swap(perm.candidates[3], perm.candidates[29]);
    auto recs_perm = infer_request(model, sub, perm);
    auto prob_of = [](const std::vector<PredictionRecord>& rs, int cand, const std::string& task) {
        for (const auto& r : rs)
            if (r.exposure_index == cand && r.task == task) return r.probability;
        FAIL("record not found");
        return -1.0;
    };
    for (const auto& task : d.scenario(1).tasks) {
        CHECK(prob_of(recs, 0, task) == prob_of(recs_perm, 17, task));
        CHECK(prob_of(recs, 3, task) == prob_of(recs_perm, 29, task));
        CHECK(prob_of(recs, 5, task) == prob_of(recs_perm, 5, task));
    }
}

TEST_CASE("infer: scenario mismatch between request and subgraph is an integrity error") {
    auto d = small_3scenario_dataset();
    auto model = Model<double>::build(SchemaSet::from(d), small_model_config(), 6);
    auto req = request_from(d, d.samples[0], 1, 2, 79);
    auto sub0 = extract_subgraph(model, 0);
    CHECK_THROWS_AS(infer_request(model, sub0, req), integrity_error);
}

TEST_CASE("macs: analytic ratio hits the worked example and its edge cases") {
    auto ratio = [](int k, double n, double lt) { return (k * n * lt + n * n) / ((k + 1) * n * n); };
    CHECK(ratio(3, 1000, 50) == doctest::Approx(0.2875).epsilon(1e-12));
    CHECK(ratio(0, 512, 16) == 1.0);
    CHECK(ratio(5, 300, 300) == 1.0);  // L_T == N degenerates to full cost

    // count_macs agrees with the closed form for the attention buckets.
    HTAConfig hy;
    hy.d_model = 32;
    hy.heads = 2;
    hy.kv_heads = 1;
    hy.blocks = 2;
    hy.target_layers = 3;
    hy.full_layers = 1;
    HTAConfig fu = hy;
    fu.blocks = 2 * 4;
    fu.target_layers = 0;
    auto mh = count_macs(hy, 1000, 50);
    auto mf = count_macs(fu, 1000, 50);
    CHECK(static_cast<double>(mh.attention_total) / static_cast<double>(mf.attention_total) ==
          doctest::Approx(0.2875).epsilon(1e-12));
}

TEST_CASE("macs: instrumented forward counts equal the analytic model exactly") {
    HTAConfig cfg;
    cfg.d_model = 32;
    cfg.heads = 2;
    cfg.kv_heads = 1;
    cfg.blocks = 2;
    cfg.target_layers = 2;
    cfg.full_layers = 1;
    for (auto [n, lt] : std::vector<std::pair<size_t, size_t>>{{64, 8}, {128, 16}, {96, 96}}) {
        auto predicted = count_macs(cfg, n, lt);
        auto measured = instrumented_stack_forward<float>(cfg, n, lt, 5);
        CHECK(measured.total_attention() == predicted.attention_total);
        CHECK(measured.total_projection() == predicted.projection_total);
        REQUIRE(measured.layers.size() == predicted.layers.size());
        for (size_t i = 0; i < measured.layers.size(); ++i) {
            CHECK(measured.layers[i].attention == predicted.layers[i].attention);
            CHECK(measured.layers[i].projection == predicted.layers[i].projection);
        }
    }
}

TEST_CASE("prune: magnitude top-2 per group of 4, worked example") {
    Tensor<double> w(4, 1);
    w.at(0, 0) = 0.9;
    w.at(1, 0) = -0.8;
    w.at(2, 0) = 0.1;
    w.at(3, 0) = 0.05;
    auto rep = prune_2_4_inplace(w);
    CHECK(w.at(0, 0) == 0.9);
    CHECK(w.at(1, 0) == -0.8);
    CHECK(w.at(2, 0) == 0.0);
    CHECK(w.at(3, 0) == 0.0);
    CHECK(rep.groups_covered == 1);
    CHECK(rep.zeros_written == 2);
    CHECK(rep.exempt_tail_rows == 0);
}

TEST_CASE("prune: every covered group ends with exactly two zeros") {
    Rng rng(12);
    Tensor<double> w = RawLayer<double>::rand(rng, 32, 12, 1.0);
    auto rep = prune_2_4_inplace(w);
    CHECK(rep.groups_covered == 8 * 12);
    CHECK(check_2_4_pattern(w));
    for (size_t j = 0; j < w.cols(); ++j)
        for (size_t g = 0; g < 8; ++g) {
            int zeros = 0;
            for (size_t i = 0; i < 4; ++i)
                if (w.at(g * 4 + i, j) == 0.0) ++zeros;
            CHECK(zeros == 2);
        }
}

TEST_CASE("prune: partial trailing group is exempted and reported") {
    Rng rng(13);
    Tensor<double> w = RawLayer<double>::rand(rng, 6, 3, 1.0);
    Tensor<double> before = w;
    auto rep = prune_2_4_inplace(w);
    CHECK(rep.exempt_tail_rows == 2);
    CHECK(rep.groups_covered == 3);
    for (size_t j = 0; j < 3; ++j) {
        CHECK(w.at(4, j) == before.at(4, j));
        CHECK(w.at(5, j) == before.at(5, j));
    }
}

TEST_CASE("prune: empty matrix is a no-op with a warning flag") {
    Tensor<double> w;
    auto rep = prune_2_4_inplace(w);
    CHECK(rep.noop);
    CHECK(rep.groups_covered == 0);
}

TEST_CASE("prune: pruned model stays evaluable and reports degradation") {
    auto d = small_3scenario_dataset(91);
    auto model = Model<double>::build(SchemaSet::from(d), small_model_config(), 14);
    auto collect = [&]() {
        std::vector<PredictionRecord> recs;
        for (const auto& s : d.samples)
            for (auto& r : model.forward_sample(s)) recs.push_back(std::move(r));
        return recs;
    };
    double loss_before = multitask_loss(collect());

    auto rep = prune_model_projections(model.params);
    CHECK(!rep.pruned_params.empty());
    CHECK(rep.groups_covered > 0);
    for (const auto& name : rep.pruned_params) CHECK(check_2_4_pattern(model.params.at(name).value));
    // Non-projection parameters (biases, GLN, embeddings, heads) untouched.
    for (const auto& e : model.params)
        if (!is_projection_param(e.name)) CHECK(!e.name.empty());

    auto recs = collect();
    double loss_after = multitask_loss(recs);
    for (const auto& r : recs) {
        CHECK(std::isfinite(r.probability));
        CHECK(r.probability > 0.0);
        CHECK(r.probability < 1.0);
    }
    // Degradation is reported, not asserted against a threshold.
    INFO("loss before " << loss_before << " after " << loss_after);
    CHECK(std::isfinite(loss_after));
}

TEST_CASE("bench: MAC ordering is monotone and the lazy decoder is labeled") {
    BenchConfig bc;
    bc.configs = default_bench_configs(32, 2, 2);
    bc.sizes = {{96, 8}};
    bc.reps = 1;
    auto rows = run_bench<float>(bc);
    REQUIRE(!rows.empty());
    for (const auto& r : rows) CHECK(r.macs_exact);
    CHECK(check_mac_monotonicity(rows));
    bool lazy_found = false;
    for (const auto& r : rows)
        if (r.label.find("lazy-decoder") != std::string::npos) lazy_found = true;
    CHECK(lazy_found);

    auto table = format_bench_table(rows);
    CHECK(table.find("attention_MACs") != std::string::npos);
    CHECK(table.find("lazy-decoder") != std::string::npos);
}

TEST_CASE("bench: K/V projection parameters shrink by exactly H/G") {
    HTAConfig mha;
    mha.d_model = 64;
    mha.heads = 4;
    mha.kv_heads = 4;
    HTAConfig gqa = mha;
    gqa.kv_heads = 1;
    CHECK(kv_projection_param_count(mha) == 4 * kv_projection_param_count(gqa));
}
