#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mtfm/metrics.hpp"
#include "mtfm/model.hpp"
#include "mtfm/verify.hpp"

using namespace mtfm;

namespace {

// All-pairs rank oracle with 0.5 credit for ties.
double auc_oracle(const std::vector<PredictionRecord>& recs) {
    double wins = 0;
    size_t pairs = 0;
    for (const auto& p : recs) {
        if (p.label != 1) continue;
        for (const auto& n : recs) {
            if (n.label != 0) continue;
            ++pairs;
            if (p.probability > n.probability) wins += 1.0;
            else if (p.probability == n.probability) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

PredictionRecord rec(double p, int label, int64_t user = 0, const char* task = "ctr") {
    PredictionRecord r;
    r.user_id = user;
    r.task = task;
    r.probability = p;
    r.label = label;
    return r;
}

}  // namespace

TEST_CASE("mmoe: a four-task scenario yields four records per T token") {
    auto model = Model<double>::build(micro_schemas(), micro_model_config(), 9);
    UserSample s = micro_sample();
    s.exposures = {s.exposures[2]};  // the scenario-1 exposure (4 tasks)
    auto recs = model.forward_sample(s);
    REQUIRE(recs.size() == 4);
    std::set<std::string> tasks;
    for (const auto& r : recs) tasks.insert(r.task);
    CHECK(tasks == std::set<std::string>{"ctr", "ctcvr", "imd", "write"});
}

TEST_CASE("mmoe: uniform gate over identical experts equals a single expert") {
    ModelConfig one = micro_model_config();
    one.experts = 1;
    ModelConfig many = micro_model_config();
    many.experts = 3;

    auto m1 = Model<double>::build(micro_schemas(), one, 9);
    auto m3 = Model<double>::build(micro_schemas(), many, 9);

    // Copy every shared parameter name from m1 into m3, clone expert 0 into
    // all experts, and zero all gates (softmax of zeros is uniform).
    for (auto& e : m3.params) {
        if (e.name.rfind("head/expert", 0) == 0) {
            const std::string suffix = e.name.substr(e.name.find('_'));  // "_w" or "_b"
            e.value = m1.params.at("head/expert0" + suffix).value;
        } else if (e.name.find("/gate_") != std::string::npos) {
            e.value.fill(0.0);
        } else {
            e.value = m1.params.at(e.name).value;
        }
    }
    for (auto& e : m1.params)
        if (e.name.find("/gate_") != std::string::npos) e.value.fill(0.0);

    auto a = m1.forward_sample(micro_sample());
    auto b = m3.forward_sample(micro_sample());
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].probability == doctest::Approx(b[i].probability).epsilon(1e-12));
}

TEST_CASE("mmoe: unknown scenario is a configuration error") {
    auto model = Model<double>::build(micro_schemas(), micro_model_config(), 9);

    // Head level: a T token whose scenario has no registered tasks.
    using Ctx = EvalCtx<double>;
    Ctx ctx;
    auto refs = model.bind_eval(model.params);
    Tensor<double> rows(1, static_cast<size_t>(model.cfg.hta.d_model));
    std::vector<TokenMeta> metas = {{TokenKind::T, 9, 1000, 0}};
    CHECK_THROWS_AS(mmoe_forward(ctx, Ctx::borrow(rows), metas, model.schemas.tasks_by_scenario(),
                                 refs.heads),
                    config_error);

    // Tokenizer level: an exposure referencing an unregistered scenario.
    UserSample s = micro_sample();
    s.exposures[0].scenario_id = 9;
    CHECK_THROWS_AS(model.forward_sample(s), integrity_error);
}

TEST_CASE("mmoe: predictions are isolated from other scenarios' head weights") {
    auto model = Model<double>::build(micro_schemas(), micro_model_config(), 9);
    UserSample s = micro_sample();
    auto before = model.forward_sample(s);

    // Perturb every scenario-1 gate/tower; scenario-0 records must not move.
    Rng rng(4);
    for (auto& e : model.params) {
        if (e.name.rfind("head/s1/", 0) == 0)
            for (size_t i = 0; i < e.value.size(); ++i) e.value[i] += rng.uniform(0.1, 0.5);
    }
    auto after = model.forward_sample(s);
    REQUIRE(after.size() == before.size());
    for (size_t i = 0; i < before.size(); ++i) {
        if (before[i].scenario_id == 0)
            CHECK(after[i].probability == before[i].probability);  // bitwise
        else
            CHECK(after[i].probability != before[i].probability);
    }
}

TEST_CASE("softmax gate rows form a simplex for arbitrary inputs") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<double> x(4, 5);
        for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-60, 60);
        auto p = softmax_rows(x);
        for (size_t i = 0; i < 4; ++i) {
            double sum = 0;
            for (size_t j = 0; j < 5; ++j) {
                CHECK(p.at(i, j) >= 0.0);
                sum += p.at(i, j);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("loss: exact predictions give (clamped) zero, p=0.5 gives ln 2") {
    std::vector<PredictionRecord> exact = {rec(1.0 - 1e-12, 1), rec(1e-12, 0)};
    CHECK(multitask_loss(exact) < 1e-6);
    std::vector<PredictionRecord> half = {rec(0.5, 1), rec(0.5, 0), rec(0.5, 1)};
    CHECK(multitask_loss(half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("loss: empty record set is a contract error") {
    CHECK_THROWS_AS(multitask_loss({}), contract_error);
    std::vector<PredictionRecord> unlabeled = {rec(0.5, -1)};
    CHECK_THROWS_AS(multitask_loss(unlabeled), contract_error);
}

TEST_CASE("loss: training-path loss matches the scalar record loop") {
    auto model = Model<double>::build(micro_schemas(), micro_model_config(), 9);
    UserSample s = micro_sample();

    Tape<double> tape;
    auto refs = model.bind_tape(tape, model.params, nullptr);
    std::unique_ptr<StackGeom<double>> geom;
    auto sl = model.build_loss(tape, refs, s, geom);
    double tape_loss = tape.val(sl.loss).at(0, 0);

    auto recs = model.forward_sample(s);
    CHECK(std::fabs(tape_loss - multitask_loss(recs)) < 1e-9);
}

TEST_CASE("auc: perfect separation scores 1.0, anti-separation 0.0") {
    std::vector<PredictionRecord> recs = {rec(0.9, 1), rec(0.8, 1), rec(0.3, 0), rec(0.1, 0)};
    CHECK(*auc(recs) == 1.0);
    for (auto& r : recs) r.label = 1 - r.label;
    CHECK(*auc(recs) == 0.0);
}

TEST_CASE("auc: label-independent scores sit near 0.5") {
    Rng rng(8);
    std::vector<PredictionRecord> recs;
    for (int i = 0; i < 4000; ++i) recs.push_back(rec(rng.next_double(), rng.bernoulli(0.3) ? 1 : 0));
    CHECK(std::fabs(*auc(recs) - 0.5) < 0.03);
}

TEST_CASE("auc: six-record tie fixture matches the hand-computed midrank value") {
    std::vector<PredictionRecord> recs = {rec(0.9, 1), rec(0.1, 0), rec(0.5, 1),
                                          rec(0.5, 0), rec(0.8, 1), rec(0.3, 0)};
    // Pairs: 0.9 beats all 3; 0.5 beats 0.1 and 0.3, ties 0.5; 0.8 beats all 3.
    const double want = (3.0 + 2.5 + 3.0) / 9.0;
    CHECK(*auc(recs) == doctest::Approx(want).epsilon(1e-15));
    CHECK(*auc(recs) == doctest::Approx(auc_oracle(recs)).epsilon(1e-15));
}

TEST_CASE("auc: invariant under strictly monotone score transforms") {
    Rng rng(9);
    std::vector<PredictionRecord> recs;
    for (int i = 0; i < 300; ++i) {
        double p = rng.next_double();
        recs.push_back(rec(p, rng.bernoulli(p) ? 1 : 0));
    }
    double base = *auc(recs);
    for (auto& r : recs) r.probability = 0.1 + 0.5 * r.probability;  // strictly increasing
    CHECK(*auc(recs) == base);
}

TEST_CASE("auc/gauc: degenerate label distributions are explicitly not computable") {
    std::vector<PredictionRecord> all_pos = {rec(0.9, 1), rec(0.2, 1)};
    CHECK(!auc(all_pos).has_value());
    CHECK(!gauc(all_pos).has_value());
}

TEST_CASE("gauc: single-user data reduces to that user's AUC") {
    Rng rng(10);
    std::vector<PredictionRecord> recs;
    for (int i = 0; i < 40; ++i) recs.push_back(rec(rng.next_double(), rng.bernoulli(0.4) ? 1 : 0, 7));
    REQUIRE(auc(recs).has_value());
    CHECK(*gauc(recs) == *auc(recs));
}

TEST_CASE("gauc: exposure-count weighting over users with both classes") {
    std::vector<PredictionRecord> recs;
    // User 1: AUC 1.0 with 2 records. User 2: AUC 0.0 with 4 records.
    recs.push_back(rec(0.9, 1, 1));
    recs.push_back(rec(0.1, 0, 1));
    recs.push_back(rec(0.1, 1, 2));
    recs.push_back(rec(0.2, 1, 2));
    recs.push_back(rec(0.8, 0, 2));
    recs.push_back(rec(0.9, 0, 2));
    // User 3: single class, excluded.
    recs.push_back(rec(0.5, 1, 3));
    CHECK(*gauc(recs) == doctest::Approx((2.0 * 1.0 + 4.0 * 0.0) / 6.0).epsilon(1e-15));
}

TEST_CASE("auc/gauc: 50 random fixtures against the all-pairs oracle") {
    Rng rng(11);
    for (int f = 0; f < 50; ++f) {
        std::vector<PredictionRecord> recs;
        const int n = rng.next_int(4, 40);
        bool has_pos = false, has_neg = false;
        for (int i = 0; i < n; ++i) {
            // Coarse grid of scores forces plenty of ties.
            double p = static_cast<double>(rng.next_int(0, 8)) / 8.0;
            int label = rng.bernoulli(0.5) ? 1 : 0;
            has_pos |= label == 1;
            has_neg |= label == 0;
            recs.push_back(rec(p, label, rng.next_int(0, 3)));
        }
        if (!has_pos || !has_neg) {
            CHECK(!auc(recs).has_value());
            continue;
        }
        CHECK(std::fabs(*auc(recs) - auc_oracle(recs)) <= 1e-12);

        // GAUC against a per-user oracle loop.
        std::map<int64_t, std::vector<PredictionRecord>> by_user;
        for (const auto& r : recs) by_user[r.user_id].push_back(r);
        double num = 0, den = 0;
        for (const auto& [uid, urecs] : by_user) {
            bool p = false, ng = false;
            for (const auto& r : urecs) {
                p |= r.label == 1;
                ng |= r.label == 0;
            }
            if (!p || !ng) continue;
            num += static_cast<double>(urecs.size()) * auc_oracle(urecs);
            den += static_cast<double>(urecs.size());
        }
        auto g = gauc(recs);
        if (den == 0) {
            CHECK(!g.has_value());
        } else {
            REQUIRE(g.has_value());
            CHECK(std::fabs(*g - num / den) <= 1e-12);
        }
    }
}

TEST_CASE("metrics report: table lists every (scenario, task) group") {
    std::vector<PredictionRecord> recs;
    recs.push_back(rec(0.7, 1, 1));
    recs.push_back(rec(0.2, 0, 1));
    auto r2 = rec(0.6, 1, 2, "ctcvr");
    r2.scenario_id = 1;
    recs.push_back(r2);
    auto rows = evaluate_by_task(recs);
    CHECK(rows.size() == 2);
    auto table = format_metrics_table(rows);
    CHECK(table.find("ctr") != std::string::npos);
    CHECK(table.find("ctcvr") != std::string::npos);
    CHECK(table.find("n/a") != std::string::npos);  // single-class group
}
