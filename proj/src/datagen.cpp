#include "mtfm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mtfm/rng.hpp"

namespace mtfm {

void GeneratorConfig::validate() const {
    if (n_scenarios < 1) throw config_error("generator: n_scenarios must be >= 1");
    if (n_users < 1) throw config_error("generator: n_users must be >= 1");
    if (n_hist_seqs < 0 || n_rt_seqs < 0) throw config_error("generator: negative sequence count");
    if (seq_len_min < 0 || seq_len_max < seq_len_min)
        throw config_error("generator: bad sequence length range");
    if (exposures_min < 0 || exposures_max < std::max(exposures_min, 1))
        throw config_error("generator: bad exposure count range");
    if (positive_rate <= 0.0 || positive_rate >= 1.0)
        throw config_error("generator: positive_rate must be in (0,1)");
    if (cvr_rate <= 0.0 || cvr_rate >= 1.0) throw config_error("generator: cvr_rate not in (0,1)");
    if (noise < 0.0) throw config_error("generator: negative noise");
    if (base_vocab < 2 || item_vocab < 2) throw config_error("generator: vocab too small");
    if (latent_dim < 1) throw config_error("generator: latent_dim must be >= 1");
}

std::string AggregationReport::to_string() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu exposures -> %zu user samples (%.1fx fewer records than unaggregated)",
                  n_exposure_records, n_user_samples, compression_ratio);
    return buf;
}

namespace {

// Window layout in abstract ticks. Historical events stay strictly before the
// aggregation window; realtime events may overlap and postdate exposures.
constexpr int64_t kWindowStart = 1000;
constexpr int64_t kWindowEnd = 2000;
constexpr int64_t kRealtimeStart = 700;

std::vector<std::string> tasks_for_scenario(int s) {
    // Scenario 1 carries the four-task coupon-style objective set; all others
    // are plain ctr/ctcvr surfaces.
    if (s == 1) return {"ctr", "ctcvr", "imd", "write"};
    return {"ctr", "ctcvr"};
}

// Hash-indexed standard normal, the planted model's weight source. Two
// independent draws are burned so the value is well mixed.
double planted_normal(uint64_t seed, uint64_t key) {
    uint64_t st = seed ^ (key * 0x9E3779B97f4A7C15ULL);
    uint64_t a = splitmix64(st);
    uint64_t b = splitmix64(st);
    double u1 = static_cast<double>(a >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
}

uint64_t feature_key(int scenario, int block, int slot, int id, uint64_t task_salt) {
    uint64_t k = 0xD1B54A32D192ED03ULL;
    k = k * 0x100000001B3ULL + static_cast<uint64_t>(scenario + 1);
    k = k * 0x100000001B3ULL + static_cast<uint64_t>(block + 1);
    k = k * 0x100000001B3ULL + static_cast<uint64_t>(slot + 1);
    k = k * 0x100000001B3ULL + static_cast<uint64_t>(id + 1);
    k = k * 0x100000001B3ULL + task_salt;
    return k;
}

uint64_t task_salt(const std::string& task) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : task) h = (h ^ static_cast<uint64_t>(c)) * 0x100000001B3ULL;
    return h;
}

struct PlantedModel {
    uint64_t seed;
    const GeneratorConfig* cfg;

    // Linear contribution: mean of per-id weights over all feature slots.
    double linear_term(const ScenarioSchema& sc, const Exposure& e, uint64_t salt) const {
        double sum = 0.0;
        int n = 0;
        auto eat = [&](const std::vector<int>& ids, int block) {
            for (size_t slot = 0; slot < ids.size(); ++slot) {
                sum += planted_normal(seed, feature_key(sc.scenario_id, block, static_cast<int>(slot),
                                                        ids[slot], salt));
                ++n;
            }
        };
        eat(e.user_features, 0);
        eat(e.cross_features, 1);
        eat(e.item_features, 2);
        return n > 0 ? sum / std::sqrt(static_cast<double>(n)) : 0.0;
    }

    // Low-rank interaction between user-side and item-side latents.
    double bilinear_term(const ScenarioSchema& sc, const Exposure& e, uint64_t salt) const {
        const int L = cfg->latent_dim;
        double dot = 0.0;
        for (int l = 0; l < L; ++l) {
            double u = 0.0, v = 0.0;
            for (size_t slot = 0; slot < e.user_features.size(); ++slot)
                u += planted_normal(seed, feature_key(sc.scenario_id, 10 + l, static_cast<int>(slot),
                                                      e.user_features[slot], salt));
            for (size_t slot = 0; slot < e.item_features.size(); ++slot)
                v += planted_normal(seed, feature_key(sc.scenario_id, 40 + l, static_cast<int>(slot),
                                                      e.item_features[slot], salt));
            u /= std::sqrt(std::max<size_t>(e.user_features.size(), 1));
            v /= std::sqrt(std::max<size_t>(e.item_features.size(), 1));
            dot += u * v;
        }
        return dot / std::sqrt(static_cast<double>(L));
    }

    double raw_logit(const ScenarioSchema& sc, const Exposure& e, const std::string& task,
                     double noise_draw) const {
        uint64_t salt = task_salt(task);
        return cfg->signal_linear * linear_term(sc, e, salt) +
               cfg->signal_bilinear * bilinear_term(sc, e, salt) + cfg->noise * noise_draw;
    }
};

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Bias such that mean sigmoid(logit + bias) == target.
double calibrate_bias(const std::vector<double>& logits, double target) {
    if (logits.empty()) return 0.0;
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        double mean = 0.0;
        for (double l : logits) mean += sigmoid(l + mid);
        mean /= static_cast<double>(logits.size());
        if (mean < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<int> draw_features(Rng& rng, const std::vector<int>& vocabs) {
    std::vector<int> ids(vocabs.size());
    for (size_t i = 0; i < vocabs.size(); ++i)
        ids[i] = static_cast<int>(rng.next_below(static_cast<uint64_t>(vocabs[i])));
    return ids;
}

SequenceRecord draw_sequence(Rng& rng, const SequenceSchema& schema, int len, int64_t ts_lo,
                             int64_t ts_hi) {
    SequenceRecord rec;
    rec.seq_schema_id = schema.seq_id;
    std::vector<int64_t> ts(len);
    for (int i = 0; i < len; ++i)
        ts[i] = ts_lo + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(ts_hi - ts_lo)));
    std::sort(ts.begin(), ts.end());
    for (int i = 0; i < len; ++i) {
        BehaviorEvent ev;
        ev.timestamp = ts[i];
        ev.item_features = draw_features(rng, schema.feature_vocabs);
        rec.events.push_back(std::move(ev));
    }
    return rec;
}

}  // namespace

std::vector<UserSample> aggregate_users(const Dataset& schema_ctx,
                                        const std::vector<std::pair<int64_t, Exposure>>& stream,
                                        const std::map<int64_t, UserContext>& shared_store,
                                        AggregationReport* report) {
    // Stage 1: group exposures per (user, scenario) inside each scenario,
    // preserving stream order; unknown schema ids fail fast.
    std::map<int, std::map<int64_t, std::vector<Exposure>>> per_scenario;
    for (const auto& [uid, e] : stream) {
        if (!schema_ctx.has_scenario(e.scenario_id))
            throw integrity_error("aggregate: exposure references unknown scenario " +
                                  std::to_string(e.scenario_id));
        if (shared_store.find(uid) == shared_store.end())
            throw integrity_error("aggregate: exposure references unknown user " +
                                  std::to_string(uid));
        per_scenario[e.scenario_id][uid].push_back(e);
    }

    // Stage 2: merge scenario groups per user, then join with shared H/R.
    std::map<int64_t, UserSample> merged;
    for (auto& [sid, by_user] : per_scenario) {
        for (auto& [uid, exposures] : by_user) {
            UserSample& s = merged[uid];
            s.user_id = uid;
            for (auto& e : exposures) s.exposures.push_back(std::move(e));
        }
    }

    std::vector<UserSample> out;
    out.reserve(merged.size());
    size_t total = 0;
    for (auto& [uid, sample] : merged) {
        const UserContext& ctx = shared_store.at(uid);
        sample.historical_sequences = ctx.historical;
        sample.realtime_sequences = ctx.realtime;
        total += sample.exposures.size();
        out.push_back(std::move(sample));
    }

    if (report) {
        report->n_exposure_records = total;
        report->n_user_samples = out.size();
        report->compression_ratio =
            out.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(out.size());
    }
    return out;
}

Dataset generate_dataset(const GeneratorConfig& config, uint64_t seed) {
    config.validate();

    Dataset d;
    d.format_version = 1;

    // Schemas are intentionally heterogeneous: slot counts and vocab sizes
    // vary per scenario and per sequence type.
    for (int i = 0; i < config.n_hist_seqs; ++i) {
        SequenceSchema s;
        s.seq_id = i;
        int slots = 2 + (i % 2);
        for (int j = 0; j < slots; ++j) s.feature_vocabs.push_back(config.item_vocab + 17 * i + 5 * j);
        d.hist_seq_schemas.push_back(std::move(s));
    }
    for (int i = 0; i < config.n_rt_seqs; ++i) {
        SequenceSchema s;
        s.seq_id = i;
        int slots = 2;
        for (int j = 0; j < slots; ++j) s.feature_vocabs.push_back(config.item_vocab + 23 * i + 3 * j);
        d.rt_seq_schemas.push_back(std::move(s));
    }
    for (int s = 0; s < config.n_scenarios; ++s) {
        ScenarioSchema sc;
        sc.scenario_id = s;
        int n_user = 2 + (s % 3);
        int n_cross = 1 + ((s + 1) % 2);
        int n_item = 2 + ((s + 2) % 3);
        for (int j = 0; j < n_user; ++j) sc.user_feature_vocabs.push_back(config.base_vocab + 37 * s + 13 * j);
        for (int j = 0; j < n_cross; ++j) sc.cross_feature_vocabs.push_back(config.base_vocab / 2 + 19 * s + 7 * j);
        for (int j = 0; j < n_item; ++j) sc.item_feature_vocabs.push_back(config.item_vocab + 29 * s + 11 * j);
        sc.tasks = tasks_for_scenario(s);
        d.scenarios.push_back(std::move(sc));
    }
    validate_schemas(d);

    PlantedModel model{seed, &config};
    Rng root(seed);

    // Funnel stages and their target conditional rates.
    struct Stage {
        std::string task;
        std::string parent;  // empty = unconditional
        double rate;
    };
    auto stages_for = [&](int sid) {
        std::vector<Stage> st = {{"ctr", "", config.positive_rate}, {"ctcvr", "ctr", config.cvr_rate}};
        for (const auto& t : d.scenarios[static_cast<size_t>(sid)].tasks) {
            if (t == "imd") st.push_back({"imd", "ctcvr", 0.5});
            if (t == "write") st.push_back({"write", "ctcvr", 0.7});
        }
        return st;
    };

    // Pass 1: draw features, sequences and raw (uncalibrated) logits.
    struct PendingExposure {
        int64_t user_id;
        Exposure exposure;
        std::map<std::string, double> logits;
    };
    std::vector<PendingExposure> pending;
    std::map<int64_t, UserContext> store;

    for (int u = 0; u < config.n_users; ++u) {
        Rng rng = root.fork(static_cast<uint64_t>(u) + 1);
        int64_t uid = u;
        UserContext ctx;
        for (const auto& schema : d.hist_seq_schemas) {
            int len = rng.next_int(config.seq_len_min, config.seq_len_max);
            ctx.historical.push_back(draw_sequence(rng, schema, len, 0, kWindowStart));
        }
        for (const auto& schema : d.rt_seq_schemas) {
            int len = rng.next_int(config.seq_len_min, config.seq_len_max);
            ctx.realtime.push_back(draw_sequence(rng, schema, len, kRealtimeStart, kWindowEnd));
        }
        store.emplace(uid, std::move(ctx));

        // Scenario-level user attributes are fixed per (user, scenario).
        std::vector<std::vector<int>> user_feats;
        for (const auto& sc : d.scenarios) user_feats.push_back(draw_features(rng, sc.user_feature_vocabs));

        std::vector<int> counts(d.scenarios.size());
        int total = 0;
        for (size_t s = 0; s < d.scenarios.size(); ++s) {
            counts[s] = rng.next_int(config.exposures_min, config.exposures_max);
            total += counts[s];
        }
        if (total == 0) counts[rng.next_below(counts.size())] = 1;  // every user has >= 1 exposure

        for (size_t s = 0; s < d.scenarios.size(); ++s) {
            const ScenarioSchema& sc = d.scenarios[s];
            for (int k = 0; k < counts[s]; ++k) {
                PendingExposure pe;
                pe.user_id = uid;
                pe.exposure.scenario_id = sc.scenario_id;
                pe.exposure.user_features = user_feats[s];
                pe.exposure.cross_features = draw_features(rng, sc.cross_feature_vocabs);
                pe.exposure.item_features = draw_features(rng, sc.item_feature_vocabs);
                pe.exposure.timestamp =
                    kWindowStart + static_cast<int64_t>(rng.next_below(kWindowEnd - kWindowStart));
                for (const auto& stage : stages_for(sc.scenario_id))
                    pe.logits[stage.task] = model.raw_logit(sc, pe.exposure, stage.task, rng.normal());
                pending.push_back(std::move(pe));
            }
        }
    }

    // Pass 2: calibrate per (scenario, task) bias so marginals hit targets.
    std::map<std::pair<int, std::string>, double> bias;
    for (const auto& sc : d.scenarios) {
        for (const auto& stage : stages_for(sc.scenario_id)) {
            std::vector<double> logits;
            for (const auto& pe : pending)
                if (pe.exposure.scenario_id == sc.scenario_id) logits.push_back(pe.logits.at(stage.task));
            bias[{sc.scenario_id, stage.task}] = calibrate_bias(logits, stage.rate);
        }
    }

    // Pass 3: draw labels with the funnel structure (ctcvr=1 implies ctr=1).
    std::vector<std::pair<int64_t, Exposure>> stream;
    stream.reserve(pending.size());
    for (size_t i = 0; i < pending.size(); ++i) {
        PendingExposure& pe = pending[i];
        Rng lrng = root.fork(0x10000000ULL + i);
        std::map<std::string, int> y;
        for (const auto& stage : stages_for(pe.exposure.scenario_id)) {
            double p = sigmoid(pe.logits.at(stage.task) + bias.at({pe.exposure.scenario_id, stage.task}));
            int draw = lrng.bernoulli(p) ? 1 : 0;
            int parent_ok = stage.parent.empty() ? 1 : y.at(stage.parent);
            y[stage.task] = parent_ok * draw;
        }
        pe.exposure.labels = std::move(y);
        stream.emplace_back(pe.user_id, std::move(pe.exposure));
    }

    AggregationReport report;
    d.samples = aggregate_users(d, stream, store, &report);
    validate_dataset(d);
    return d;
}

std::map<std::pair<int, std::string>, double> label_marginals(const Dataset& d) {
    std::map<std::pair<int, std::string>, std::pair<long, long>> counts;  // (positives, total)
    for (const auto& s : d.samples) {
        for (const auto& e : s.exposures) {
            for (const auto& [task, y] : e.labels) {
                auto& c = counts[{e.scenario_id, task}];
                c.first += y;
                c.second += 1;
            }
        }
    }
    std::map<std::pair<int, std::string>, double> out;
    for (const auto& [key, c] : counts)
        out[key] = c.second > 0 ? static_cast<double>(c.first) / static_cast<double>(c.second) : 0.0;
    return out;
}

}  // namespace mtfm
