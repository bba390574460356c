// datagen.hpp — synthetic multi-scenario dataset generation.
//
// Labels come from a planted logistic model: a linear term over hashed
// per-feature weights plus a low-rank user/item latent interaction, both
// scenario-specific. Per-task bias terms are calibrated so label marginals
// land on the configured positive rates. Everything is derived from the seed;
// per-user streams are forked so generation is order-independent.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtfm/schema.hpp"

namespace mtfm {

struct GeneratorConfig {
    int n_scenarios = 3;
    int n_users = 1000;
    int n_hist_seqs = 2;   // number of historical sequence types
    int n_rt_seqs = 1;     // number of realtime sequence types
    int seq_len_min = 4;   // per-sequence event count range
    int seq_len_max = 12;
    int exposures_min = 0;  // per (user, scenario); at least one exposure overall is forced
    int exposures_max = 4;
    double positive_rate = 0.25;  // target ctr marginal
    double cvr_rate = 0.30;       // target conversion rate among clicks
    double noise = 0.15;          // stddev of logit noise
    int base_vocab = 120;
    int item_vocab = 240;
    int latent_dim = 8;
    double signal_linear = 2.6;
    double signal_bilinear = 0.8;
    uint64_t seed = 1;

    void validate() const;
};

struct AggregationReport {
    size_t n_exposure_records = 0;
    size_t n_user_samples = 0;
    double compression_ratio = 0.0;  // exposure records per aggregated sample

    std::string to_string() const;
};

// Shared scenario-agnostic context for one user: the H and R sequences.
struct UserContext {
    std::vector<SequenceRecord> historical;
    std::vector<SequenceRecord> realtime;
};

// The two-stage aggregation pipeline: exposures are grouped per scenario,
// merged across scenarios per user, then joined with the shared sequences.
// Preserves the exposure multiset exactly.
std::vector<UserSample> aggregate_users(const Dataset& schema_ctx,
                                        const std::vector<std::pair<int64_t, Exposure>>& stream,
                                        const std::map<int64_t, UserContext>& shared_store,
                                        AggregationReport* report = nullptr);

// Builds schemas from the config and generates the full dataset through the
// aggregation pipeline. Identical (config, seed) pairs produce identical
// datasets, byte-for-byte after serialization.
Dataset generate_dataset(const GeneratorConfig& config, uint64_t seed);

inline Dataset generate_dataset(const GeneratorConfig& config) {
    return generate_dataset(config, config.seed);
}

// Observed positive-rate per (scenario, task), for rate-bound checks.
std::map<std::pair<int, std::string>, double> label_marginals(const Dataset& d);

}  // namespace mtfm
