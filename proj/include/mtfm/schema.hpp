// schema.hpp — multi-scenario feature schemas and the aggregated sample types.
//
// Scenarios deliberately differ in feature counts, vocabulary sizes and task
// lists; nothing here requires cross-scenario alignment.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtfm/errors.hpp"

namespace mtfm {

// Feature layout of one behavior sequence (historical or realtime). Every
// event in a sequence of this schema carries one id per vocabulary slot.
struct SequenceSchema {
    int seq_id = 0;
    std::vector<int> feature_vocabs;

    bool operator==(const SequenceSchema&) const = default;
};

// Feature layout and task list of one recommendation scenario.
struct ScenarioSchema {
    int scenario_id = 0;
    std::vector<int> user_feature_vocabs;
    std::vector<int> cross_feature_vocabs;
    std::vector<int> item_feature_vocabs;
    std::vector<std::string> tasks;  // ordered, e.g. {"ctr", "ctcvr"}

    bool has_task(const std::string& t) const {
        for (const auto& x : tasks)
            if (x == t) return true;
        return false;
    }

    bool operator==(const ScenarioSchema&) const = default;
};

// One action in a behavior sequence. Feature ids follow the owning
// SequenceSchema; timestamps are abstract integer ticks (only order matters).
struct BehaviorEvent {
    std::vector<int> item_features;
    int64_t timestamp = 0;

    bool operator==(const BehaviorEvent&) const = default;
};

struct SequenceRecord {
    int seq_schema_id = 0;
    std::vector<BehaviorEvent> events;

    bool operator==(const SequenceRecord&) const = default;
};

// One impression of a candidate item to a user in a scenario, with labels.
struct Exposure {
    int scenario_id = 0;
    std::vector<int> user_features;
    std::vector<int> cross_features;
    std::vector<int> item_features;
    int64_t timestamp = 0;
    std::map<std::string, int> labels;  // task name -> {0,1}

    bool operator==(const Exposure&) const = default;
};

// One aggregated training record: a user's shared behavior sequences plus all
// of their exposures across scenarios within one aggregation window.
struct UserSample {
    int64_t user_id = 0;
    std::vector<SequenceRecord> historical_sequences;
    std::vector<SequenceRecord> realtime_sequences;
    std::vector<Exposure> exposures;

    bool operator==(const UserSample&) const = default;
};

// Exposure-shaped candidate without labels, used at inference time.
struct Candidate {
    std::vector<int> user_features;
    std::vector<int> cross_features;
    std::vector<int> item_features;

    bool operator==(const Candidate&) const = default;
};

// Request-level aggregation: all candidates share one scenario and timestamp.
struct InferenceRequest {
    int64_t user_id = 0;
    int scenario_id = 0;
    int64_t timestamp = 0;
    std::vector<SequenceRecord> historical_sequences;
    std::vector<SequenceRecord> realtime_sequences;
    std::vector<Candidate> candidates;
};

struct Dataset {
    int format_version = 1;
    std::vector<SequenceSchema> hist_seq_schemas;
    std::vector<SequenceSchema> rt_seq_schemas;
    std::vector<ScenarioSchema> scenarios;
    std::vector<UserSample> samples;

    const ScenarioSchema& scenario(int scenario_id) const;
    const SequenceSchema& hist_schema(int seq_id) const;
    const SequenceSchema& rt_schema(int seq_id) const;
    bool has_scenario(int scenario_id) const;

    bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// Validation. Throws integrity_error / config_error on the first violation.
// ---------------------------------------------------------------------------

void validate_schema(const ScenarioSchema& s);
void validate_schemas(const Dataset& d);

// Checks every UserSample invariant: event ordering, feature id ranges,
// historical-before-window, label completeness, ctr/ctcvr funnel consistency.
void validate_sample(const Dataset& d, const UserSample& s);
void validate_dataset(const Dataset& d);

// Candidates must share one scenario and one timestamp.
void validate_request(const Dataset& d, const InferenceRequest& r);

// Order-insensitive fingerprint of the multiset of exposures; aggregation must
// preserve it exactly.
uint64_t exposure_multiset_fingerprint(const std::vector<std::pair<int64_t, Exposure>>& tagged);
uint64_t exposure_multiset_fingerprint(const std::vector<UserSample>& samples);

}  // namespace mtfm
