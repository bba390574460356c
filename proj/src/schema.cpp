#include "mtfm/schema.hpp"

#include <algorithm>
#include <set>

namespace mtfm {

const ScenarioSchema& Dataset::scenario(int scenario_id) const {
    for (const auto& s : scenarios)
        if (s.scenario_id == scenario_id) return s;
    throw integrity_error("unknown scenario id " + std::to_string(scenario_id));
}

const SequenceSchema& Dataset::hist_schema(int seq_id) const {
    for (const auto& s : hist_seq_schemas)
        if (s.seq_id == seq_id) return s;
    throw integrity_error("unknown historical sequence schema " + std::to_string(seq_id));
}

const SequenceSchema& Dataset::rt_schema(int seq_id) const {
    for (const auto& s : rt_seq_schemas)
        if (s.seq_id == seq_id) return s;
    throw integrity_error("unknown realtime sequence schema " + std::to_string(seq_id));
}

bool Dataset::has_scenario(int scenario_id) const {
    for (const auto& s : scenarios)
        if (s.scenario_id == scenario_id) return true;
    return false;
}

void validate_schema(const ScenarioSchema& s) {
    if (s.tasks.empty())
        throw config_error("scenario " + std::to_string(s.scenario_id) + ": empty task list");
    auto check_vocabs = [&](const std::vector<int>& v, const char* which) {
        for (int n : v)
            if (n < 2)
                throw config_error("scenario " + std::to_string(s.scenario_id) + ": " + which +
                                   " vocab size " + std::to_string(n) + " < 2");
    };
    check_vocabs(s.user_feature_vocabs, "user");
    check_vocabs(s.cross_feature_vocabs, "cross");
    check_vocabs(s.item_feature_vocabs, "item");
}

void validate_schemas(const Dataset& d) {
    std::set<int> seen;
    for (const auto& s : d.scenarios) {
        if (!seen.insert(s.scenario_id).second)
            throw config_error("duplicate scenario id " + std::to_string(s.scenario_id));
        validate_schema(s);
    }
    auto check_seq = [](const std::vector<SequenceSchema>& schemas, const char* kind) {
        std::set<int> ids;
        for (const auto& s : schemas) {
            if (!ids.insert(s.seq_id).second)
                throw config_error(std::string("duplicate ") + kind + " sequence schema id");
            for (int n : s.feature_vocabs)
                if (n < 2) throw config_error(std::string(kind) + " sequence vocab size < 2");
        }
    };
    check_seq(d.hist_seq_schemas, "historical");
    check_seq(d.rt_seq_schemas, "realtime");
}

namespace {

void validate_events(const SequenceSchema& schema, const SequenceRecord& rec, int64_t user_id) {
    int64_t prev = -1;
    for (const auto& ev : rec.events) {
        if (ev.timestamp < 0)
            throw integrity_error("user " + std::to_string(user_id) + ": negative timestamp");
        if (ev.timestamp < prev)
            throw integrity_error("user " + std::to_string(user_id) +
                                  ": events not sorted by timestamp in sequence " +
                                  std::to_string(rec.seq_schema_id));
        prev = ev.timestamp;
        if (ev.item_features.size() != schema.feature_vocabs.size())
            throw integrity_error("user " + std::to_string(user_id) +
                                  ": event feature count mismatch in sequence " +
                                  std::to_string(rec.seq_schema_id));
        for (size_t i = 0; i < ev.item_features.size(); ++i) {
            int id = ev.item_features[i];
            if (id < 0 || id >= schema.feature_vocabs[i])
                throw lookup_error("user " + std::to_string(user_id) + ": feature id " +
                                   std::to_string(id) + " out of vocab range");
        }
    }
}

void validate_feature_block(const std::vector<int>& ids, const std::vector<int>& vocabs,
                            const char* which, int64_t user_id) {
    if (ids.size() != vocabs.size())
        throw integrity_error("user " + std::to_string(user_id) + ": " + which +
                              " feature count mismatch");
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] < 0 || ids[i] >= vocabs[i])
            throw lookup_error("user " + std::to_string(user_id) + ": " + which + " feature id " +
                               std::to_string(ids[i]) + " out of vocab range");
}

}  // namespace

void validate_sample(const Dataset& d, const UserSample& s) {
    if (s.exposures.empty())
        throw integrity_error("user " + std::to_string(s.user_id) + ": no exposures");

    int64_t min_exposure_ts = s.exposures.front().timestamp;
    for (const auto& e : s.exposures) min_exposure_ts = std::min(min_exposure_ts, e.timestamp);

    for (const auto& rec : s.historical_sequences) {
        validate_events(d.hist_schema(rec.seq_schema_id), rec, s.user_id);
        for (const auto& ev : rec.events)
            if (ev.timestamp >= min_exposure_ts)
                throw integrity_error("user " + std::to_string(s.user_id) +
                                      ": historical event at or after first exposure");
    }
    // Realtime events may postdate exposures; the dynamic mask handles that.
    for (const auto& rec : s.realtime_sequences)
        validate_events(d.rt_schema(rec.seq_schema_id), rec, s.user_id);

    for (const auto& e : s.exposures) {
        const ScenarioSchema& sc = d.scenario(e.scenario_id);
        validate_feature_block(e.user_features, sc.user_feature_vocabs, "user", s.user_id);
        validate_feature_block(e.cross_features, sc.cross_feature_vocabs, "cross", s.user_id);
        validate_feature_block(e.item_features, sc.item_feature_vocabs, "item", s.user_id);
        if (e.timestamp < 0)
            throw integrity_error("user " + std::to_string(s.user_id) +
                                  ": negative exposure timestamp");
        for (const auto& task : sc.tasks) {
            auto it = e.labels.find(task);
            if (it == e.labels.end())
                throw integrity_error("user " + std::to_string(s.user_id) + ": missing label for " +
                                      task);
            if (it->second != 0 && it->second != 1)
                throw integrity_error("user " + std::to_string(s.user_id) +
                                      ": non-binary label for " + task);
        }
        if (sc.has_task("ctr") && sc.has_task("ctcvr")) {
            if (e.labels.at("ctcvr") == 1 && e.labels.at("ctr") == 0)
                throw integrity_error("user " + std::to_string(s.user_id) +
                                      ": funnel violation, ctcvr=1 with ctr=0");
        }
    }
}

void validate_dataset(const Dataset& d) {
    validate_schemas(d);
    for (const auto& s : d.samples) validate_sample(d, s);
}

void validate_request(const Dataset& d, const InferenceRequest& r) {
    if (!d.has_scenario(r.scenario_id))
        throw integrity_error("request references unknown scenario " +
                              std::to_string(r.scenario_id));
    if (r.candidates.empty()) throw integrity_error("request has no candidates");
    const ScenarioSchema& sc = d.scenario(r.scenario_id);
    for (const auto& c : r.candidates) {
        validate_feature_block(c.user_features, sc.user_feature_vocabs, "user", r.user_id);
        validate_feature_block(c.cross_features, sc.cross_feature_vocabs, "cross", r.user_id);
        validate_feature_block(c.item_features, sc.item_feature_vocabs, "item", r.user_id);
    }
    for (const auto& rec : r.historical_sequences) d.hist_schema(rec.seq_schema_id);
    for (const auto& rec : r.realtime_sequences) d.rt_schema(rec.seq_schema_id);
}

namespace {

uint64_t mix64(uint64_t h, uint64_t v) {
    h ^= v + 0x9E3779B97f4A7C15ULL + (h << 6) + (h >> 2);
    return h;
}

uint64_t exposure_hash(int64_t user_id, const Exposure& e) {
    uint64_t h = 0x243F6A8885A308D3ULL;
    h = mix64(h, static_cast<uint64_t>(user_id));
    h = mix64(h, static_cast<uint64_t>(e.scenario_id));
    h = mix64(h, static_cast<uint64_t>(e.timestamp));
    for (int v : e.user_features) h = mix64(h, static_cast<uint64_t>(v) + 1);
    for (int v : e.cross_features) h = mix64(h, static_cast<uint64_t>(v) + 2);
    for (int v : e.item_features) h = mix64(h, static_cast<uint64_t>(v) + 3);
    for (const auto& [task, y] : e.labels) {
        for (char c : task) h = mix64(h, static_cast<uint64_t>(c));
        h = mix64(h, static_cast<uint64_t>(y));
    }
    return h;
}

}  // namespace

uint64_t exposure_multiset_fingerprint(const std::vector<std::pair<int64_t, Exposure>>& tagged) {
    std::vector<uint64_t> hashes;
    hashes.reserve(tagged.size());
    for (const auto& [uid, e] : tagged) hashes.push_back(exposure_hash(uid, e));
    std::sort(hashes.begin(), hashes.end());
    uint64_t h = 0x13198A2E03707344ULL;
    for (uint64_t x : hashes) h = mix64(h, x);
    h = mix64(h, hashes.size());
    return h;
}

uint64_t exposure_multiset_fingerprint(const std::vector<UserSample>& samples) {
    std::vector<std::pair<int64_t, Exposure>> tagged;
    for (const auto& s : samples)
        for (const auto& e : s.exposures) tagged.emplace_back(s.user_id, e);
    return exposure_multiset_fingerprint(tagged);
}

}  // namespace mtfm
