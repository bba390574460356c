#include "mtfm/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mtfm {

using json = nlohmann::json;

namespace {

constexpr const char* kFormatTag = "mtfm-dataset";

void require_keys(const json& j, std::initializer_list<const char*> keys, long line) {
    if (!j.is_object()) throw parse_error("expected object", line);
    size_t expected = 0;
    for (const char* k : keys) {
        if (!j.contains(k)) throw parse_error(std::string("missing key '") + k + "'", line);
        ++expected;
    }
    if (j.size() != expected) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool known = false;
            for (const char* k : keys)
                if (it.key() == k) known = true;
            if (!known) throw parse_error("unknown key '" + it.key() + "'", line);
        }
    }
}

json seq_schema_to_json(const SequenceSchema& s) {
    return json{{"seq_id", s.seq_id}, {"vocabs", s.feature_vocabs}};
}

SequenceSchema seq_schema_from_json(const json& j, long line) {
    require_keys(j, {"seq_id", "vocabs"}, line);
    SequenceSchema s;
    s.seq_id = j.at("seq_id").get<int>();
    s.feature_vocabs = j.at("vocabs").get<std::vector<int>>();
    return s;
}

json scenario_to_json(const ScenarioSchema& s) {
    return json{{"scenario_id", s.scenario_id}, {"user_vocabs", s.user_feature_vocabs},
                {"cross_vocabs", s.cross_feature_vocabs}, {"item_vocabs", s.item_feature_vocabs},
                {"tasks", s.tasks}};
}

ScenarioSchema scenario_from_json(const json& j, long line) {
    require_keys(j, {"scenario_id", "user_vocabs", "cross_vocabs", "item_vocabs", "tasks"}, line);
    ScenarioSchema s;
    s.scenario_id = j.at("scenario_id").get<int>();
    s.user_feature_vocabs = j.at("user_vocabs").get<std::vector<int>>();
    s.cross_feature_vocabs = j.at("cross_vocabs").get<std::vector<int>>();
    s.item_feature_vocabs = j.at("item_vocabs").get<std::vector<int>>();
    s.tasks = j.at("tasks").get<std::vector<std::string>>();
    return s;
}

json sequences_to_json(const std::vector<SequenceRecord>& seqs) {
    json arr = json::array();
    for (const auto& rec : seqs) {
        json events = json::array();
        for (const auto& ev : rec.events) events.push_back(json{{"f", ev.item_features}, {"t", ev.timestamp}});
        arr.push_back(json{{"seq", rec.seq_schema_id}, {"events", std::move(events)}});
    }
    return arr;
}

std::vector<SequenceRecord> sequences_from_json(const json& j, long line) {
    if (!j.is_array()) throw parse_error("sequence list must be an array", line);
    std::vector<SequenceRecord> out;
    for (const auto& rj : j) {
        require_keys(rj, {"seq", "events"}, line);
        SequenceRecord rec;
        rec.seq_schema_id = rj.at("seq").get<int>();
        for (const auto& ej : rj.at("events")) {
            require_keys(ej, {"f", "t"}, line);
            BehaviorEvent ev;
            ev.item_features = ej.at("f").get<std::vector<int>>();
            ev.timestamp = ej.at("t").get<int64_t>();
            rec.events.push_back(std::move(ev));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

json exposure_to_json(const Exposure& e) {
    return json{{"s", e.scenario_id}, {"u", e.user_features},   {"c", e.cross_features},
                {"i", e.item_features}, {"t", e.timestamp},       {"y", e.labels}};
}

Exposure exposure_from_json(const json& j, long line) {
    require_keys(j, {"s", "u", "c", "i", "t", "y"}, line);
    Exposure e;
    e.scenario_id = j.at("s").get<int>();
    e.user_features = j.at("u").get<std::vector<int>>();
    e.cross_features = j.at("c").get<std::vector<int>>();
    e.item_features = j.at("i").get<std::vector<int>>();
    e.timestamp = j.at("t").get<int64_t>();
    e.labels = j.at("y").get<std::map<std::string, int>>();
    return e;
}

}  // namespace

std::string serialize_dataset(const Dataset& d) {
    std::ostringstream out;
    json header;
    header["format"] = kFormatTag;
    header["version"] = d.format_version;
    header["hist_seq_schemas"] = json::array();
    for (const auto& s : d.hist_seq_schemas) header["hist_seq_schemas"].push_back(seq_schema_to_json(s));
    header["rt_seq_schemas"] = json::array();
    for (const auto& s : d.rt_seq_schemas) header["rt_seq_schemas"].push_back(seq_schema_to_json(s));
    header["scenarios"] = json::array();
    for (const auto& s : d.scenarios) header["scenarios"].push_back(scenario_to_json(s));
    out << header.dump() << "\n";

    for (const auto& sample : d.samples) {
        json j;
        j["user_id"] = sample.user_id;
        j["hist"] = sequences_to_json(sample.historical_sequences);
        j["rt"] = sequences_to_json(sample.realtime_sequences);
        j["exposures"] = json::array();
        for (const auto& e : sample.exposures) j["exposures"].push_back(exposure_to_json(e));
        out << j.dump() << "\n";
    }
    return out.str();
}

Dataset deserialize_dataset(const std::string& bytes) {
    std::istringstream in(bytes);
    std::string line;
    long line_no = 0;

    if (!std::getline(in, line)) throw parse_error("empty input, missing header", 1);
    ++line_no;
    Dataset d;
    try {
        json header = json::parse(line);
        require_keys(header, {"format", "version", "hist_seq_schemas", "rt_seq_schemas", "scenarios"},
                     line_no);
        if (header.at("format").get<std::string>() != kFormatTag)
            throw parse_error("not a mtfm dataset file", line_no);
        d.format_version = header.at("version").get<int>();
        for (const auto& j : header.at("hist_seq_schemas"))
            d.hist_seq_schemas.push_back(seq_schema_from_json(j, line_no));
        for (const auto& j : header.at("rt_seq_schemas"))
            d.rt_seq_schemas.push_back(seq_schema_from_json(j, line_no));
        for (const auto& j : header.at("scenarios"))
            d.scenarios.push_back(scenario_from_json(j, line_no));
    } catch (const json::exception& e) {
        throw parse_error(std::string("malformed header: ") + e.what(), line_no);
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            require_keys(j, {"user_id", "hist", "rt", "exposures"}, line_no);
            UserSample s;
            s.user_id = j.at("user_id").get<int64_t>();
            s.historical_sequences = sequences_from_json(j.at("hist"), line_no);
            s.realtime_sequences = sequences_from_json(j.at("rt"), line_no);
            for (const auto& ej : j.at("exposures")) s.exposures.push_back(exposure_from_json(ej, line_no));
            d.samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw parse_error(std::string("malformed record: ") + e.what(), line_no);
        }
    }
    validate_dataset(d);
    return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open for write: " + path);
    out << serialize_dataset(d);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open dataset: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_dataset(ss.str());
}

std::string serialize_request(const InferenceRequest& r) {
    json j;
    j["user_id"] = r.user_id;
    j["scenario"] = r.scenario_id;
    j["timestamp"] = r.timestamp;
    j["hist"] = sequences_to_json(r.historical_sequences);
    j["rt"] = sequences_to_json(r.realtime_sequences);
    j["candidates"] = json::array();
    for (const auto& c : r.candidates)
        j["candidates"].push_back(json{{"u", c.user_features}, {"c", c.cross_features}, {"i", c.item_features}});
    return j.dump() + "\n";
}

InferenceRequest deserialize_request(const std::string& bytes) {
    try {
        json j = json::parse(bytes);
        require_keys(j, {"user_id", "scenario", "timestamp", "hist", "rt", "candidates"}, 1);
        InferenceRequest r;
        r.user_id = j.at("user_id").get<int64_t>();
        r.scenario_id = j.at("scenario").get<int>();
        r.timestamp = j.at("timestamp").get<int64_t>();
        r.historical_sequences = sequences_from_json(j.at("hist"), 1);
        r.realtime_sequences = sequences_from_json(j.at("rt"), 1);
        for (const auto& cj : j.at("candidates")) {
            require_keys(cj, {"u", "c", "i"}, 1);
            Candidate c;
            c.user_features = cj.at("u").get<std::vector<int>>();
            c.cross_features = cj.at("c").get<std::vector<int>>();
            c.item_features = cj.at("i").get<std::vector<int>>();
            r.candidates.push_back(std::move(c));
        }
        return r;
    } catch (const json::exception& e) {
        throw parse_error(std::string("malformed request: ") + e.what(), 1);
    }
}

std::string schema_set_json(const std::vector<SequenceSchema>& hist,
                            const std::vector<SequenceSchema>& rt,
                            const std::vector<ScenarioSchema>& scenarios) {
    json j;
    j["hist_seq_schemas"] = json::array();
    for (const auto& s : hist) j["hist_seq_schemas"].push_back(seq_schema_to_json(s));
    j["rt_seq_schemas"] = json::array();
    for (const auto& s : rt) j["rt_seq_schemas"].push_back(seq_schema_to_json(s));
    j["scenarios"] = json::array();
    for (const auto& s : scenarios) j["scenarios"].push_back(scenario_to_json(s));
    return j.dump();
}

void parse_schema_set_json(const std::string& line, std::vector<SequenceSchema>* hist,
                           std::vector<SequenceSchema>* rt, std::vector<ScenarioSchema>* scenarios) {
    try {
        json j = json::parse(line);
        require_keys(j, {"hist_seq_schemas", "rt_seq_schemas", "scenarios"}, 1);
        for (const auto& x : j.at("hist_seq_schemas")) hist->push_back(seq_schema_from_json(x, 1));
        for (const auto& x : j.at("rt_seq_schemas")) rt->push_back(seq_schema_from_json(x, 1));
        for (const auto& x : j.at("scenarios")) scenarios->push_back(scenario_from_json(x, 1));
    } catch (const json::exception& e) {
        throw parse_error(std::string("malformed schema block: ") + e.what(), 1);
    }
}

InferenceRequest load_request(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open request: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_request(ss.str());
}

}  // namespace mtfm
