// dataset_io.hpp — line-delimited dataset serialization.
//
// Layout: UTF-8 text. The first line is a header object declaring the format
// version and every schema; each following line is one UserSample object with
// keys user_id / hist / rt / exposures. See README for the full field list.
#pragma once

#include <string>

#include "mtfm/schema.hpp"

namespace mtfm {

std::string serialize_dataset(const Dataset& d);

// Throws parse_error naming the 1-based line of the first malformed record.
Dataset deserialize_dataset(const std::string& bytes);

void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// Request files reuse the same conventions (single JSON object).
std::string serialize_request(const InferenceRequest& r);
InferenceRequest deserialize_request(const std::string& bytes);
InferenceRequest load_request(const std::string& path);

// Schema block as a single JSON line (embedded in checkpoints).
std::string schema_set_json(const std::vector<SequenceSchema>& hist,
                            const std::vector<SequenceSchema>& rt,
                            const std::vector<ScenarioSchema>& scenarios);
void parse_schema_set_json(const std::string& line, std::vector<SequenceSchema>* hist,
                           std::vector<SequenceSchema>* rt, std::vector<ScenarioSchema>* scenarios);

}  // namespace mtfm
