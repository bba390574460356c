// records.hpp — model outputs as flat prediction records.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mtfm {

struct PredictionRecord {
    int64_t user_id = 0;
    int scenario_id = 0;
    int exposure_index = 0;  // index into the sample's exposures / request's candidates
    std::string task;
    double probability = 0.5;  // sigmoid(logit), kept strictly inside (0,1)
    int label = -1;            // -1 when unlabeled (inference)

    bool operator==(const PredictionRecord&) const = default;
};

}  // namespace mtfm
