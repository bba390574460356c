// subgraph.hpp — scenario-aware deployment: the global graph restricted to
// shared weights plus one scenario's parameters, and request-level inference.
#pragma once

#include <string>
#include <vector>

#include "mtfm/model.hpp"

namespace mtfm {

template <typename Real>
struct ScenarioSubgraph {
    int scenario_id = 0;
    ModelConfig cfg;
    SchemaSet schemas;  // full schema set (shared sequences span scenarios)
    ParamStore<Real> params;

    size_t scalar_count() const { return params.scalar_count(); }
};

// Copies the shared parameters and exactly one scenario's specific parameters
// (tokenizer, GLN groups, gates, towers). Nothing owned by another scenario
// is carried along.
template <typename Real>
ScenarioSubgraph<Real> extract_subgraph(const Model<Real>& model, int scenario_id) {
    bool known = false;
    for (const auto& s : model.schemas.scenarios)
        if (s.scenario_id == scenario_id) known = true;
    if (!known)
        throw config_error("extract_subgraph: unknown scenario " + std::to_string(scenario_id));

    ScenarioSubgraph<Real> sub;
    sub.scenario_id = scenario_id;
    sub.cfg = model.cfg;
    sub.schemas = model.schemas;
    for (const auto& e : model.params) {
        const int owner = names::owner_scenario(e.name);
        if (owner == -1 || owner == scenario_id) sub.params.add(e.name, e.value);
    }
    return sub;
}

// Runs one request through a scenario subgraph: all candidates packed into a
// single token sequence (L_T = candidate count). Rule-3 masking guarantees
// each candidate scores exactly as it would alone.
template <typename Real>
std::vector<PredictionRecord> infer_request(const Model<Real>& model,
                                            const ScenarioSubgraph<Real>& sub,
                                            const InferenceRequest& request,
                                            TraceSink<Real>* trace = nullptr) {
    if (request.scenario_id != sub.scenario_id)
        throw integrity_error("request scenario " + std::to_string(request.scenario_id) +
                              " does not match subgraph scenario " +
                              std::to_string(sub.scenario_id));

    UserSample view = sample_view_of_request(request);
    typename Model<Real>::ForwardOptions opt;
    opt.attach_labels = false;
    opt.trace = trace;
    return model.forward_scoped(sub.params, view, sub.scenario_id, opt);
}

}  // namespace mtfm
