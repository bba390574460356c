// groups.hpp — token group registry for group layer normalization.
//
// One group per distinct (kind, source): every historical sequence type, every
// realtime sequence type, and every scenario gets its own affine parameters.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtfm/schema.hpp"
#include "mtfm/token_types.hpp"

namespace mtfm {

class GroupTable {
  public:
    GroupTable() = default;

    GroupTable(const std::vector<SequenceSchema>& hist, const std::vector<SequenceSchema>& rt,
               const std::vector<ScenarioSchema>& scenarios) {
        for (const auto& s : hist) {
            hist_idx_[s.seq_id] = static_cast<int>(keys_.size());
            keys_.push_back("h" + std::to_string(s.seq_id));
        }
        for (const auto& s : rt) {
            rt_idx_[s.seq_id] = static_cast<int>(keys_.size());
            keys_.push_back("r" + std::to_string(s.seq_id));
        }
        for (const auto& s : scenarios) {
            scen_idx_[s.scenario_id] = static_cast<int>(keys_.size());
            keys_.push_back("t" + std::to_string(s.scenario_id));
            scenario_group_keys_[s.scenario_id] = keys_.back();
        }
    }

    int size() const { return static_cast<int>(keys_.size()); }
    const std::string& key(int group) const { return keys_[static_cast<size_t>(group)]; }
    const std::vector<std::string>& keys() const { return keys_; }

    int group_of(const TokenMeta& m) const {
        const std::map<int, int>* table = nullptr;
        switch (m.kind) {
            case TokenKind::H: table = &hist_idx_; break;
            case TokenKind::R: table = &rt_idx_; break;
            case TokenKind::T: table = &scen_idx_; break;
        }
        auto it = table->find(m.group_id);
        if (it == table->end())
            throw config_error(std::string("unknown token group ") + to_string(m.kind) +
                               std::to_string(m.group_id));
        return it->second;
    }

    bool is_scenario_group(int group, int* scenario_id_out = nullptr) const {
        for (const auto& [sid, idx] : scen_idx_) {
            if (idx == group) {
                if (scenario_id_out) *scenario_id_out = sid;
                return true;
            }
        }
        return false;
    }

    int scenario_group(int scenario_id) const {
        auto it = scen_idx_.find(scenario_id);
        if (it == scen_idx_.end())
            throw config_error("unknown scenario " + std::to_string(scenario_id));
        return it->second;
    }

  private:
    std::vector<std::string> keys_;
    std::map<int, int> hist_idx_, rt_idx_, scen_idx_;
    std::map<int, std::string> scenario_group_keys_;
};

}  // namespace mtfm
