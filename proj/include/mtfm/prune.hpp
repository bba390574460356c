// prune.hpp — 2:4 structured pruning of linear projections.
//
// Within every contiguous group of 4 along the reduction dimension (input
// rows of a (in x out) weight), the 2 smallest-magnitude entries are zeroed.
// A trailing partial group is exempted and reported. No sparse-kernel
// speedup is simulated; this produces the pattern and measures its effect.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mtfm/log.hpp"
#include "mtfm/params.hpp"
#include "mtfm/tensor.hpp"

namespace mtfm {

struct PruneReport {
    size_t groups_covered = 0;
    size_t zeros_written = 0;
    size_t exempt_tail_rows = 0;  // rows in partial trailing groups
    std::vector<std::string> pruned_params;
    bool noop = false;

    void merge(const PruneReport& o) {
        groups_covered += o.groups_covered;
        zeros_written += o.zeros_written;
        exempt_tail_rows += o.exempt_tail_rows;
    }
};

template <typename Real>
PruneReport prune_2_4_inplace(Tensor<Real>& w) {
    PruneReport rep;
    if (w.empty()) {
        log_warn("prune_2_4: empty matrix, nothing to do");
        rep.noop = true;
        return rep;
    }
    const size_t full_groups = w.rows() / 4;
    rep.exempt_tail_rows = w.rows() - full_groups * 4;
    for (size_t j = 0; j < w.cols(); ++j) {
        for (size_t g = 0; g < full_groups; ++g) {
            const size_t r0 = g * 4;
            // Keep the top-2 magnitudes; ties keep the earlier row.
            int keep0 = 0, keep1 = 1;
            auto mag = [&](int i) { return std::fabs(static_cast<double>(w.at(r0 + static_cast<size_t>(i), j))); };
            if (mag(keep1) > mag(keep0)) std::swap(keep0, keep1);
            for (int i = 2; i < 4; ++i) {
                if (mag(i) > mag(keep0)) {
                    keep1 = keep0;
                    keep0 = i;
                } else if (mag(i) > mag(keep1)) {
                    keep1 = i;
                }
            }
            for (int i = 0; i < 4; ++i) {
                if (i == keep0 || i == keep1) continue;
                w.at(r0 + static_cast<size_t>(i), j) = Real(0);
                ++rep.zeros_written;
            }
            ++rep.groups_covered;
        }
    }
    return rep;
}

// Exactly two zeros in every covered group of 4 along the reduction dim.
template <typename Real>
bool check_2_4_pattern(const Tensor<Real>& w) {
    const size_t full_groups = w.rows() / 4;
    for (size_t j = 0; j < w.cols(); ++j) {
        for (size_t g = 0; g < full_groups; ++g) {
            int zeros = 0;
            for (size_t i = 0; i < 4; ++i)
                if (w.at(g * 4 + i, j) == Real(0)) ++zeros;
            if (zeros < 2) return false;
        }
    }
    return true;
}

inline bool is_projection_param(const std::string& name) {
    if (name.rfind("hta/", 0) != 0) return false;
    auto ends_with = [&](const char* suffix) {
        const std::string s(suffix);
        return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    return ends_with("/f1_w") || ends_with("/fuq_w") || ends_with("/fkv_w") || ends_with("/f2_w");
}

// Applies 2:4 pruning to every UVQK and output projection in the stack.
template <typename Real>
PruneReport prune_model_projections(ParamStore<Real>& params) {
    PruneReport total;
    for (auto& e : params) {
        if (!is_projection_param(e.name)) continue;
        total.merge(prune_2_4_inplace(e.value));
        total.pruned_params.push_back(e.name);
    }
    return total;
}

}  // namespace mtfm
