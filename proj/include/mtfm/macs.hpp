// macs.hpp — multiply-accumulate instrumentation.
//
// Matmul call sites report m*n*k into the active counter, split into
// projection and attention buckets. Counts are algorithmic (mask-induced
// zero-skipping in the kernels does not reduce them), so instrumented counts
// are directly comparable with the analytic cost model.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mtfm {

enum class MacKind { projection, attention };

struct LayerMacs {
    std::string label;
    unsigned long long projection = 0;
    unsigned long long attention = 0;
};

struct MacCounter {
    std::vector<LayerMacs> layers;

    void begin_layer(std::string label) { layers.push_back({std::move(label), 0, 0}); }

    void add(MacKind kind, unsigned long long macs) {
        if (layers.empty()) begin_layer("(unscoped)");
        if (kind == MacKind::projection)
            layers.back().projection += macs;
        else
            layers.back().attention += macs;
    }

    unsigned long long total_projection() const {
        unsigned long long s = 0;
        for (const auto& l : layers) s += l.projection;
        return s;
    }
    unsigned long long total_attention() const {
        unsigned long long s = 0;
        for (const auto& l : layers) s += l.attention;
        return s;
    }
    unsigned long long total() const { return total_projection() + total_attention(); }
};

}  // namespace mtfm
