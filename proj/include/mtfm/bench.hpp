// bench.hpp — stack configuration benchmark.
//
// Runs identical synthetic workloads through a matrix of (K:P)xB and GQA
// configurations, reporting analytic+instrumented MAC counts, wall-clock
// tokens/sec and peak live tensor bytes. The asserted quantity is the
// attention-MAC ordering (per-layer mean strictly decreases as K:P grows);
// wall-clock numbers are reported, not asserted.
#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "mtfm/complexity.hpp"

namespace mtfm {

struct BenchRow {
    std::string label;
    int target_layers = 0, full_layers = 0, blocks = 0, heads = 0, kv_heads = 0;
    size_t n = 0, l_t = 0;
    int threads = 1;
    unsigned long long attention_macs = 0;
    unsigned long long projection_macs = 0;
    size_t layers = 0;
    double attn_macs_per_layer = 0.0;
    double tokens_per_sec = 0.0;
    long long peak_bytes = 0;
    bool macs_exact = false;
};

struct BenchConfig {
    std::vector<HTAConfig> configs;
    std::vector<std::pair<size_t, size_t>> sizes = {{256, 16}};
    int reps = 3;
    int threads = 1;  // recorded in output
    uint64_t seed = 7;
};

// Table-4-style default matrix: (0:1), (1:1), (3:1), (5:1) and the
// target-attention-only lazy decoder, each with GQA on (G<H) and off (G=H).
inline std::vector<HTAConfig> default_bench_configs(int d_model = 64, int blocks = 4, int heads = 4) {
    std::vector<HTAConfig> out;
    for (int g : {heads, 1}) {
        for (auto [k, p] : std::vector<std::pair<int, int>>{{0, 1}, {1, 1}, {3, 1}, {5, 1}, {3, 0}}) {
            HTAConfig c;
            c.d_model = d_model;
            c.blocks = blocks;
            c.heads = heads;
            c.kv_heads = g;
            c.target_layers = k;
            c.full_layers = p;
            out.push_back(c);
        }
    }
    return out;
}

// K/V projection parameters per full layer: the (K|V) slice of f1 plus bias.
inline size_t kv_projection_param_count(const HTAConfig& cfg) {
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t gd = static_cast<size_t>(cfg.kv_heads * cfg.head_dim());
    return d * 2 * gd + 2 * gd;
}

template <typename Real>
std::vector<BenchRow> run_bench(const BenchConfig& bc) {
    std::vector<BenchRow> rows;
    for (const auto& cfg : bc.configs) {
        cfg.validate();
        for (auto [n, lt] : bc.sizes) {
            MacReport predicted = count_macs(cfg, n, lt);
            MemStats::reset_peak();
            const long long base_bytes = MemStats::live().load();
            double tps = 0.0;
            MacCounter measured = instrumented_stack_forward<Real>(cfg, n, lt, bc.seed, &tps, bc.reps);
            BenchRow row;
            row.label = cfg.shape_label() + (cfg.kv_heads < cfg.heads ? " gqa" : " mha");
            row.target_layers = cfg.target_layers;
            row.full_layers = cfg.full_layers;
            row.blocks = cfg.blocks;
            row.heads = cfg.heads;
            row.kv_heads = cfg.kv_heads;
            row.n = n;
            row.l_t = lt;
            row.threads = bc.threads;
            row.attention_macs = measured.total_attention();
            row.projection_macs = measured.total_projection();
            row.layers = static_cast<size_t>(cfg.blocks) * static_cast<size_t>(cfg.layers_per_block());
            row.attn_macs_per_layer =
                static_cast<double>(row.attention_macs) / static_cast<double>(row.layers);
            row.tokens_per_sec = tps;
            row.peak_bytes = MemStats::peak().load() - base_bytes;
            row.macs_exact = measured.total_attention() == predicted.attention_total &&
                             measured.total_projection() == predicted.projection_total;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// Per-layer attention MACs must strictly decrease as the target:full ratio
// grows, at fixed (B, N, L_T, heads). Returns false on any violation.
inline bool check_mac_monotonicity(const std::vector<BenchRow>& rows) {
    for (const auto& a : rows) {
        for (const auto& b : rows) {
            if (a.n != b.n || a.l_t != b.l_t || a.blocks != b.blocks || a.heads != b.heads ||
                a.kv_heads != b.kv_heads)
                continue;
            const bool a_denser = a.full_layers > 0 && b.full_layers > 0
                                      ? a.target_layers < b.target_layers
                                      : (a.full_layers > 0 && b.full_layers == 0);
            if (a_denser && a.l_t < a.n && a.attn_macs_per_layer <= b.attn_macs_per_layer)
                return false;
        }
    }
    return true;
}

inline std::string format_bench_table(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "config\tN\tL_T\tlayers\tthreads\tattention_MACs\tprojection_MACs\t"
           "attn_MACs_per_layer\ttokens_per_sec\tpeak_bytes\tmacs_exact\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%zu\t%zu\t%zu\t%d\t%llu\t%llu\t%.1f\t%.1f\t%lld\t%s\n",
                      r.label.c_str(), r.n, r.l_t, r.layers, r.threads, r.attention_macs,
                      r.projection_macs, r.attn_macs_per_layer, r.tokens_per_sec, r.peak_bytes,
                      r.macs_exact ? "yes" : "no");
        out << buf;
    }
    return out.str();
}

}  // namespace mtfm
