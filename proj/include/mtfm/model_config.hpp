// model_config.hpp — architecture hyperparameters.
#pragma once

#include <string>

#include "mtfm/errors.hpp"

namespace mtfm {

// Per-query-row scaling of the pointwise attention weights.
//   valid_count — divide by the row's visible-key count. Keeps every T token's
//                 output invariant to how many sibling T tokens are packed
//                 into the sequence, which is what makes aggregated training,
//                 request-level batching and scenario subgraphs agree with
//                 singleton forwards.
//   seq_len     — divide by N.
//   none        — raw sums.
enum class AttnNorm { valid_count, seq_len, none };

inline const char* to_string(AttnNorm n) {
    switch (n) {
        case AttnNorm::valid_count: return "valid";
        case AttnNorm::seq_len: return "seqlen";
        default: return "none";
    }
}

inline AttnNorm attn_norm_from_string(const std::string& s) {
    if (s == "valid") return AttnNorm::valid_count;
    if (s == "seqlen") return AttnNorm::seq_len;
    if (s == "none") return AttnNorm::none;
    throw config_error("unknown attention norm '" + s + "' (valid|seqlen|none)");
}

// Hybrid stack shape: `blocks` blocks of `target_layers` target attention
// layers followed by `full_layers` full attention layers, written (K:P)xB.
// Reference large configuration: d_model=768, blocks=4, K=3, heads=3, G=1;
// the desk-scale defaults below keep the same shape at d_model=64.
struct HTAConfig {
    int d_model = 64;
    int blocks = 4;        // B
    int target_layers = 3; // K, per block
    int full_layers = 1;   // P, per block
    int heads = 4;         // H query heads
    int kv_heads = 2;      // G key/value heads
    AttnNorm norm = AttnNorm::valid_count;
    double eps = 1e-6;

    int head_dim() const { return d_model / heads; }
    int heads_per_group() const { return heads / kv_heads; }  // r
    int layers_per_block() const { return target_layers + full_layers; }

    void validate() const {
        if (d_model < 1) throw config_error("hta: d_model must be positive");
        if (blocks < 1) throw config_error("hta: blocks must be >= 1");
        if (target_layers < 0 || full_layers < 0)
            throw config_error("hta: negative layer counts");
        if (target_layers + full_layers < 1)
            throw config_error("hta: each block needs at least one layer");
        if (heads < 1 || kv_heads < 1) throw config_error("hta: head counts must be >= 1");
        if (heads % kv_heads != 0)
            throw config_error("hta: heads must be divisible by kv_heads");
        if (d_model % heads != 0)
            throw config_error("hta: d_model must be divisible by heads");
        if (eps <= 0) throw config_error("hta: eps must be positive");
    }

    std::string shape_label() const {
        std::string s = "(" + std::to_string(target_layers) + ":" + std::to_string(full_layers) +
                        ")x" + std::to_string(blocks);
        if (full_layers == 0) s += " lazy-decoder";
        return s;
    }
};

struct ModelConfig {
    HTAConfig hta;
    int d_emb = 16;     // per feature slot embedding width
    int experts = 4;    // shared MMoE experts
    int d_expert = 64;

    void validate() const {
        hta.validate();
        if (d_emb < 1) throw config_error("model: d_emb must be >= 1");
        if (experts < 1) throw config_error("model: experts must be >= 1");
        if (d_expert < 1) throw config_error("model: d_expert must be >= 1");
    }
};

}  // namespace mtfm
