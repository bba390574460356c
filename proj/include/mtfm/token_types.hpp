// token_types.hpp — token metadata shared by the tokenizer, mask and stack.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtfm/errors.hpp"

namespace mtfm {

enum class TokenKind : uint8_t { H = 0, R = 1, T = 2 };

inline const char* to_string(TokenKind k) {
    switch (k) {
        case TokenKind::H: return "H";
        case TokenKind::R: return "R";
        default: return "T";
    }
}

// Provenance of one token. group_id is the source sequence index for H/R
// tokens and the scenario id for T tokens; exposure_ref indexes into the
// owning sample's exposure list and is present exactly for T tokens.
struct TokenMeta {
    TokenKind kind = TokenKind::H;
    int group_id = 0;
    int64_t timestamp = 0;
    int exposure_ref = -1;

    bool operator==(const TokenMeta&) const = default;
};

struct Boundaries {
    int l_h = 0;
    int l_r = 0;
    int l_t = 0;

    int total() const { return l_h + l_r + l_t; }
    bool operator==(const Boundaries&) const = default;
};

inline Boundaries boundaries_of(const std::vector<TokenMeta>& metas) {
    Boundaries b;
    for (const auto& m : metas) {
        if (m.kind == TokenKind::H) ++b.l_h;
        else if (m.kind == TokenKind::R) ++b.l_r;
        else ++b.l_t;
    }
    return b;
}

inline void check_meta_order(const std::vector<TokenMeta>& metas) {
    // H block, then R block, then T block; H and R nondecreasing in time.
    int phase = 0;
    int64_t prev_ts = -1;
    for (const auto& m : metas) {
        int p = static_cast<int>(m.kind);
        if (p < phase) throw dimension_error("token metas out of (H;R;T) block order");
        if (p > phase) {
            phase = p;
            prev_ts = -1;
        }
        if (m.kind != TokenKind::T) {
            if (m.timestamp < prev_ts)
                throw dimension_error("token metas not time-sorted within block");
            prev_ts = m.timestamp;
        }
        if ((m.kind == TokenKind::T) != (m.exposure_ref >= 0))
            throw dimension_error("exposure_ref present iff token is a T token");
    }
}

}  // namespace mtfm
