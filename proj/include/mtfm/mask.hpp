// mask.hpp — the dynamic N x N visibility mask.
//
// Visibility rules, per key column j:
//   1. H tokens are visible to all tokens.
//   2. R tokens are visible only to tokens with strictly later timestamps.
//   3. T tokens are visible only to themselves.
// Row i is the query token, column j the key token, 1 = visible.
#pragma once

#include <cstdint>
#include <vector>

#include "mtfm/tensor.hpp"
#include "mtfm/token_types.hpp"

namespace mtfm {

struct MaskMatrix {
    size_t n = 0;
    std::vector<uint8_t> bits;  // row-major n*n

    uint8_t at(size_t i, size_t j) const { return bits[i * n + j]; }
    uint8_t& at(size_t i, size_t j) { return bits[i * n + j]; }

    bool operator==(const MaskMatrix&) const = default;

    template <typename Real>
    Tensor<Real> to_tensor() const {
        Tensor<Real> t(n, n);
        for (size_t i = 0; i < bits.size(); ++i) t[i] = static_cast<Real>(bits[i]);
        return t;
    }

    // Visible-key count per query row, used by the per-row attention scaling.
    std::vector<int> row_valid_counts() const {
        std::vector<int> c(n, 0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) c[i] += bits[i * n + j];
        return c;
    }
};

MaskMatrix build_mask(const std::vector<TokenMeta>& metas);

// Independent doubly-nested re-derivation of the three rules, used to verify
// build_mask. Shares no code with it on purpose.
MaskMatrix build_mask_oracle(const std::vector<TokenMeta>& metas);

// Rows [l_h + l_r, n) of the mask, consumed by target attention layers.
template <typename Real>
Tensor<Real> extract_t_rows(const MaskMatrix& mask, const Boundaries& b) {
    if (static_cast<size_t>(b.total()) != mask.n)
        throw dimension_error("extract_t_rows: boundaries do not match mask size");
    const size_t off = static_cast<size_t>(b.l_h + b.l_r);
    Tensor<Real> out(static_cast<size_t>(b.l_t), mask.n);
    for (size_t i = 0; i < static_cast<size_t>(b.l_t); ++i)
        for (size_t j = 0; j < mask.n; ++j) out.at(i, j) = static_cast<Real>(mask.at(off + i, j));
    return out;
}

}  // namespace mtfm
