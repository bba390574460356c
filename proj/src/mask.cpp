#include "mtfm/mask.hpp"

namespace mtfm {

MaskMatrix build_mask(const std::vector<TokenMeta>& metas) {
    const size_t n = metas.size();
    MaskMatrix m;
    m.n = n;
    m.bits.assign(n * n, 0);

    // Column-oriented: each key column's rule decides the whole column.
    for (size_t j = 0; j < n; ++j) {
        switch (metas[j].kind) {
            case TokenKind::H:
                for (size_t i = 0; i < n; ++i) m.at(i, j) = 1;
                break;
            case TokenKind::R: {
                const int64_t tj = metas[j].timestamp;
                for (size_t i = 0; i < n; ++i)
                    if (metas[i].timestamp > tj) m.at(i, j) = 1;
                break;
            }
            case TokenKind::T:
                m.at(j, j) = 1;
                break;
        }
    }
    return m;
}

MaskMatrix build_mask_oracle(const std::vector<TokenMeta>& metas) {
    const size_t n = metas.size();
    MaskMatrix m;
    m.n = n;
    m.bits.assign(n * n, 0);

    // Literal per-pair application of the three visibility rules.
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            bool visible = false;
            if (metas[j].kind == TokenKind::H) {
                visible = true;
            } else if (metas[j].kind == TokenKind::R) {
                visible = metas[i].timestamp > metas[j].timestamp;
            } else {
                visible = (i == j);
            }
            m.at(i, j) = visible ? 1 : 0;
        }
    }
    return m;
}

}  // namespace mtfm
