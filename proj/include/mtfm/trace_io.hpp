// trace_io.hpp — attention-trace tensor dump (shape header + row-major values).
#pragma once

#include <cstdio>
#include <ostream>

#include "mtfm/eval_ctx.hpp"

namespace mtfm {

template <typename Real>
void write_trace(const TraceSink<Real>& sink, std::ostream& out) {
    char buf[64];
    for (const auto& e : sink.entries) {
        out << "tensor " << e.tag << " " << e.values.rows() << " " << e.values.cols() << "\n";
        for (size_t i = 0; i < e.values.rows(); ++i) {
            for (size_t j = 0; j < e.values.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(e.values.at(i, j)));
                out << buf << (j + 1 == e.values.cols() ? "" : " ");
            }
            out << "\n";
        }
    }
}

}  // namespace mtfm
