// errors.hpp — error taxonomy shared by all mtfm components.
#pragma once

#include <stdexcept>
#include <string>

namespace mtfm {

// Bad user-supplied configuration (flags, config files, model hyperparameters).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Data references something that does not exist (unknown user, schema, scenario).
struct integrity_error : std::runtime_error {
    explicit integrity_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor / matrix shape mismatch.
struct dimension_error : std::runtime_error {
    explicit dimension_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file. Carries the 1-based line number when known.
struct parse_error : std::runtime_error {
    long line = 0;
    parse_error(const std::string& msg, long line_no)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
    explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Feature id outside its vocabulary.
struct lookup_error : std::runtime_error {
    explicit lookup_error(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse (non-scalar loss, empty record set, ...).
struct contract_error : std::runtime_error {
    explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mtfm
