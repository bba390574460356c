// checkpoint.hpp — versioned text checkpoints.
//
// Layout:
//   line 1: "mtfm-ckpt v1 <f32|f64> <n_params>"
//   line 2: model config (key=value list)
//   line 3: schema block (JSON)
//   then per parameter: "<name> <rows> <cols>" followed by one line of
//   hexfloat values. Hexfloat round-trips bit-exactly, so save -> load
//   reproduces forward outputs bitwise at the same precision.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "mtfm/dataset_io.hpp"
#include "mtfm/model.hpp"

namespace mtfm {

namespace detail {

inline std::string model_config_line(const ModelConfig& c) {
    std::ostringstream out;
    out << "d_model=" << c.hta.d_model << " blocks=" << c.hta.blocks
        << " target_layers=" << c.hta.target_layers << " full_layers=" << c.hta.full_layers
        << " heads=" << c.hta.heads << " kv_heads=" << c.hta.kv_heads
        << " norm=" << to_string(c.hta.norm) << " eps=" << c.hta.eps << " d_emb=" << c.d_emb
        << " experts=" << c.experts << " d_expert=" << c.d_expert;
    return out.str();
}

inline ModelConfig parse_model_config_line(const std::string& line) {
    ModelConfig c;
    std::istringstream in(line);
    std::string kv;
    while (in >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw parse_error("bad config token '" + kv + "'", 2);
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "d_model") c.hta.d_model = std::stoi(val);
        else if (key == "blocks") c.hta.blocks = std::stoi(val);
        else if (key == "target_layers") c.hta.target_layers = std::stoi(val);
        else if (key == "full_layers") c.hta.full_layers = std::stoi(val);
        else if (key == "heads") c.hta.heads = std::stoi(val);
        else if (key == "kv_heads") c.hta.kv_heads = std::stoi(val);
        else if (key == "norm") c.hta.norm = attn_norm_from_string(val);
        else if (key == "eps") c.hta.eps = std::stod(val);
        else if (key == "d_emb") c.d_emb = std::stoi(val);
        else if (key == "experts") c.experts = std::stoi(val);
        else if (key == "d_expert") c.d_expert = std::stoi(val);
        else throw parse_error("unknown config key '" + key + "'", 2);
    }
    return c;
}

}  // namespace detail

template <typename Real>
void save_checkpoint(const Model<Real>& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open checkpoint for write: " + path);
    out << "mtfm-ckpt v1 " << (sizeof(Real) == 4 ? "f32" : "f64") << " " << model.params.size()
        << "\n";
    out << detail::model_config_line(model.cfg) << "\n";
    out << schema_set_json(model.schemas.hist, model.schemas.rt, model.schemas.scenarios) << "\n";
    char buf[64];
    for (const auto& e : model.params) {
        out << e.name << " " << e.value.rows() << " " << e.value.cols() << "\n";
        for (size_t i = 0; i < e.value.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%a", static_cast<double>(e.value[i]));
            out << buf << (i + 1 == e.value.size() ? "" : " ");
        }
        out << "\n";
    }
    if (!out) throw config_error("write failed: " + path);
}

template <typename Real>
Model<Real> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line)) throw parse_error("empty checkpoint", 1);
    std::istringstream head(line);
    std::string magic, version, precision;
    size_t n_params = 0;
    head >> magic >> version >> precision >> n_params;
    if (magic != "mtfm-ckpt" || version != "v1") throw parse_error("not a mtfm checkpoint", 1);
    const std::string want = sizeof(Real) == 4 ? "f32" : "f64";
    if (precision != want)
        throw config_error("checkpoint precision is " + precision + ", expected " + want);

    if (!std::getline(in, line)) throw parse_error("missing config line", 2);
    ModelConfig cfg = detail::parse_model_config_line(line);
    if (!std::getline(in, line)) throw parse_error("missing schema line", 3);
    SchemaSet schemas;
    parse_schema_set_json(line, &schemas.hist, &schemas.rt, &schemas.scenarios);

    Model<Real> model = Model<Real>::build(schemas, cfg, 0);
    if (model.params.size() != n_params)
        throw parse_error("parameter count mismatch: file has " + std::to_string(n_params) +
                              ", model wants " + std::to_string(model.params.size()),
                          1);

    long line_no = 3;
    for (size_t p = 0; p < n_params; ++p) {
        if (!std::getline(in, line)) throw parse_error("truncated checkpoint", line_no + 1);
        ++line_no;
        std::istringstream meta(line);
        std::string name;
        size_t rows = 0, cols = 0;
        if (!(meta >> name >> rows >> cols)) throw parse_error("bad parameter header", line_no);
        if (!model.params.has(name)) throw parse_error("unknown parameter '" + name + "'", line_no);
        auto& entry = model.params.at(name);
        if (entry.value.rows() != rows || entry.value.cols() != cols)
            throw parse_error("shape mismatch for '" + name + "'", line_no);
        if (!std::getline(in, line)) throw parse_error("missing values for '" + name + "'", line_no + 1);
        ++line_no;
        const char* s = line.c_str();
        char* end = nullptr;
        for (size_t i = 0; i < entry.value.size(); ++i) {
            double v = std::strtod(s, &end);
            if (end == s) throw parse_error("short value row for '" + name + "'", line_no);
            entry.value[i] = static_cast<Real>(v);
            s = end;
        }
    }
    return model;
}

}  // namespace mtfm
