#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ipa/config.hpp"
#include "ipa/errors.hpp"
#include "ipa/model.hpp"

namespace ipa {

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError(key + ": expected true or false, got \"" + v + "\"");
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        x = std::stoull(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size() || v[0] == '-') throw ParseError(key + ": expected a non-negative integer, got \"" + v + "\"");
    return static_cast<std::size_t>(x);
}

inline double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') throw ParseError(key + ": expected a number, got \"" + v + "\"");
    return d;
}

inline std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_size(key, item));
    return out;
}

}  // namespace detail

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Flat key=value form of a model configuration (ordered, stable).
inline KeyValues model_config_to_kv(const ModelConfig& c) {
    KeyValues kv;
    kv.emplace_back("model", c.code.str());
    kv.emplace_back("vocab", detail::join_sizes(c.vocab));
    kv.emplace_back("embed_dim", std::to_string(c.k));
    kv.emplace_back("layers", std::to_string(c.depth));
    kv.emplace_back("global_width", std::to_string(c.global_width));
    kv.emplace_back("include_self", c.include_self ? "true" : "false");
    kv.emplace_back("symmetric_share", c.symmetric_share ? "true" : "false");
    kv.emplace_back("classifier", c.classifier.str());
    kv.emplace_back("sum_scale", detail::format_double(c.sum_scale));
    kv.emplace_back("first_order", c.first_order ? "true" : "false");
    kv.emplace_back("dropout", detail::format_double(c.dropout));
    kv.emplace_back("task", c.task == Task::Classification ? "classification" : "regression");
    kv.emplace_back("combine", !c.combine ? "auto" : (*c.combine == CombineMode::Sum ? "sum" : "concat"));
    kv.emplace_back("term_scalar_pool", c.term_scalar_pool ? "true" : "false");
    kv.emplace_back("aggregate_first_layer", c.aggregate_first_layer ? "true" : "false");
    return kv;
}

/// Applies one model key; returns false when the key is not a model key.
inline bool apply_model_key(ModelConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    if (key == "model") {
        const auto vocab = c.vocab;
        const auto k = c.k;
        c = model_from_name(v);
        c.vocab = vocab;
        c.k = k;
    } else if (key == "vocab") c.vocab = parse_sizes(key, v);
    else if (key == "embed_dim") c.k = parse_size(key, v);
    else if (key == "layers") c.depth = parse_size(key, v);
    else if (key == "global_width") c.global_width = parse_size(key, v);
    else if (key == "include_self") c.include_self = parse_bool(key, v);
    else if (key == "symmetric_share") c.symmetric_share = parse_bool(key, v);
    else if (key == "classifier") c.classifier = ClassifierSpec::parse(v);
    else if (key == "sum_scale") c.sum_scale = parse_double(key, v);
    else if (key == "first_order") c.first_order = parse_bool(key, v);
    else if (key == "dropout") c.dropout = parse_double(key, v);
    else if (key == "task") {
        if (v == "classification") c.task = Task::Classification;
        else if (v == "regression") c.task = Task::Regression;
        else throw ParseError("task: expected classification or regression");
    } else if (key == "combine") {
        if (v == "auto") c.combine.reset();
        else if (v == "sum") c.combine = CombineMode::Sum;
        else if (v == "concat") c.combine = CombineMode::Concat;
        else throw ParseError("combine: expected auto, sum or concat");
    } else if (key == "term_scalar_pool") c.term_scalar_pool = parse_bool(key, v);
    else if (key == "aggregate_first_layer") c.aggregate_first_layer = parse_bool(key, v);
    else return false;
    return true;
}

/// Text checkpoint: config header, then every parameter as a C99 hex float so
/// that a load reproduces each bit.
inline void save_checkpoint(const IpaModel& model, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("save_checkpoint: cannot open " + path);
    std::fprintf(f, "ipa-checkpoint 1\n");
    for (const auto& [k, v] : model_config_to_kv(model.config())) std::fprintf(f, "%s=%s\n", k.c_str(), v.c_str());
    for (const auto& b : model.blocks()) std::fprintf(f, "block %s %zu %zu\n", b.name.c_str(), b.offset, b.size);
    std::fprintf(f, "params %zu\n", model.param_count());
    const auto p = model.params();
    for (std::size_t i = 0; i < p.size(); ++i) std::fprintf(f, "%a%c", p[i], (i % 8 == 7 || i + 1 == p.size()) ? '\n' : ' ');
    std::fprintf(f, "end\n");
    if (std::fclose(f) != 0) throw DataError("save_checkpoint: write failed for " + path);
}

inline IpaModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "ipa-checkpoint 1") throw ParseError("load_checkpoint: bad header in " + path);
    ModelConfig config;
    std::size_t count = 0;
    bool have_params = false;
    std::vector<ParamBlock> blocks;
    while (std::getline(in, line)) {
        if (line.starts_with("block ")) {
            std::istringstream ss(line.substr(6));
            ParamBlock b;
            ss >> b.name >> b.offset >> b.size;
            blocks.push_back(b);
            continue;
        }
        if (line.starts_with("params ")) {
            count = detail::parse_size("params", line.substr(7));
            have_params = true;
            break;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("load_checkpoint: malformed header line \"" + line + "\"");
        if (!apply_model_key(config, line.substr(0, eq), line.substr(eq + 1)))
            throw ParseError("load_checkpoint: unknown key \"" + line.substr(0, eq) + "\"");
    }
    if (!have_params) throw ParseError("load_checkpoint: missing params section");
    IpaModel model(config, 0);
    if (model.param_count() != count) throw ParseError("load_checkpoint: parameter count does not match configuration");
    if (blocks.size() != model.blocks().size()) throw ParseError("load_checkpoint: block table does not match configuration");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = model.blocks()[i];
        if (blocks[i].name != b.name || blocks[i].offset != b.offset || blocks[i].size != b.size)
            throw ParseError("load_checkpoint: block " + blocks[i].name + " does not match configuration");
    }
    auto p = model.params();
    std::string tok;
    for (std::size_t i = 0; i < count; ++i) {
        if (!(in >> tok)) throw ParseError("load_checkpoint: truncated parameter list");
        char* end = nullptr;
        p[i] = std::strtod(tok.c_str(), &end);
        if (*end != '\0') throw ParseError("load_checkpoint: bad value \"" + tok + "\"");
    }
    if (!(in >> tok) || tok != "end") throw ParseError("load_checkpoint: missing end marker");
    return model;
}

}  // namespace ipa
