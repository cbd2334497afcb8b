#pragma once

#include <cctype>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ipa/aggregate.hpp"
#include "ipa/data.hpp"
#include "ipa/errors.hpp"
#include "ipa/interaction.hpp"
#include "ipa/layers.hpp"

namespace ipa {

/// Three-letter triplet: interaction function, layer pooling, layer aggregator.
/// The residual Field pooling (F') is spelled "F'" or "R".
struct ModelCode {
    InteractionKind interaction = InteractionKind::Naive;
    PoolingKind pooling = PoolingKind::Field;
    bool residual = false;
    AggregatorKind aggregator = AggregatorKind::Direct;

    [[nodiscard]] std::string str() const {
        std::string s;
        s += kind_letter(interaction);
        s += pooling == PoolingKind::Global ? "G" : (residual ? "F'" : "F");
        s += aggregator_letter(aggregator);
        return s;
    }
    friend bool operator==(const ModelCode&, const ModelCode&) = default;
};

inline ModelCode parse_code(std::string_view text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    auto fail = [&](const std::string& what) { throw ParseError("model code \"" + std::string(text) + "\": " + what); };
    if (s.empty()) fail("empty");
    ModelCode code;
    switch (s[0]) {
        case 'N': code.interaction = InteractionKind::Naive; break;
        case 'W': code.interaction = InteractionKind::Weighted; break;
        case 'D': code.interaction = InteractionKind::Diagonal; break;
        case 'P': code.interaction = InteractionKind::Projected; break;
        default: fail(std::string("unknown interaction letter '") + s[0] + "' (expected N, W, D or P)");
    }
    std::size_t pos = 1;
    if (pos >= s.size()) fail("missing pooling letter");
    switch (s[pos]) {
        case 'F':
            code.pooling = PoolingKind::Field;
            if (pos + 1 < s.size() && (s[pos + 1] == '\'' || s.compare(pos + 1, 3, "\xE2\x80\xB2") == 0)) {
                code.residual = true;
                pos += s[pos + 1] == '\'' ? 1 : 3;
            }
            break;
        case 'R':
            code.pooling = PoolingKind::Field;
            code.residual = true;
            break;
        case 'G': code.pooling = PoolingKind::Global; break;
        default: fail(std::string("unknown pooling letter '") + s[pos] + "' (expected F, F', R or G)");
    }
    ++pos;
    if (pos >= s.size()) fail("missing aggregator letter");
    switch (s[pos]) {
        case 'D': code.aggregator = AggregatorKind::Direct; break;
        case 'L': code.aggregator = AggregatorKind::Layer; break;
        case 'T': code.aggregator = AggregatorKind::Term; break;
        case 'E': code.aggregator = AggregatorKind::Element; break;
        default: fail(std::string("unknown aggregator letter '") + s[pos] + "' (expected D, L, T or E)");
    }
    if (pos + 1 != s.size()) fail("trailing characters after aggregator letter");
    return code;
}

struct ClassifierSpec {
    enum class Kind { SumPool, Linear, Mlp };
    Kind kind = Kind::SumPool;
    std::vector<std::size_t> hidden;  ///< Mlp hidden widths (ReLU)

    [[nodiscard]] std::string str() const {
        switch (kind) {
            case Kind::SumPool: return "sum";
            case Kind::Linear: return "linear";
            case Kind::Mlp: {
                std::string s = "mlp:";
                for (std::size_t i = 0; i < hidden.size(); ++i) s += (i ? "," : "") + std::to_string(hidden[i]);
                return s;
            }
        }
        return "sum";
    }

    static ClassifierSpec parse(std::string_view text) {
        ClassifierSpec c;
        if (text == "sum") return c;
        if (text == "linear") {
            c.kind = Kind::Linear;
            return c;
        }
        if (text.starts_with("mlp:")) {
            c.kind = Kind::Mlp;
            std::string rest(text.substr(4));
            std::stringstream ss(rest);
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    const long v = std::stol(item);
                    if (v < 1) throw ParseError("");
                    c.hidden.push_back(static_cast<std::size_t>(v));
                } catch (const std::exception&) {
                    throw ParseError("classifier: bad hidden width \"" + item + "\"");
                }
            }
            if (c.hidden.empty()) throw ParseError("classifier: mlp needs at least one hidden width");
            return c;
        }
        throw ParseError("classifier: expected sum, linear or mlp:<w1,w2,...>, got \"" + std::string(text) + "\"");
    }

    friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

struct ModelConfig {
    ModelCode code;
    std::vector<std::size_t> vocab;    ///< cardinality per field; M = vocab.size()
    std::size_t k = 16;
    std::size_t depth = 2;             ///< L, counting h_1
    std::size_t global_width = 10;     ///< H
    bool include_self = false;
    bool symmetric_share = false;
    ClassifierSpec classifier;
    double sum_scale = 1.0;            ///< fixed factor on the sum-pool classifier
    bool first_order = false;          ///< per-feature linear weights + global bias
    double dropout = 0.2;
    Task task = Task::Classification;
    std::optional<CombineMode> combine;  ///< default: Sum for Field, Concat for Global
    bool term_scalar_pool = false;
    bool aggregate_first_layer = true;

    [[nodiscard]] std::size_t fields() const noexcept { return vocab.size(); }

    [[nodiscard]] PoolingSpec pooling() const {
        return PoolingSpec{code.pooling, code.residual, depth, global_width, include_self, symmetric_share};
    }

    [[nodiscard]] CombineMode combine_mode() const {
        if (combine) return *combine;
        return code.pooling == PoolingKind::Field ? CombineMode::Sum : CombineMode::Concat;
    }

    [[nodiscard]] AggregatorSpec aggregator() const {
        return AggregatorSpec{code.aggregator, combine_mode(), term_scalar_pool, aggregate_first_layer};
    }

    [[nodiscard]] std::vector<std::size_t> layer_widths() const {
        std::vector<std::size_t> w;
        const auto p = pooling();
        for (std::size_t l = 0; l < depth; ++l) w.push_back(p.width(l, fields()));
        return w;
    }

    [[nodiscard]] bool has_bias() const noexcept { return first_order || classifier.kind != ClassifierSpec::Kind::SumPool; }

    void validate() const {
        if (vocab.empty()) throw ConfigError("model: at least one field is required");
        for (auto v : vocab)
            if (v < 1) throw ConfigError("model: every field needs cardinality >= 1");
        if (k < 1) throw ConfigError("model: K must be >= 1");
        if (depth < 1) throw ConfigError("model: L must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
        pooling().validate();
        (void)AggLayout(aggregator(), layer_widths(), k);
    }
};

/// Named reconstructions of known models as IPA triplets. Field vocabularies
/// are left empty; callers fill them from the dataset schema.
inline ModelConfig preset(std::string_view name) {
    ModelConfig c;
    auto fm_family = [&](const char* code) {
        c.code = parse_code(code);
        c.depth = 2;
        c.symmetric_share = true;
        c.classifier = {};
        c.sum_scale = 0.5;  // each unordered pair appears twice in Field pooling
        c.first_order = true;
        c.aggregate_first_layer = false;
    };
    auto derived = [&](const char* code) {
        c.code = parse_code(code);
        c.depth = 4;
        c.classifier.kind = ClassifierSpec::Kind::Linear;
    };
    if (name == "FM") fm_family("NFD");
    else if (name == "FwFM") fm_family("WFD");
    else if (name == "FvFM") fm_family("DFD");
    else if (name == "FmFM") fm_family("PFD");
    else if (name == "HOFM") {
        fm_family("NFD");
        c.depth = 4;
    } else if (name == "xDeepFM-CIN") {
        c.code = parse_code("WGT");
        c.depth = 4;
        c.global_width = 10;
        c.term_scalar_pool = true;
        c.combine = CombineMode::Concat;
    } else if (name == "DCNv2-CrossNet") derived("PF'D");
    else if (name == "PFL" || name == "WFL" || name == "DFL" || name == "PFT" || name == "PFE" || name == "PFD")
        derived(std::string(name).c_str());
    else
        throw ConfigError("unknown preset \"" + std::string(name) +
                          "\" (known: FM, FwFM, FvFM, FmFM, HOFM, xDeepFM-CIN, DCNv2-CrossNet, PFL, WFL, DFL, PFT, PFE, PFD)");
    return c;
}

/// Preset name or bare model code.
inline ModelConfig model_from_name(std::string_view name) {
    try {
        return preset(name);
    } catch (const ConfigError&) {
        ModelConfig c;
        c.code = parse_code(name);
        return c;
    }
}

}  // namespace ipa
