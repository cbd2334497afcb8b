#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ipa/data.hpp"
#include "ipa/errors.hpp"
#include "ipa/linalg.hpp"
#include "ipa/model.hpp"

namespace ipa {

/// Rows scaled by sqrt(count_f / total): the Gram matrix becomes the
/// embedding second moment under the empirical sample distribution.
inline Matrix sample_weighted_matrix(const Matrix& embeddings, std::span<const double> counts) {
    if (counts.size() != embeddings.rows()) throw DimensionError("sample_weighted_matrix: one count per embedding row required");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (!(total > 0.0)) throw ContractError("sample_weighted_matrix: total count must be positive");
    Matrix out = embeddings;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const double s = std::sqrt(std::max(0.0, counts[r]) / total);
        for (double& v : out.row(r)) v *= s;
    }
    return out;
}

inline double singular_sum(std::span<const double> spectrum) { return std::accumulate(spectrum.begin(), spectrum.end(), 0.0); }

/// sum(sigma) / max(sigma); K for an isotropic spectrum, 1 for rank one.
inline double information_abundance(std::span<const double> spectrum) {
    if (spectrum.empty() || !(spectrum[0] > 0.0)) throw MetricError("information_abundance: spectrum is all zero");
    return singular_sum(spectrum) / *std::max_element(spectrum.begin(), spectrum.end());
}
inline double information_abundance(const Matrix& e) { return information_abundance(singular_values(e)); }

/// Smallest k whose top-k singular values reach 95% of the singular sum.
inline std::size_t p95_dimension(std::span<const double> spectrum) {
    if (spectrum.empty() || !(spectrum[0] > 0.0)) throw MetricError("p95_dimension: spectrum is all zero");
    const double threshold = 0.95 * singular_sum(spectrum);
    double acc = 0.0;
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        acc += spectrum[i];
        if (acc >= threshold) return i + 1;
    }
    return spectrum.size();
}
inline std::size_t p95_dimension(const Matrix& e) { return p95_dimension(singular_values(e)); }

/// Field importance from field-pair weights (M x M): mean over j != i of the
/// symmetrised |w_ij|.
inline std::vector<double> fwfm_field_importance(const Matrix& pair_weights) {
    const std::size_t m = pair_weights.rows();
    if (m != pair_weights.cols()) throw DimensionError("fwfm_field_importance: pair weights must be square");
    if (m < 2) throw ContractError("fwfm_field_importance: need at least two fields");
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) acc += 0.5 * (std::abs(pair_weights(i, j)) + std::abs(pair_weights(j, i)));
        out[i] = acc / static_cast<double>(m - 1);
    }
    return out;
}

/// Pair weights of a Weighted Field model's second layer as an M x M matrix
/// (absent pairs are 0).
inline Matrix pair_weight_matrix(const IpaModel& model) {
    const auto& c = model.config();
    if (c.code.interaction != InteractionKind::Weighted || c.code.pooling != PoolingKind::Field || c.depth < 2)
        throw ConfigError("pair_weight_matrix: requires a Weighted Field model with L >= 2");
    const std::size_t m = c.fields();
    Matrix w(m, m);
    const auto view = model.interaction();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const auto slot = view.layout.field_slot(1, i, j);
            if (slot.offset >= 0) w(i, j) = view.values[static_cast<std::size_t>(slot.offset)];
        }
    return w;
}

struct FieldSpectrum {
    std::size_t field = 0;
    std::size_t cardinality = 0;
    double importance = 0.0;
    Vector singular_values;
    double singular_sum = 0.0;
    double information_abundance = 0.0;  ///< 0 when the weighted matrix is all zero
    std::size_t p95_dimension = 0;
};

struct CollapseReport {
    std::vector<FieldSpectrum> fields;
    std::vector<std::size_t> by_cardinality;  ///< descending, ties by field id
    std::vector<std::size_t> by_importance;   ///< descending, ties by field id
};

/// Per-field spectra of sample-weighted embeddings. `importance` (one value per
/// field) may be empty, in which case a Weighted Field model supplies its own
/// and any other model reports zeros.
inline CollapseReport collapse_report(const IpaModel& model, const TabularDataset& data, std::vector<double> importance = {}) {
    const auto& c = model.config();
    if (data.fields() != c.fields()) throw ConfigError("collapse_report: dataset field count differs from model");
    for (std::size_t m = 0; m < c.fields(); ++m)
        if (data.schema()[m].cardinality != c.vocab[m]) throw ConfigError("collapse_report: field cardinality differs from model");
    if (importance.empty()) {
        if (c.code.interaction == InteractionKind::Weighted && c.code.pooling == PoolingKind::Field && c.depth >= 2 && c.fields() >= 2)
            importance = fwfm_field_importance(pair_weight_matrix(model));
        else
            importance.assign(c.fields(), 0.0);
    }
    if (importance.size() != c.fields()) throw DimensionError("collapse_report: one importance value per field required");

    CollapseReport report;
    for (std::size_t m = 0; m < c.fields(); ++m) {
        FieldSpectrum fs;
        fs.field = m;
        fs.cardinality = data.schema()[m].cardinality;
        fs.importance = importance[m];
        const auto counts = data.feature_counts(m);
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        if (total > 0.0) {
            fs.singular_values = singular_values(sample_weighted_matrix(model.field_embeddings(m), counts));
        } else {
            fs.singular_values.assign(c.k, 0.0);
        }
        fs.singular_sum = singular_sum(fs.singular_values);
        if (fs.singular_values[0] > 0.0) {
            fs.information_abundance = information_abundance(fs.singular_values);
            fs.p95_dimension = p95_dimension(fs.singular_values);
        }
        report.fields.push_back(std::move(fs));
    }
    auto ordering = [&](auto key) {
        std::vector<std::size_t> idx(c.fields());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(report.fields[a]) > key(report.fields[b]); });
        return idx;
    };
    report.by_cardinality = ordering([](const FieldSpectrum& f) { return static_cast<double>(f.cardinality); });
    report.by_importance = ordering([](const FieldSpectrum& f) { return f.importance; });
    return report;
}

/// field_id,cardinality,importance,singular_sum,information_abundance,p95_dim,sigma_1..sigma_K
inline void write_collapse_csv(const CollapseReport& report, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("write_collapse_csv: cannot open " + path);
    const std::size_t k = report.fields.empty() ? 0 : report.fields[0].singular_values.size();
    std::fprintf(f, "field_id,cardinality,importance,singular_sum,information_abundance,p95_dim");
    for (std::size_t i = 1; i <= k; ++i) std::fprintf(f, ",sigma_%zu", i);
    std::fprintf(f, "\n");
    for (const auto& fs : report.fields) {
        std::fprintf(f, "%zu,%zu,%.17g,%.17g,%.17g,%zu", fs.field, fs.cardinality, fs.importance, fs.singular_sum,
                     fs.information_abundance, fs.p95_dimension);
        for (double s : fs.singular_values) std::fprintf(f, ",%.17g", s);
        std::fprintf(f, "\n");
    }
    if (std::fclose(f) != 0) throw DataError("write_collapse_csv: write failed for " + path);
}

}  // namespace ipa
