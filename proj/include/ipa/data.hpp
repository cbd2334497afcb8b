#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipa/errors.hpp"
#include "ipa/rng.hpp"

namespace ipa {

enum class Task { Classification, Regression };
enum class FieldType { Categorical, Numeric };

/// Numeric fields hold a single learnable vector v scaled by the cell value,
/// so their cardinality is 1 and every row uses id 0.
struct FieldSchema {
    std::string name;
    FieldType type = FieldType::Categorical;
    std::size_t cardinality = 1;

    friend bool operator==(const FieldSchema&, const FieldSchema&) = default;
};

class TabularDataset;

/// One row: per field a (possibly empty) list of active ids plus a value that
/// scales the pooled embedding.
class RowView {
public:
    RowView(const TabularDataset& data, std::size_t row) : data_(&data), row_(row) {}
    [[nodiscard]] std::span<const std::uint32_t> ids(std::size_t field) const;
    [[nodiscard]] double value(std::size_t field) const;
    [[nodiscard]] double label() const;
    [[nodiscard]] std::size_t fields() const;
    [[nodiscard]] std::size_t index() const noexcept { return row_; }

private:
    const TabularDataset* data_;
    std::size_t row_;
};

class TabularDataset {
public:
    TabularDataset() = default;
    TabularDataset(std::vector<FieldSchema> schema, Task task) : schema_(std::move(schema)), task_(task) {
        offsets_.push_back(0);
    }

    [[nodiscard]] const std::vector<FieldSchema>& schema() const noexcept { return schema_; }
    [[nodiscard]] Task task() const noexcept { return task_; }
    [[nodiscard]] std::size_t fields() const noexcept { return schema_.size(); }
    [[nodiscard]] std::size_t rows() const noexcept { return labels_.size(); }
    [[nodiscard]] bool empty() const noexcept { return labels_.empty(); }
    [[nodiscard]] RowView row(std::size_t r) const { return RowView(*this, r); }
    [[nodiscard]] std::span<const double> labels() const noexcept { return labels_; }

    [[nodiscard]] std::vector<std::size_t> cardinalities() const {
        std::vector<std::size_t> out;
        for (const auto& f : schema_) out.push_back(f.cardinality);
        return out;
    }

    /// Multi-hot row: `ids[m]` lists the active features of field m.
    void add_row(const std::vector<std::vector<std::uint32_t>>& ids, std::span<const double> values, double label) {
        if (ids.size() != fields() || values.size() != fields()) throw DimensionError("add_row: need one entry per field");
        check_label(label);
        for (std::size_t m = 0; m < fields(); ++m) {
            for (auto id : ids[m]) {
                check_id(m, id);
                ids_.push_back(id);
            }
            offsets_.push_back(ids_.size());
            values_.push_back(values[m]);
        }
        labels_.push_back(label);
    }

    /// One active feature per categorical field.
    void add_onehot_row(std::span<const std::uint32_t> ids, double label) {
        if (ids.size() != fields()) throw DimensionError("add_onehot_row: need one id per field");
        check_label(label);
        for (std::size_t m = 0; m < fields(); ++m) {
            check_id(m, ids[m]);
            ids_.push_back(ids[m]);
            offsets_.push_back(ids_.size());
            values_.push_back(1.0);
        }
        labels_.push_back(label);
    }

    /// All-numeric row (synthetic regression data).
    void add_numeric_row(std::span<const double> x, double label) {
        if (x.size() != fields()) throw DimensionError("add_numeric_row: need one value per field");
        check_label(label);
        for (std::size_t m = 0; m < fields(); ++m) {
            ids_.push_back(0);
            offsets_.push_back(ids_.size());
            values_.push_back(x[m]);
        }
        labels_.push_back(label);
    }

    [[nodiscard]] TabularDataset subset(std::span<const std::size_t> rows) const {
        TabularDataset out(schema_, task_);
        out.labels_.reserve(rows.size());
        for (auto r : rows) {
            if (r >= this->rows()) throw LookupError("subset: row index out of range");
            for (std::size_t m = 0; m < fields(); ++m) {
                const auto span = row(r).ids(m);
                out.ids_.insert(out.ids_.end(), span.begin(), span.end());
                out.offsets_.push_back(out.ids_.size());
                out.values_.push_back(values_[r * fields() + m]);
            }
            out.labels_.push_back(labels_[r]);
        }
        return out;
    }

    /// Occurrences of every feature id of `field` over all rows.
    [[nodiscard]] std::vector<double> feature_counts(std::size_t field) const {
        std::vector<double> counts(schema_.at(field).cardinality, 0.0);
        for (std::size_t r = 0; r < rows(); ++r)
            for (auto id : row(r).ids(field)) counts[id] += 1.0;
        return counts;
    }

    [[nodiscard]] double positive_rate() const {
        if (empty()) return 0.0;
        return std::accumulate(labels_.begin(), labels_.end(), 0.0) / static_cast<double>(rows());
    }

private:
    friend class RowView;

    void check_label(double label) const {
        if (!std::isfinite(label)) throw DataError("dataset: non-finite label");
        if (task_ == Task::Classification && label != 0.0 && label != 1.0)
            throw DataError("dataset: classification labels must be 0 or 1");
    }
    void check_id(std::size_t field, std::uint32_t id) const {
        if (id >= schema_[field].cardinality)
            throw LookupError("dataset: feature id " + std::to_string(id) + " out of range for field " + schema_[field].name);
    }

    std::vector<FieldSchema> schema_;
    Task task_ = Task::Classification;
    std::vector<std::size_t> offsets_;   ///< rows*M + 1 prefix offsets into ids_
    std::vector<std::uint32_t> ids_;
    std::vector<double> values_;         ///< rows*M
    std::vector<double> labels_;
};

inline std::span<const std::uint32_t> RowView::ids(std::size_t field) const {
    const std::size_t cell = row_ * data_->fields() + field;
    const auto b = data_->offsets_[cell];
    const auto e = data_->offsets_[cell + 1];
    return std::span<const std::uint32_t>(data_->ids_).subspan(b, e - b);
}
inline double RowView::value(std::size_t field) const { return data_->values_[row_ * data_->fields() + field]; }
inline double RowView::label() const { return data_->labels_[row_]; }
inline std::size_t RowView::fields() const { return data_->fields(); }

// ---------------------------------------------------------------------------
// Synthetic cross-term regression data

struct SyntheticSpec {
    std::size_t features = 10;       ///< n
    std::size_t order = 3;           ///< O
    std::size_t samples = 1000;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
    std::size_t max_combinations = 0;  ///< per-order sampling cap; 0 = enumerate all

    void validate() const {
        if (features < 1) throw ContractError("synthetic: need at least one feature");
        if (features > 16) throw ContractError("synthetic: at most 16 features (n <= 16)");
        if (order < 1 || order > features) throw ContractError("synthetic: order must satisfy 1 <= O <= n");
        if (samples < 1) throw ContractError("synthetic: samples must be >= 1");
        if (!(noise_sigma >= 0.0)) throw ContractError("synthetic: noise sigma must be >= 0");
    }
};

struct CrossTerm {
    std::vector<std::uint32_t> features;  ///< 0-based, strictly increasing
    double weight = 0.0;
};

/// All cross-terms of order 1..O in lexicographic order per order, each with
/// its N(0,1) weight.
inline std::vector<CrossTerm> synthetic_cross_terms(const SyntheticSpec& spec) {
    spec.validate();
    SeededRng weight_rng(spec.seed, 1);
    SeededRng sample_rng(spec.seed, 3);
    std::vector<CrossTerm> terms;
    for (std::size_t i = 1; i <= spec.order; ++i) {
        std::vector<std::vector<std::uint32_t>> combos;
        std::vector<std::uint32_t> c(i);
        std::iota(c.begin(), c.end(), 0u);
        const auto n = static_cast<std::uint32_t>(spec.features);
        while (true) {
            combos.push_back(c);
            std::size_t pos = i;
            while (pos > 0 && c[pos - 1] == n - i + pos - 1) --pos;
            if (pos == 0) break;
            ++c[pos - 1];
            for (std::size_t q = pos; q < i; ++q) c[q] = c[q - 1] + 1;
        }
        if (spec.max_combinations > 0 && combos.size() > spec.max_combinations) {
            std::vector<std::size_t> pick(combos.size());
            std::iota(pick.begin(), pick.end(), std::size_t{0});
            shuffle(std::span<std::size_t>(pick), sample_rng);
            pick.resize(spec.max_combinations);
            std::sort(pick.begin(), pick.end());
            std::vector<std::vector<std::uint32_t>> kept;
            for (auto p : pick) kept.push_back(combos[p]);
            combos = std::move(kept);
        }
        for (auto& combo : combos) terms.push_back({std::move(combo), gauss(weight_rng, 0.0, 1.0)});
    }
    return terms;
}

inline double evaluate_cross_terms(const std::vector<CrossTerm>& terms, std::span<const double> x) {
    double y = 0.0;
    for (const auto& t : terms) {
        double p = t.weight;
        for (auto f : t.features) p *= x[f];
        y += p;
    }
    return y;
}

inline std::vector<FieldSchema> numeric_schema(std::size_t n) {
    std::vector<FieldSchema> schema;
    for (std::size_t i = 0; i < n; ++i) schema.push_back({"x" + std::to_string(i + 1), FieldType::Numeric, 1});
    return schema;
}

/// Row r draws x and its noise from its own stream, so rows are independent
/// of generation order.
inline TabularDataset generate_synthetic(const SyntheticSpec& spec) {
    const auto terms = synthetic_cross_terms(spec);
    TabularDataset data(numeric_schema(spec.features), Task::Regression);
    const SeededRng rows_root(spec.seed, 2);
    std::vector<double> x(spec.features);
    for (std::size_t r = 0; r < spec.samples; ++r) {
        SeededRng rng = rows_root.derive(r);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        const double noise = gauss(rng, 0.0, spec.noise_sigma);
        data.add_numeric_row(x, evaluate_cross_terms(terms, x) + noise);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Planted second-order categorical classification data

struct PlantedSpec {
    std::vector<std::size_t> cardinalities{1000, 100, 10, 10};
    std::size_t samples = 20000;
    std::size_t latent_dim = 8;
    double interaction_scale = 1.0;
    std::uint64_t seed = 0;
};

/// Every feature gets a latent vector z ~ N(0, I/latent_dim); the logit is
/// scale * sum_{i<j} <z_i, z_j> and labels are Bernoulli(sigmoid(logit)).
inline TabularDataset generate_planted(const PlantedSpec& spec) {
    if (spec.cardinalities.size() < 2) throw ContractError("planted: need at least two fields");
    if (spec.samples < 1 || spec.latent_dim < 1) throw ContractError("planted: samples and latent_dim must be >= 1");
    std::vector<FieldSchema> schema;
    std::vector<std::vector<double>> latent;
    SeededRng latent_rng(spec.seed, 11);
    const double sd = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
    for (std::size_t f = 0; f < spec.cardinalities.size(); ++f) {
        if (spec.cardinalities[f] < 1) throw ContractError("planted: cardinality must be >= 1");
        schema.push_back({"c" + std::to_string(f + 1), FieldType::Categorical, spec.cardinalities[f]});
        std::vector<double> z(spec.cardinalities[f] * spec.latent_dim);
        for (auto& v : z) v = gauss(latent_rng, 0.0, sd);
        latent.push_back(std::move(z));
    }
    TabularDataset data(std::move(schema), Task::Classification);
    const SeededRng rows_root(spec.seed, 12);
    const std::size_t m = spec.cardinalities.size();
    const std::size_t d = spec.latent_dim;
    std::vector<std::uint32_t> ids(m);
    for (std::size_t r = 0; r < spec.samples; ++r) {
        SeededRng rng = rows_root.derive(r);
        for (std::size_t f = 0; f < m; ++f) ids[f] = static_cast<std::uint32_t>(rng.below(spec.cardinalities[f]));
        double logit = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const double* zi = latent[i].data() + ids[i] * d;
                const double* zj = latent[j].data() + ids[j] * d;
                for (std::size_t c = 0; c < d; ++c) logit += zi[c] * zj[c];
            }
        logit *= spec.interaction_scale;
        const double p = 1.0 / (1.0 + std::exp(-logit));
        data.add_onehot_row(ids, rng.uniform() < p ? 1.0 : 0.0);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Criteo-format ingestion

/// Deterministic string hashing into [0, buckets); id 0 is reserved for a
/// missing value. FNV-1a over the bytes, keyed by seed and field, then a
/// splitmix finalizer.
struct FeatureHasher {
    std::size_t buckets = 1u << 16;
    std::uint64_t seed = 0;

    [[nodiscard]] std::uint64_t hash(std::string_view s, std::size_t field) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ detail::splitmix64(seed + 0x9e37 * (field + 1));
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        return detail::splitmix64(h);
    }

    [[nodiscard]] std::uint32_t operator()(std::string_view s, std::size_t field) const {
        if (buckets < 2) throw ContractError("FeatureHasher: need at least two buckets (id 0 is reserved)");
        if (s.empty()) return 0;
        return static_cast<std::uint32_t>(1 + hash(s, field) % (buckets - 1));
    }
};

/// Integer cell -> floor(ln(1 + max(x, 0)))^2, shifted by one so id 0 stays
/// the missing-value id, and capped at the field cardinality.
struct NumericBucketing {
    std::size_t buckets = 64;

    [[nodiscard]] static std::size_t bucket(double x) noexcept {
        const double f = std::floor(std::log1p(std::max(x, 0.0)));
        return static_cast<std::size_t>(f * f);
    }
    [[nodiscard]] std::uint32_t id(double x) const noexcept {
        return static_cast<std::uint32_t>(std::min(bucket(x) + 1, buckets - 1));
    }
};

inline constexpr std::size_t kCriteoNumeric = 13;
inline constexpr std::size_t kCriteoCategorical = 26;

inline std::vector<FieldSchema> criteo_schema(const FeatureHasher& hasher, const NumericBucketing& numeric) {
    std::vector<FieldSchema> schema;
    for (std::size_t i = 0; i < kCriteoNumeric; ++i)
        schema.push_back({"I" + std::to_string(i + 1), FieldType::Categorical, numeric.buckets});
    for (std::size_t i = 0; i < kCriteoCategorical; ++i)
        schema.push_back({"C" + std::to_string(i + 1), FieldType::Categorical, hasher.buckets});
    return schema;
}

struct CriteoLoadResult {
    TabularDataset data;
    std::size_t lines = 0;
    std::size_t malformed = 0;
};

namespace detail {

inline bool parse_criteo_line(std::string_view line, const FeatureHasher& hasher, const NumericBucketing& numeric,
                              std::vector<std::uint32_t>& ids, double& label) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t col = 0;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        const std::string_view cell = line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
        if (col == 0) {
            if (cell == "1") label = 1.0;
            else if (cell == "0") label = 0.0;
            else return false;
        } else if (col <= kCriteoNumeric) {
            if (cell.empty()) {
                ids[col - 1] = 0;
            } else {
                long long v = 0;
                const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec != std::errc() || p != cell.data() + cell.size()) return false;
                ids[col - 1] = numeric.id(static_cast<double>(v));
            }
        } else if (col <= kCriteoNumeric + kCriteoCategorical) {
            ids[col - 1] = hasher(cell, col - 1);
        } else {
            return false;
        }
        ++col;
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return col == 1 + kCriteoNumeric + kCriteoCategorical;
}

}  // namespace detail

/// Reads a Criteo TSV (label, 13 integer columns, 26 hashed categorical
/// columns). Malformed lines are skipped and counted; more than 1% is fatal.
inline CriteoLoadResult load_criteo_tsv(const std::string& path, const FeatureHasher& hasher, const NumericBucketing& numeric,
                                        std::size_t max_rows = 0) {
    if (numeric.buckets < 2) throw ContractError("load_criteo_tsv: numeric buckets must be >= 2");
    std::ifstream in(path);
    if (!in) throw DataError("load_criteo_tsv: cannot open " + path);
    CriteoLoadResult result{TabularDataset(criteo_schema(hasher, numeric), Task::Classification)};
    std::vector<std::uint32_t> ids(kCriteoNumeric + kCriteoCategorical);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++result.lines;
        double label = 0.0;
        if (!detail::parse_criteo_line(line, hasher, numeric, ids, label)) {
            ++result.malformed;
            continue;
        }
        result.data.add_onehot_row(ids, label);
        if (max_rows > 0 && result.data.rows() >= max_rows) break;
    }
    if (result.lines == 0) throw DataError("load_criteo_tsv: no data lines in " + path);
    if (result.malformed * 100 > result.lines)
        throw DataError("load_criteo_tsv: " + std::to_string(result.malformed) + " of " + std::to_string(result.lines) +
                        " lines malformed (limit 1%)");
    return result;
}

// ---------------------------------------------------------------------------
// Splits

/// Partition sizes by largest-remainder rounding (ties go to the earlier part).
inline std::vector<std::size_t> split_sizes(std::size_t rows, std::span<const double> ratios) {
    if (ratios.empty()) throw ContractError("split: need at least one ratio");
    double total = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw ContractError("split: ratios must be positive");
        total += r;
    }
    std::vector<std::size_t> sizes(ratios.size());
    std::vector<double> frac(ratios.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double exact = static_cast<double>(rows) * ratios[i] / total;
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        frac[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < rows; ++i, ++assigned) ++sizes[order[i % order.size()]];
    for (auto s : sizes)
        if (s == 0) throw ContractError("split: a partition would be empty");
    return sizes;
}

/// Seeded permutation followed by contiguous slicing.
inline std::vector<std::vector<std::size_t>> split_indices(std::size_t rows, std::span<const double> ratios, std::uint64_t seed) {
    const auto sizes = split_sizes(rows, ratios);
    std::vector<std::size_t> perm(rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    SeededRng rng(seed, 21);
    shuffle(std::span<std::size_t>(perm), rng);
    std::vector<std::vector<std::size_t>> parts;
    std::size_t at = 0;
    for (auto s : sizes) {
        parts.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(at), perm.begin() + static_cast<std::ptrdiff_t>(at + s));
        at += s;
    }
    return parts;
}

inline std::vector<TabularDataset> split(const TabularDataset& data, std::span<const double> ratios, std::uint64_t seed) {
    std::vector<TabularDataset> out;
    for (const auto& idx : split_indices(data.rows(), ratios, seed)) out.push_back(data.subset(idx));
    return out;
}

// ---------------------------------------------------------------------------
// CSV persistence for numeric (synthetic) datasets: header x1,...,xn,y

inline void write_numeric_csv(const TabularDataset& data, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("write_numeric_csv: cannot open " + path);
    for (std::size_t m = 0; m < data.fields(); ++m) std::fprintf(f, "%s,", data.schema()[m].name.c_str());
    std::fprintf(f, "y\n");
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const auto row = data.row(r);
        for (std::size_t m = 0; m < data.fields(); ++m) std::fprintf(f, "%.17g,", row.value(m));
        std::fprintf(f, "%.17g\n", row.label());
    }
    if (std::fclose(f) != 0) throw DataError("write_numeric_csv: write failed for " + path);
}

inline TabularDataset read_numeric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_numeric_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("read_numeric_csv: empty file " + path);
    std::vector<std::string> header;
    for (std::size_t start = 0;;) {
        const auto comma = line.find(',', start);
        header.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (header.size() < 2 || header.back() != "y") throw DataError("read_numeric_csv: header must end with column y");
    const std::size_t n = header.size() - 1;
    std::vector<FieldSchema> schema;
    for (std::size_t i = 0; i < n; ++i) schema.push_back({header[i], FieldType::Numeric, 1});
    TabularDataset data(std::move(schema), Task::Regression);
    std::vector<double> x(n);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const char* p = line.c_str();
        for (std::size_t i = 0; i <= n; ++i) {
            char* end = nullptr;
            const double v = std::strtod(p, &end);
            if (end == p || (i < n && *end != ',') || (i == n && *end != '\0' && *end != '\r'))
                throw DataError("read_numeric_csv: malformed line " + std::to_string(line_no));
            if (i < n) x[i] = v;
            else data.add_numeric_row(x, v);
            p = end + 1;
        }
    }
    if (data.empty()) throw DataError("read_numeric_csv: no rows in " + path);
    return data;
}

}  // namespace ipa
