#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ipa/checkpoint.hpp"
#include "ipa/collapse.hpp"
#include "ipa/config.hpp"
#include "ipa/data.hpp"
#include "ipa/errors.hpp"
#include "ipa/model.hpp"
#include "ipa/train.hpp"

namespace ipa {

namespace fs = std::filesystem;

/// Where the rows come from. Synthetic and planted sets are generated in
/// process from their seeds; csv and criteo read `path`.
struct DataSource {
    std::string format;  ///< csv | criteo | synthetic | planted; empty means infer from path
    std::string path;
    SyntheticSpec synthetic;
    PlantedSpec planted;
    std::size_t hash_buckets = 1u << 16;
    std::uint64_t hash_seed = 0;
    std::size_t numeric_buckets = 64;
    std::size_t max_rows = 0;

    [[nodiscard]] std::string resolved_format() const {
        if (!format.empty()) return format;
        if (path.empty()) throw ConfigError("config: either data or data_format must be set");
        return fs::path(path).extension() == ".csv" ? "csv" : "criteo";
    }
};

struct ExperimentConfig {
    ModelConfig model;  ///< vocab and task come from the dataset
    bool has_model = false;
    std::vector<std::pair<std::string, std::string>> model_overrides;  ///< explicit model keys other than model
    DataSource data;
    double lr = 1e-3;
    std::size_t batch_size = 2048;
    std::size_t epochs = 20;
    std::size_t patience = 3;
    std::uint64_t seed = 0;
    std::vector<double> split{0.8, 0.1, 0.1};
    std::string out = "run";

    [[nodiscard]] TrainOptions train_options() const {
        TrainOptions t;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.patience = patience;
        t.seed = seed;
        t.adam.lr = lr;
        return t;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<double> parse_ratios(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ':')) {
        const double r = parse_double(key, item);
        if (!(r >= 0.0)) throw ConfigError(key + ": ratios must be non-negative");
        out.push_back(r);
    }
    if (out.size() != 3) throw ConfigError(key + ": expected train:val:test, e.g. 8:1:1");
    if (!(out[0] > 0.0 && out[1] > 0.0)) throw ConfigError(key + ": train and val parts must be positive");
    return out;
}

inline std::string format_ratios(const std::vector<double>& r) {
    std::string s;
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? ":" : "") + format_double(r[i]);
    return s;
}

}  // namespace detail

/// Applies one experiment key. Model keys go through the model table; vocab and
/// task are fixed by the data and therefore rejected here.
inline void apply_experiment_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    if (key == "vocab" || key == "task") throw ConfigError("config: key \"" + key + "\" is derived from the dataset");
    if (apply_model_key(c.model, key, v)) {
        if (key == "model") c.has_model = true;
        else c.model_overrides.emplace_back(key, v);
        return;
    }
    auto& d = c.data;
    if (key == "data") d.path = v;
    else if (key == "data_format") {
        if (v != "csv" && v != "criteo" && v != "synthetic" && v != "planted")
            throw ConfigError("data_format: expected csv, criteo, synthetic or planted");
        d.format = v;
    } else if (key == "synthetic_order") d.synthetic.order = parse_size(key, v);
    else if (key == "synthetic_features") d.synthetic.features = parse_size(key, v);
    else if (key == "synthetic_samples") d.synthetic.samples = parse_size(key, v);
    else if (key == "synthetic_noise") d.synthetic.noise_sigma = parse_double(key, v);
    else if (key == "synthetic_seed") d.synthetic.seed = parse_size(key, v);
    else if (key == "planted_cardinalities") d.planted.cardinalities = parse_sizes(key, v);
    else if (key == "planted_samples") d.planted.samples = parse_size(key, v);
    else if (key == "planted_latent_dim") d.planted.latent_dim = parse_size(key, v);
    else if (key == "planted_scale") d.planted.interaction_scale = parse_double(key, v);
    else if (key == "planted_seed") d.planted.seed = parse_size(key, v);
    else if (key == "hash_buckets") d.hash_buckets = parse_size(key, v);
    else if (key == "hash_seed") d.hash_seed = parse_size(key, v);
    else if (key == "numeric_buckets") d.numeric_buckets = parse_size(key, v);
    else if (key == "max_rows") d.max_rows = parse_size(key, v);
    else if (key == "lr") c.lr = parse_double(key, v);
    else if (key == "batch_size") c.batch_size = parse_size(key, v);
    else if (key == "epochs") c.epochs = parse_size(key, v);
    else if (key == "patience") c.patience = parse_size(key, v);
    else if (key == "seed") c.seed = parse_size(key, v);
    else if (key == "split") c.split = parse_ratios(key, v);
    else if (key == "out") c.out = v;
    else throw ConfigError("config: unknown key \"" + key + "\"");
}

inline void validate_experiment(const ExperimentConfig& c) {
    if (!c.has_model) throw ConfigError("config: key \"model\" is required");
    if (!(c.lr > 0.0)) throw ConfigError("lr: must be positive");
    if (c.batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (c.epochs < 1) throw ConfigError("epochs: must be >= 1");
    if (c.out.empty()) throw ConfigError("out: must not be empty");
    (void)c.data.resolved_format();
}

/// Parses flat key=value text. Blank lines and lines starting with '#' are
/// skipped. The model key is applied first because a preset resets the
/// model fields that later keys refine. Relative data/out paths are taken
/// relative to `base_dir`.
inline ExperimentConfig parse_experiment(std::istream& in, const fs::path& base_dir = {}) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        auto key = detail::trim(std::string_view(t).substr(0, eq));
        auto value = detail::trim(std::string_view(t).substr(eq + 1));
        if (!seen.insert(key).second) throw ConfigError("config: duplicate key \"" + key + "\"");
        entries.emplace_back(std::move(key), std::move(value));
    }
    ExperimentConfig c;
    std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.first == "model"; });
    for (const auto& [k, v] : entries) apply_experiment_key(c, k, v);
    if (!base_dir.empty()) {
        if (!c.data.path.empty() && fs::path(c.data.path).is_relative()) c.data.path = (base_dir / c.data.path).lexically_normal().string();
        if (fs::path(c.out).is_relative()) c.out = (base_dir / c.out).lexically_normal().string();
    }
    validate_experiment(c);
    return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    return parse_experiment(in, fs::absolute(path).parent_path());
}

/// Every key with its effective value; parsing this text reproduces the run.
inline std::string resolved_config_text(const ExperimentConfig& c) {
    using detail::format_double;
    std::ostringstream os;
    for (const auto& [k, v] : model_config_to_kv(c.model))
        if (k != "vocab" && k != "task") os << k << '=' << v << '\n';
    const auto& d = c.data;
    os << "data=" << (d.path.empty() ? "" : fs::absolute(d.path).string()) << '\n';
    os << "data_format=" << d.resolved_format() << '\n';
    os << "synthetic_order=" << d.synthetic.order << '\n';
    os << "synthetic_features=" << d.synthetic.features << '\n';
    os << "synthetic_samples=" << d.synthetic.samples << '\n';
    os << "synthetic_noise=" << format_double(d.synthetic.noise_sigma) << '\n';
    os << "synthetic_seed=" << d.synthetic.seed << '\n';
    os << "planted_cardinalities=" << detail::join_sizes(d.planted.cardinalities) << '\n';
    os << "planted_samples=" << d.planted.samples << '\n';
    os << "planted_latent_dim=" << d.planted.latent_dim << '\n';
    os << "planted_scale=" << format_double(d.planted.interaction_scale) << '\n';
    os << "planted_seed=" << d.planted.seed << '\n';
    os << "hash_buckets=" << d.hash_buckets << '\n';
    os << "hash_seed=" << d.hash_seed << '\n';
    os << "numeric_buckets=" << d.numeric_buckets << '\n';
    os << "max_rows=" << d.max_rows << '\n';
    os << "lr=" << format_double(c.lr) << '\n';
    os << "batch_size=" << c.batch_size << '\n';
    os << "epochs=" << c.epochs << '\n';
    os << "patience=" << c.patience << '\n';
    os << "seed=" << c.seed << '\n';
    os << "split=" << detail::format_ratios(c.split) << '\n';
    os << "out=" << fs::absolute(c.out).string() << '\n';
    return os.str();
}

inline TabularDataset load_dataset(const DataSource& d) {
    const auto format = d.resolved_format();
    if (format == "synthetic") {
        try {
            return generate_synthetic(d.synthetic);
        } catch (const ContractError& e) {
            throw ConfigError(e.what());
        }
    }
    if (format == "planted") {
        try {
            return generate_planted(d.planted);
        } catch (const ContractError& e) {
            throw ConfigError(e.what());
        }
    }
    if (d.path.empty()) throw ConfigError("data: a path is required for format " + format);
    if (format == "csv") return read_numeric_csv(d.path);
    if (d.hash_buckets < 2 || d.numeric_buckets < 2) throw ConfigError("hash_buckets and numeric_buckets must be >= 2");
    return load_criteo_tsv(d.path, FeatureHasher{d.hash_buckets, d.hash_seed}, NumericBucketing{d.numeric_buckets}, d.max_rows).data;
}

/// Model configuration completed from the dataset schema.
inline ModelConfig bind_model(const ExperimentConfig& c, const TabularDataset& data) {
    ModelConfig m = c.model;
    m.vocab = data.cardinalities();
    m.task = data.task();
    m.validate();
    return m;
}

struct Splits {
    TabularDataset train, val, test;
    std::vector<std::vector<std::size_t>> indices;
};

inline Splits make_splits(const TabularDataset& data, const ExperimentConfig& c) {
    Splits s;
    s.indices = split_indices(data.rows(), c.split, c.seed);
    if (s.indices[0].empty() || s.indices[1].empty()) throw DataError("split: train and val parts must be non-empty");
    s.train = data.subset(s.indices[0]);
    s.val = data.subset(s.indices[1]);
    s.test = data.subset(s.indices[2]);
    return s;
}

/// One JSON object per epoch. Keys: epoch, train_loss, val_loss, val_metric,
/// metric, alpha, weight_norm, alpha_weight_norm.
inline std::string history_line(const EpochRecord& r, Task task) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["val_metric"] = std::isfinite(r.val_metric) ? nlohmann::ordered_json(r.val_metric) : nlohmann::ordered_json(nullptr);
    j["metric"] = task == Task::Classification ? "auc" : "rmse";
    j["alpha"] = r.alpha;
    j["weight_norm"] = r.weight_norm;
    j["alpha_weight_norm"] = r.alpha_weight_norm;
    return j.dump();
}

inline constexpr const char* kHistoryKeys = "epoch, train_loss, val_loss, val_metric, metric, alpha, weight_norm, alpha_weight_norm";

struct RunResult {
    TrainHistory history;
    Evaluation best_val;
    Evaluation test;  ///< NaN fields when the test split is empty
    std::size_t param_count = 0;
    double wall_seconds = 0.0;
    ModelConfig model;
};

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) throw DataError("cannot write " + path.string());
}

/// Trains one configuration on an already-loaded dataset and writes
/// resolved.cfg, split.txt, history.jsonl and model.ckpt into c.out.
inline RunResult run_training(const ExperimentConfig& c, const TabularDataset& data) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir(c.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create run directory " + dir.string());
    write_text(dir / "resolved.cfg", resolved_config_text(c));

    const Splits s = make_splits(data, c);
    {
        std::ostringstream os;
        os << "rows=" << data.rows() << "\nseed=" << c.seed << "\nsplit=" << detail::format_ratios(c.split) << '\n';
        const char* names[] = {"train", "val", "test"};
        for (std::size_t i = 0; i < 3; ++i) os << names[i] << '=' << s.indices[i].size() << '\n';
        write_text(dir / "split.txt", os.str());
    }

    RunResult result;
    result.model = bind_model(c, data);
    IpaModel model(result.model, c.seed);
    result.param_count = model.param_count();

    std::ofstream history(dir / "history.jsonl", std::ios::binary);
    if (!history) throw DataError("cannot write " + (dir / "history.jsonl").string());
    auto opts = c.train_options();
    opts.on_epoch = [&](const EpochRecord& r) { history << history_line(r, result.model.task) << '\n'; };
    result.history = train(model, s.train, s.val, opts);
    history.close();
    if (!history) throw DataError("write failed for history.jsonl");

    save_checkpoint(model, (dir / "model.ckpt").string());
    result.best_val = evaluate(model, s.val);
    if (s.test.empty()) result.test = {std::nan(""), std::nan("")};
    else result.test = evaluate(model, s.test);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

inline RunResult run_training(const ExperimentConfig& c) { return run_training(c, load_dataset(c.data)); }

// ---------------------------------------------------------------------------
// Sweeps

struct SweepVariant {
    std::string id;  ///< e.g. "L=4" or "model=PFL"
    ExperimentConfig config;
};

/// `--vary key=a,b,c` or `--vary key=lo..hi` (integers, inclusive). L is an
/// alias for layers.
inline std::vector<SweepVariant> expand_sweep(const ExperimentConfig& base, const std::string& vary) {
    const auto eq = vary.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--vary: expected key=values, e.g. L=3..8 or model=PFL,PF'D");
    const std::string name = detail::trim(vary.substr(0, eq));
    const std::string key = name == "L" ? "layers" : name;
    const std::string spec = detail::trim(vary.substr(eq + 1));
    std::vector<std::string> values;
    if (const auto dots = spec.find(".."); dots != std::string::npos) {
        const auto lo = detail::parse_size(name, spec.substr(0, dots));
        const auto hi = detail::parse_size(name, spec.substr(dots + 2));
        for (auto v = lo; v <= hi; ++v) values.push_back(std::to_string(v));
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!detail::trim(item).empty()) values.push_back(detail::trim(item));
    }
    if (values.empty()) throw ConfigError("--vary: empty sweep set");
    if (key == "out") throw ConfigError("--vary: out cannot be swept");

    std::vector<SweepVariant> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        SweepVariant v{name + "=" + values[i], base};
        if (key == "model") {
            // the new preset comes first, then the base file's explicit model keys
            v.config.model = ModelConfig{};
            apply_model_key(v.config.model, "model", values[i]);
            for (const auto& [k, val] : base.model_overrides) apply_model_key(v.config.model, k, val);
        } else {
            apply_experiment_key(v.config, key, values[i]);
        }
        v.config.out = (fs::path(base.out) / ("variant_" + std::to_string(i))).string();
        validate_experiment(v.config);
        out.push_back(std::move(v));
    }
    return out;
}

inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("IPA_THREADS")) {
        try {
            n = std::max<std::size_t>(1, detail::parse_size("IPA_THREADS", env));
        } catch (const ParseError&) {
            throw ConfigError("IPA_THREADS must be a positive integer");
        }
    }
    return std::min(n, std::max<std::size_t>(1, jobs));
}

struct SweepRow {
    std::string variant;
    RunResult result;
};

/// Runs variants on a worker pool; rows come back in variant order. The
/// dataset is loaded once when every variant shares the base data source.
inline std::vector<SweepRow> run_sweep(const std::vector<SweepVariant>& variants, const TabularDataset* shared = nullptr) {
    if (variants.empty()) throw ConfigError("sweep: empty sweep set");
    std::vector<SweepRow> rows(variants.size());
    std::vector<std::exception_ptr> errors(variants.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < variants.size();) {
            try {
                rows[i].variant = variants[i].id;
                rows[i].result = shared ? run_training(variants[i].config, *shared) : run_training(variants[i].config);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = worker_count(variants.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

/// variant,best_epoch,best_val_loss,best_val_metric,test_loss,test_metric,param_count,wall_seconds
inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot write " + path);
    std::fprintf(f, "variant,best_epoch,best_val_loss,best_val_metric,test_loss,test_metric,param_count,wall_seconds\n");
    for (const auto& r : rows) {
        const auto& x = r.result;
        std::fprintf(f, "\"%s\",%zu,%.17g,%.17g,%.17g,%.17g,%zu,%.3f\n", r.variant.c_str(), x.history.best_epoch, x.best_val.loss,
                     x.best_val.metric, x.test.loss, x.test.metric, x.param_count, x.wall_seconds);
    }
    if (std::fclose(f) != 0) throw DataError("write failed for " + path);
}

}  // namespace ipa
