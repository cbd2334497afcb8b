// Experiment driver: generate | train | evaluate | sweep | collapse.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ipa/ipa.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kData = 3;

const char* const kConfigHelp = R"(Config files are flat key=value text ('#' starts a comment).
  model            preset (FM, FwFM, FvFM, FmFM, HOFM, xDeepFM-CIN, DCNv2-CrossNet, PFL, ...) or code such as PF'D
  embed_dim layers global_width include_self symmetric_share classifier (sum | linear | mlp:64,32)
  sum_scale first_order dropout combine (auto|sum|concat) term_scalar_pool aggregate_first_layer
  data             path to a numeric CSV (x1..xn,y) or a Criteo TSV
  data_format      csv | criteo | synthetic | planted
  synthetic_order synthetic_features synthetic_samples synthetic_noise synthetic_seed
  planted_cardinalities planted_samples planted_latent_dim planted_scale planted_seed
  hash_buckets hash_seed numeric_buckets max_rows
  lr batch_size epochs patience seed split (train:val:test, default 8:1:1) out
history.jsonl holds one JSON object per epoch with keys:
  epoch, train_loss, val_loss, val_metric, metric, alpha, weight_norm, alpha_weight_norm
IPA_THREADS caps the sweep worker pool. Exit codes: 0 ok, 2 usage/config, 3 data/IO.)";

template <class F>
int guarded(F&& body) {
    try {
        body();
        return kOk;
    } catch (const ipa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const ipa::ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const ipa::ContractError& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
}

ipa::IpaModel load_model(const std::string& path) {
    try {
        return ipa::load_checkpoint(path);
    } catch (const ipa::ParseError& e) {
        throw ipa::DataError(e.what());
    } catch (const ipa::ConfigError& e) {
        throw ipa::DataError(e.what());
    }
}

ipa::TabularDataset pick_split(const ipa::ExperimentConfig& cfg, const std::string& which) {
    auto data = ipa::load_dataset(cfg.data);
    if (which == "all") return data;
    auto s = ipa::make_splits(data, cfg);
    if (which == "train") return std::move(s.train);
    if (which == "val") return std::move(s.val);
    if (which == "test") {
        if (s.test.empty()) throw ipa::ConfigError("--split test: the test part is empty");
        return std::move(s.test);
    }
    throw ipa::ConfigError("--split: expected train, val, test or all");
}

void check_schema(const ipa::IpaModel& model, const ipa::TabularDataset& data) {
    const auto& c = model.config();
    if (data.cardinalities() != c.vocab || data.task() != c.task)
        throw ipa::DataError("checkpoint schema does not match the dataset");
}

void print_metrics(const char* label, const ipa::Evaluation& e, ipa::Task task) {
    const bool cls = task == ipa::Task::Classification;
    std::printf("%s %s=%.6f %s=%.6f\n", label, cls ? "logloss" : "mse", e.loss, cls ? "auc" : "rmse", e.metric);
}

bool is_data_key(const std::string& key) {
    static const char* keys[] = {"data", "data_format", "synthetic_order", "synthetic_features", "synthetic_samples",
                                 "synthetic_noise", "synthetic_seed", "planted_cardinalities", "planted_samples",
                                 "planted_latent_dim", "planted_scale", "planted_seed", "hash_buckets", "hash_seed",
                                 "numeric_buckets", "max_rows"};
    for (const char* k : keys)
        if (key == k) return true;
    return false;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interaction-function / layer-pooling / layer-aggregator CTR experiments"};
    app.footer(kConfigHelp);
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "write a synthetic cross-term regression CSV");
    ipa::SyntheticSpec syn;
    std::string gen_out;
    gen->add_option("--order", syn.order, "maximum cross-term order O")->default_val(3);
    gen->add_option("--features", syn.features, "feature count n (<= 16)")->default_val(10);
    gen->add_option("--samples", syn.samples, "row count")->default_val(1000);
    gen->add_option("--noise", syn.noise_sigma, "label noise sigma")->default_val(0.1);
    gen->add_option("--seed", syn.seed, "random seed")->default_val(0);
    gen->add_option("--out", gen_out, "output CSV path")->required();

    auto* tr = app.add_subcommand("train", "train one configuration");
    std::string config_path, out_override;
    tr->add_option("config", config_path, "config file")->required();
    tr->add_option("--out", out_override, "run directory (overrides the config's out)");

    auto* ev = app.add_subcommand("evaluate", "score a checkpoint on a split of the config's data");
    std::string ckpt, which = "test";
    ev->add_option("checkpoint", ckpt, "model.ckpt")->required();
    ev->add_option("config", config_path, "config file naming the data")->required();
    ev->add_option("--split", which, "train | val | test | all")->default_val("test");

    auto* sw = app.add_subcommand("sweep", "train variants of a base config");
    std::string vary;
    sw->add_option("config", config_path, "base config file")->required();
    sw->add_option("--vary", vary, "key=lo..hi or key=a,b,c (L is an alias for layers)")->required();
    sw->add_option("--out", out_override, "sweep directory (overrides the config's out)");

    auto* co = app.add_subcommand("collapse", "per-field embedding spectra of a checkpoint");
    std::string collapse_out, collapse_split = "train";
    co->add_option("checkpoint", ckpt, "model.ckpt")->required();
    co->add_option("config", config_path, "config file naming the data")->required();
    co->add_option("--out", collapse_out, "output CSV path")->required();
    co->add_option("--split", collapse_split, "rows whose feature counts weight the embeddings")->default_val("train");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (gen->parsed())
        return guarded([&] {
            auto data = ipa::generate_synthetic(syn);
            ipa::write_numeric_csv(data, gen_out);
            std::printf("wrote %zu rows to %s\n", data.rows(), gen_out.c_str());
        });

    if (tr->parsed())
        return guarded([&] {
            auto cfg = ipa::load_experiment(config_path);
            if (!out_override.empty()) cfg.out = out_override;
            const auto r = ipa::run_training(cfg);
            std::printf("best epoch %zu of %zu\n", r.history.best_epoch, r.history.epochs.size());
            print_metrics("val", r.best_val, r.model.task);
            if (!std::isnan(r.test.loss)) print_metrics("test", r.test, r.model.task);
        });

    if (ev->parsed())
        return guarded([&] {
            const auto cfg = ipa::load_experiment(config_path);
            const auto model = load_model(ckpt);
            const auto data = pick_split(cfg, which);
            check_schema(model, data);
            print_metrics(which.c_str(), ipa::evaluate(model, data), model.config().task);
        });

    if (sw->parsed())
        return guarded([&] {
            auto cfg = ipa::load_experiment(config_path);
            if (!out_override.empty()) cfg.out = out_override;
            const auto variants = ipa::expand_sweep(cfg, vary);
            const auto key = vary.substr(0, vary.find('='));
            std::vector<ipa::SweepRow> rows;
            if (is_data_key(key)) {
                rows = ipa::run_sweep(variants);
            } else {
                const auto data = ipa::load_dataset(cfg.data);
                rows = ipa::run_sweep(variants, &data);
            }
            const auto path = (std::filesystem::path(cfg.out) / "results.csv").string();
            ipa::write_sweep_csv(rows, path);
            std::printf("wrote %zu variants to %s\n", rows.size(), path.c_str());
        });

    if (co->parsed())
        return guarded([&] {
            const auto cfg = ipa::load_experiment(config_path);
            const auto model = load_model(ckpt);
            const auto data = pick_split(cfg, collapse_split);
            check_schema(model, data);
            ipa::write_collapse_csv(ipa::collapse_report(model, data), collapse_out);
            std::printf("wrote %zu fields to %s\n", data.fields(), collapse_out.c_str());
        });
    return kUsage;
}
