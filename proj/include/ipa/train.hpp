#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ipa/data.hpp"
#include "ipa/errors.hpp"
#include "ipa/metrics.hpp"
#include "ipa/model.hpp"
#include "ipa/optim.hpp"
#include "ipa/rng.hpp"

namespace ipa {

struct EpochRecord {
    std::size_t epoch = 0;  ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;            ///< logloss (classification) or MSE (regression)
    double val_metric = 0.0;          ///< AUC (classification) or RMSE (regression)
    std::vector<double> alpha;        ///< Layer aggregator: alpha_l for l = 1..L (h_1 first)
    std::vector<double> weight_norm;  ///< ||W||_F of the weights building layer l, l = 2..L
    std::vector<double> alpha_weight_norm;  ///< alpha_l * ||W||_F of the weights building layer l, l = 2..L
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  ///< 1-based index into epochs
    double best_monitor = std::numeric_limits<double>::infinity();

    [[nodiscard]] const EpochRecord& best() const { return epochs.at(best_epoch - 1); }
};

struct TrainOptions {
    std::size_t epochs = 20;
    std::size_t batch_size = 2048;
    std::size_t patience = 3;
    std::uint64_t seed = 0;
    AdamOptions adam{};
    bool init_bias = true;
    bool restore_best = true;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct Evaluation {
    double loss = 0.0;    ///< logloss or MSE
    double metric = 0.0;  ///< AUC or RMSE
};

/// Logloss/AUC for classification, MSE/RMSE for regression. AUC is NaN on a
/// single-class set.
inline Evaluation evaluate(const IpaModel& model, const TabularDataset& data) {
    if (data.empty()) throw ContractError("evaluate: empty dataset");
    auto scores = predict_scores(model, data);
    const auto labels = data.labels();
    Evaluation e;
    if (model.config().task == Task::Classification) {
        std::vector<double> p(scores.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(scores[i]);
        e.loss = logloss(p, labels);
        try {
            e.metric = auc(scores, labels);
        } catch (const MetricError&) {
            e.metric = std::numeric_limits<double>::quiet_NaN();
        }
    } else {
        e.metric = rmse(scores, labels);
        e.loss = e.metric * e.metric;
    }
    return e;
}

/// Layer-weight diagnostics: alpha_l, ||W_l||_F and their product.
inline void fill_layer_diagnostics(const IpaModel& model, EpochRecord& rec) {
    const auto& agg = model.agg_layout();
    const std::size_t depth = model.config().depth;
    rec.alpha.clear();
    rec.weight_norm.clear();
    rec.alpha_weight_norm.clear();
    const bool layer_agg = model.config().code.aggregator == AggregatorKind::Layer;
    if (layer_agg)
        for (std::size_t l = 0; l < depth; ++l)
            rec.alpha.push_back(l < agg.first_layer() ? 0.0 : model.agg_weights()[static_cast<std::size_t>(agg.weight_index(l, 0, 0))]);
    if (model.layer_layout().stride() == 0) return;
    for (std::size_t l = 1; l < depth; ++l) {
        const double norm = model.layer_weight_norm(l);
        rec.weight_norm.push_back(norm);
        if (layer_agg) rec.alpha_weight_norm.push_back(rec.alpha[l] * norm);
    }
}

/// Mini-batch Adam with per-epoch seeded shuffling and early stopping on the
/// validation loss (classification) or RMSE (regression).
inline TrainHistory train(IpaModel& model, const TabularDataset& train_set, const TabularDataset& val_set, const TrainOptions& opts) {
    if (train_set.empty() || val_set.empty()) throw ContractError("train: datasets must be non-empty");
    if (opts.batch_size < 1 || opts.epochs < 1) throw ContractError("train: batch size and epochs must be >= 1");
    if (train_set.fields() != model.config().fields() || train_set.task() != model.config().task)
        throw ConfigError("train: dataset schema does not match the model");
    if (opts.init_bias) model.init_bias(train_set);

    AdamState adam(model.param_count(), opts.adam);
    std::vector<double> grads(model.param_count());
    std::vector<double> best_params(model.params().begin(), model.params().end());
    std::vector<std::size_t> order(train_set.rows());
    Workspace ws;
    TrainHistory history;
    std::size_t bad_epochs = 0;
    const SeededRng shuffle_root(opts.seed, 31);
    const SeededRng dropout_root(opts.seed, 32);
    const bool use_dropout = model.config().dropout > 0.0;

    for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        SeededRng shuffler = shuffle_root.derive(epoch);
        shuffle(std::span<std::size_t>(order), shuffler);
        const SeededRng epoch_dropout = dropout_root.derive(epoch);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
            const std::size_t end = std::min(order.size(), start + opts.batch_size);
            std::fill(grads.begin(), grads.end(), 0.0);
            const std::span<const std::size_t> batch(order.data() + start, end - start);
            const double l = batch_gradient(model, train_set, batch, ws, grads, use_dropout ? &epoch_dropout : nullptr);
            loss_sum += l * static_cast<double>(batch.size());
            adam.step(model.params(), grads);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        const auto ev = evaluate(model, val_set);
        rec.val_loss = ev.loss;
        rec.val_metric = ev.metric;
        fill_layer_diagnostics(model, rec);
        history.epochs.push_back(rec);
        if (opts.on_epoch) opts.on_epoch(rec);

        const double monitor = model.config().task == Task::Classification ? ev.loss : ev.metric;
        if (monitor < history.best_monitor) {
            history.best_monitor = monitor;
            history.best_epoch = epoch;
            bad_epochs = 0;
            std::copy(model.params().begin(), model.params().end(), best_params.begin());
        } else if (++bad_epochs > opts.patience) {
            break;
        }
        if (!std::isfinite(monitor)) break;
    }
    if (history.best_epoch == 0) history.best_epoch = history.epochs.size();
    else if (opts.restore_best) std::copy(best_params.begin(), best_params.end(), model.params().begin());
    return history;
}

}  // namespace ipa
