#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ipa/aggregate.hpp"
#include "ipa/config.hpp"
#include "ipa/data.hpp"
#include "ipa/errors.hpp"
#include "ipa/layers.hpp"
#include "ipa/linalg.hpp"
#include "ipa/metrics.hpp"
#include "ipa/rng.hpp"

namespace ipa {

/// Named contiguous range of the flat parameter buffer.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

inline std::size_t classifier_param_count(const ClassifierSpec& c, std::size_t input) {
    switch (c.kind) {
        case ClassifierSpec::Kind::SumPool: return 0;
        case ClassifierSpec::Kind::Linear: return input;
        case ClassifierSpec::Kind::Mlp: {
            std::size_t total = 0, in = input;
            for (auto h : c.hidden) {
                total += in * h + h;
                in = h;
            }
            return total + in;
        }
    }
    return 0;
}

/// Closed-form trainable scalar count; independent of how IpaModel stores them.
inline std::size_t count_params(const ModelConfig& config) {
    config.validate();
    std::size_t vocab_total = 0;
    for (auto v : config.vocab) vocab_total += v;
    const std::size_t embeddings = vocab_total * config.k;
    const std::size_t interaction = interaction_param_count(config.code.interaction, config.pooling(), config.fields(), config.k);
    const AggLayout agg(config.aggregator(), config.layer_widths(), config.k);
    const std::size_t classifier = classifier_param_count(config.classifier, agg.output_size());
    const std::size_t first_order = config.first_order ? vocab_total : 0;
    return embeddings + interaction + agg.param_count() + classifier + first_order + (config.has_bias() ? 1 : 0);
}

/// Per-field embedding rows inside a flat buffer.
struct EmbeddingTableView {
    std::span<const double> values;
    std::span<const std::size_t> field_offsets;
    std::span<const std::size_t> vocab;
    std::size_t k = 0;

    [[nodiscard]] std::span<const double> row(std::size_t field, std::size_t id) const {
        if (id >= vocab[field]) throw LookupError("embedding: feature id " + std::to_string(id) + " out of range for field " +
                                                  std::to_string(field));
        return values.subspan(field_offsets[field] + id * k, k);
    }
};

/// h_1: per field, value * mean of the active embeddings (zero when none).
inline void build_first_layer(const EmbeddingTableView& table, const RowView& row, std::span<double> out) {
    const std::size_t m_count = table.vocab.size();
    const std::size_t k = table.k;
    if (row.fields() != m_count) throw DimensionError("build_first_layer: sample field count differs from model");
    if (out.size() != m_count * k) throw DimensionError("build_first_layer: output must hold M*K values");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
        const auto ids = row.ids(m);
        if (ids.empty()) continue;
        const double scale = row.value(m) / static_cast<double>(ids.size());
        for (auto id : ids) {
            const auto e = table.row(m, id);
            for (std::size_t c = 0; c < k; ++c) out[m * k + c] += scale * e[c];
        }
    }
}

/// Scratch buffers for one sample's forward and backward pass.
struct Workspace {
    Vector first;
    LayerStack stack;
    Vector r;
    Vector mask;
    Vector classifier_in;
    std::vector<Vector> hidden;      ///< post-ReLU activations of the MLP head
    std::vector<Vector> grad_layers;
    Vector grad_r;
    Vector grad_first;
    std::vector<Vector> grad_hidden;
    double score = 0.0;
};

/// Trainable IPA model: embeddings, interaction weights, aggregator weights,
/// classifier head and optional first-order part, all in one flat buffer.
class IpaModel {
public:
    IpaModel() = default;

    explicit IpaModel(ModelConfig config, std::uint64_t seed = 0) : config_(std::move(config)) {
        config_.validate();
        layer_layout_ = LayerLayout(config_.code.interaction, config_.pooling(), config_.fields(), config_.k);
        agg_layout_ = AggLayout(config_.aggregator(), config_.layer_widths(), config_.k);
        build_blocks();
        init(seed);
    }

    [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
    [[nodiscard]] const LayerLayout& layer_layout() const noexcept { return layer_layout_; }
    [[nodiscard]] const AggLayout& agg_layout() const noexcept { return agg_layout_; }
    [[nodiscard]] const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
    [[nodiscard]] std::span<const double> params() const noexcept { return params_; }
    [[nodiscard]] std::span<double> params() noexcept { return params_; }
    [[nodiscard]] std::size_t param_count() const noexcept { return params_.size(); }

    [[nodiscard]] const ParamBlock& block(std::string_view name) const {
        for (const auto& b : blocks_)
            if (b.name == name) return b;
        throw LookupError("model: no parameter block named " + std::string(name));
    }
    [[nodiscard]] bool has_block(std::string_view name) const noexcept {
        return std::any_of(blocks_.begin(), blocks_.end(), [&](const ParamBlock& b) { return b.name == name; });
    }

    [[nodiscard]] EmbeddingTableView embeddings() const noexcept {
        return {params_, emb_offsets_, config_.vocab, config_.k};
    }
    /// vocab x K matrix copy of one field's embedding table.
    [[nodiscard]] Matrix field_embeddings(std::size_t field) const {
        const auto v = std::span<const double>(params_).subspan(emb_offsets_.at(field), config_.vocab[field] * config_.k);
        return Matrix(config_.vocab[field], config_.k, std::vector<double>(v.begin(), v.end()));
    }
    [[nodiscard]] std::span<double> embedding_row(std::size_t field, std::size_t id) {
        return std::span<double>(params_).subspan(emb_offsets_.at(field) + id * config_.k, config_.k);
    }

    [[nodiscard]] LayerParamsView interaction() const noexcept {
        return {layer_layout_, std::span<const double>(params_).subspan(interaction_offset_, layer_layout_.total())};
    }
    [[nodiscard]] std::span<double> interaction_values() noexcept {
        return std::span<double>(params_).subspan(interaction_offset_, layer_layout_.total());
    }
    [[nodiscard]] std::span<const double> agg_weights() const noexcept {
        return std::span<const double>(params_).subspan(agg_offset_, agg_layout_.param_count());
    }
    [[nodiscard]] std::span<double> agg_weights() noexcept {
        return std::span<double>(params_).subspan(agg_offset_, agg_layout_.param_count());
    }

    /// Frobenius norm of the interaction weights that build layer `layer` (0-based, >= 1).
    [[nodiscard]] double layer_weight_norm(std::size_t layer) const {
        const auto w = interaction().values.subspan(layer_layout_.layer_offset(layer), layer_layout_.layer_size(layer));
        return frobenius_norm(w);
    }

    /// Sets the global bias to the train log-odds (classification) or label mean.
    void init_bias(const TabularDataset& train) {
        if (!config_.has_bias() || train.empty()) return;
        double b = 0.0;
        if (config_.task == Task::Classification) {
            const double p = std::clamp(train.positive_rate(), 1e-6, 1.0 - 1e-6);
            b = std::log(p / (1.0 - p));
        } else {
            const auto labels = train.labels();
            for (double y : labels) b += y;
            b /= static_cast<double>(labels.size());
        }
        params_[bias_offset_] = b;
    }

    /// Raw score (logit for classification). Dropout is applied when `dropout_rng` is given.
    double forward(const RowView& row, Workspace& ws, SeededRng* dropout_rng = nullptr) const {
        const std::size_t k = config_.k;
        const std::size_t m_count = config_.fields();
        ws.first.resize(m_count * k);
        build_first_layer(embeddings(), row, ws.first);
        stack_forward(ws.first, interaction(), ws.stack);
        ws.r.resize(agg_layout_.output_size());
        aggregate(ws.stack, agg_layout_, agg_weights(), ws.r);

        ws.classifier_in = ws.r;
        ws.mask.assign(ws.r.size(), 1.0);
        if (dropout_rng && config_.dropout > 0.0) {
            const double keep = 1.0 - config_.dropout;
            for (std::size_t i = 0; i < ws.r.size(); ++i) {
                ws.mask[i] = dropout_rng->uniform() < config_.dropout ? 0.0 : 1.0 / keep;
                ws.classifier_in[i] *= ws.mask[i];
            }
        }

        double score = classifier_forward(ws);
        if (config_.has_bias()) score += params_[bias_offset_];
        if (config_.first_order) {
            for (std::size_t m = 0; m < m_count; ++m) {
                const auto ids = row.ids(m);
                if (ids.empty()) continue;
                double s = 0.0;
                for (auto id : ids) s += params_[fo_offsets_[m] + id];
                score += row.value(m) * s / static_cast<double>(ids.size());
            }
        }
        ws.score = score;
        return score;
    }

    double predict(const RowView& row) const {
        Workspace ws;
        return forward(row, ws);
    }

    /// Accumulates d(scale * score)/dparams into `grads`, using the caches of
    /// the preceding forward() on the same workspace.
    void backward(const RowView& row, Workspace& ws, double dscore, std::span<double> grads) const {
        if (grads.size() != params_.size()) throw DimensionError("backward: gradient buffer size differs from parameter count");
        const std::size_t k = config_.k;
        const std::size_t m_count = config_.fields();
        if (config_.has_bias()) grads[bias_offset_] += dscore;
        if (config_.first_order) {
            for (std::size_t m = 0; m < m_count; ++m) {
                const auto ids = row.ids(m);
                if (ids.empty()) continue;
                const double g = dscore * row.value(m) / static_cast<double>(ids.size());
                for (auto id : ids) grads[fo_offsets_[m] + id] += g;
            }
        }

        ws.grad_r.assign(ws.r.size(), 0.0);
        classifier_backward(ws, dscore, grads);
        for (std::size_t i = 0; i < ws.grad_r.size(); ++i) ws.grad_r[i] *= ws.mask[i];

        ws.grad_layers.resize(ws.stack.depth());
        for (std::size_t l = 0; l < ws.stack.depth(); ++l) ws.grad_layers[l].assign(ws.stack.layers[l].size(), 0.0);
        aggregate_backward(ws.stack, agg_layout_, agg_weights(), ws.grad_r, ws.grad_layers,
                           grads.subspan(agg_offset_, agg_layout_.param_count()));
        ws.grad_first.assign(m_count * k, 0.0);
        stack_backward(ws.stack, interaction(), ws.grad_layers, grads.subspan(interaction_offset_, layer_layout_.total()),
                       ws.grad_first);

        for (std::size_t m = 0; m < m_count; ++m) {
            const auto ids = row.ids(m);
            if (ids.empty()) continue;
            const double scale = row.value(m) / static_cast<double>(ids.size());
            for (auto id : ids) {
                double* g = grads.data() + emb_offsets_[m] + id * k;
                for (std::size_t c = 0; c < k; ++c) g[c] += scale * ws.grad_first[m * k + c];
            }
        }
    }

private:
    void add_block(std::string name, std::size_t size) {
        const std::size_t off = blocks_.empty() ? 0 : blocks_.back().offset + blocks_.back().size;
        blocks_.push_back({std::move(name), off, size});
    }

    void build_blocks() {
        const std::size_t k = config_.k;
        for (std::size_t m = 0; m < config_.fields(); ++m) {
            add_block("embedding." + std::to_string(m), config_.vocab[m] * k);
            emb_offsets_.push_back(blocks_.back().offset);
        }
        if (config_.first_order)
            for (std::size_t m = 0; m < config_.fields(); ++m) {
                add_block("first_order." + std::to_string(m), config_.vocab[m]);
                fo_offsets_.push_back(blocks_.back().offset);
            }
        add_block("interaction", layer_layout_.total());
        interaction_offset_ = blocks_.back().offset;
        add_block("aggregator", agg_layout_.param_count());
        agg_offset_ = blocks_.back().offset;
        std::size_t in = agg_layout_.output_size();
        switch (config_.classifier.kind) {
            case ClassifierSpec::Kind::SumPool: break;
            case ClassifierSpec::Kind::Linear:
                add_block("classifier.w", in);
                head_offsets_.push_back(blocks_.back().offset);
                break;
            case ClassifierSpec::Kind::Mlp:
                for (std::size_t i = 0; i < config_.classifier.hidden.size(); ++i) {
                    const std::size_t h = config_.classifier.hidden[i];
                    add_block("classifier.hidden" + std::to_string(i) + ".w", in * h);
                    head_offsets_.push_back(blocks_.back().offset);
                    add_block("classifier.hidden" + std::to_string(i) + ".b", h);
                    head_offsets_.push_back(blocks_.back().offset);
                    in = h;
                }
                add_block("classifier.w", in);
                head_offsets_.push_back(blocks_.back().offset);
                break;
        }
        if (config_.has_bias()) {
            add_block("bias", 1);
            bias_offset_ = blocks_.back().offset;
        }
        params_.assign(blocks_.back().offset + blocks_.back().size, 0.0);
    }

    void init(std::uint64_t seed) {
        SeededRng emb_rng(seed, 101);
        for (std::size_t m = 0; m < config_.fields(); ++m) {
            auto v = std::span<double>(params_).subspan(emb_offsets_[m], config_.vocab[m] * config_.k);
            for (double& x : v) x = gauss(emb_rng, 0.0, 0.01);
        }
        SeededRng w_rng(seed, 102);
        auto w = interaction_values();
        for (std::size_t off = 0; off < w.size(); off += layer_layout_.stride())
            init_pair_weight(config_.code.interaction, config_.k, w.subspan(off, layer_layout_.stride()), w_rng);
        for (double& a : agg_weights()) a = 1.0;
        if (config_.classifier.kind == ClassifierSpec::Kind::Mlp) {
            SeededRng h_rng(seed, 103);
            std::size_t in = agg_layout_.output_size();
            for (std::size_t i = 0; i < config_.classifier.hidden.size(); ++i) {
                const std::size_t h = config_.classifier.hidden[i];
                const double sd = std::sqrt(2.0 / static_cast<double>(in));
                for (double& x : std::span<double>(params_).subspan(head_offsets_[2 * i], in * h)) x = gauss(h_rng, 0.0, sd);
                in = h;
            }
        }
    }

    double classifier_forward(Workspace& ws) const {
        const auto& x = ws.classifier_in;
        switch (config_.classifier.kind) {
            case ClassifierSpec::Kind::SumPool: {
                double s = 0.0;
                for (double v : x) s += v;
                return config_.sum_scale * s;
            }
            case ClassifierSpec::Kind::Linear: return dot(x, std::span<const double>(params_).subspan(head_offsets_[0], x.size()));
            case ClassifierSpec::Kind::Mlp: {
                const auto& hidden = config_.classifier.hidden;
                ws.hidden.resize(hidden.size());
                std::span<const double> in = x;
                for (std::size_t i = 0; i < hidden.size(); ++i) {
                    const std::size_t h = hidden[i];
                    const double* wm = params_.data() + head_offsets_[2 * i];
                    const double* b = params_.data() + head_offsets_[2 * i + 1];
                    auto& out = ws.hidden[i];
                    out.assign(b, b + h);
                    for (std::size_t a = 0; a < in.size(); ++a) {
                        const double xa = in[a];
                        if (xa == 0.0) continue;
                        for (std::size_t j = 0; j < h; ++j) out[j] += xa * wm[a * h + j];
                    }
                    for (double& v : out) v = std::max(0.0, v);
                    in = out;
                }
                return dot(in, std::span<const double>(params_).subspan(head_offsets_.back(), in.size()));
            }
        }
        return 0.0;
    }

    void classifier_backward(Workspace& ws, double dscore, std::span<double> grads) const {
        const auto& x = ws.classifier_in;
        switch (config_.classifier.kind) {
            case ClassifierSpec::Kind::SumPool:
                for (double& g : ws.grad_r) g += config_.sum_scale * dscore;
                return;
            case ClassifierSpec::Kind::Linear: {
                const double* w = params_.data() + head_offsets_[0];
                double* gw = grads.data() + head_offsets_[0];
                for (std::size_t i = 0; i < x.size(); ++i) {
                    gw[i] += dscore * x[i];
                    ws.grad_r[i] += dscore * w[i];
                }
                return;
            }
            case ClassifierSpec::Kind::Mlp: {
                const auto& hidden = config_.classifier.hidden;
                const std::size_t layers = hidden.size();
                ws.grad_hidden.resize(layers);
                {
                    const auto& last = ws.hidden[layers - 1];
                    const double* w = params_.data() + head_offsets_.back();
                    double* gw = grads.data() + head_offsets_.back();
                    auto& g = ws.grad_hidden[layers - 1];
                    g.assign(last.size(), 0.0);
                    for (std::size_t j = 0; j < last.size(); ++j) {
                        gw[j] += dscore * last[j];
                        g[j] = last[j] > 0.0 ? dscore * w[j] : 0.0;
                    }
                }
                for (std::size_t i = layers; i-- > 0;) {
                    const std::size_t h = hidden[i];
                    const std::span<const double> in = i == 0 ? std::span<const double>(x) : std::span<const double>(ws.hidden[i - 1]);
                    const double* wm = params_.data() + head_offsets_[2 * i];
                    double* gwm = grads.data() + head_offsets_[2 * i];
                    double* gb = grads.data() + head_offsets_[2 * i + 1];
                    const auto& gout = ws.grad_hidden[i];
                    for (std::size_t j = 0; j < h; ++j) gb[j] += gout[j];
                    if (i == 0) {
                        for (std::size_t a = 0; a < in.size(); ++a) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < h; ++j) {
                                gwm[a * h + j] += in[a] * gout[j];
                                acc += wm[a * h + j] * gout[j];
                            }
                            ws.grad_r[a] += acc;
                        }
                    } else {
                        auto& gin = ws.grad_hidden[i - 1];
                        gin.assign(in.size(), 0.0);
                        for (std::size_t a = 0; a < in.size(); ++a) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < h; ++j) {
                                gwm[a * h + j] += in[a] * gout[j];
                                acc += wm[a * h + j] * gout[j];
                            }
                            gin[a] = in[a] > 0.0 ? acc : 0.0;
                        }
                    }
                }
                return;
            }
        }
    }

    ModelConfig config_;
    LayerLayout layer_layout_;
    AggLayout agg_layout_;
    std::vector<ParamBlock> blocks_;
    std::vector<double> params_;
    std::vector<std::size_t> emb_offsets_;
    std::vector<std::size_t> fo_offsets_;
    std::vector<std::size_t> head_offsets_;
    std::size_t interaction_offset_ = 0;
    std::size_t agg_offset_ = 0;
    std::size_t bias_offset_ = 0;
};

/// Training loss on a raw score: logistic loss on the logit, or squared error.
inline double loss(double score, double label, Task task) {
    if (task == Task::Classification) {
        if (label != 0.0 && label != 1.0) throw ContractError("loss: classification label must be 0 or 1");
        return std::max(score, 0.0) - score * label + std::log1p(std::exp(-std::abs(score)));
    }
    const double d = score - label;
    return d * d;
}

inline double loss_grad(double score, double label, Task task) noexcept {
    if (task == Task::Classification) return sigmoid(score) - label;
    return 2.0 * (score - label);
}

/// Mean loss over `rows`; adds the gradient of that mean into `grads`.
/// Dropout masks come from per-row streams of `dropout_root` when given.
inline double batch_gradient(const IpaModel& model, const TabularDataset& data, std::span<const std::size_t> rows,
                             Workspace& ws, std::span<double> grads, const SeededRng* dropout_root = nullptr) {
    if (rows.empty()) throw ContractError("batch_gradient: empty batch");
    const auto task = model.config().task;
    const double inv = 1.0 / static_cast<double>(rows.size());
    double total = 0.0;
    for (auto r : rows) {
        const auto row = data.row(r);
        double s = 0.0;
        if (dropout_root) {
            SeededRng rng = dropout_root->derive(r);
            s = model.forward(row, ws, &rng);
        } else {
            s = model.forward(row, ws);
        }
        total += loss(s, row.label(), task);
        model.backward(row, ws, inv * loss_grad(s, row.label(), task), grads);
    }
    return total * inv;
}

inline double mean_loss(const IpaModel& model, const TabularDataset& data) {
    Workspace ws;
    double total = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r) total += loss(model.forward(data.row(r), ws), data.row(r).label(), model.config().task);
    return total / static_cast<double>(data.rows());
}

inline std::vector<double> predict_scores(const IpaModel& model, const TabularDataset& data) {
    Workspace ws;
    std::vector<double> out(data.rows());
    for (std::size_t r = 0; r < data.rows(); ++r) out[r] = model.forward(data.row(r), ws);
    return out;
}

}  // namespace ipa
