#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ipa/errors.hpp"
#include "ipa/layers.hpp"

namespace ipa {

enum class AggregatorKind { Direct, Layer, Term, Element };
enum class CombineMode { Sum, Concat };

constexpr char aggregator_letter(AggregatorKind kind) noexcept {
    switch (kind) {
        case AggregatorKind::Direct: return 'D';
        case AggregatorKind::Layer: return 'L';
        case AggregatorKind::Term: return 'T';
        case AggregatorKind::Element: return 'E';
    }
    return '?';
}

struct AggregatorSpec {
    AggregatorKind kind = AggregatorKind::Direct;
    CombineMode mode = CombineMode::Sum;
    bool term_scalar_pool = false;     ///< sum each term to a scalar before weighting (CIN output)
    bool include_first_layer = true;   ///< whether h_1 enters r
};

/// Shapes of the representation r and of the aggregator weights for a given
/// set of layer widths.
class AggLayout {
public:
    AggLayout() = default;
    AggLayout(AggregatorSpec spec, std::vector<std::size_t> layer_widths, std::size_t k)
        : spec_(spec), widths_(std::move(layer_widths)), k_(k) {
        if (widths_.empty()) throw ConfigError("aggregate: no layers");
        if (spec_.term_scalar_pool && spec_.kind == AggregatorKind::Element)
            throw ConfigError("aggregate: element weights are undefined for scalar-pooled terms");
        first_ = spec_.include_first_layer ? 0 : 1;
        if (first_ >= widths_.size()) throw ConfigError("aggregate: nothing to aggregate when h_1 is excluded and L = 1");
        term_dim_ = spec_.term_scalar_pool ? 1 : k_;
        if (spec_.mode == CombineMode::Sum) {
            for (std::size_t l = first_; l < widths_.size(); ++l)
                if (widths_[l] != widths_[first_])
                    throw ConfigError("aggregate: Sum mode requires every layer to have the same width");
        }
        std::size_t woff = 0, roff = 0;
        for (std::size_t l = 0; l < widths_.size(); ++l) {
            weight_offsets_.push_back(woff);
            out_offsets_.push_back(roff);
            if (l < first_) continue;
            switch (spec_.kind) {
                case AggregatorKind::Direct: break;
                case AggregatorKind::Layer: woff += 1; break;
                case AggregatorKind::Term: woff += widths_[l]; break;
                case AggregatorKind::Element: woff += widths_[l] * k_; break;
            }
            if (spec_.mode == CombineMode::Concat) roff += widths_[l] * term_dim_;
        }
        params_ = woff;
        output_ = spec_.mode == CombineMode::Concat ? roff : widths_[first_] * term_dim_;
    }

    [[nodiscard]] const AggregatorSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::size_t param_count() const noexcept { return params_; }
    [[nodiscard]] std::size_t output_size() const noexcept { return output_; }
    [[nodiscard]] std::size_t first_layer() const noexcept { return first_; }
    [[nodiscard]] std::size_t depth() const noexcept { return widths_.size(); }
    [[nodiscard]] std::size_t width(std::size_t l) const noexcept { return widths_[l]; }
    [[nodiscard]] std::size_t term_dim() const noexcept { return term_dim_; }
    [[nodiscard]] std::size_t k() const noexcept { return k_; }

    /// Index of the weight applied to element c of term n in layer l, or -1 for Direct.
    [[nodiscard]] std::ptrdiff_t weight_index(std::size_t l, std::size_t n, std::size_t c) const noexcept {
        switch (spec_.kind) {
            case AggregatorKind::Direct: return -1;
            case AggregatorKind::Layer: return static_cast<std::ptrdiff_t>(weight_offsets_[l]);
            case AggregatorKind::Term: return static_cast<std::ptrdiff_t>(weight_offsets_[l] + n);
            case AggregatorKind::Element: return static_cast<std::ptrdiff_t>(weight_offsets_[l] + n * k_ + c);
        }
        return -1;
    }
    [[nodiscard]] std::size_t out_index(std::size_t l, std::size_t n, std::size_t c) const noexcept {
        return out_offsets_[l] + n * term_dim_ + c;
    }

private:
    AggregatorSpec spec_{};
    std::vector<std::size_t> widths_;
    std::size_t k_ = 0;
    std::size_t first_ = 0;
    std::size_t term_dim_ = 0;
    std::size_t params_ = 0;
    std::size_t output_ = 0;
    std::vector<std::size_t> weight_offsets_;
    std::vector<std::size_t> out_offsets_;
};

/// Scalar count of aggregator weights (Sum mode over M-wide layers: 0, L, LM, LMK).
inline std::size_t aggregator_param_count(const AggregatorSpec& spec, const std::vector<std::size_t>& widths, std::size_t k) {
    return AggLayout(spec, widths, k).param_count();
}

inline void aggregate(const LayerStack& stack, const AggLayout& layout, std::span<const double> weights, std::span<double> r) {
    if (stack.depth() != layout.depth()) throw DimensionError("aggregate: stack depth differs from layout");
    if (weights.size() != layout.param_count()) throw DimensionError("aggregate: weight count mismatch");
    if (r.size() != layout.output_size()) throw DimensionError("aggregate: output length mismatch");
    std::fill(r.begin(), r.end(), 0.0);
    const std::size_t k = layout.k();
    const bool pooled = layout.spec().term_scalar_pool;
    for (std::size_t l = layout.first_layer(); l < stack.depth(); ++l) {
        if (stack.width(l) != layout.width(l)) throw DimensionError("aggregate: layer width differs from layout");
        for (std::size_t n = 0; n < stack.width(l); ++n) {
            const auto t = stack.term(l, n);
            if (pooled) {
                double s = 0.0;
                for (double v : t) s += v;
                const auto wi = layout.weight_index(l, n, 0);
                r[layout.out_index(l, n, 0)] += (wi < 0 ? 1.0 : weights[static_cast<std::size_t>(wi)]) * s;
                continue;
            }
            for (std::size_t c = 0; c < k; ++c) {
                const auto wi = layout.weight_index(l, n, c);
                r[layout.out_index(l, n, c)] += (wi < 0 ? 1.0 : weights[static_cast<std::size_t>(wi)]) * t[c];
            }
        }
    }
}

inline Vector aggregate(const LayerStack& stack, const AggLayout& layout, std::span<const double> weights) {
    Vector r(layout.output_size());
    aggregate(stack, layout, weights, r);
    return r;
}

/// Given dLoss/dr, accumulates dLoss/dh_l into `grad_layers` (one flat buffer
/// per layer, already sized) and dLoss/dalpha into `grad_weights`.
inline void aggregate_backward(const LayerStack& stack, const AggLayout& layout, std::span<const double> weights,
                               std::span<const double> upstream, std::vector<Vector>& grad_layers,
                               std::span<double> grad_weights) {
    if (upstream.size() != layout.output_size()) throw DimensionError("aggregate_backward: upstream length mismatch");
    if (grad_weights.size() != layout.param_count() || weights.size() != layout.param_count())
        throw DimensionError("aggregate_backward: weight count mismatch");
    if (grad_layers.size() != stack.depth()) throw DimensionError("aggregate_backward: need one gradient buffer per layer");
    const std::size_t k = layout.k();
    const bool pooled = layout.spec().term_scalar_pool;
    for (std::size_t l = layout.first_layer(); l < stack.depth(); ++l) {
        auto& gl = grad_layers[l];
        for (std::size_t n = 0; n < stack.width(l); ++n) {
            const auto t = stack.term(l, n);
            if (pooled) {
                const double up = upstream[layout.out_index(l, n, 0)];
                const auto wi = layout.weight_index(l, n, 0);
                const double w = wi < 0 ? 1.0 : weights[static_cast<std::size_t>(wi)];
                double s = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    s += t[c];
                    gl[n * k + c] += w * up;
                }
                if (wi >= 0) grad_weights[static_cast<std::size_t>(wi)] += s * up;
                continue;
            }
            for (std::size_t c = 0; c < k; ++c) {
                const double up = upstream[layout.out_index(l, n, c)];
                const auto wi = layout.weight_index(l, n, c);
                if (wi < 0) {
                    gl[n * k + c] += up;
                } else {
                    gl[n * k + c] += weights[static_cast<std::size_t>(wi)] * up;
                    grad_weights[static_cast<std::size_t>(wi)] += t[c] * up;
                }
            }
        }
    }
}

}  // namespace ipa
