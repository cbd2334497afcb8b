#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ipa/errors.hpp"
#include "ipa/interaction.hpp"
#include "ipa/linalg.hpp"

namespace ipa {

enum class PoolingKind { Field, Global };

/// How layers 2..L are built from the previous layer and h_1.
struct PoolingSpec {
    PoolingKind kind = PoolingKind::Field;
    bool residual = false;            ///< Field only: t_{l,n} += t_{l-1,n}
    std::size_t depth = 2;            ///< L, counting h_1
    std::size_t global_width = 10;    ///< H_l for l >= 2 under Global pooling
    bool include_self = false;        ///< Field only: keep the m == n interaction
    bool symmetric_share = false;     ///< Field only: (n,m) and (m,n) share one weight

    void validate() const {
        if (depth < 1) throw ConfigError("pooling: depth L must be >= 1");
        if (kind == PoolingKind::Global && global_width < 1) throw ConfigError("pooling: global width H must be >= 1");
        if (residual && kind != PoolingKind::Field) throw ConfigError("pooling: residual connection requires Field pooling");
        if (symmetric_share && kind != PoolingKind::Field)
            throw ConfigError("pooling: symmetric weight sharing requires Field pooling");
    }

    /// Number of terms in layer `layer` (0-based; layer 0 is h_1).
    [[nodiscard]] std::size_t width(std::size_t layer, std::size_t fields) const noexcept {
        if (layer == 0 || kind == PoolingKind::Field) return fields;
        return global_width;
    }
};

/// Exact number of interaction scalars for a pooling/kind combination.
inline std::size_t interaction_param_count(InteractionKind kind, const PoolingSpec& spec, std::size_t fields, std::size_t k) {
    const std::size_t s = param_size(kind, k);
    if (s == 0 || spec.depth < 2) return 0;
    std::size_t total = 0;
    if (spec.kind == PoolingKind::Field) {
        std::size_t pairs = 0;
        if (spec.symmetric_share)
            pairs = fields * (fields - 1) / 2 + (spec.include_self ? fields : 0);
        else
            pairs = fields * (spec.include_self ? fields : fields - 1);
        total = (spec.depth - 1) * pairs * s;
    } else {
        for (std::size_t l = 1; l < spec.depth; ++l) total += spec.width(l, fields) * spec.width(l - 1, fields) * fields * s;
    }
    return total;
}

/// Maps every (layer, out-term, in-term, field) interaction onto an offset in a
/// flat weight buffer.
class LayerLayout {
public:
    struct FieldSlot {
        std::int64_t offset = -1;  ///< -1: interaction absent
        bool transposed = false;
    };

    LayerLayout() = default;
    LayerLayout(InteractionKind kind, PoolingSpec spec, std::size_t fields, std::size_t k)
        : kind_(kind), spec_(spec), fields_(fields), k_(k), stride_(param_size(kind, k)) {
        spec_.validate();
        if (fields < 1) throw ConfigError("pooling: need at least one field");
        if (k < 1) throw ConfigError("pooling: embedding dimension K must be >= 1");
        layer_offsets_.assign(spec_.depth + 1, 0);
        std::size_t offset = 0;
        for (std::size_t l = 1; l < spec_.depth; ++l) {
            layer_offsets_[l] = offset;
            if (spec_.kind == PoolingKind::Field) {
                std::vector<FieldSlot> slots(fields * fields);
                const bool self = spec_.include_self;
                if (spec_.symmetric_share) {
                    for (std::size_t a = 0; a < fields; ++a)
                        for (std::size_t b = a; b < fields; ++b) {
                            if (a == b && !self) continue;
                            slots[a * fields + b] = {static_cast<std::int64_t>(offset), false};
                            slots[b * fields + a] = {static_cast<std::int64_t>(offset), a != b};
                            offset += stride_;
                        }
                } else {
                    for (std::size_t n = 0; n < fields; ++n)
                        for (std::size_t m = 0; m < fields; ++m) {
                            if (n == m && !self) continue;
                            slots[n * fields + m] = {static_cast<std::int64_t>(offset), false};
                            offset += stride_;
                        }
                }
                field_slots_.push_back(std::move(slots));
            } else {
                offset += spec_.width(l, fields) * spec_.width(l - 1, fields) * fields * stride_;
                field_slots_.emplace_back();
            }
        }
        layer_offsets_[spec_.depth] = offset;
        if (spec_.depth >= 1) layer_offsets_[0] = 0;
        total_ = offset;
    }

    [[nodiscard]] InteractionKind kind() const noexcept { return kind_; }
    [[nodiscard]] const PoolingSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::size_t fields() const noexcept { return fields_; }
    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] std::size_t depth() const noexcept { return spec_.depth; }
    [[nodiscard]] std::size_t stride() const noexcept { return stride_; }
    [[nodiscard]] std::size_t total() const noexcept { return total_; }
    [[nodiscard]] std::size_t width(std::size_t layer) const noexcept { return spec_.width(layer, fields_); }

    /// Weights that build layer `layer` (0-based, >= 1) as [offset, offset+size).
    [[nodiscard]] std::size_t layer_offset(std::size_t layer) const noexcept { return layer_offsets_[layer]; }
    [[nodiscard]] std::size_t layer_size(std::size_t layer) const noexcept {
        return layer + 1 < spec_.depth ? layer_offsets_[layer + 1] - layer_offsets_[layer] : total_ - layer_offsets_[layer];
    }

    [[nodiscard]] FieldSlot field_slot(std::size_t layer, std::size_t n, std::size_t m) const noexcept {
        return field_slots_[layer - 1][n * fields_ + m];
    }

    [[nodiscard]] std::size_t global_offset(std::size_t layer, std::size_t n, std::size_t prev, std::size_t m) const noexcept {
        const std::size_t hprev = width(layer - 1);
        return layer_offsets_[layer] + ((n * hprev + prev) * fields_ + m) * stride_;
    }

private:
    InteractionKind kind_ = InteractionKind::Naive;
    PoolingSpec spec_{};
    std::size_t fields_ = 0;
    std::size_t k_ = 0;
    std::size_t stride_ = 0;
    std::size_t total_ = 0;
    std::vector<std::size_t> layer_offsets_;
    std::vector<std::vector<FieldSlot>> field_slots_;
};

/// Read-only view of interaction weights laid out by a LayerLayout.
struct LayerParamsView {
    const LayerLayout& layout;
    std::span<const double> values;

    [[nodiscard]] std::span<const double> slot(std::size_t offset) const noexcept {
        return values.subspan(offset, layout.stride());
    }
};

/// Owning weights for standalone use; the model keeps them in its flat buffer.
struct LayerParams {
    LayerLayout layout;
    std::vector<double> values;

    explicit LayerParams(LayerLayout l) : layout(std::move(l)), values(layout.total(), 0.0) {}
    void init(SeededRng& rng) {
        for (std::size_t off = 0; off < values.size(); off += layout.stride())
            init_pair_weight(layout.kind(), layout.k(), std::span<double>(values).subspan(off, layout.stride()), rng);
    }
    [[nodiscard]] LayerParamsView view() const noexcept { return {layout, values}; }
};

/// h_1 ... h_L. layers[0] is h_1; each layer stores its terms back to back.
struct LayerStack {
    std::size_t k = 0;
    std::vector<Vector> layers;

    [[nodiscard]] std::size_t depth() const noexcept { return layers.size(); }
    [[nodiscard]] std::size_t width(std::size_t layer) const noexcept { return layers[layer].size() / k; }
    [[nodiscard]] std::span<const double> term(std::size_t layer, std::size_t n) const noexcept {
        return std::span<const double>(layers[layer]).subspan(n * k, k);
    }
    [[nodiscard]] std::span<double> term(std::size_t layer, std::size_t n) noexcept {
        return std::span<double>(layers[layer]).subspan(n * k, k);
    }
};

namespace detail {

inline std::span<const double> term_of(std::span<const double> layer, std::size_t n, std::size_t k) {
    return layer.subspan(n * k, k);
}
inline std::span<double> term_of(std::span<double> layer, std::size_t n, std::size_t k) { return layer.subspan(n * k, k); }

}  // namespace detail

/// Field pooling for layer `layer`:
///   t_{l,n} = sum_m f(t_n, t_{l-1,m}, W_{l,n,m})  (+ t_{l-1,n} when residual)
inline void field_pool(std::span<const double> prev, std::span<const double> first, LayerParamsView params,
                       std::size_t layer, std::span<double> out) {
    const auto& lay = params.layout;
    const std::size_t m_count = lay.fields();
    const std::size_t k = lay.k();
    const bool residual = lay.spec().residual;
    if (first.size() != m_count * k || prev.size() != m_count * k || out.size() != m_count * k)
        throw DimensionError("field_pool: layer widths must equal M*K");

    if (residual)
        std::copy(prev.begin(), prev.end(), out.begin());
    else
        std::fill(out.begin(), out.end(), 0.0);

    if (lay.kind() == InteractionKind::Naive) {
        // sum_m t_n ⊙ t_{l-1,m} = t_n ⊙ (S - [no self] t_{l-1,n}), O(MK).
        Vector total(k, 0.0);
        for (std::size_t m = 0; m < m_count; ++m)
            for (std::size_t c = 0; c < k; ++c) total[c] += prev[m * k + c];
        const double self = lay.spec().include_self ? 0.0 : 1.0;
        for (std::size_t n = 0; n < m_count; ++n)
            for (std::size_t c = 0; c < k; ++c) out[n * k + c] += first[n * k + c] * (total[c] - self * prev[n * k + c]);
        return;
    }
    for (std::size_t n = 0; n < m_count; ++n) {
        const auto tn = detail::term_of(first, n, k);
        auto dst = detail::term_of(out, n, k);
        for (std::size_t m = 0; m < m_count; ++m) {
            const auto slot = lay.field_slot(layer, n, m);
            if (slot.offset < 0) continue;
            interact_accumulate(lay.kind(), tn, detail::term_of(prev, m, k), params.slot(static_cast<std::size_t>(slot.offset)),
                                dst, slot.transposed);
        }
    }
}

/// Global pooling for layer `layer`:
///   t_{l,n} = sum_{m, n'} f(t_m, t_{l-1,n'}, W_{l,n,n',m}),  n in [0, H_l)
inline void global_pool(std::span<const double> prev, std::span<const double> first, LayerParamsView params,
                        std::size_t layer, std::span<double> out) {
    const auto& lay = params.layout;
    const std::size_t m_count = lay.fields();
    const std::size_t k = lay.k();
    const std::size_t h_prev = lay.width(layer - 1);
    const std::size_t h_out = lay.width(layer);
    if (first.size() != m_count * k || prev.size() != h_prev * k || out.size() != h_out * k)
        throw DimensionError("global_pool: layer widths inconsistent with layout");
    std::fill(out.begin(), out.end(), 0.0);

    if (lay.kind() == InteractionKind::Naive) {
        Vector a(k, 0.0), b(k, 0.0);
        for (std::size_t m = 0; m < m_count; ++m)
            for (std::size_t c = 0; c < k; ++c) a[c] += first[m * k + c];
        for (std::size_t p = 0; p < h_prev; ++p)
            for (std::size_t c = 0; c < k; ++c) b[c] += prev[p * k + c];
        for (std::size_t n = 0; n < h_out; ++n)
            for (std::size_t c = 0; c < k; ++c) out[n * k + c] = a[c] * b[c];
        return;
    }
    for (std::size_t n = 0; n < h_out; ++n) {
        auto dst = detail::term_of(out, n, k);
        for (std::size_t p = 0; p < h_prev; ++p) {
            const auto tp = detail::term_of(prev, p, k);
            for (std::size_t m = 0; m < m_count; ++m)
                interact_accumulate(lay.kind(), detail::term_of(first, m, k), tp,
                                    params.slot(lay.global_offset(layer, n, p, m)), dst);
        }
    }
}

/// Builds h_2..h_L from h_1 (flat M*K), reusing the storage in `stack`.
inline void stack_forward(std::span<const double> first, LayerParamsView params, LayerStack& stack) {
    const auto& lay = params.layout;
    if (params.values.size() != lay.total()) throw DimensionError("stack_forward: weight buffer does not match layout");
    if (first.size() != lay.fields() * lay.k()) throw DimensionError("stack_forward: h_1 must hold M*K values");
    stack.k = lay.k();
    stack.layers.resize(lay.depth());
    stack.layers[0].assign(first.begin(), first.end());
    for (std::size_t l = 1; l < lay.depth(); ++l) {
        stack.layers[l].resize(lay.width(l) * lay.k());
        if (lay.spec().kind == PoolingKind::Field)
            field_pool(stack.layers[l - 1], first, params, l, stack.layers[l]);
        else
            global_pool(stack.layers[l - 1], first, params, l, stack.layers[l]);
    }
}

inline LayerStack stack_forward(std::span<const double> first, LayerParamsView params) {
    LayerStack s;
    stack_forward(first, params, s);
    return s;
}

/// Reverse pass through the stack. `upstream[l]` holds dLoss/dh_l from the
/// aggregator and is accumulated in place as gradients flow down; on return
/// `grad_w` and `grad_first` have been incremented.
inline void stack_backward(const LayerStack& stack, LayerParamsView params, std::vector<Vector>& upstream,
                           std::span<double> grad_w, std::span<double> grad_first) {
    const auto& lay = params.layout;
    const std::size_t m_count = lay.fields();
    const std::size_t k = lay.k();
    if (upstream.size() != stack.depth() || stack.depth() != lay.depth())
        throw DimensionError("stack_backward: upstream must have one entry per layer");
    if (grad_w.size() != lay.total() || grad_first.size() != m_count * k)
        throw DimensionError("stack_backward: gradient buffers have wrong size");
    const std::span<const double> first = stack.layers[0];
    const auto kind = lay.kind();

    for (std::size_t l = lay.depth(); l-- > 1;) {
        const std::span<const double> g = upstream[l];
        const std::span<const double> prev = stack.layers[l - 1];
        std::span<double> gprev = upstream[l - 1];

        if (lay.spec().kind == PoolingKind::Field) {
            if (lay.spec().residual)
                for (std::size_t i = 0; i < g.size(); ++i) gprev[i] += g[i];
            if (kind == InteractionKind::Naive) {
                const double self = lay.spec().include_self ? 0.0 : 1.0;
                Vector total(k, 0.0), u(k, 0.0);
                for (std::size_t m = 0; m < m_count; ++m)
                    for (std::size_t c = 0; c < k; ++c) {
                        total[c] += prev[m * k + c];
                        u[c] += g[m * k + c] * first[m * k + c];
                    }
                for (std::size_t n = 0; n < m_count; ++n)
                    for (std::size_t c = 0; c < k; ++c) {
                        const std::size_t i = n * k + c;
                        grad_first[i] += g[i] * (total[c] - self * prev[i]);
                        gprev[i] += u[c] - self * g[i] * first[i];
                    }
                continue;
            }
            for (std::size_t n = 0; n < m_count; ++n) {
                const auto gn = detail::term_of(g, n, k);
                const auto tn = detail::term_of(first, n, k);
                auto gtn = detail::term_of(grad_first, n, k);
                for (std::size_t m = 0; m < m_count; ++m) {
                    const auto slot = lay.field_slot(l, n, m);
                    if (slot.offset < 0) continue;
                    const auto off = static_cast<std::size_t>(slot.offset);
                    interact_backward_accumulate(kind, tn, detail::term_of(prev, m, k), params.slot(off), gn, gtn,
                                                 detail::term_of(gprev, m, k), grad_w.subspan(off, lay.stride()),
                                                 slot.transposed);
                }
            }
        } else {
            const std::size_t h_prev = lay.width(l - 1);
            const std::size_t h_out = lay.width(l);
            if (kind == InteractionKind::Naive) {
                Vector a(k, 0.0), b(k, 0.0), gs(k, 0.0);
                for (std::size_t m = 0; m < m_count; ++m)
                    for (std::size_t c = 0; c < k; ++c) a[c] += first[m * k + c];
                for (std::size_t p = 0; p < h_prev; ++p)
                    for (std::size_t c = 0; c < k; ++c) b[c] += prev[p * k + c];
                for (std::size_t n = 0; n < h_out; ++n)
                    for (std::size_t c = 0; c < k; ++c) gs[c] += g[n * k + c];
                for (std::size_t m = 0; m < m_count; ++m)
                    for (std::size_t c = 0; c < k; ++c) grad_first[m * k + c] += gs[c] * b[c];
                for (std::size_t p = 0; p < h_prev; ++p)
                    for (std::size_t c = 0; c < k; ++c) gprev[p * k + c] += gs[c] * a[c];
                continue;
            }
            for (std::size_t n = 0; n < h_out; ++n) {
                const auto gn = detail::term_of(g, n, k);
                for (std::size_t p = 0; p < h_prev; ++p) {
                    const auto tp = detail::term_of(prev, p, k);
                    auto gtp = detail::term_of(gprev, p, k);
                    for (std::size_t m = 0; m < m_count; ++m) {
                        const std::size_t off = lay.global_offset(l, n, p, m);
                        interact_backward_accumulate(kind, detail::term_of(first, m, k), tp, params.slot(off), gn,
                                                     detail::term_of(grad_first, m, k), gtp, grad_w.subspan(off, lay.stride()));
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < grad_first.size(); ++i) grad_first[i] += upstream[0][i];
}

}  // namespace ipa
