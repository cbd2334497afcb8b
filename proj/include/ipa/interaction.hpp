#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ipa/errors.hpp"
#include "ipa/linalg.hpp"
#include "ipa/rng.hpp"

namespace ipa {

/// Structure of the interaction matrix W in f(t_i, t_j, W) = (t_i^T W) ⊙ t_j.
///   Naive     W = I
///   Weighted  W = diag(w, ..., w)
///   Diagonal  W = diag(w_1, ..., w_K)
///   Projected W = full K x K matrix (row-major)
enum class InteractionKind { Naive, Weighted, Diagonal, Projected };

constexpr std::size_t param_size(InteractionKind kind, std::size_t k) noexcept {
    switch (kind) {
        case InteractionKind::Naive: return 0;
        case InteractionKind::Weighted: return 1;
        case InteractionKind::Diagonal: return k;
        case InteractionKind::Projected: return k * k;
    }
    return 0;
}

constexpr char kind_letter(InteractionKind kind) noexcept {
    switch (kind) {
        case InteractionKind::Naive: return 'N';
        case InteractionKind::Weighted: return 'W';
        case InteractionKind::Diagonal: return 'D';
        case InteractionKind::Projected: return 'P';
    }
    return '?';
}

/// Value-type interaction weight; the training path works on spans into a
/// flat parameter buffer instead.
struct PairWeight {
    InteractionKind kind = InteractionKind::Naive;
    std::vector<double> values;

    static PairWeight naive() { return {InteractionKind::Naive, {}}; }
    static PairWeight weighted(double w) { return {InteractionKind::Weighted, {w}}; }
    static PairWeight diagonal(std::vector<double> d) { return {InteractionKind::Diagonal, std::move(d)}; }
    static PairWeight projected(const Matrix& w) {
        return {InteractionKind::Projected, std::vector<double>(w.data().begin(), w.data().end())};
    }
    static PairWeight projected(std::size_t k, std::vector<double> row_major) {
        if (row_major.size() != k * k) throw DimensionError("PairWeight: projected weight needs K*K values");
        return {InteractionKind::Projected, std::move(row_major)};
    }
};

namespace detail {

inline void check_pair_shapes(InteractionKind kind, std::size_t ki, std::size_t kj, std::size_t nw) {
    if (ki != kj) throw DimensionError("interact: embedding lengths differ");
    if (nw != param_size(kind, ki)) throw DimensionError("interact: weight size does not match kind and K");
}

}  // namespace detail

/// out += f(ti, tj, w). When `transposed` is set a Projected W is applied as W^T
/// (used for the mirrored direction of a symmetrically shared pair).
inline void interact_accumulate(InteractionKind kind, std::span<const double> ti, std::span<const double> tj,
                                std::span<const double> w, std::span<double> out, bool transposed = false) noexcept {
    const std::size_t k = ti.size();
    switch (kind) {
        case InteractionKind::Naive:
            for (std::size_t c = 0; c < k; ++c) out[c] += ti[c] * tj[c];
            break;
        case InteractionKind::Weighted: {
            const double s = w[0];
            for (std::size_t c = 0; c < k; ++c) out[c] += s * ti[c] * tj[c];
            break;
        }
        case InteractionKind::Diagonal:
            for (std::size_t c = 0; c < k; ++c) out[c] += ti[c] * w[c] * tj[c];
            break;
        case InteractionKind::Projected:
            if (!transposed) {
                for (std::size_t c = 0; c < k; ++c) {
                    double u = 0.0;
                    for (std::size_t a = 0; a < k; ++a) u += ti[a] * w[a * k + c];
                    out[c] += u * tj[c];
                }
            } else {
                for (std::size_t c = 0; c < k; ++c) {
                    const double* wr = w.data() + c * k;
                    double u = 0.0;
                    for (std::size_t a = 0; a < k; ++a) u += ti[a] * wr[a];
                    out[c] += u * tj[c];
                }
            }
            break;
    }
}

/// Accumulates the partials of <upstream, f(ti, tj, w)> into gti, gtj and gw.
inline void interact_backward_accumulate(InteractionKind kind, std::span<const double> ti, std::span<const double> tj,
                                         std::span<const double> w, std::span<const double> upstream,
                                         std::span<double> gti, std::span<double> gtj, std::span<double> gw,
                                         bool transposed = false) noexcept {
    const std::size_t k = ti.size();
    switch (kind) {
        case InteractionKind::Naive:
            for (std::size_t c = 0; c < k; ++c) {
                gti[c] += upstream[c] * tj[c];
                gtj[c] += upstream[c] * ti[c];
            }
            break;
        case InteractionKind::Weighted: {
            const double s = w[0];
            double acc = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double p = ti[c] * tj[c];
                acc += upstream[c] * p;
                gti[c] += s * upstream[c] * tj[c];
                gtj[c] += s * upstream[c] * ti[c];
            }
            gw[0] += acc;
            break;
        }
        case InteractionKind::Diagonal:
            for (std::size_t c = 0; c < k; ++c) {
                gti[c] += upstream[c] * w[c] * tj[c];
                gtj[c] += upstream[c] * w[c] * ti[c];
                gw[c] += upstream[c] * ti[c] * tj[c];
            }
            break;
        case InteractionKind::Projected:
            for (std::size_t c = 0; c < k; ++c) {
                const double gu = upstream[c] * tj[c];
                double u = 0.0;
                if (!transposed) {
                    for (std::size_t a = 0; a < k; ++a) {
                        const std::size_t idx = a * k + c;
                        u += ti[a] * w[idx];
                        gti[a] += w[idx] * gu;
                        gw[idx] += ti[a] * gu;
                    }
                } else {
                    const std::size_t base = c * k;
                    for (std::size_t a = 0; a < k; ++a) {
                        u += ti[a] * w[base + a];
                        gti[a] += w[base + a] * gu;
                        gw[base + a] += ti[a] * gu;
                    }
                }
                gtj[c] += upstream[c] * u;
            }
            break;
    }
}

inline Vector interact(std::span<const double> ti, std::span<const double> tj, const PairWeight& w) {
    detail::check_pair_shapes(w.kind, ti.size(), tj.size(), w.values.size());
    Vector out(ti.size(), 0.0);
    interact_accumulate(w.kind, ti, tj, w.values, out);
    return out;
}

struct InteractionGrads {
    Vector ti;
    Vector tj;
    std::vector<double> w;  ///< empty for Naive
};

inline InteractionGrads interact_backward(std::span<const double> ti, std::span<const double> tj, const PairWeight& w,
                                          std::span<const double> upstream) {
    detail::check_pair_shapes(w.kind, ti.size(), tj.size(), w.values.size());
    if (upstream.size() != ti.size()) throw DimensionError("interact_backward: upstream length differs from K");
    InteractionGrads g{Vector(ti.size(), 0.0), Vector(ti.size(), 0.0), std::vector<double>(w.values.size(), 0.0)};
    interact_backward_accumulate(w.kind, ti, tj, w.values, upstream, g.ti, g.tj, g.w);
    return g;
}

/// Every kind starts at (or near) the identity so runs with different kinds
/// begin from comparable functions.
inline void init_pair_weight(InteractionKind kind, std::size_t k, std::span<double> out, SeededRng& rng) {
    switch (kind) {
        case InteractionKind::Naive: break;
        case InteractionKind::Weighted:
        case InteractionKind::Diagonal:
            for (double& v : out) v = 1.0;
            break;
        case InteractionKind::Projected:
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t c = 0; c < k; ++c) out[a * k + c] = (a == c ? 1.0 : 0.0) + gauss(rng, 0.0, 0.01);
            break;
    }
}

}  // namespace ipa
