#pragma once
// Independent reference computations used only by the tests. They favour the
// most literal reading of each definition over speed.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ipa/ipa.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Full K x K matrix for a pair weight of the given kind.
inline MatrixXd dense_w(ipa::InteractionKind kind, std::size_t k, std::span<const double> w) {
    MatrixXd m = MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            const auto i = static_cast<Eigen::Index>(a), j = static_cast<Eigen::Index>(b);
            switch (kind) {
                case ipa::InteractionKind::Naive: m(i, j) = a == b ? 1.0 : 0.0; break;
                case ipa::InteractionKind::Weighted: m(i, j) = a == b ? w[0] : 0.0; break;
                case ipa::InteractionKind::Diagonal: m(i, j) = a == b ? w[a] : 0.0; break;
                case ipa::InteractionKind::Projected: m(i, j) = w[a * k + b]; break;
            }
        }
    return m;
}

inline VectorXd vec(std::span<const double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

/// (t_i^T W) ⊙ t_j
inline VectorXd interact(const VectorXd& ti, const VectorXd& tj, const MatrixXd& w) {
    return (ti.transpose() * w).transpose().cwiseProduct(tj);
}

/// Layers h_1..h_L, each a list of K-vectors, built term by term with dense
/// matrices read from the model's weight slots.
inline std::vector<std::vector<VectorXd>> layers(const ipa::IpaModel& model, std::span<const double> first) {
    const auto& c = model.config();
    const auto view = model.interaction();
    const auto& lay = view.layout;
    const std::size_t m_count = c.fields(), k = c.k;
    std::vector<std::vector<VectorXd>> h(1);
    for (std::size_t m = 0; m < m_count; ++m) h[0].push_back(vec(first.subspan(m * k, k)));
    for (std::size_t l = 1; l < c.depth; ++l) {
        std::vector<VectorXd> next;
        const auto& prev = h[l - 1];
        if (c.code.pooling == ipa::PoolingKind::Field) {
            for (std::size_t n = 0; n < m_count; ++n) {
                VectorXd t = c.code.residual ? prev[n] : VectorXd::Zero(static_cast<Eigen::Index>(k));
                for (std::size_t m = 0; m < m_count; ++m) {
                    const auto slot = lay.field_slot(l, n, m);
                    if (slot.offset < 0) continue;
                    MatrixXd w = dense_w(c.code.interaction, k, view.slot(static_cast<std::size_t>(slot.offset)));
                    if (slot.transposed) w.transposeInPlace();
                    t += interact(h[0][n], prev[m], w);
                }
                next.push_back(t);
            }
        } else {
            for (std::size_t n = 0; n < lay.width(l); ++n) {
                VectorXd t = VectorXd::Zero(static_cast<Eigen::Index>(k));
                for (std::size_t p = 0; p < prev.size(); ++p)
                    for (std::size_t m = 0; m < m_count; ++m)
                        t += interact(h[0][m], prev[p], dense_w(c.code.interaction, k, view.slot(lay.global_offset(l, n, p, m))));
                next.push_back(t);
            }
        }
        h.push_back(std::move(next));
    }
    return h;
}

/// FM-family score by explicit pair enumeration:
///   b + sum_i w_i + sum_{i<j} v_i^T W_ij v_j
inline double fm_family_score(const ipa::IpaModel& model, const ipa::RowView& row) {
    const auto& c = model.config();
    const std::size_t k = c.k;
    const auto p = model.params();
    const auto view = model.interaction();
    double s = p[model.block("bias").offset];
    std::vector<VectorXd> v;
    for (std::size_t m = 0; m < c.fields(); ++m) {
        const auto id = row.ids(m)[0];
        s += p[model.block("first_order." + std::to_string(m)).offset + id];
        v.push_back(vec(p.subspan(model.block("embedding." + std::to_string(m)).offset + id * k, k)));
    }
    for (std::size_t i = 0; i < c.fields(); ++i)
        for (std::size_t j = i + 1; j < c.fields(); ++j) {
            const auto slot = view.layout.field_slot(1, i, j);
            const MatrixXd w = dense_w(c.code.interaction, k, view.slot(static_cast<std::size_t>(slot.offset)));
            s += v[i].dot(w * v[j]);
        }
    return s;
}

/// Central-difference gradient of the mean loss over all rows (no dropout).
inline std::vector<double> fd_gradient(ipa::IpaModel& model, const ipa::TabularDataset& data, double h = 1e-5) {
    auto p = model.params();
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + h;
        const double up = ipa::mean_loss(model, data);
        p[i] = saved - h;
        const double down = ipa::mean_loss(model, data);
        p[i] = saved;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Analytic gradient of the same mean loss.
inline std::vector<double> analytic_gradient(const ipa::IpaModel& model, const ipa::TabularDataset& data) {
    std::vector<std::size_t> rows(data.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    std::vector<double> g(model.param_count(), 0.0);
    ipa::Workspace ws;
    ipa::batch_gradient(model, data, rows, ws, g);
    return g;
}

/// |a - b| <= rel * max(|a|, |b|) or within the absolute floor.
inline bool close(double a, double b, double rel, double floor) {
    const double d = std::abs(a - b);
    return d <= floor || d <= rel * std::max(std::abs(a), std::abs(b));
}

/// Fraction of positive/negative pairs ranked correctly, ties counting half.
inline double auc_pairs(std::span<const double> scores, std::span<const double> labels) {
    double good = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1.0) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0.0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) good += 1.0;
            else if (scores[i] == scores[j]) good += 0.5;
        }
    }
    return good / pairs;
}

/// Singular values from Eigen's two-sided Jacobi SVD, descending.
inline std::vector<double> svd(const ipa::Matrix& e) {
    MatrixXd m(static_cast<Eigen::Index>(e.rows()), static_cast<Eigen::Index>(e.cols()));
    for (std::size_t r = 0; r < e.rows(); ++r)
        for (std::size_t c = 0; c < e.cols(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = e(r, c);
    const VectorXd s = Eigen::JacobiSVD<MatrixXd>(m).singularValues();
    return {s.data(), s.data() + s.size()};
}

/// Fills every parameter with N(0, sd) so no gradient path is trivially zero.
inline void randomize(ipa::IpaModel& model, std::uint64_t seed, double sd = 0.5) {
    ipa::SeededRng rng(seed, 999);
    for (double& p : model.params()) p = ipa::gauss(rng, 0.0, sd);
}

/// Random one-hot classification rows for the given cardinalities.
inline ipa::TabularDataset random_onehot(const std::vector<std::size_t>& vocab, std::size_t rows, std::uint64_t seed) {
    std::vector<ipa::FieldSchema> schema;
    for (std::size_t m = 0; m < vocab.size(); ++m) schema.push_back({"f" + std::to_string(m), ipa::FieldType::Categorical, vocab[m]});
    ipa::TabularDataset data(schema, ipa::Task::Classification);
    ipa::SeededRng rng(seed, 998);
    std::vector<std::uint32_t> ids(vocab.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t m = 0; m < vocab.size(); ++m) ids[m] = static_cast<std::uint32_t>(rng.below(vocab[m]));
        data.add_onehot_row(ids, rng.below(2) ? 1.0 : 0.0);
    }
    return data;
}

}  // namespace oracle
