#include <gtest/gtest.h>

#include "oracles.hpp"

using ipa::InteractionKind;
using ipa::PairWeight;
using ipa::Vector;

namespace {

constexpr InteractionKind kKinds[] = {InteractionKind::Naive, InteractionKind::Weighted, InteractionKind::Diagonal,
                                      InteractionKind::Projected};

Vector random_vec(ipa::SeededRng& rng, std::size_t n) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(-1, 1);
    return v;
}

}  // namespace

TEST(Interaction, ParamSize) {
    EXPECT_EQ(ipa::param_size(InteractionKind::Naive, 16), 0u);
    EXPECT_EQ(ipa::param_size(InteractionKind::Weighted, 16), 1u);
    EXPECT_EQ(ipa::param_size(InteractionKind::Diagonal, 16), 16u);
    EXPECT_EQ(ipa::param_size(InteractionKind::Projected, 4), 16u);
}

TEST(Interaction, HandExamples) {
    const Vector a{1, 2}, b{3, 4};
    EXPECT_EQ(ipa::interact(a, b, PairWeight::naive()), (Vector{3, 8}));
    EXPECT_EQ(ipa::interact(a, b, PairWeight::weighted(2)), (Vector{6, 16}));
    EXPECT_EQ(ipa::interact(a, b, PairWeight::projected(2, {1, 0, 1, 1})), (Vector{9, 8}));
}

TEST(Interaction, MatchesDenseOracle) {
    ipa::SeededRng rng(21, 0);
    for (auto kind : kKinds)
        for (std::size_t k : {1u, 2u, 5u}) {
            const auto ti = random_vec(rng, k), tj = random_vec(rng, k);
            const auto w = random_vec(rng, ipa::param_size(kind, k));
            const PairWeight pw{kind, w};
            const auto got = ipa::interact(ti, tj, pw);
            const auto ref = oracle::interact(oracle::vec(ti), oracle::vec(tj), oracle::dense_w(kind, k, w));
            for (std::size_t c = 0; c < k; ++c) EXPECT_NEAR(got[c], ref(static_cast<Eigen::Index>(c)), 1e-14);
        }
}

TEST(Interaction, SpecialisationChainIsExact) {
    ipa::SeededRng rng(22, 0);
    const std::size_t k = 4;
    const auto ti = random_vec(rng, k), tj = random_vec(rng, k);
    const auto naive = ipa::interact(ti, tj, PairWeight::naive());
    EXPECT_EQ(ipa::interact(ti, tj, PairWeight::weighted(1.0)), naive);
    EXPECT_EQ(ipa::interact(ti, tj, PairWeight::diagonal(Vector(k, 1.0))), naive);
    Vector eye(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) eye[i * k + i] = 1.0;
    EXPECT_EQ(ipa::interact(ti, tj, PairWeight::projected(k, eye)), naive);

    const Vector d{0.5, -2, 3, 1.25};
    Vector diag_matrix(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) diag_matrix[i * k + i] = d[i];
    EXPECT_EQ(ipa::interact(ti, tj, PairWeight::projected(k, diag_matrix)), ipa::interact(ti, tj, PairWeight::diagonal(d)));
    EXPECT_EQ(ipa::interact(ti, tj, PairWeight::diagonal(Vector(k, 0.7))), ipa::interact(ti, tj, PairWeight::weighted(0.7)));
}

TEST(Interaction, Bilinearity) {
    ipa::SeededRng rng(23, 0);
    for (auto kind : kKinds) {
        const std::size_t k = 3;
        const auto ti = random_vec(rng, k), tj = random_vec(rng, k);
        const PairWeight w{kind, random_vec(rng, ipa::param_size(kind, k))};
        Vector scaled = ti;
        for (double& x : scaled) x *= 2.5;
        const auto base = ipa::interact(ti, tj, w);
        const auto got = ipa::interact(scaled, tj, w);
        for (std::size_t c = 0; c < k; ++c) EXPECT_NEAR(got[c], 2.5 * base[c], 1e-14);
    }
}

TEST(Interaction, NaiveBackwardIsProductRule) {
    const Vector ti{1, -2, 3}, tj{0.5, 4, -1};
    const auto g = ipa::interact_backward(ti, tj, PairWeight::naive(), Vector(3, 1.0));
    EXPECT_EQ(g.ti, tj);
    EXPECT_EQ(g.tj, ti);
    EXPECT_TRUE(g.w.empty());
}

TEST(Interaction, WeightedBackwardScalar) {
    const Vector ti{1, 2}, tj{3, -1}, up{0.5, 2};
    const auto g = ipa::interact_backward(ti, tj, PairWeight::weighted(1.7), up);
    const double expected = 0.5 * 1 * 3 + 2 * 2 * -1;
    ASSERT_EQ(g.w.size(), 1u);
    EXPECT_NEAR(g.w[0], expected, 1e-15);
    // finite difference on w
    const double h = 1e-6;
    auto f = [&](double w) {
        const auto o = ipa::interact(ti, tj, PairWeight::weighted(w));
        return up[0] * o[0] + up[1] * o[1];
    };
    EXPECT_NEAR((f(1.7 + h) - f(1.7 - h)) / (2 * h), g.w[0], 1e-6 * std::abs(expected));
}

TEST(Interaction, GradientsMatchFiniteDifferences) {
    ipa::SeededRng rng(24, 0);
    const double h = 1e-5;
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial)
        for (auto kind : kKinds)
            for (std::size_t k : {1u, 2u, 4u, 8u}) {
                auto ti = random_vec(rng, k), tj = random_vec(rng, k), up = random_vec(rng, k);
                PairWeight w{kind, random_vec(rng, ipa::param_size(kind, k))};
                const auto g = ipa::interact_backward(ti, tj, w, up);
                auto objective = [&] {
                    const auto o = ipa::interact(ti, tj, w);
                    return ipa::dot(o, up);
                };
                auto check = [&](Vector& x, const Vector& grad) {
                    for (std::size_t i = 0; i < x.size(); ++i) {
                        const double saved = x[i];
                        x[i] = saved + h;
                        const double a = objective();
                        x[i] = saved - h;
                        const double b = objective();
                        x[i] = saved;
                        EXPECT_TRUE(oracle::close((a - b) / (2 * h), grad[i], 1e-4, 1e-8)) << "kind " << ipa::kind_letter(kind);
                        ++checked;
                    }
                };
                check(ti, g.ti);
                check(tj, g.tj);
                check(w.values, g.w);
            }
    EXPECT_GT(checked, 10000);
}

TEST(Interaction, TransposedProjectedUsesWTranspose) {
    const Vector ti{1, 2}, tj{3, 4};
    const Vector w{1, 2, 3, 4};
    Vector out(2, 0.0);
    ipa::interact_accumulate(InteractionKind::Projected, ti, tj, w, out, true);
    EXPECT_EQ(out, ipa::interact(ti, tj, PairWeight::projected(2, {1, 3, 2, 4})));
}

TEST(Interaction, InitialisationNearNaive) {
    ipa::SeededRng rng(25, 0);
    Vector w(1);
    ipa::init_pair_weight(InteractionKind::Weighted, 4, w, rng);
    EXPECT_EQ(w[0], 1.0);
    Vector d(4);
    ipa::init_pair_weight(InteractionKind::Diagonal, 4, d, rng);
    EXPECT_EQ(d, Vector(4, 1.0));
    Vector p(16);
    ipa::init_pair_weight(InteractionKind::Projected, 4, p, rng);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p[i * 4 + j], i == j ? 1.0 : 0.0, 0.06);
}

TEST(Interaction, ShapeErrors) {
    EXPECT_THROW(ipa::interact(Vector{1, 2}, Vector{1}, PairWeight::naive()), ipa::DimensionError);
    EXPECT_THROW(ipa::interact(Vector{1, 2}, Vector{1, 2}, PairWeight::projected(2, {1, 2, 3})), ipa::DimensionError);
}
