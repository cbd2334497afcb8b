#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"

using ipa::InteractionKind;
using ipa::LayerLayout;
using ipa::LayerParams;
using ipa::PoolingKind;
using ipa::PoolingSpec;
using ipa::Vector;

namespace {

PoolingSpec field_spec(std::size_t depth, bool include_self = false, bool residual = false) {
    PoolingSpec s;
    s.kind = PoolingKind::Field;
    s.depth = depth;
    s.include_self = include_self;
    s.residual = residual;
    return s;
}

PoolingSpec global_spec(std::size_t depth, std::size_t h) {
    PoolingSpec s;
    s.kind = PoolingKind::Global;
    s.depth = depth;
    s.global_width = h;
    return s;
}

ipa::TabularDataset two_field_multihot() {
    ipa::TabularDataset d({{"a", ipa::FieldType::Categorical, 3}, {"b", ipa::FieldType::Categorical, 2}}, ipa::Task::Classification);
    d.add_row({{0, 1}, {}}, std::vector<double>{1.0, 1.0}, 1.0);
    return d;
}

}  // namespace

TEST(FirstLayer, LookupMeanAndEmpty) {
    ipa::ModelConfig c;
    c.code = ipa::parse_code("NFD");
    c.vocab = {3, 2};
    c.k = 2;
    ipa::IpaModel model(c, 1);
    auto e0 = model.embedding_row(0, 0);
    auto e1 = model.embedding_row(0, 1);
    e0[0] = 1, e0[1] = 0, e1[0] = 3, e1[1] = 2;
    const auto data = two_field_multihot();
    Vector first(4);
    ipa::build_first_layer(model.embeddings(), data.row(0), first);
    EXPECT_EQ(first, (Vector{2, 1, 0, 0}));

    ipa::TabularDataset onehot({{"a", ipa::FieldType::Categorical, 3}, {"b", ipa::FieldType::Categorical, 2}}, ipa::Task::Classification);
    onehot.add_onehot_row(std::vector<std::uint32_t>{1, 1}, 0.0);
    ipa::build_first_layer(model.embeddings(), onehot.row(0), first);
    const auto f1 = model.embeddings().row(1, 1);
    EXPECT_EQ(first, (Vector{3, 2, f1[0], f1[1]}));
}

TEST(FieldPool, HandExamples) {
    {
        LayerParams p(LayerLayout(InteractionKind::Naive, field_spec(2, true), 1, 2));
        Vector out(2);
        ipa::field_pool(Vector{2, 3}, Vector{1, 2}, p.view(), 1, out);
        EXPECT_EQ(out, (Vector{2, 6}));
    }
    const Vector eye{1, 0, 0, 1};
    {
        LayerParams p(LayerLayout(InteractionKind::Naive, field_spec(2), 2, 2));
        Vector out(4);
        ipa::field_pool(eye, eye, p.view(), 1, out);
        EXPECT_EQ(out, (Vector{0, 0, 0, 0}));
    }
    {
        LayerParams p(LayerLayout(InteractionKind::Naive, field_spec(2, false, true), 2, 2));
        Vector out(4);
        ipa::field_pool(eye, eye, p.view(), 1, out);
        EXPECT_EQ(out, eye);
    }
}

TEST(GlobalPool, HandExamples) {
    {
        LayerParams p(LayerLayout(InteractionKind::Naive, global_spec(2, 1), 1, 2));
        Vector out(2);
        ipa::global_pool(Vector{2, 3}, Vector{1, 2}, p.view(), 1, out);
        EXPECT_EQ(out, (Vector{2, 6}));
    }
    {
        LayerParams p(LayerLayout(InteractionKind::Weighted, global_spec(2, 2), 2, 2));  // weights left at 0
        Vector out(4);
        ipa::global_pool(Vector{1, 2, 3, 4}, Vector{1, 2, 3, 4}, p.view(), 1, out);
        EXPECT_EQ(out, (Vector{0, 0, 0, 0}));
    }
    {
        // previous layer has a single term (1,1); h_1 = [(1,2),(3,4)]
        LayerParams p(LayerLayout(InteractionKind::Naive, global_spec(3, 1), 2, 2));
        Vector out(2);
        ipa::global_pool(Vector{1, 1}, Vector{1, 2, 3, 4}, p.view(), 2, out);
        EXPECT_EQ(out, (Vector{4, 6}));
    }
}

TEST(LayerStack, DepthOneIsIdentity) {
    LayerParams p(LayerLayout(InteractionKind::Projected, field_spec(1), 3, 2));
    const Vector first{1, 2, 3, 4, 5, 6};
    auto stack = ipa::stack_forward(first, p.view());
    ASSERT_EQ(stack.depth(), 1u);
    EXPECT_EQ(stack.layers[0], first);
    std::vector<Vector> up{Vector{0.5, -1, 2, 3, 4, 5}};
    Vector gfirst(6, 0.0);
    std::vector<double> gw;
    ipa::stack_backward(stack, p.view(), up, gw, gfirst);
    EXPECT_EQ(gfirst, up[0]);
}

TEST(LayerStack, ForwardMatchesDenseOracleForEveryKind) {
    for (const char* code : {"NFD", "WFD", "DFD", "PFD", "NF'D", "PF'D", "NGD", "WGD", "DGD", "PGD"})
        for (bool self : {false, true})
            for (bool share : {false, true}) {
                ipa::ModelConfig c;
                c.code = ipa::parse_code(code);
                if (c.code.pooling == PoolingKind::Global && (self || share)) continue;
                c.vocab = {2, 3, 2};
                c.k = 3;
                c.depth = 4;
                c.global_width = 3;
                c.include_self = self;
                c.symmetric_share = share;
                ipa::IpaModel model(c, 3);
                oracle::randomize(model, 4, 0.7);
                const auto data = oracle::random_onehot(c.vocab, 5, 6);
                for (std::size_t r = 0; r < data.rows(); ++r) {
                    Vector first(c.fields() * c.k);
                    ipa::build_first_layer(model.embeddings(), data.row(r), first);
                    const auto stack = ipa::stack_forward(first, model.interaction());
                    const auto ref = oracle::layers(model, first);
                    for (std::size_t l = 0; l < c.depth; ++l)
                        for (std::size_t n = 0; n < ref[l].size(); ++n)
                            for (std::size_t e = 0; e < c.k; ++e)
                                EXPECT_NEAR(stack.term(l, n)[e], ref[l][n](static_cast<Eigen::Index>(e)), 1e-12)
                                    << code << " self=" << self << " share=" << share << " layer " << l;
                }
            }
}

TEST(LayerStack, OrderPropertyDegreeL) {
    // t_n = x_n * 1: every term of h_l is homogeneous of degree l in x
    const std::size_t m = 3, k = 2, depth = 4;
    LayerParams p(LayerLayout(InteractionKind::Naive, field_spec(depth, true), m, k));
    const Vector x{0.3, -1.2, 0.8};
    auto make_first = [&](double c) {
        Vector first(m * k);
        for (std::size_t n = 0; n < m; ++n)
            for (std::size_t e = 0; e < k; ++e) first[n * k + e] = c * x[n];
        return first;
    };
    const auto base = ipa::stack_forward(make_first(1.0), p.view());
    const double c = 1.7;
    const auto scaled = ipa::stack_forward(make_first(c), p.view());
    for (std::size_t l = 0; l < depth; ++l)
        for (std::size_t i = 0; i < base.layers[l].size(); ++i)
            EXPECT_NEAR(scaled.layers[l][i], std::pow(c, static_cast<double>(l + 1)) * base.layers[l][i], 1e-12);
}

TEST(LayerStack, SecondLayerSumIsTwicePairEnumeration) {
    ipa::SeededRng rng(31, 0);
    for (auto kind : {InteractionKind::Naive, InteractionKind::Weighted, InteractionKind::Diagonal, InteractionKind::Projected}) {
        PoolingSpec spec = field_spec(2);
        spec.symmetric_share = true;
        const std::size_t m = 4, k = 3;
        LayerParams p(LayerLayout(kind, spec, m, k));
        for (double& w : p.values) w = rng.uniform(-1, 1);
        Vector first(m * k);
        for (double& v : first) v = rng.uniform(-1, 1);
        const auto stack = ipa::stack_forward(first, p.view());
        double pooled = 0.0;
        for (double v : stack.layers[1]) pooled += v;
        double pairs = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const auto slot = p.layout.field_slot(1, i, j);
                const auto w = oracle::dense_w(kind, k, p.view().slot(static_cast<std::size_t>(slot.offset)));
                pairs += oracle::interact(oracle::vec(std::span<const double>(first).subspan(i * k, k)),
                                          oracle::vec(std::span<const double>(first).subspan(j * k, k)), w)
                             .sum();
            }
        EXPECT_NEAR(pooled, 2.0 * pairs, 1e-12) << ipa::kind_letter(kind);
    }
}

TEST(LayerStack, ResidualWithZeroWeightsKeepsFirstLayer) {
    LayerParams p(LayerLayout(InteractionKind::Weighted, field_spec(5, false, true), 3, 2));
    const Vector first{1, -2, 0.5, 3, 4, -1};
    const auto stack = ipa::stack_forward(first, p.view());
    for (const auto& layer : stack.layers) EXPECT_EQ(layer, first);
}

TEST(LayerStack, GradientsMatchFiniteDifferences) {
    struct Case {
        InteractionKind kind;
        PoolingSpec spec;
        std::size_t m;
    };
    std::vector<Case> cases;
    for (auto kind : {InteractionKind::Naive, InteractionKind::Weighted, InteractionKind::Diagonal, InteractionKind::Projected}) {
        cases.push_back({kind, field_spec(3), 3});
        cases.push_back({kind, field_spec(3, true, true), 3});
        cases.push_back({kind, global_spec(3, 2), 2});
    }
    ipa::SeededRng rng(32, 0);
    const double h = 1e-5;
    for (const auto& cs : cases) {
        const std::size_t k = 2;
        LayerParams p(LayerLayout(cs.kind, cs.spec, cs.m, k));
        for (double& w : p.values) w = rng.uniform(-1, 1);
        Vector first(cs.m * k);
        for (double& v : first) v = rng.uniform(-1, 1);
        // objective: sum_l <c_l, h_l> with fixed random c_l
        auto stack = ipa::stack_forward(first, p.view());
        std::vector<Vector> coeff;
        for (const auto& layer : stack.layers) {
            Vector c(layer.size());
            for (double& v : c) v = rng.uniform(-1, 1);
            coeff.push_back(c);
        }
        auto objective = [&] {
            const auto s = ipa::stack_forward(first, p.view());
            double total = 0;
            for (std::size_t l = 0; l < s.depth(); ++l) total += ipa::dot(s.layers[l], coeff[l]);
            return total;
        };
        auto upstream = coeff;
        std::vector<double> gw(p.values.size(), 0.0);
        Vector gfirst(first.size(), 0.0);
        ipa::stack_backward(stack, p.view(), upstream, gw, gfirst);
        auto check = [&](std::vector<double>& x, const std::vector<double>& grad, const char* what) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double saved = x[i];
                x[i] = saved + h;
                const double a = objective();
                x[i] = saved - h;
                const double b = objective();
                x[i] = saved;
                EXPECT_TRUE(oracle::close((a - b) / (2 * h), grad[i], 1e-4, 1e-8))
                    << what << " " << i << " kind " << ipa::kind_letter(cs.kind) << ": fd " << (a - b) / (2 * h) << " vs " << grad[i];
            }
        };
        check(p.values, gw, "weight");
        check(first, gfirst, "embedding");
    }
}

TEST(LayerCounts, ClosedForms) {
    for (auto kind : {InteractionKind::Naive, InteractionKind::Weighted, InteractionKind::Diagonal, InteractionKind::Projected})
        for (std::size_t m : {1u, 3u, 5u})
            for (std::size_t k : {1u, 4u})
                for (std::size_t depth : {1u, 2u, 4u})
                    for (bool self : {false, true}) {
                        const std::size_t s = ipa::param_size(kind, k);
                        const std::size_t delta = self ? 0 : 1;
                        const auto field = field_spec(depth, self);
                        EXPECT_EQ(ipa::interaction_param_count(kind, field, m, k), (depth - 1) * m * (m - delta) * s);
                        EXPECT_EQ(LayerLayout(kind, field, m, k).total(), (depth - 1) * m * (m - delta) * s);
                        const std::size_t h = 3;
                        std::size_t global = 0;
                        for (std::size_t l = 1; l < depth; ++l) global += h * (l == 1 ? m : h) * m * s;
                        EXPECT_EQ(ipa::interaction_param_count(kind, global_spec(depth, h), m, k), global);
                    }
}

TEST(LayerSpec, RejectsInvalidCombinations) {
    PoolingSpec g = global_spec(3, 2);
    g.residual = true;
    EXPECT_THROW(g.validate(), ipa::ConfigError);
    EXPECT_THROW(global_spec(3, 0).validate(), ipa::ConfigError);
    PoolingSpec z = field_spec(0);
    EXPECT_THROW(z.validate(), ipa::ConfigError);
}
