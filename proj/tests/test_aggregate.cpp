#include <gtest/gtest.h>

#include "oracles.hpp"

using ipa::AggLayout;
using ipa::AggregatorKind;
using ipa::AggregatorSpec;
using ipa::CombineMode;
using ipa::LayerStack;
using ipa::Vector;

namespace {

LayerStack two_layer_stack() { return LayerStack{2, {Vector{1, 2}, Vector{3, 4}}}; }

LayerStack random_stack(ipa::SeededRng& rng, const std::vector<std::size_t>& widths, std::size_t k) {
    LayerStack s{k, {}};
    for (auto w : widths) {
        Vector layer(w * k);
        for (double& v : layer) v = rng.uniform(-1, 1);
        s.layers.push_back(layer);
    }
    return s;
}

constexpr AggregatorKind kKinds[] = {AggregatorKind::Direct, AggregatorKind::Layer, AggregatorKind::Term, AggregatorKind::Element};

}  // namespace

TEST(Aggregate, HandExamples) {
    const auto stack = two_layer_stack();
    const AggLayout direct({AggregatorKind::Direct, CombineMode::Sum}, {1, 1}, 2);
    EXPECT_EQ(ipa::aggregate(stack, direct, std::vector<double>{}), (Vector{4, 6}));
    const AggLayout layer({AggregatorKind::Layer, CombineMode::Sum}, {1, 1}, 2);
    EXPECT_EQ(ipa::aggregate(stack, layer, std::vector<double>{1, 0.5}), (Vector{2.5, 4}));
    const AggLayout element({AggregatorKind::Element, CombineMode::Sum}, {1, 1}, 2);
    EXPECT_EQ(ipa::aggregate(stack, element, std::vector<double>(4, 1.0)), (Vector{4, 6}));
}

TEST(Aggregate, UnitWeightsEqualDirectAndLinearity) {
    ipa::SeededRng rng(41, 0);
    for (auto mode : {CombineMode::Sum, CombineMode::Concat}) {
        const std::vector<std::size_t> widths{3, 3, 3};
        const auto stack = random_stack(rng, widths, 2);
        const auto direct = ipa::aggregate(stack, AggLayout({AggregatorKind::Direct, mode}, widths, 2), std::vector<double>{});
        for (auto kind : kKinds) {
            const AggLayout lay({kind, mode}, widths, 2);
            std::vector<double> ones(lay.param_count(), 1.0);
            EXPECT_EQ(ipa::aggregate(stack, lay, ones), direct);
            std::vector<double> w(lay.param_count());
            for (double& v : w) v = rng.uniform(-1, 1);
            auto scaled = stack;
            for (auto& layer : scaled.layers)
                for (double& v : layer) v *= -3.0;
            const auto a = ipa::aggregate(stack, lay, w);
            const auto b = ipa::aggregate(scaled, lay, w);
            for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], -3.0 * a[i], 1e-14);
        }
    }
}

TEST(Aggregate, BackwardHandCases) {
    const auto stack = two_layer_stack();
    const Vector up{0.5, -2};
    {
        const AggLayout lay({AggregatorKind::Direct, CombineMode::Sum}, {1, 1}, 2);
        std::vector<Vector> g{Vector(2, 0.0), Vector(2, 0.0)};
        std::vector<double> gw;
        ipa::aggregate_backward(stack, lay, std::vector<double>{}, up, g, gw);
        EXPECT_EQ(g[0], up);
        EXPECT_EQ(g[1], up);
    }
    {
        const AggLayout lay({AggregatorKind::Layer, CombineMode::Sum}, {1, 1}, 2);
        std::vector<Vector> g{Vector(2, 0.0), Vector(2, 0.0)};
        std::vector<double> gw(2, 0.0);
        ipa::aggregate_backward(stack, lay, std::vector<double>{1, 0.5}, up, g, gw);
        EXPECT_DOUBLE_EQ(gw[0], 0.5 * 1 - 2 * 2);
        EXPECT_DOUBLE_EQ(gw[1], 0.5 * 3 - 2 * 4);
    }
    {
        const AggLayout lay({AggregatorKind::Element, CombineMode::Sum}, {1, 1}, 2);
        std::vector<Vector> g{Vector(2, 0.0), Vector(2, 0.0)};
        std::vector<double> gw(4, 0.0);
        ipa::aggregate_backward(stack, lay, std::vector<double>(4, 1.0), up, g, gw);
        EXPECT_EQ(gw, (std::vector<double>{0.5, -4, 1.5, -8}));
    }
}

TEST(Aggregate, GradientsMatchFiniteDifferences) {
    ipa::SeededRng rng(42, 0);
    const double h = 1e-5;
    for (auto mode : {CombineMode::Sum, CombineMode::Concat})
        for (bool pooled : {false, true})
            for (bool first : {true, false})
                for (auto kind : kKinds) {
                    if (pooled && kind == AggregatorKind::Element) continue;
                    const std::vector<std::size_t> widths = mode == CombineMode::Sum ? std::vector<std::size_t>{3, 3, 3}
                                                                                     : std::vector<std::size_t>{3, 2, 2};
                    const AggLayout lay({kind, mode, pooled, first}, widths, 2);
                    auto stack = random_stack(rng, widths, 2);
                    std::vector<double> w(lay.param_count());
                    for (double& v : w) v = rng.uniform(-1, 1);
                    Vector c(lay.output_size());
                    for (double& v : c) v = rng.uniform(-1, 1);
                    auto objective = [&] { return ipa::dot(ipa::aggregate(stack, lay, w), c); };
                    std::vector<Vector> g;
                    for (const auto& layer : stack.layers) g.emplace_back(layer.size(), 0.0);
                    std::vector<double> gw(w.size(), 0.0);
                    ipa::aggregate_backward(stack, lay, w, c, g, gw);
                    for (std::size_t i = 0; i < w.size(); ++i) {
                        const double s = w[i];
                        w[i] = s + h;
                        const double a = objective();
                        w[i] = s - h;
                        const double b = objective();
                        w[i] = s;
                        EXPECT_TRUE(oracle::close((a - b) / (2 * h), gw[i], 1e-4, 1e-8));
                    }
                    for (std::size_t l = 0; l < stack.depth(); ++l)
                        for (std::size_t i = 0; i < stack.layers[l].size(); ++i) {
                            const double s = stack.layers[l][i];
                            stack.layers[l][i] = s + h;
                            const double a = objective();
                            stack.layers[l][i] = s - h;
                            const double b = objective();
                            stack.layers[l][i] = s;
                            EXPECT_TRUE(oracle::close((a - b) / (2 * h), g[l][i], 1e-4, 1e-8));
                        }
                }
}

TEST(Aggregate, ParamCountsSumMode) {
    for (std::size_t depth : {1u, 2u, 5u})
        for (std::size_t m : {1u, 4u})
            for (std::size_t k : {2u, 8u}) {
                const std::vector<std::size_t> widths(depth, m);
                EXPECT_EQ(ipa::aggregator_param_count({AggregatorKind::Direct, CombineMode::Sum}, widths, k), 0u);
                EXPECT_EQ(ipa::aggregator_param_count({AggregatorKind::Layer, CombineMode::Sum}, widths, k), depth);
                EXPECT_EQ(ipa::aggregator_param_count({AggregatorKind::Term, CombineMode::Sum}, widths, k), depth * m);
                EXPECT_EQ(ipa::aggregator_param_count({AggregatorKind::Element, CombineMode::Sum}, widths, k), depth * m * k);
            }
}

TEST(Aggregate, ConfigErrors) {
    EXPECT_THROW(AggLayout({AggregatorKind::Direct, CombineMode::Sum}, {3, 10}, 2), ipa::ConfigError);
    EXPECT_THROW(AggLayout({AggregatorKind::Element, CombineMode::Concat, true}, {3, 10}, 2), ipa::ConfigError);
    EXPECT_NO_THROW(AggLayout({AggregatorKind::Direct, CombineMode::Concat}, {3, 10}, 2));
    EXPECT_THROW(AggLayout({AggregatorKind::Direct, CombineMode::Sum, false, false}, {3}, 2), ipa::ConfigError);
}
