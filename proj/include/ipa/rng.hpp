#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

#include "ipa/errors.hpp"

namespace ipa {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based generator: draw i of (seed, stream) is a pure function of
/// the triple, so streams can be handed to independent tasks and replayed in
/// any order.
class SeededRng {
public:
    constexpr SeededRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream), key_(detail::splitmix64(seed ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

    [[nodiscard]] constexpr std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] constexpr std::uint64_t stream() const noexcept { return stream_; }
    [[nodiscard]] constexpr std::uint64_t counter() const noexcept { return counter_; }

    /// Generator for a sub-stream; independent of how many draws this one made.
    [[nodiscard]] constexpr SeededRng derive(std::uint64_t sub) const noexcept {
        return SeededRng(seed_, detail::splitmix64(stream_ * 0xd1342543de82ef95ULL + sub + 1));
    }

    constexpr std::uint64_t next_u64() noexcept {
        const std::uint64_t c = counter_++;
        return detail::splitmix64(key_ ^ detail::splitmix64(c * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
    }

    /// Uniform in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    constexpr std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ContractError("SeededRng::below: n must be positive");
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Normal deviate by Box-Muller over two uniform draws.
inline double gauss(SeededRng& rng, double mu, double sigma) {
    if (!(sigma >= 0.0)) throw ContractError("gauss: sigma must be non-negative");
    const double u1 = 1.0 - rng.uniform();  // (0, 1]
    const double u2 = rng.uniform();
    if (sigma == 0.0) return mu;
    return mu + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle(std::span<T> items, SeededRng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace ipa
