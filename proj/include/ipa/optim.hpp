#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ipa/errors.hpp"

namespace ipa {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected moments.
class AdamState {
public:
    AdamState() = default;
    AdamState(std::size_t n, AdamOptions opts = {}) : opts_(opts), m_(n, 0.0), v_(n, 0.0) {}

    [[nodiscard]] std::size_t step_count() const noexcept { return step_; }
    [[nodiscard]] const AdamOptions& options() const noexcept { return opts_; }

    void step(std::span<double> params, std::span<const double> grads) {
        if (params.size() != m_.size() || grads.size() != m_.size()) throw DimensionError("adam: shape mismatch");
        ++step_;
        const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
        const double b1 = opts_.beta1, b2 = opts_.beta2;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            m_[i] = b1 * m_[i] + (1.0 - b1) * g;
            v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
            if (m_[i] == 0.0) continue;
            params[i] -= opts_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + opts_.eps);
        }
    }

private:
    AdamOptions opts_{};
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t step_ = 0;
};

}  // namespace ipa
