#pragma once

#include "uum/autodiff.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace uum {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamMoments {
    std::vector<double> first;
    std::vector<double> second;
};

/// One bias-corrected Adam step in place. `step` is 1-based (the step being taken).
void adam_update(std::span<double> params, std::span<const double> grads, AdamMoments& state, std::uint64_t step,
                 const AdamConfig& config);

/// Adam over every tensor of a ParameterStore.
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void step(ParameterStore& params);
    std::uint64_t steps() const noexcept { return steps_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    std::uint64_t steps_ = 0;
    std::vector<AdamMoments> moments_;
};

} // namespace uum
