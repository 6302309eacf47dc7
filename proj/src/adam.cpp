#include "uum/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace uum {

void adam_update(std::span<double> params, std::span<const double> grads, AdamMoments& state, std::uint64_t step,
                 const AdamConfig& config) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_update: gradient size mismatch");
    if (state.first.size() != params.size()) {
        state.first.assign(params.size(), 0.0);
        state.second.assign(params.size(), 0.0);
    }
    const double t = static_cast<double>(step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.first[i] = config.beta1 * state.first[i] + (1.0 - config.beta1) * g;
        state.second[i] = config.beta2 * state.second[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.first[i] / c1;
        const double v_hat = state.second[i] / c2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

void Adam::step(ParameterStore& params) {
    if (moments_.size() != params.size()) moments_.resize(params.size());
    ++steps_;
    std::size_t i = 0;
    for (auto& p : params) {
        adam_update(p.value.values(), p.grad.values(), moments_[i++], steps_, config_);
    }
}

} // namespace uum
