#include "uum/numerics.hpp"

#include "uum/errors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace uum {

std::vector<double> softmax(std::span<const double> logits, std::optional<std::span<const bool>> mask) {
    const std::size_t n = logits.size();
    if (mask && mask->size() != n) throw std::invalid_argument("softmax: mask length mismatch");
    auto allowed = [&](std::size_t i) { return !mask || (*mask)[i]; };

    double max_logit = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!allowed(i)) continue;
        any = true;
        if (logits[i] > max_logit) max_logit = logits[i];
    }
    if (!any) throw NumericError("softmax: every entry is masked");

    std::vector<double> out(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!allowed(i)) continue;
        out[i] = std::exp(logits[i] - max_logit);
        total += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (allowed(i)) out[i] /= total;
    }
    return out;
}

std::vector<double> layer_normalize(std::span<const double> x, std::span<const double> gain,
                                    std::span<const double> bias, double eps) {
    const std::size_t n = x.size();
    if (gain.size() != n || bias.size() != n) {
        throw std::invalid_argument("layer_normalize: gain/bias length mismatch");
    }
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = gain[i] * (x[i] - mean) * inv + bias[i];
    return out;
}

void CompensatedSum::add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
        compensation_ += (sum_ - t) + v;
    } else {
        compensation_ += (v - t) + sum_;
    }
    sum_ = t;
}

double compensated_mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    CompensatedSum s;
    for (double v : values) s.add(v);
    return s.value() / static_cast<double>(values.size());
}

} // namespace uum
