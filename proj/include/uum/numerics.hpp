#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace uum {

/// Softmax with max-subtraction. Masked entries (mask[i] == false) are
/// excluded from the normalizer and come out exactly 0.
/// Throws NumericError if every entry is masked.
std::vector<double> softmax(std::span<const double> logits,
                            std::optional<std::span<const bool>> mask = std::nullopt);

/// gain * (x - mean) / sqrt(var + eps) + bias, population variance.
std::vector<double> layer_normalize(std::span<const double> x, std::span<const double> gain,
                                    std::span<const double> bias, double eps);

/// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double v);
    double value() const noexcept { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

double compensated_mean(std::span<const double> values);

} // namespace uum
