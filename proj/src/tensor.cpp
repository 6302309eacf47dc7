#include "uum/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace uum {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
    for (auto d : shape_) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
    }
    if (n != data_.size()) {
        throw std::invalid_argument("tensor shape " + shape_string() + " does not match " +
                                    std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::row_vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const noexcept {
    if (shape_.size() < 2) return shape_.empty() ? 0 : 1;
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
    return r;
}

std::size_t Tensor::cols() const noexcept {
    return shape_.empty() ? 0 : shape_.back();
}

void Tensor::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

} // namespace uum
