#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace uum {

/// Dense row-major double tensor. Most operations treat it as a matrix;
/// rank-1 tensors behave as a single row.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor row_vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    void fill(double v);
    bool all_finite() const noexcept;
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    std::string shape_string() const;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

} // namespace uum
