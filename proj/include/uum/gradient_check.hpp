#pragma once

#include "uum/autodiff.hpp"

#include <functional>
#include <string>

namespace uum {

/// Relative error with denominator max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

/// Largest coordinate-wise relative error between the tape gradient of
/// fn at `point` and central finite differences with step eps. A probe that
/// flips a ReLU branch is retried with a smaller step.
/// Throws NumericError if fn is not finite.
double gradient_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& point, double eps = 1e-5);

struct ParameterCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates = 0;
};

/// Same check over every coordinate of every parameter in `params`.
/// `loss` must build a fresh scalar on the tape it is given.
ParameterCheckResult gradient_check_parameters(const std::function<Var(Tape&)>& loss, ParameterStore& params,
                                               double eps = 1e-5);

} // namespace uum
