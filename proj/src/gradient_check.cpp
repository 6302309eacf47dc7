#include "uum/gradient_check.hpp"

#include "uum/errors.hpp"

#include <algorithm>
#include <cmath>

namespace uum {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

namespace {

double finite_or_throw(double v) {
    if (!std::isfinite(v)) throw NumericError("gradient_check: function value is not finite");
    return v;
}

struct Probe {
    double value;
    std::uint64_t signature;
};

// Central difference at `eps`, shrunk while either probe leaves the smooth
// piece the unperturbed point sits on.
template <class Eval>
double central_difference(Eval&& at, std::uint64_t signature, double eps) {
    constexpr int kRetries = 6;
    for (int attempt = 0;; ++attempt) {
        const Probe up = at(eps);
        const Probe down = at(-eps);
        const bool smooth = up.signature == signature && down.signature == signature;
        if (smooth || attempt == kRetries) return (up.value - down.value) / (2.0 * eps);
        eps *= 0.25;
    }
}

} // namespace

double gradient_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& point, double eps) {
    Tensor analytic;
    std::uint64_t signature = 0;
    {
        Tape tape;
        Var x = tape.input(point);
        Var y = fn(tape, x);
        finite_or_throw(y.scalar());
        signature = tape.kink_signature();
        tape.backward(y);
        analytic = tape.has_grad(x.id()) ? x.grad() : Tensor(point.shape(), std::vector<double>(point.size(), 0.0));
    }
    double worst = 0.0;
    Tensor probe = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        auto at = [&](double step) {
            probe[i] = point[i] + step;
            Tape tape;
            const double v = finite_or_throw(fn(tape, tape.constant(probe)).scalar());
            probe[i] = point[i];
            return Probe{v, tape.kink_signature()};
        };
        worst = std::max(worst, relative_error(analytic[i], central_difference(at, signature, eps)));
    }
    return worst;
}

ParameterCheckResult gradient_check_parameters(const std::function<Var(Tape&)>& loss, ParameterStore& params,
                                               double eps) {
    params.zero_grad();
    std::uint64_t signature = 0;
    {
        Tape tape;
        Var y = loss(tape);
        finite_or_throw(y.scalar());
        signature = tape.kink_signature();
        tape.backward(y);
    }
    ParameterCheckResult result;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double original = p.value[i];
            auto at = [&](double step) {
                p.value[i] = original + step;
                Tape tape;
                const double v = finite_or_throw(loss(tape).scalar());
                p.value[i] = original;
                return Probe{v, tape.kink_signature()};
            };
            const double numeric = central_difference(at, signature, eps);
            const double err = relative_error(p.grad[i], numeric);
            ++result.coordinates;
            if (err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_parameter = p.name;
                result.worst_index = i;
                result.analytic = p.grad[i];
                result.numeric = numeric;
            }
        }
    }
    return result;
}

} // namespace uum
