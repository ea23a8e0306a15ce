#include "seqcast/gradcheck.hpp"

#include "seqcast/errors.hpp"

#include <algorithm>
#include <cmath>

namespace seqcast {

Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& x, double eps) {
    if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
    Tensor probe = x;
    Tensor grad(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double original = probe[i];
        probe[i] = original + eps;
        const double plus = f(probe);
        probe[i] = original - eps;
        const double minus = f(probe);
        probe[i] = original;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw NumericalError("finite_diff_grad: function not finite at coordinate " + std::to_string(i));
        }
        grad[i] = (plus - minus) / (2.0 * eps);
    }
    return grad;
}

bool grad_close(double analytic, double numeric, double rel, double abs_tol) noexcept {
    const double diff = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return diff <= std::max(rel * scale, abs_tol);
}

}  // namespace seqcast
