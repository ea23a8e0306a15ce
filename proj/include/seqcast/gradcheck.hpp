#pragma once

#include "seqcast/tensor.hpp"

#include <functional>

namespace seqcast {

using ScalarFunction = std::function<double(const Tensor&)>;

/// Central-difference gradient of f at x, one coordinate at a time.
/// Throws NumericalError if f returns a non-finite value at any probe.
Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& x, double eps = 1e-5);

/// |a - b| <= max(rel * max(|a|, |b|), abs_tol).
bool grad_close(double analytic, double numeric, double rel = 1e-5, double abs_tol = 1e-7) noexcept;

}  // namespace seqcast
