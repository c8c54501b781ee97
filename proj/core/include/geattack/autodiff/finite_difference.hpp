#pragma once

#include <functional>

#include "geattack/autodiff/tape.hpp"

namespace geattack::ad {

/// A scalar-valued function recorded on a caller-provided tape.
using ScalarFunction = std::function<DiffValue(Tape&, const DiffValue& x)>;

/// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every entry k.
/// Only forward values of `f` are used.
DenseMatrix central_difference(const std::function<double(const DenseMatrix&)>& f,
                               const DenseMatrix& x, double step);

struct GradientCheck {
  double max_relative_error = 0.0;
  DenseMatrix analytic;
  DenseMatrix numeric;
};

/// Reverse-mode gradient of `f` at `x` against central differences.
/// Error per entry is |analytic - numeric| / (|numeric| + 1e-12).
GradientCheck check_gradient(const ScalarFunction& f, const DenseMatrix& x, double step);

double finite_difference_check(const ScalarFunction& f, const DenseMatrix& x, double step);

double max_relative_error(const DenseMatrix& analytic, const DenseMatrix& numeric);

/// Errors relative to max(|numeric|, floor_fraction * max|numeric|), so entries
/// far below the largest one are judged on the scale of the whole gradient.
double max_scaled_error(const DenseMatrix& analytic, const DenseMatrix& numeric, double floor_fraction);

}  // namespace geattack::ad
