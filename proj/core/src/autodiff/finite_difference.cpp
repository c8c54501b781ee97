#include "geattack/autodiff/finite_difference.hpp"

#include <algorithm>
#include <cmath>

namespace geattack::ad {

DenseMatrix central_difference(const std::function<double(const DenseMatrix&)>& f,
                               const DenseMatrix& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("central_difference: step must be positive");
  DenseMatrix out(x.rows(), x.cols());
  DenseMatrix probe = x;
  auto p = probe.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double orig = p[k];
    p[k] = orig + step;
    const double up = f(probe);
    p[k] = orig - step;
    const double down = f(probe);
    p[k] = orig;
    out.values()[k] = (up - down) / (2.0 * step);
  }
  return out;
}

double max_relative_error(const DenseMatrix& analytic, const DenseMatrix& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw ShapeError("max_relative_error: " + shape_string(analytic) + " vs " +
                     shape_string(numeric));
  }
  double worst = 0.0;
  auto a = analytic.values();
  auto n = numeric.values();
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a[k] - n[k]) / (std::abs(n[k]) + 1e-12));
  }
  return worst;
}

double max_scaled_error(const DenseMatrix& analytic, const DenseMatrix& numeric, double floor_fraction) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw ShapeError("max_scaled_error: " + shape_string(analytic) + " vs " + shape_string(numeric));
  }
  auto a = analytic.values();
  auto n = numeric.values();
  double largest = 0.0;
  for (double v : n) largest = std::max(largest, std::abs(v));
  const double floor = std::max(floor_fraction * largest, 1e-12);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a[k] - n[k]) / std::max(std::abs(n[k]), floor));
  }
  return worst;
}

GradientCheck check_gradient(const ScalarFunction& f, const DenseMatrix& x, double step) {
  GradientCheck result;
  {
    Tape tape;
    DiffValue xv = tape.variable(x);
    DiffValue y = f(tape, xv);
    const DiffValue wrt[] = {xv};
    result.analytic = tape.gradient_values(y, wrt).front();
  }
  result.numeric = central_difference(
      [&](const DenseMatrix& probe) {
        Tape tape;
        return f(tape, tape.constant(probe)).value().item();
      },
      x, step);
  result.max_relative_error = max_relative_error(result.analytic, result.numeric);
  return result;
}

double finite_difference_check(const ScalarFunction& f, const DenseMatrix& x, double step) {
  return check_gradient(f, x, step).max_relative_error;
}

}  // namespace geattack::ad
