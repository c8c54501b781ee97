#include "geattack/autodiff/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace geattack::ad::kernels {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const DenseMatrix& m) {
  return ConstMap(m.values().data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

MutMap view(DenseMatrix& m) {
  return MutMap(m.values().data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

void require_same_shape(const char* op, const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

template <class F>
DenseMatrix map_unary(const DenseMatrix& a, F f) {
  DenseMatrix out(a.rows(), a.cols());
  auto src = a.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <class F>
DenseMatrix map_binary(const char* op, const DenseMatrix& a, const DenseMatrix& b, F f) {
  require_same_shape(op, a, b);
  DenseMatrix out(a.rows(), a.cols());
  auto x = a.values();
  auto y = b.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a) + " * " +
                     shape_string(b));
  }
  DenseMatrix out(a.rows(), b.cols());
  view(out).noalias() = view(a) * view(b);
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a) + " * (" + shape_string(b) + ")^T");
  }
  DenseMatrix out(a.rows(), b.rows());
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: (" + shape_string(a) + ")^T * " + shape_string(b));
  }
  DenseMatrix out(a.cols(), b.cols());
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  return map_binary("add", a, b, [](double x, double y) { return x + y; });
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  return map_binary("sub", a, b, [](double x, double y) { return x - y; });
}

DenseMatrix mul(const DenseMatrix& a, const DenseMatrix& b) {
  return map_binary("mul", a, b, [](double x, double y) { return x * y; });
}

DenseMatrix neg(const DenseMatrix& a) {
  return map_unary(a, [](double x) { return -x; });
}

DenseMatrix scale(const DenseMatrix& a, double c) {
  return map_unary(a, [c](double x) { return c * x; });
}

DenseMatrix add_scalar(const DenseMatrix& a, double c) {
  return map_unary(a, [c](double x) { return x + c; });
}

DenseMatrix sigmoid(const DenseMatrix& a) { return map_unary(a, stable_sigmoid); }

DenseMatrix relu(const DenseMatrix& a) {
  return map_unary(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

DenseMatrix ln(const DenseMatrix& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) {
      throw DomainError("ln: non-positive entry " + std::to_string(v) +
                        " (clamp inputs before taking logarithms)");
    }
  }
  return map_unary(a, [](double x) { return std::log(x); });
}

DenseMatrix exp(const DenseMatrix& a) {
  return map_unary(a, [](double x) { return std::exp(x); });
}

DenseMatrix pow(const DenseMatrix& a, double p) {
  const bool integral = std::floor(p) == p;
  for (double v : a.values()) {
    if (v < 0.0 && !integral) {
      throw DomainError("pow: negative base " + std::to_string(v) + " with exponent " +
                        std::to_string(p));
    }
    if (v == 0.0 && p < 0.0) throw DomainError("pow: zero base with negative exponent");
  }
  return map_unary(a, [p](double x) { return std::pow(x, p); });
}

DenseMatrix clamp_min(const DenseMatrix& a, double lo) {
  return map_unary(a, [lo](double x) { return x > lo ? x : lo; });
}

DenseMatrix indicator_greater(const DenseMatrix& a, double threshold) {
  return map_unary(a, [threshold](double x) { return x > threshold ? 1.0 : 0.0; });
}

DenseMatrix softmax_rows(const DenseMatrix& z) {
  DenseMatrix out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto in = z.row(i);
    auto dst = out.row(i);
    const double m = in.empty() ? 0.0 : *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      dst[j] = std::exp(in[j] - m);
      total += dst[j];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

DenseMatrix row_sum(const DenseMatrix& a) {
  DenseMatrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += v;
    out(i, 0) = s;
  }
  return out;
}

DenseMatrix broadcast_cols(const DenseMatrix& col, std::size_t cols) {
  if (col.cols() != 1) throw ShapeError("broadcast_cols: expected a column, got " + shape_string(col));
  DenseMatrix out(col.rows(), cols);
  for (std::size_t i = 0; i < col.rows(); ++i) std::fill(out.row(i).begin(), out.row(i).end(), col(i, 0));
  return out;
}

DenseMatrix sum(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return DenseMatrix::scalar(s);
}

DenseMatrix fill(const DenseMatrix& s, std::size_t rows, std::size_t cols) {
  return DenseMatrix(rows, cols, s.item());
}

DenseMatrix pick(const DenseMatrix& a, std::size_t r, std::size_t c) {
  if (r >= a.rows() || c >= a.cols()) {
    throw ShapeError("pick: index (" + std::to_string(r) + "," + std::to_string(c) +
                     ") outside " + shape_string(a));
  }
  return DenseMatrix::scalar(a(r, c));
}

DenseMatrix place(const DenseMatrix& s, std::size_t rows, std::size_t cols, std::size_t r,
                  std::size_t c) {
  DenseMatrix out(rows, cols);
  out(r, c) = s.item();
  return out;
}

DenseMatrix select_row(const DenseMatrix& a, std::size_t r) {
  if (r >= a.rows()) {
    throw ShapeError("select_row: row " + std::to_string(r) + " outside " + shape_string(a));
  }
  DenseMatrix out(1, a.cols());
  std::copy(a.row(r).begin(), a.row(r).end(), out.row(0).begin());
  return out;
}

DenseMatrix place_row(const DenseMatrix& row, std::size_t rows, std::size_t r) {
  if (row.rows() != 1) throw ShapeError("place_row: expected a row, got " + shape_string(row));
  DenseMatrix out(rows, row.cols());
  std::copy(row.row(0).begin(), row.row(0).end(), out.row(r).begin());
  return out;
}

DenseMatrix symmetrize(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("symmetrize: non-square " + shape_string(a));
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = 0.5 * (a(i, j) + a(j, i));
  return out;
}

DenseMatrix add_identity(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("add_identity: non-square " + shape_string(a));
  DenseMatrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) out(i, i) += 1.0;
  return out;
}

DenseMatrix diag_scale(const DenseMatrix& a, const DenseMatrix& s) {
  if (a.rows() != a.cols() || s.rows() != a.rows() || s.cols() != 1) {
    throw ShapeError("diag_scale: " + shape_string(a) + " scaled by " + shape_string(s));
  }
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double si = s(i, 0);
    auto src = a.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = si * src[j] * s(j, 0);
  }
  return out;
}

}  // namespace geattack::ad::kernels
