#pragma once

#include <cstddef>

#include "geattack/autodiff/dense_matrix.hpp"

// Plain (non-recording) dense kernels. Every recorded operation computes its
// forward value with one of these, and gradient passes that do not retain a
// graph evaluate their reverse rules with them directly.
namespace geattack::ad::kernels {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a * b^T
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // a^T * b
DenseMatrix transpose(const DenseMatrix& a);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix mul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix neg(const DenseMatrix& a);
DenseMatrix scale(const DenseMatrix& a, double c);
DenseMatrix add_scalar(const DenseMatrix& a, double c);

DenseMatrix sigmoid(const DenseMatrix& a);
DenseMatrix relu(const DenseMatrix& a);
DenseMatrix ln(const DenseMatrix& a);
DenseMatrix exp(const DenseMatrix& a);
DenseMatrix pow(const DenseMatrix& a, double p);
DenseMatrix clamp_min(const DenseMatrix& a, double lo);
/// 1.0 where a > threshold, else 0.0.
DenseMatrix indicator_greater(const DenseMatrix& a, double threshold);

DenseMatrix softmax_rows(const DenseMatrix& z);
DenseMatrix row_sum(const DenseMatrix& a);
DenseMatrix broadcast_cols(const DenseMatrix& col, std::size_t cols);
DenseMatrix sum(const DenseMatrix& a);
DenseMatrix fill(const DenseMatrix& s, std::size_t rows, std::size_t cols);
DenseMatrix pick(const DenseMatrix& a, std::size_t r, std::size_t c);
DenseMatrix place(const DenseMatrix& s, std::size_t rows, std::size_t cols, std::size_t r,
                  std::size_t c);
DenseMatrix select_row(const DenseMatrix& a, std::size_t r);
DenseMatrix place_row(const DenseMatrix& row, std::size_t rows, std::size_t r);

/// (a + a^T) / 2
DenseMatrix symmetrize(const DenseMatrix& a);
DenseMatrix add_identity(const DenseMatrix& a);
/// out[i][j] = s[i] * a[i][j] * s[j] for a column vector s.
DenseMatrix diag_scale(const DenseMatrix& a, const DenseMatrix& s);

}  // namespace geattack::ad::kernels
