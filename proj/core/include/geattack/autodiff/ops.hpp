#pragma once

#include <cstddef>

#include "geattack/autodiff/tape.hpp"

// Differentiable operations. All operands must live on the same Tape.
// Reverse rules are standard; relu'(0) and clamp_min' at the bound are 0.
namespace geattack::ad {

DiffValue matmul(const DiffValue& a, const DiffValue& b);
DiffValue matmul_nt(const DiffValue& a, const DiffValue& b);
DiffValue matmul_tn(const DiffValue& a, const DiffValue& b);
DiffValue transpose(const DiffValue& a);

DiffValue add(const DiffValue& a, const DiffValue& b);
DiffValue sub(const DiffValue& a, const DiffValue& b);
DiffValue mul(const DiffValue& a, const DiffValue& b);
DiffValue neg(const DiffValue& a);
DiffValue scale(const DiffValue& a, double c);
DiffValue add_scalar(const DiffValue& a, double c);

DiffValue sigmoid(const DiffValue& a);
DiffValue relu(const DiffValue& a);
/// Throws DomainError on any non-positive entry.
DiffValue ln(const DiffValue& a);
DiffValue exp(const DiffValue& a);
DiffValue pow(const DiffValue& a, double p);
DiffValue clamp_min(const DiffValue& a, double lo);

/// Row-wise softmax with per-row max subtraction.
DiffValue softmax_rows(const DiffValue& z);
DiffValue row_sum(const DiffValue& a);
DiffValue broadcast_cols(const DiffValue& col, std::size_t cols);
DiffValue sum(const DiffValue& a);
DiffValue fill(const DiffValue& s, std::size_t rows, std::size_t cols);
DiffValue pick(const DiffValue& a, std::size_t r, std::size_t c);
DiffValue place(const DiffValue& s, std::size_t rows, std::size_t cols, std::size_t r,
                std::size_t c);
DiffValue select_row(const DiffValue& a, std::size_t r);
DiffValue place_row(const DiffValue& row, std::size_t rows, std::size_t r);

DiffValue symmetrize(const DiffValue& a);
DiffValue add_identity(const DiffValue& a);
DiffValue diag_scale(const DiffValue& a, const DiffValue& s);

enum class ElementwiseOp { Sigmoid, Relu, Mul, Add, Sub, Neg, Ln };

/// Dispatcher over the elementwise family; binary ops read `b`.
DiffValue elementwise(ElementwiseOp op, const DiffValue& a, const DiffValue& b = {});

inline DiffValue operator+(const DiffValue& a, const DiffValue& b) { return add(a, b); }
inline DiffValue operator-(const DiffValue& a, const DiffValue& b) { return sub(a, b); }
inline DiffValue operator-(const DiffValue& a) { return neg(a); }

/// Free-function form of Tape::gradient / Tape::gradient_values.
std::vector<DiffValue> gradient(const DiffValue& output, std::span<const DiffValue> wrt);
std::vector<DenseMatrix> gradient_values(const DiffValue& output, std::span<const DiffValue> wrt);

}  // namespace geattack::ad
