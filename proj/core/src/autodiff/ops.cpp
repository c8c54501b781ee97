#include "geattack/autodiff/ops.hpp"

#include <string>

#include "geattack/autodiff/kernels.hpp"

namespace geattack::ad {
namespace {

Tape& common_tape(const DiffValue& a) {
  if (!a.valid()) throw std::invalid_argument("operation on an empty DiffValue");
  return a.tape();
}

Tape& common_tape(const DiffValue& a, const DiffValue& b) {
  Tape& t = common_tape(a);
  if (!b.valid()) throw std::invalid_argument("operation on an empty DiffValue");
  if (&b.tape() != &t) throw std::invalid_argument("operands recorded on different tapes");
  return t;
}

DiffValue record_unary(OpKind op, const DiffValue& a, DenseMatrix value, double param = 0.0) {
  Tape& t = common_tape(a);
  Tape::Node n;
  n.value = std::make_shared<const DenseMatrix>(std::move(value));
  n.op = op;
  n.arity = 1;
  n.in[0] = a.id();
  n.requires_grad = a.requires_grad();
  n.param = param;
  return t.record(std::move(n));
}

DiffValue record_binary(OpKind op, const DiffValue& a, const DiffValue& b, DenseMatrix value) {
  Tape& t = common_tape(a, b);
  Tape::Node n;
  n.value = std::make_shared<const DenseMatrix>(std::move(value));
  n.op = op;
  n.arity = 2;
  n.in[0] = a.id();
  n.in[1] = b.id();
  n.requires_grad = a.requires_grad() || b.requires_grad();
  return t.record(std::move(n));
}

DiffValue record_indexed(OpKind op, const DiffValue& a, DenseMatrix value, std::size_t i0,
                         std::size_t i1, std::size_t rows, std::size_t cols) {
  Tape& t = common_tape(a);
  Tape::Node n;
  n.value = std::make_shared<const DenseMatrix>(std::move(value));
  n.op = op;
  n.arity = 1;
  n.in[0] = a.id();
  n.requires_grad = a.requires_grad();
  n.i0 = i0;
  n.i1 = i1;
  n.rows = rows;
  n.cols = cols;
  return t.record(std::move(n));
}

}  // namespace

DiffValue matmul(const DiffValue& a, const DiffValue& b) {
  return record_binary(OpKind::MatMul, a, b, kernels::matmul(a.value(), b.value()));
}

DiffValue matmul_nt(const DiffValue& a, const DiffValue& b) {
  return record_binary(OpKind::MatMulNT, a, b, kernels::matmul_nt(a.value(), b.value()));
}

DiffValue matmul_tn(const DiffValue& a, const DiffValue& b) {
  return record_binary(OpKind::MatMulTN, a, b, kernels::matmul_tn(a.value(), b.value()));
}

DiffValue transpose(const DiffValue& a) {
  return record_unary(OpKind::Transpose, a, kernels::transpose(a.value()));
}

DiffValue add(const DiffValue& a, const DiffValue& b) {
  return record_binary(OpKind::Add, a, b, kernels::add(a.value(), b.value()));
}

DiffValue sub(const DiffValue& a, const DiffValue& b) {
  return record_binary(OpKind::Sub, a, b, kernels::sub(a.value(), b.value()));
}

DiffValue mul(const DiffValue& a, const DiffValue& b) {
  return record_binary(OpKind::Mul, a, b, kernels::mul(a.value(), b.value()));
}

DiffValue neg(const DiffValue& a) { return record_unary(OpKind::Neg, a, kernels::neg(a.value())); }

DiffValue scale(const DiffValue& a, double c) {
  return record_unary(OpKind::Scale, a, kernels::scale(a.value(), c), c);
}

DiffValue add_scalar(const DiffValue& a, double c) {
  return record_unary(OpKind::AddScalar, a, kernels::add_scalar(a.value(), c), c);
}

DiffValue sigmoid(const DiffValue& a) {
  return record_unary(OpKind::Sigmoid, a, kernels::sigmoid(a.value()));
}

DiffValue relu(const DiffValue& a) { return record_unary(OpKind::Relu, a, kernels::relu(a.value())); }

DiffValue ln(const DiffValue& a) { return record_unary(OpKind::Ln, a, kernels::ln(a.value())); }

DiffValue exp(const DiffValue& a) { return record_unary(OpKind::Exp, a, kernels::exp(a.value())); }

DiffValue pow(const DiffValue& a, double p) {
  return record_unary(OpKind::Pow, a, kernels::pow(a.value(), p), p);
}

DiffValue clamp_min(const DiffValue& a, double lo) {
  return record_unary(OpKind::ClampMin, a, kernels::clamp_min(a.value(), lo), lo);
}

DiffValue softmax_rows(const DiffValue& z) {
  return record_unary(OpKind::SoftmaxRows, z, kernels::softmax_rows(z.value()));
}

DiffValue row_sum(const DiffValue& a) {
  return record_indexed(OpKind::RowSum, a, kernels::row_sum(a.value()), 0, 0, a.rows(), a.cols());
}

DiffValue broadcast_cols(const DiffValue& col, std::size_t cols) {
  return record_indexed(OpKind::BroadcastCols, col, kernels::broadcast_cols(col.value(), cols), 0, 0,
                        col.rows(), cols);
}

DiffValue sum(const DiffValue& a) {
  return record_indexed(OpKind::Sum, a, kernels::sum(a.value()), 0, 0, a.rows(), a.cols());
}

DiffValue fill(const DiffValue& s, std::size_t rows, std::size_t cols) {
  return record_indexed(OpKind::Fill, s, kernels::fill(s.value(), rows, cols), 0, 0, rows, cols);
}

DiffValue pick(const DiffValue& a, std::size_t r, std::size_t c) {
  return record_indexed(OpKind::Pick, a, kernels::pick(a.value(), r, c), r, c, a.rows(), a.cols());
}

DiffValue place(const DiffValue& s, std::size_t rows, std::size_t cols, std::size_t r,
                std::size_t c) {
  return record_indexed(OpKind::Place, s, kernels::place(s.value(), rows, cols, r, c), r, c, rows,
                        cols);
}

DiffValue select_row(const DiffValue& a, std::size_t r) {
  return record_indexed(OpKind::SelectRow, a, kernels::select_row(a.value(), r), r, 0, a.rows(),
                        a.cols());
}

DiffValue place_row(const DiffValue& row, std::size_t rows, std::size_t r) {
  return record_indexed(OpKind::PlaceRow, row, kernels::place_row(row.value(), rows, r), r, 0, rows,
                        row.cols());
}

DiffValue symmetrize(const DiffValue& a) {
  return record_unary(OpKind::Symmetrize, a, kernels::symmetrize(a.value()));
}

DiffValue add_identity(const DiffValue& a) {
  return record_unary(OpKind::AddIdentity, a, kernels::add_identity(a.value()));
}

DiffValue diag_scale(const DiffValue& a, const DiffValue& s) {
  return record_binary(OpKind::DiagScale, a, s, kernels::diag_scale(a.value(), s.value()));
}

DiffValue elementwise(ElementwiseOp op, const DiffValue& a, const DiffValue& b) {
  switch (op) {
    case ElementwiseOp::Sigmoid: return sigmoid(a);
    case ElementwiseOp::Relu: return relu(a);
    case ElementwiseOp::Neg: return neg(a);
    case ElementwiseOp::Ln: return ln(a);
    case ElementwiseOp::Mul: return mul(a, b);
    case ElementwiseOp::Add: return add(a, b);
    case ElementwiseOp::Sub: return sub(a, b);
  }
  throw std::invalid_argument("elementwise: unknown op");
}

std::vector<DiffValue> gradient(const DiffValue& output, std::span<const DiffValue> wrt) {
  return common_tape(output).gradient(output, wrt);
}

std::vector<DenseMatrix> gradient_values(const DiffValue& output, std::span<const DiffValue> wrt) {
  return common_tape(output).gradient_values(output, wrt);
}

}  // namespace geattack::ad
