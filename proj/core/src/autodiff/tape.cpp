#include "geattack/autodiff/tape.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "geattack/autodiff/kernels.hpp"
#include "geattack/autodiff/ops.hpp"

namespace geattack::ad {

const DenseMatrix& DiffValue::value() const { return *tape().node(id_).value; }

bool DiffValue::requires_grad() const { return tape().node(id_).requires_grad; }

Tape& DiffValue::tape() const {
  if (tape_ == nullptr) throw std::logic_error("DiffValue is not attached to a tape");
  return *tape_;
}

DiffValue Tape::record(Node node) {
  if (nodes_.size() >= UINT32_MAX) throw std::length_error("tape is full");
  nodes_.push_back(std::move(node));
  return DiffValue(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

DiffValue Tape::constant(DenseMatrix value) {
  return constant(std::make_shared<const DenseMatrix>(std::move(value)));
}

DiffValue Tape::constant(std::shared_ptr<const DenseMatrix> value) {
  Node n;
  n.value = std::move(value);
  return record(std::move(n));
}

DiffValue Tape::variable(DenseMatrix value) {
  Node n;
  n.value = std::make_shared<const DenseMatrix>(std::move(value));
  n.requires_grad = true;
  return record(std::move(n));
}

namespace {

// Records reverse rules as tape operations (graph-retaining pass).
struct GraphEngine {
  using V = DiffValue;
  Tape& tape;

  V input(const Tape::Node& n, int k) { return tape.handle(n.in[k]); }
  V output(std::uint32_t self) { return tape.handle(self); }
  V constant(DenseMatrix m) { return tape.constant(std::move(m)); }
  static const DenseMatrix& val(const V& v) { return v.value(); }

  V matmul(const V& a, const V& b) { return ad::matmul(a, b); }
  V matmul_nt(const V& a, const V& b) { return ad::matmul_nt(a, b); }
  V matmul_tn(const V& a, const V& b) { return ad::matmul_tn(a, b); }
  V transpose(const V& a) { return ad::transpose(a); }
  V add(const V& a, const V& b) { return ad::add(a, b); }
  V sub(const V& a, const V& b) { return ad::sub(a, b); }
  V mul(const V& a, const V& b) { return ad::mul(a, b); }
  V neg(const V& a) { return ad::neg(a); }
  V scale(const V& a, double c) { return ad::scale(a, c); }
  V pow(const V& a, double p) { return ad::pow(a, p); }
  V row_sum(const V& a) { return ad::row_sum(a); }
  V broadcast_cols(const V& a, std::size_t c) { return ad::broadcast_cols(a, c); }
  V sum(const V& a) { return ad::sum(a); }
  V fill(const V& a, std::size_t r, std::size_t c) { return ad::fill(a, r, c); }
  V pick(const V& a, std::size_t r, std::size_t c) { return ad::pick(a, r, c); }
  V place(const V& a, std::size_t rows, std::size_t cols, std::size_t r, std::size_t c) {
    return ad::place(a, rows, cols, r, c);
  }
  V select_row(const V& a, std::size_t r) { return ad::select_row(a, r); }
  V place_row(const V& a, std::size_t rows, std::size_t r) { return ad::place_row(a, rows, r); }
  V symmetrize(const V& a) { return ad::symmetrize(a); }
  V diag_scale(const V& a, const V& s) { return ad::diag_scale(a, s); }
};

// Evaluates reverse rules on plain matrices (non-retaining pass).
struct ValueEngine {
  using V = std::shared_ptr<const DenseMatrix>;
  const Tape& tape;

  static V make(DenseMatrix m) { return std::make_shared<const DenseMatrix>(std::move(m)); }
  V input(const Tape::Node& n, int k) { return tape.node(n.in[k]).value; }
  V output(std::uint32_t self) { return tape.node(self).value; }
  V constant(DenseMatrix m) { return make(std::move(m)); }
  static const DenseMatrix& val(const V& v) { return *v; }

  V matmul(const V& a, const V& b) { return make(kernels::matmul(*a, *b)); }
  V matmul_nt(const V& a, const V& b) { return make(kernels::matmul_nt(*a, *b)); }
  V matmul_tn(const V& a, const V& b) { return make(kernels::matmul_tn(*a, *b)); }
  V transpose(const V& a) { return make(kernels::transpose(*a)); }
  V add(const V& a, const V& b) { return make(kernels::add(*a, *b)); }
  V sub(const V& a, const V& b) { return make(kernels::sub(*a, *b)); }
  V mul(const V& a, const V& b) { return make(kernels::mul(*a, *b)); }
  V neg(const V& a) { return make(kernels::neg(*a)); }
  V scale(const V& a, double c) { return make(kernels::scale(*a, c)); }
  V pow(const V& a, double p) { return make(kernels::pow(*a, p)); }
  V row_sum(const V& a) { return make(kernels::row_sum(*a)); }
  V broadcast_cols(const V& a, std::size_t c) { return make(kernels::broadcast_cols(*a, c)); }
  V sum(const V& a) { return make(kernels::sum(*a)); }
  V fill(const V& a, std::size_t r, std::size_t c) { return make(kernels::fill(*a, r, c)); }
  V pick(const V& a, std::size_t r, std::size_t c) { return make(kernels::pick(*a, r, c)); }
  V place(const V& a, std::size_t rows, std::size_t cols, std::size_t r, std::size_t c) {
    return make(kernels::place(*a, rows, cols, r, c));
  }
  V select_row(const V& a, std::size_t r) { return make(kernels::select_row(*a, r)); }
  V place_row(const V& a, std::size_t rows, std::size_t r) {
    return make(kernels::place_row(*a, rows, r));
  }
  V symmetrize(const V& a) { return make(kernels::symmetrize(*a)); }
  V diag_scale(const V& a, const V& s) { return make(kernels::diag_scale(*a, *s)); }
};

// One reverse rule per operation, written once for both engines. `emit(k, g)`
// receives the adjoint contribution for input k; it is only called for
// inputs flagged in `need`.
template <class E, class Emit>
void reverse_rule(E& e, const Tape::Node& n, std::uint32_t self, const typename E::V& g,
                  const bool need[2], Emit&& emit) {
  using V = typename E::V;
  auto a = [&] { return e.input(n, 0); };
  auto b = [&] { return e.input(n, 1); };

  switch (n.op) {
    case OpKind::Leaf:
      return;
    case OpKind::MatMul:
      if (need[0]) emit(0, e.matmul_nt(g, b()));
      if (need[1]) emit(1, e.matmul_tn(a(), g));
      return;
    case OpKind::MatMulNT:  // y = a b^T
      if (need[0]) emit(0, e.matmul(g, b()));
      if (need[1]) emit(1, e.matmul_tn(g, a()));
      return;
    case OpKind::MatMulTN:  // y = a^T b
      if (need[0]) emit(0, e.matmul_nt(b(), g));
      if (need[1]) emit(1, e.matmul(a(), g));
      return;
    case OpKind::Transpose:
      emit(0, e.transpose(g));
      return;
    case OpKind::Add:
      if (need[0]) emit(0, g);
      if (need[1]) emit(1, g);
      return;
    case OpKind::Sub:
      if (need[0]) emit(0, g);
      if (need[1]) emit(1, e.neg(g));
      return;
    case OpKind::Mul:
      if (need[0]) emit(0, e.mul(g, b()));
      if (need[1]) emit(1, e.mul(g, a()));
      return;
    case OpKind::Neg:
      emit(0, e.neg(g));
      return;
    case OpKind::Scale:
      emit(0, e.scale(g, n.param));
      return;
    case OpKind::AddScalar:
    case OpKind::AddIdentity:
      emit(0, g);
      return;
    case OpKind::Sigmoid: {
      V y = e.output(self);
      emit(0, e.mul(g, e.sub(y, e.mul(y, y))));
      return;
    }
    case OpKind::Relu:
      emit(0, e.mul(g, e.constant(kernels::indicator_greater(E::val(a()), 0.0))));
      return;
    case OpKind::ClampMin:
      emit(0, e.mul(g, e.constant(kernels::indicator_greater(E::val(a()), n.param))));
      return;
    case OpKind::Ln:
      emit(0, e.mul(g, e.pow(a(), -1.0)));
      return;
    case OpKind::Exp:
      emit(0, e.mul(g, e.output(self)));
      return;
    case OpKind::Pow:
      emit(0, e.mul(g, e.scale(e.pow(a(), n.param - 1.0), n.param)));
      return;
    case OpKind::SoftmaxRows: {
      V y = e.output(self);
      V inner = e.broadcast_cols(e.row_sum(e.mul(g, y)), n.value->cols());
      emit(0, e.mul(y, e.sub(g, inner)));
      return;
    }
    case OpKind::RowSum:
      emit(0, e.broadcast_cols(g, n.cols));
      return;
    case OpKind::BroadcastCols:
      emit(0, e.row_sum(g));
      return;
    case OpKind::Sum:
      emit(0, e.fill(g, n.rows, n.cols));
      return;
    case OpKind::Fill:
      emit(0, e.sum(g));
      return;
    case OpKind::Pick:
      emit(0, e.place(g, n.rows, n.cols, n.i0, n.i1));
      return;
    case OpKind::Place:
      emit(0, e.pick(g, n.i0, n.i1));
      return;
    case OpKind::SelectRow:
      emit(0, e.place_row(g, n.rows, n.i0));
      return;
    case OpKind::PlaceRow:
      emit(0, e.select_row(g, n.i0));
      return;
    case OpKind::Symmetrize:
      emit(0, e.symmetrize(g));
      return;
    case OpKind::DiagScale: {
      V s = b();
      if (need[0]) emit(0, e.diag_scale(g, s));
      if (need[1]) {
        V p = e.mul(g, a());
        emit(1, e.add(e.matmul(p, s), e.matmul_tn(p, s)));
      }
      return;
    }
  }
}

template <class E>
std::vector<typename E::V> run_reverse(E& e, const Tape& tape, const DiffValue& output,
                                       std::span<const DiffValue> wrt) {
  using V = typename E::V;
  if (!output.value().is_scalar()) {
    throw ShapeError("gradient: output must be a 1x1 scalar, got " + shape_string(output.value()));
  }
  const std::uint32_t top = output.id();
  std::vector<std::optional<V>> adj(static_cast<std::size_t>(top) + 1);
  std::vector<char> keep(adj.size(), 0);
  for (const DiffValue& w : wrt) {
    if (&w.tape() != &tape) throw std::invalid_argument("gradient: wrt value from another tape");
    if (w.id() <= top) keep[w.id()] = 1;
  }
  adj[top] = e.constant(DenseMatrix::scalar(1.0));

  for (std::uint32_t id = top + 1; id-- > 0;) {
    if (!adj[id]) continue;
    // Copy: graph-retaining rules append to the tape and may reallocate it.
    const Tape::Node n = tape.node(id);
    if (n.op != OpKind::Leaf && n.requires_grad) {
      const V g = *adj[id];
      bool need[2] = {false, false};
      for (int k = 0; k < n.arity; ++k) need[k] = tape.node(n.in[k]).requires_grad;
      reverse_rule(e, n, id, g, need, [&](int k, V contribution) {
        auto& slot = adj[n.in[k]];
        if (slot) {
          slot = e.add(*slot, contribution);
        } else {
          slot = std::move(contribution);
        }
      });
    }
    if (!keep[id]) adj[id].reset();
  }

  std::vector<V> result;
  result.reserve(wrt.size());
  for (const DiffValue& w : wrt) {
    if (w.id() <= top && adj[w.id()]) {
      result.push_back(*adj[w.id()]);
    } else {
      const DenseMatrix& v = w.value();
      result.push_back(e.constant(DenseMatrix(v.rows(), v.cols())));
    }
  }
  return result;
}

}  // namespace

std::vector<DiffValue> Tape::gradient(const DiffValue& output, std::span<const DiffValue> wrt) {
  if (&output.tape() != this) throw std::invalid_argument("gradient: output from another tape");
  GraphEngine e{*this};
  return run_reverse(e, *this, output, wrt);
}

std::vector<DenseMatrix> Tape::gradient_values(const DiffValue& output,
                                               std::span<const DiffValue> wrt) const {
  if (&output.tape() != this) throw std::invalid_argument("gradient: output from another tape");
  ValueEngine e{*this};
  auto grads = run_reverse(e, *this, output, wrt);
  std::vector<DenseMatrix> out;
  out.reserve(grads.size());
  for (auto& g : grads) out.push_back(*g);
  return out;
}

}  // namespace geattack::ad
