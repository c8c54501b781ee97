#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "geattack/autodiff/dense_matrix.hpp"

namespace geattack::ad {

class Tape;

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  MatMulNT,
  MatMulTN,
  Transpose,
  Add,
  Sub,
  Mul,
  Neg,
  Scale,
  AddScalar,
  Sigmoid,
  Relu,
  Ln,
  Exp,
  Pow,
  ClampMin,
  SoftmaxRows,
  RowSum,
  BroadcastCols,
  Sum,
  Fill,
  Pick,
  Place,
  SelectRow,
  PlaceRow,
  Symmetrize,
  AddIdentity,
  DiagScale,
};

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning Tape is alive.
class DiffValue {
 public:
  DiffValue() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape& tape() const;
  std::uint32_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  DiffValue(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// A recording session. Operations on DiffValues append nodes in creation
/// order, which is a topological order of the computation; gradient passes
/// walk it backwards. Gradient passes that retain the graph record their
/// reverse rules as ordinary operations, so their results can be
/// differentiated again.
///
/// Single owner: a Tape must not be shared between threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  DiffValue constant(DenseMatrix value);
  DiffValue constant(std::shared_ptr<const DenseMatrix> value);
  DiffValue variable(DenseMatrix value);

  /// Reverse-mode gradient of a scalar output, recorded on this tape so the
  /// result is itself differentiable.
  std::vector<DiffValue> gradient(const DiffValue& output, std::span<const DiffValue> wrt);

  /// Reverse-mode gradient of a scalar output as plain matrices. Nothing is
  /// recorded and intermediate adjoints are released as soon as they are
  /// consumed.
  std::vector<DenseMatrix> gradient_values(const DiffValue& output,
                                           std::span<const DiffValue> wrt) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  struct Node {
    std::shared_ptr<const DenseMatrix> value;
    OpKind op = OpKind::Leaf;
    std::uint8_t arity = 0;
    bool requires_grad = false;
    std::uint32_t in[2] = {0, 0};
    double param = 0.0;
    // Index/shape payload for pick, place, select_row, place_row, fill and
    // broadcast_cols.
    std::size_t i0 = 0, i1 = 0, rows = 0, cols = 0;
  };

  /// Low-level recording hook used by the operation functions.
  DiffValue record(Node node);
  const Node& node(std::uint32_t id) const { return nodes_[id]; }
  DiffValue handle(std::uint32_t id) { return DiffValue(this, id); }

 private:
  std::vector<Node> nodes_;
};

}  // namespace geattack::ad
