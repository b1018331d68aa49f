#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "oolib/tensor.hpp"

namespace oolib {

struct NotScalarLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reverse-mode tape. Nodes are appended in forward order, so ids are already
// a topological order; backward() walks them once in reverse, which makes
// gradient accumulation order (and therefore the result bits) deterministic.
class Tape {
 public:
  using Id = std::int32_t;

  explicit Tape(bool check_finite = false) : check_finite_(check_finite) {}

  Id leaf(Tensor value);      // differentiable input
  Id constant(Tensor value);  // non-differentiable input

  Id matmul(Id a, Id b);
  Id transpose(Id a);
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id scalar_mul(Id a, double s);
  Id add_rowvec(Id m, Id v);
  Id concat_rows(Id a, Id b);
  Id concat_rows_many(const std::vector<Id>& parts);
  Id concat_cols(Id a, Id b);
  Id slice_rows(Id a, int lo, int hi);
  Id gather_rows(Id a, std::shared_ptr<const std::vector<int>> idx);
  Id scatter_add_rows(Id a, std::shared_ptr<const std::vector<int>> idx, int out_rows);
  Id relu(Id a);  // also serves as the hinge max(0, .)
  Id layernorm_rows(Id a);
  Id softmax_rows(Id a);
  Id sum_all(Id a);
  Id mean_all(Id a);
  Id squared_distance(Id a, Id b);
  Id stop_gradient(Id a);

  const Tensor& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Exact reverse-mode gradients of a scalar loss; may be called once per tape.
  void backward(Id loss);
  const Tensor& grad(Id id) const;

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Const,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    ScalarMul,
    AddRowVec,
    ConcatRows,
    ConcatRowsMany,
    ConcatCols,
    SliceRows,
    GatherRows,
    ScatterAddRows,
    Relu,
    LayerNormRows,
    SoftmaxRows,
    SumAll,
    MeanAll,
    SquaredDistance,
    StopGradient,
  };

  struct Node {
    Op op = Op::Leaf;
    Tensor value;
    Id a = -1;
    Id b = -1;
    double scalar = 0.0;
    int lo = 0;
    int hi = 0;
    std::shared_ptr<const std::vector<int>> idx;
    std::vector<Id> many;
    Tensor grad;
    bool needs_grad = false;
    bool grad_ready = false;
  };

  Id push(Node node);
  bool needs(Id id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; }
  void add_grad(Id id, const Tensor& g);

  std::vector<Node> nodes_;
  bool check_finite_ = false;
  bool backward_done_ = false;
};

}  // namespace oolib
