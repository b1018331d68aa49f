#include "oolib/tape.hpp"

#include <cmath>

namespace oolib {

Tape::Id Tape::push(Node node) {
  if (check_finite_ && !node.value.all_finite()) {
    throw NonFinite("non-finite value produced on the tape");
  }
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Tape::Id Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(value);
  n.needs_grad = false;
  return push(std::move(n));
}

#define OOLIB_BINARY(NAME, OPK, EXPR)                                   \
  Tape::Id Tape::NAME(Id a, Id b) {                                    \
    Node n;                                                             \
    n.op = Op::OPK;                                                     \
    n.a = a;                                                            \
    n.b = b;                                                            \
    n.value = EXPR(value(a), value(b));                                 \
    n.needs_grad = needs(a) || needs(b);                                \
    return push(std::move(n));                                          \
  }

OOLIB_BINARY(matmul, MatMul, oolib::matmul)
OOLIB_BINARY(add, Add, oolib::add)
OOLIB_BINARY(sub, Sub, oolib::sub)
OOLIB_BINARY(mul, Mul, oolib::mul)
OOLIB_BINARY(add_rowvec, AddRowVec, oolib::add_rowvec)
OOLIB_BINARY(concat_rows, ConcatRows, oolib::concat_rows)
OOLIB_BINARY(concat_cols, ConcatCols, oolib::concat_cols)
#undef OOLIB_BINARY

Tape::Id Tape::concat_rows_many(const std::vector<Id>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat of zero parts");
  Node n;
  n.op = Op::ConcatRowsMany;
  n.many = parts;
  int total = 0;
  const int cols = value(parts[0]).cols;
  for (Id p : parts) {
    if (value(p).cols != cols) throw ShapeMismatch("concat widths differ");
    total += value(p).rows;
    n.needs_grad = n.needs_grad || needs(p);
  }
  Tensor out(total, cols);
  double* dst = out.data.data();
  for (Id p : parts) {
    const Tensor& v = value(p);
    std::copy(v.data.begin(), v.data.end(), dst);
    dst += v.data.size();
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::transpose(Id a) {
  Node n;
  n.op = Op::Transpose;
  n.a = a;
  n.value = oolib::transpose(value(a));
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::scalar_mul(Id a, double s) {
  Node n;
  n.op = Op::ScalarMul;
  n.a = a;
  n.scalar = s;
  n.value = oolib::scalar_mul(value(a), s);
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::slice_rows(Id a, int lo, int hi) {
  Node n;
  n.op = Op::SliceRows;
  n.a = a;
  n.lo = lo;
  n.hi = hi;
  n.value = oolib::slice_rows(value(a), lo, hi);
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::gather_rows(Id a, std::shared_ptr<const std::vector<int>> idx) {
  Node n;
  n.op = Op::GatherRows;
  n.a = a;
  n.value = oolib::gather_rows(value(a), *idx);
  n.idx = std::move(idx);
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::scatter_add_rows(Id a, std::shared_ptr<const std::vector<int>> idx,
                                int out_rows) {
  Node n;
  n.op = Op::ScatterAddRows;
  n.a = a;
  n.lo = out_rows;
  n.value = oolib::scatter_add_rows(value(a), *idx, out_rows);
  n.idx = std::move(idx);
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
  Node n;
  n.op = Op::Relu;
  n.a = a;
  n.value = oolib::relu(value(a));
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::layernorm_rows(Id a) {
  Node n;
  n.op = Op::LayerNormRows;
  n.a = a;
  n.value = oolib::layernorm_rows(value(a));
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::softmax_rows(Id a) {
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = a;
  n.value = oolib::softmax_rows(value(a));
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::sum_all(Id a) {
  Node n;
  n.op = Op::SumAll;
  n.a = a;
  double acc = 0.0;
  for (double v : value(a).data) acc += v;
  n.value = Tensor::scalar(acc);
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::mean_all(Id a) {
  Node n;
  n.op = Op::MeanAll;
  n.a = a;
  double acc = 0.0;
  for (double v : value(a).data) acc += v;
  n.value = Tensor::scalar(acc / static_cast<double>(value(a).numel()));
  n.needs_grad = needs(a);
  return push(std::move(n));
}

Tape::Id Tape::squared_distance(Id a, Id b) {
  Node n;
  n.op = Op::SquaredDistance;
  n.a = a;
  n.b = b;
  n.value = Tensor::scalar(oolib::squared_distance(value(a), value(b)));
  n.needs_grad = needs(a) || needs(b);
  return push(std::move(n));
}

Tape::Id Tape::stop_gradient(Id a) {
  Node n;
  n.op = Op::StopGradient;
  n.a = a;
  n.value = value(a);
  n.needs_grad = false;  // identity forward, zero pullback
  return push(std::move(n));
}

void Tape::add_grad(Id id, const Tensor& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return;
  if (!n.grad_ready) {
    n.grad = Tensor::zeros(n.value.rows, n.value.cols);
    n.grad_ready = true;
  }
  for (std::size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
}

const Tensor& Tape::grad(Id id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  static const Tensor kEmpty;
  if (!n.grad_ready) return kEmpty;
  return n.grad;
}

void Tape::backward(Id loss) {
  if (backward_done_) throw NumericError("backward may run once per tape");
  backward_done_ = true;
  Node& top = nodes_[static_cast<std::size_t>(loss)];
  if (top.value.numel() != 1) throw NotScalarLoss("loss node is not a scalar");
  add_grad(loss, Tensor::scalar(1.0));

  for (Id id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || !n.grad_ready) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
      case Op::StopGradient:
        break;
      case Op::MatMul: {
        const Tensor& a = value(n.a);
        const Tensor& b = value(n.b);
        if (needs(n.a)) {
          // dA[i][p] = sum_j g[i][j] * B[p][j]
          Tensor da(a.rows, a.cols);
          for (int i = 0; i < a.rows; ++i) {
            const double* grow = g.data.data() + static_cast<std::size_t>(i) * g.cols;
            double* drow = da.data.data() + static_cast<std::size_t>(i) * a.cols;
            for (int p = 0; p < a.cols; ++p) {
              const double* brow = b.data.data() + static_cast<std::size_t>(p) * b.cols;
              double acc = 0.0;
              for (int j = 0; j < b.cols; ++j) acc += grow[j] * brow[j];
              drow[p] = acc;
            }
          }
          add_grad(n.a, da);
        }
        if (needs(n.b)) {
          // dB[p][j] = sum_i A[i][p] * g[i][j]
          Tensor db(b.rows, b.cols);
          for (int i = 0; i < a.rows; ++i) {
            const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
            const double* grow = g.data.data() + static_cast<std::size_t>(i) * g.cols;
            for (int p = 0; p < a.cols; ++p) {
              const double av = arow[p];
              if (av == 0.0) continue;
              double* drow = db.data.data() + static_cast<std::size_t>(p) * b.cols;
              for (int j = 0; j < b.cols; ++j) drow[j] += av * grow[j];
            }
          }
          add_grad(n.b, db);
        }
        break;
      }
      case Op::Transpose:
        add_grad(n.a, oolib::transpose(g));
        break;
      case Op::Add:
        if (needs(n.a)) add_grad(n.a, g);
        if (needs(n.b)) add_grad(n.b, g);
        break;
      case Op::Sub:
        if (needs(n.a)) add_grad(n.a, g);
        if (needs(n.b)) add_grad(n.b, oolib::scalar_mul(g, -1.0));
        break;
      case Op::Mul:
        if (needs(n.a)) add_grad(n.a, oolib::mul(g, value(n.b)));
        if (needs(n.b)) add_grad(n.b, oolib::mul(g, value(n.a)));
        break;
      case Op::ScalarMul:
        add_grad(n.a, oolib::scalar_mul(g, n.scalar));
        break;
      case Op::AddRowVec: {
        if (needs(n.a)) add_grad(n.a, g);
        if (needs(n.b)) {
          Tensor gv(1, g.cols);
          for (int i = 0; i < g.rows; ++i) {
            for (int j = 0; j < g.cols; ++j) gv.data[static_cast<std::size_t>(j)] += g.at(i, j);
          }
          add_grad(n.b, gv);
        }
        break;
      }
      case Op::ConcatRowsMany: {
        int at = 0;
        for (Id p : n.many) {
          const int rows = value(p).rows;
          if (needs(p)) add_grad(p, oolib::slice_rows(g, at, at + rows));
          at += rows;
        }
        break;
      }
      case Op::ConcatRows: {
        const int ra = value(n.a).rows;
        if (needs(n.a)) add_grad(n.a, oolib::slice_rows(g, 0, ra));
        if (needs(n.b)) add_grad(n.b, oolib::slice_rows(g, ra, g.rows));
        break;
      }
      case Op::ConcatCols: {
        const int ca = value(n.a).cols;
        if (needs(n.a)) {
          Tensor ga(g.rows, ca);
          for (int i = 0; i < g.rows; ++i) {
            for (int j = 0; j < ca; ++j) ga.at(i, j) = g.at(i, j);
          }
          add_grad(n.a, ga);
        }
        if (needs(n.b)) {
          const int cb = value(n.b).cols;
          Tensor gb(g.rows, cb);
          for (int i = 0; i < g.rows; ++i) {
            for (int j = 0; j < cb; ++j) gb.at(i, j) = g.at(i, j + ca);
          }
          add_grad(n.b, gb);
        }
        break;
      }
      case Op::SliceRows: {
        Tensor ga(value(n.a).rows, value(n.a).cols);
        for (int i = n.lo; i < n.hi; ++i) {
          for (int j = 0; j < ga.cols; ++j) ga.at(i, j) = g.at(i - n.lo, j);
        }
        add_grad(n.a, ga);
        break;
      }
      case Op::GatherRows:
        add_grad(n.a, oolib::scatter_add_rows(g, *n.idx, value(n.a).rows));
        break;
      case Op::ScatterAddRows:
        add_grad(n.a, oolib::gather_rows(g, *n.idx));
        break;
      case Op::Relu: {
        Tensor ga = g;
        const Tensor& x = value(n.a);
        for (std::size_t i = 0; i < ga.data.size(); ++i) {
          if (x.data[i] <= 0.0) ga.data[i] = 0.0;
        }
        add_grad(n.a, ga);
        break;
      }
      case Op::LayerNormRows: {
        const Tensor& x = value(n.a);
        const Tensor& y = n.value;
        Tensor ga(x.rows, x.cols);
        for (int i = 0; i < x.rows; ++i) {
          double mean = 0.0, var = 0.0;
          for (int j = 0; j < x.cols; ++j) mean += x.at(i, j);
          mean /= x.cols;
          for (int j = 0; j < x.cols; ++j) {
            var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
          }
          var /= x.cols;
          const double inv = 1.0 / std::sqrt(var + 1e-5);
          double g_mean = 0.0, gy_mean = 0.0;
          for (int j = 0; j < x.cols; ++j) {
            g_mean += g.at(i, j);
            gy_mean += g.at(i, j) * y.at(i, j);
          }
          g_mean /= x.cols;
          gy_mean /= x.cols;
          for (int j = 0; j < x.cols; ++j) {
            ga.at(i, j) = inv * (g.at(i, j) - g_mean - y.at(i, j) * gy_mean);
          }
        }
        add_grad(n.a, ga);
        break;
      }
      case Op::SoftmaxRows: {
        const Tensor& y = n.value;
        Tensor ga(y.rows, y.cols);
        for (int i = 0; i < y.rows; ++i) {
          double dot = 0.0;
          for (int j = 0; j < y.cols; ++j) dot += g.at(i, j) * y.at(i, j);
          for (int j = 0; j < y.cols; ++j) {
            ga.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
          }
        }
        add_grad(n.a, ga);
        break;
      }
      case Op::SumAll:
        add_grad(n.a, Tensor::full(value(n.a).rows, value(n.a).cols, g.item()));
        break;
      case Op::MeanAll:
        add_grad(n.a, Tensor::full(value(n.a).rows, value(n.a).cols,
                                   g.item() / static_cast<double>(value(n.a).numel())));
        break;
      case Op::SquaredDistance: {
        const double s = 2.0 * g.item();
        if (needs(n.a)) add_grad(n.a, oolib::scalar_mul(oolib::sub(value(n.a), value(n.b)), s));
        if (needs(n.b)) add_grad(n.b, oolib::scalar_mul(oolib::sub(value(n.b), value(n.a)), s));
        break;
      }
    }
  }
}

}  // namespace oolib
