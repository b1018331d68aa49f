#include "oolib/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace oolib {

double Tensor::item() const {
  if (numel() != 1) throw ShapeMismatch("item() on a non-scalar tensor");
  return data[0];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows) throw ShapeMismatch("matmul inner dimensions differ");
  Tensor out(a.rows, b.cols);
  const int n = a.rows, k = a.cols, m = b.cols;
  for (int i = 0; i < n; ++i) {
    const double* arow = a.data.data() + static_cast<std::size_t>(i) * k;
    double* orow = out.data.data() + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data.data() + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

namespace {
void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeMismatch(what);
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add shapes differ");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub shapes differ");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul shapes differ");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scalar_mul(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.data) v *= s;
  return out;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  if (v.rows != 1 || v.cols != m.cols) throw ShapeMismatch("row vector width differs");
  Tensor out = m;
  for (int i = 0; i < m.rows; ++i) {
    double* row = out.data.data() + static_cast<std::size_t>(i) * m.cols;
    for (int j = 0; j < m.cols; ++j) row[j] += v.data[static_cast<std::size_t>(j)];
  }
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.cols != b.cols) throw ShapeMismatch("concat_rows widths differ");
  Tensor out(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows) throw ShapeMismatch("concat_cols heights differ");
  Tensor out(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    std::copy(a.data.begin() + static_cast<std::size_t>(i) * a.cols,
              a.data.begin() + static_cast<std::size_t>(i + 1) * a.cols,
              out.data.begin() + static_cast<std::size_t>(i) * out.cols);
    std::copy(b.data.begin() + static_cast<std::size_t>(i) * b.cols,
              b.data.begin() + static_cast<std::size_t>(i + 1) * b.cols,
              out.data.begin() + static_cast<std::size_t>(i) * out.cols + a.cols);
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int lo, int hi) {
  if (lo < 0 || hi > a.rows || lo >= hi) throw ShapeMismatch("slice bounds invalid");
  Tensor out(hi - lo, a.cols);
  std::copy(a.data.begin() + static_cast<std::size_t>(lo) * a.cols,
            a.data.begin() + static_cast<std::size_t>(hi) * a.cols, out.data.begin());
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  Tensor out(static_cast<int>(idx.size()), a.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.rows) throw ShapeMismatch("gather index out of range");
    std::copy(a.data.begin() + static_cast<std::size_t>(idx[i]) * a.cols,
              a.data.begin() + static_cast<std::size_t>(idx[i] + 1) * a.cols,
              out.data.begin() + i * static_cast<std::size_t>(a.cols));
  }
  return out;
}

Tensor scatter_add_rows(const Tensor& a, const std::vector<int>& idx, int out_rows) {
  if (static_cast<int>(idx.size()) != a.rows) {
    throw ShapeMismatch("scatter index count differs from rows");
  }
  Tensor out(out_rows, a.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= out_rows) throw ShapeMismatch("scatter index range");
    double* dst = out.data.data() + static_cast<std::size_t>(idx[i]) * a.cols;
    const double* src = a.data.data() + i * static_cast<std::size_t>(a.cols);
    for (int j = 0; j < a.cols; ++j) dst[j] += src[j];
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor layernorm_rows(const Tensor& a, double eps) {
  Tensor out(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* x = a.data.data() + static_cast<std::size_t>(i) * a.cols;
    double* y = out.data.data() + static_cast<std::size_t>(i) * a.cols;
    double mean = 0.0;
    for (int j = 0; j < a.cols; ++j) mean += x[j];
    mean /= a.cols;
    double var = 0.0;
    for (int j = 0; j < a.cols; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= a.cols;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < a.cols; ++j) y[j] = (x[j] - mean) * inv;
  }
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  Tensor out(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* x = a.data.data() + static_cast<std::size_t>(i) * a.cols;
    double* y = out.data.data() + static_cast<std::size_t>(i) * a.cols;
    double mx = x[0];
    for (int j = 1; j < a.cols; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < a.cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (int j = 0; j < a.cols; ++j) y[j] /= sum;
  }
  return out;
}

double squared_distance(const Tensor& a, const Tensor& b) {
  require_same(a, b, "squared_distance shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc;
}

Tensor solve_linear(Tensor a, Tensor b) {
  if (a.rows != a.cols || a.rows != b.rows) throw ShapeMismatch("solve shapes");
  const int n = a.rows;
  const int m = b.cols;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::abs(a.at(col, col));
    for (int r = col + 1; r < n; ++r) {
      const double v = std::abs(a.at(r, col));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-300) throw SingularSystem("pivot vanished during elimination");
    if (pivot != col) {
      for (int j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(pivot, j));
      for (int j = 0; j < m; ++j) std::swap(b.at(col, j), b.at(pivot, j));
    }
    const double inv = 1.0 / a.at(col, col);
    for (int r = col + 1; r < n; ++r) {
      const double f = a.at(r, col) * inv;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
      for (int j = 0; j < m; ++j) b.at(r, j) -= f * b.at(col, j);
    }
  }
  Tensor x(n, m);
  for (int r = n - 1; r >= 0; --r) {
    for (int j = 0; j < m; ++j) {
      double acc = b.at(r, j);
      for (int c = r + 1; c < n; ++c) acc -= a.at(r, c) * x.at(c, j);
      x.at(r, j) = acc / a.at(r, r);
    }
  }
  return x;
}

Tensor ridged_pinv(const Tensor& m, double eps) {
  const Tensor mt = transpose(m);
  Tensor gram = matmul(m, mt);
  for (int i = 0; i < gram.rows; ++i) gram.at(i, i) += eps;
  // M^T G^{-1} = (G^{-1} M)^T since G is symmetric
  return transpose(solve_linear(gram, m));
}

}  // namespace oolib
