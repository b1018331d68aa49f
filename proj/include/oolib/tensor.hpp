#pragma once

#include <cstdint>
#include <vector>

#include "oolib/common.hpp"

namespace oolib {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major 2-D array of 64-bit floats. Scalars are 1x1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double v) {
    Tensor t(r, c);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor row(const std::vector<double>& v) {
    Tensor t(1, static_cast<int>(v.size()));
    t.data = v;
    return t;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(rows) * cols; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double item() const;
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
};

// Value-space operations (shared by tape forwards, inference, and oracles).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor add_rowvec(const Tensor& m, const Tensor& v);  // v is 1 x cols
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, int lo, int hi);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
Tensor scatter_add_rows(const Tensor& a, const std::vector<int>& idx, int out_rows);
Tensor relu(const Tensor& a);
Tensor layernorm_rows(const Tensor& a, double eps = 1e-5);
Tensor softmax_rows(const Tensor& a);
double squared_distance(const Tensor& a, const Tensor& b);

// Gaussian elimination with partial pivoting on a square system; throws
// SingularSystem when a pivot vanishes.
Tensor solve_linear(Tensor a, Tensor b);

// Ridged right pseudoinverse M+ = M^T (M M^T + eps I)^{-1}.
Tensor ridged_pinv(const Tensor& m, double eps);

}  // namespace oolib
