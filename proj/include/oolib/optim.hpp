#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oolib/tensor.hpp"

namespace oolib {

// Named, ordered parameter collection. The order is the checkpoint order.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor> values;

  int add(const std::string& name, Tensor value) {
    names.push_back(name);
    values.push_back(std::move(value));
    return static_cast<int>(values.size() - 1);
  }
  int find(const std::string& name) const;
  Tensor& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  const Tensor& operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(values.size()); }
  std::int64_t total_elems() const;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState init(const ParamSet& params, AdamConfig cfg = {});
};

// Standard Adam update with bias correction. grads must be parallel to
// params (missing gradients may be empty tensors and are treated as zero).
void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state);

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central-difference check of analytic gradients: for every parameter
// element, |analytic - numeric| / max(1, |analytic|) must stay within tol.
GradCheckReport grad_check(const std::function<double(const ParamSet&)>& value_fn,
                           const std::vector<Tensor>& analytic, const ParamSet& params,
                           double h, double tol);

}  // namespace oolib
