#include "oolib/optim.hpp"

#include <algorithm>
#include <cmath>

namespace oolib {

int ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("unknown parameter " + name);
}

std::int64_t ParamSet::total_elems() const {
  std::int64_t n = 0;
  for (const Tensor& t : values) n += t.numel();
  return n;
}

AdamState AdamState::init(const ParamSet& params, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  s.m.reserve(params.values.size());
  s.v.reserve(params.values.size());
  for (const Tensor& t : params.values) {
    s.m.push_back(Tensor::zeros(t.rows, t.cols));
    s.v.push_back(Tensor::zeros(t.rows, t.cols));
  }
  return s;
}

void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state) {
  if (grads.size() != params.values.size()) {
    throw ShapeMismatch("gradient count differs from parameter count");
  }
  ++state.step;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.values.size(); ++p) {
    Tensor& w = params.values[p];
    const Tensor& g = grads[p];
    if (g.numel() == 0) continue;  // no gradient reached this parameter
    if (!g.same_shape(w)) throw ShapeMismatch("gradient shape differs from parameter");
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      m.data[i] = b1 * m.data[i] + (1.0 - b1) * g.data[i];
      v.data[i] = b2 * v.data[i] + (1.0 - b2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      w.data[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

GradCheckReport grad_check(const std::function<double(const ParamSet&)>& value_fn,
                           const std::vector<Tensor>& analytic, const ParamSet& params,
                           double h, double tol) {
  GradCheckReport report;
  ParamSet probe = params;
  for (std::size_t p = 0; p < params.values.size(); ++p) {
    const Tensor& grad = analytic[p];
    for (std::size_t i = 0; i < params.values[p].data.size(); ++i) {
      const double saved = probe.values[p].data[i];
      probe.values[p].data[i] = saved + h;
      const double up = value_fn(probe);
      probe.values[p].data[i] = saved - h;
      const double down = value_fn(probe);
      probe.values[p].data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grad.numel() == 0 ? 0.0 : grad.data[i];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      report.max_rel_err = std::max(report.max_rel_err, rel);
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace oolib
