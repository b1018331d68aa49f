#pragma once

#include <memory>
#include <string>

#include "oolib/optim.hpp"
#include "oolib/tape.hpp"

// Shared building blocks for the learned models: parameter registration,
// the 2-layer MLP (linear, relu, layernorm, linear), and the batched
// fully-connected message-passing step. Weight sharing across rows/pairs is
// what makes every model built from these blocks permutation equivariant.
namespace oolib::nn {

struct Mlp {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

inline Tensor init_weight(Rng& rng, int rows, int cols) {
  Tensor t(rows, cols);
  const double scale = std::sqrt(2.0 / rows);
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

inline Mlp add_mlp(ParamSet& params, const std::string& prefix, int in, int hidden,
                   int out, Rng& rng) {
  Mlp m;
  m.w1 = params.add(prefix + ".w1", init_weight(rng, in, hidden));
  m.b1 = params.add(prefix + ".b1", Tensor::zeros(1, hidden));
  m.w2 = params.add(prefix + ".w2", init_weight(rng, hidden, out));
  m.b2 = params.add(prefix + ".b2", Tensor::zeros(1, out));
  return m;
}

struct MlpIds {
  Tape::Id w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

// Registers the MLP's parameters as tape leaves, mirroring them into
// param_ids at their ParamSet positions.
inline MlpIds mlp_leaves(Tape& tape, const ParamSet& params, const Mlp& m,
                         std::vector<Tape::Id>& param_ids) {
  MlpIds ids;
  ids.w1 = param_ids[static_cast<std::size_t>(m.w1)] = tape.leaf(params[m.w1]);
  ids.b1 = param_ids[static_cast<std::size_t>(m.b1)] = tape.leaf(params[m.b1]);
  ids.w2 = param_ids[static_cast<std::size_t>(m.w2)] = tape.leaf(params[m.w2]);
  ids.b2 = param_ids[static_cast<std::size_t>(m.b2)] = tape.leaf(params[m.b2]);
  return ids;
}

// layer_norm_output: normalized embedding rows (encoders) vs mid-network
// normalization (edge/node nets, whose outputs feed residual updates).
inline Tape::Id mlp_forward(Tape& tape, const MlpIds& m, Tape::Id x,
                            bool layer_norm_output = false) {
  auto h = tape.relu(tape.add_rowvec(tape.matmul(x, m.w1), m.b1));
  if (!layer_norm_output) h = tape.layernorm_rows(h);
  auto out = tape.add_rowvec(tape.matmul(h, m.w2), m.b2);
  if (layer_norm_output) out = tape.layernorm_rows(out);
  return out;
}

struct PairIndices {
  std::shared_ptr<const std::vector<int>> left;
  std::shared_ptr<const std::vector<int>> right;
  std::shared_ptr<const std::vector<int>> dest;
};

// Ordered pairs (i, j), i != j, within each of `batch` blocks of n rows.
inline PairIndices pair_indices(int batch, int n) {
  auto left = std::make_shared<std::vector<int>>();
  auto right = std::make_shared<std::vector<int>>();
  auto dest = std::make_shared<std::vector<int>>();
  left->reserve(static_cast<std::size_t>(batch) * n * (n - 1));
  right->reserve(left->capacity());
  dest->reserve(left->capacity());
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        left->push_back(b * n + i);
        right->push_back(b * n + j);
        dest->push_back(b * n + i);
      }
    }
  }
  return PairIndices{std::move(left), std::move(right), std::move(dest)};
}

// One residual message-passing step over `batch` stacked graphs of n nodes:
//   msg_i = sum_{j != i} edge([s_i || s_j]);  out_i = s_i + node([s_i || a_i || msg_i])
inline Tape::Id gnn_forward(Tape& tape, const MlpIds& edge, const MlpIds& node,
                            Tape::Id s, Tape::Id a, int batch, int n) {
  const PairIndices idx = pair_indices(batch, n);
  const auto pair_input =
      tape.concat_cols(tape.gather_rows(s, idx.left), tape.gather_rows(s, idx.right));
  const auto messages = tape.scatter_add_rows(mlp_forward(tape, edge, pair_input),
                                              idx.dest, batch * n);
  const auto node_input = tape.concat_cols(s, tape.concat_cols(a, messages));
  return tape.add(s, mlp_forward(tape, node, node_input));
}

struct Mlp3 {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1;
};

inline Mlp3 add_mlp3(ParamSet& params, const std::string& prefix, int in, int hidden,
                     int out, Rng& rng) {
  Mlp3 m;
  m.w1 = params.add(prefix + ".w1", init_weight(rng, in, hidden));
  m.b1 = params.add(prefix + ".b1", Tensor::zeros(1, hidden));
  m.w2 = params.add(prefix + ".w2", init_weight(rng, hidden, hidden));
  m.b2 = params.add(prefix + ".b2", Tensor::zeros(1, hidden));
  m.w3 = params.add(prefix + ".w3", init_weight(rng, hidden, out));
  m.b3 = params.add(prefix + ".b3", Tensor::zeros(1, out));
  return m;
}

struct Mlp3Ids {
  Tape::Id w1 = -1, b1 = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1;
};

inline Mlp3Ids mlp3_leaves(Tape& tape, const ParamSet& params, const Mlp3& m,
                           std::vector<Tape::Id>& param_ids) {
  Mlp3Ids ids;
  ids.w1 = param_ids[static_cast<std::size_t>(m.w1)] = tape.leaf(params[m.w1]);
  ids.b1 = param_ids[static_cast<std::size_t>(m.b1)] = tape.leaf(params[m.b1]);
  ids.w2 = param_ids[static_cast<std::size_t>(m.w2)] = tape.leaf(params[m.w2]);
  ids.b2 = param_ids[static_cast<std::size_t>(m.b2)] = tape.leaf(params[m.b2]);
  ids.w3 = param_ids[static_cast<std::size_t>(m.w3)] = tape.leaf(params[m.w3]);
  ids.b3 = param_ids[static_cast<std::size_t>(m.b3)] = tape.leaf(params[m.b3]);
  return ids;
}

inline Tape::Id mlp3_forward(Tape& tape, const Mlp3Ids& m, Tape::Id x) {
  auto h = tape.relu(tape.add_rowvec(tape.matmul(x, m.w1), m.b1));
  h = tape.relu(tape.add_rowvec(tape.matmul(h, m.w2), m.b2));
  return tape.add_rowvec(tape.matmul(h, m.w3), m.b3);
}

}  // namespace oolib::nn
