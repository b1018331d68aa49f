#include "oolib/baselines.hpp"

#include "nn_internal.hpp"

namespace oolib {

// ---------------------------------------------------------------------------
// BaselineGnnModel
// ---------------------------------------------------------------------------

struct BaselineGnnModel::Blocks {
  nn::Mlp enc;
  nn::Mlp edge;
  nn::Mlp node;
};

BaselineGnnModel::BaselineGnnModel(ModelKind kind, EnvSpec env, Hyper hyper,
                                   std::vector<Scene> train_scenes,
                                   std::uint64_t init_seed)
    : kind_(kind), env_(env), hyper_(hyper), train_scenes_(std::move(train_scenes)) {
  if (kind != ModelKind::ExactSigmaN && kind != ModelKind::SigmaKNoBind &&
      kind != ModelKind::SigmaKCopyAll) {
    throw ConfigError("not a GNN baseline kind");
  }
  for (const Scene& s : train_scenes_) train_keys_.insert(scene_key(s));
  const Library lib = env_.make_library();
  const int d = hyper_.d_slot;
  Rng rng(derive_seed(init_seed, 0x402));
  auto blocks = std::make_shared<Blocks>();
  blocks->enc = nn::add_mlp(params_, "enc", lib.feature_dim(), hyper_.hidden, d, rng);
  blocks->edge = nn::add_mlp(params_, "edge", 2 * d, hyper_.hidden, d, rng);
  blocks->node = nn::add_mlp(params_, "node", d + action_dim() + d, hyper_.hidden, d, rng);
  blocks_ = std::move(blocks);
}

bool BaselineGnnModel::scene_seen(const Scene& scene) const {
  return train_keys_.count(scene_key(scene)) != 0;
}

Tensor BaselineGnnModel::layout(const Observation& obs, const Scene& scene) const {
  if (kind_ == ModelKind::ExactSigmaN) return layout_rows_by_id(obs, env_.n);
  return layout_rows_in_order(obs, sigma_k_layout_order(scene, scene_seen(scene)));
}

Tensor BaselineGnnModel::action_rows(const ActionId& a, const Scene& scene) const {
  switch (kind_) {
    case ModelKind::ExactSigmaN:
      return action_matrix_by_id(a, env_.n);
    case ModelKind::SigmaKNoBind:
      return action_matrix_by_rank(a, scene);
    default:
      return action_rows_copy_all(a, env_.n, env_.k);
  }
}

LossGraph BaselineGnnModel::build_loss(Tape& tape,
                                       const std::vector<TransitionSample>& batch) const {
  const int b = static_cast<int>(batch.size());
  const int r = rows();

  LossGraph graph;
  graph.param_ids.assign(static_cast<std::size_t>(params_.size()), -1);
  const nn::MlpIds enc = nn::mlp_leaves(tape, params_, blocks_->enc, graph.param_ids);
  const nn::MlpIds edge = nn::mlp_leaves(tape, params_, blocks_->edge, graph.param_ids);
  const nn::MlpIds node = nn::mlp_leaves(tape, params_, blocks_->node, graph.param_ids);

  const auto stack = [&](const std::function<Tensor(const TransitionSample&)>& fn) {
    std::vector<Tensor> parts;
    parts.reserve(static_cast<std::size_t>(b));
    for (const TransitionSample& s : batch) parts.push_back(fn(s));
    Tensor out(static_cast<int>(parts.size()) * parts[0].rows, parts[0].cols);
    double* dst = out.data.data();
    for (const Tensor& p : parts) {
      std::copy(p.data.begin(), p.data.end(), dst);
      dst += p.data.size();
    }
    return out;
  };

  const auto z_t = nn::mlp_forward(
      tape, enc,
      tape.constant(stack([&](const TransitionSample& s) { return layout(*s.obs_t, *s.scene); })),
      /*layer_norm_output=*/true);
  const auto z_t1 = nn::mlp_forward(
      tape, enc,
      tape.constant(stack([&](const TransitionSample& s) { return layout(*s.obs_t1, *s.scene); })),
      /*layer_norm_output=*/true);
  const auto z_neg = nn::mlp_forward(
      tape, enc,
      tape.constant(stack(
          [&](const TransitionSample& s) { return layout(*s.obs_neg, *s.scene_neg); })),
      /*layer_norm_output=*/true);
  const auto actions = tape.constant(
      stack([&](const TransitionSample& s) { return action_rows(s.action, *s.scene); }));

  const auto pred = nn::gnn_forward(tape, edge, node, z_t, actions, b, r);

  const double inv_rows = 1.0 / static_cast<double>(r);
  const auto margin = tape.constant(Tensor::scalar(hyper_.margin));
  Tape::Id total = tape.constant(Tensor::scalar(0.0));
  for (int i = 0; i < b; ++i) {
    const auto pred_i = tape.slice_rows(pred, i * r, (i + 1) * r);
    const auto tgt_i = tape.slice_rows(z_t1, i * r, (i + 1) * r);
    const auto neg_i = tape.slice_rows(z_neg, i * r, (i + 1) * r);
    const auto positive = tape.scalar_mul(tape.squared_distance(tgt_i, pred_i), inv_rows);
    const auto neg_dist = tape.scalar_mul(tape.squared_distance(neg_i, tgt_i), inv_rows);
    const auto hinge = tape.relu(tape.sub(margin, neg_dist));
    total = tape.add(total, tape.add(positive, hinge));
  }
  graph.loss = tape.scalar_mul(total, 1.0 / static_cast<double>(b));
  return graph;
}

Tensor BaselineGnnModel::encode_rows(const Tensor& features) const {
  Tape tape;
  std::vector<Tape::Id> scratch(static_cast<std::size_t>(params_.size()), -1);
  const nn::MlpIds enc = nn::mlp_leaves(tape, params_, blocks_->enc, scratch);
  return tape.value(nn::mlp_forward(tape, enc, tape.constant(features),
                                    /*layer_norm_output=*/true));
}

Tensor BaselineGnnModel::transition_rows(const Tensor& state, const Tensor& action) const {
  Tape tape;
  std::vector<Tape::Id> scratch(static_cast<std::size_t>(params_.size()), -1);
  const nn::MlpIds edge = nn::mlp_leaves(tape, params_, blocks_->edge, scratch);
  const nn::MlpIds node = nn::mlp_leaves(tape, params_, blocks_->node, scratch);
  return tape.value(nn::gnn_forward(tape, edge, node, tape.constant(state),
                                    tape.constant(action), 1, state.rows));
}

Tensor BaselineGnnModel::embed(const Observation& obs, const Scene& scene) const {
  return encode_rows(layout(obs, scene));
}

std::vector<Tensor> BaselineGnnModel::rollout(const Observation& obs_t, const Scene& scene,
                                              const std::vector<ActionId>& actions) const {
  Tensor z = embed(obs_t, scene);
  std::vector<Tensor> out;
  out.reserve(actions.size());
  for (const ActionId& a : actions) {
    z = transition_rows(z, action_rows(a, scene));
    out.push_back(z);
  }
  return out;
}

// ---------------------------------------------------------------------------
// FlatMlpModel
// ---------------------------------------------------------------------------

struct FlatMlpModel::Blocks {
  nn::Mlp3 enc;
  nn::Mlp3 trans;
};

FlatMlpModel::FlatMlpModel(EnvSpec env, Hyper hyper, std::vector<Scene> train_scenes,
                           std::uint64_t init_seed)
    : env_(env), hyper_(hyper), train_scenes_(std::move(train_scenes)) {
  const Library lib = env_.make_library();
  const int flat_in = env_.n * lib.feature_dim();
  const int flat_d = env_.n * hyper_.d_slot;
  const int hidden = hyper_.flat_hidden;
  Rng rng(derive_seed(init_seed, 0x403));
  auto blocks = std::make_shared<Blocks>();
  blocks->enc = nn::add_mlp3(params_, "enc", flat_in, hidden, flat_d, rng);
  blocks->trans = nn::add_mlp3(params_, "trans", flat_d + 4 * env_.n, hidden, flat_d, rng);
  blocks_ = std::move(blocks);
}

namespace {

Tensor flatten(const Tensor& t) {
  Tensor out(1, static_cast<int>(t.numel()));
  out.data = t.data;
  return out;
}

Tensor unflatten_rows(const Tensor& t, int rows) {
  Tensor out(rows, static_cast<int>(t.numel()) / rows);
  out.data = t.data;
  return out;
}

}  // namespace

LossGraph FlatMlpModel::build_loss(Tape& tape,
                                   const std::vector<TransitionSample>& batch) const {
  const int b = static_cast<int>(batch.size());

  LossGraph graph;
  graph.param_ids.assign(static_cast<std::size_t>(params_.size()), -1);
  const nn::Mlp3Ids enc = nn::mlp3_leaves(tape, params_, blocks_->enc, graph.param_ids);
  const nn::Mlp3Ids trans = nn::mlp3_leaves(tape, params_, blocks_->trans, graph.param_ids);

  const auto stack_flat = [&](const std::function<Tensor(const TransitionSample&)>& fn) {
    std::vector<Tensor> parts;
    parts.reserve(static_cast<std::size_t>(b));
    for (const TransitionSample& s : batch) parts.push_back(fn(s));
    Tensor out(b, parts[0].cols);
    for (int i = 0; i < b; ++i) {
      std::copy(parts[static_cast<std::size_t>(i)].data.begin(),
                parts[static_cast<std::size_t>(i)].data.end(),
                out.data.begin() + static_cast<std::size_t>(i) * out.cols);
    }
    return out;
  };

  const auto z_t = nn::mlp3_forward(
      tape, enc, tape.constant(stack_flat([&](const TransitionSample& s) {
        return flatten(layout_rows_by_id(*s.obs_t, env_.n));
      })));
  const auto z_t1 = nn::mlp3_forward(
      tape, enc, tape.constant(stack_flat([&](const TransitionSample& s) {
        return flatten(layout_rows_by_id(*s.obs_t1, env_.n));
      })));
  const auto z_neg = nn::mlp3_forward(
      tape, enc, tape.constant(stack_flat([&](const TransitionSample& s) {
        return flatten(layout_rows_by_id(*s.obs_neg, env_.n));
      })));
  const auto act = tape.constant(stack_flat(
      [&](const TransitionSample& s) { return action_flat(s.action, env_.n); }));
  const auto pred = tape.add(z_t, nn::mlp3_forward(tape, trans, tape.concat_cols(z_t, act)));

  const double inv_rows = 1.0 / static_cast<double>(env_.n);
  const auto margin = tape.constant(Tensor::scalar(hyper_.margin));
  Tape::Id total = tape.constant(Tensor::scalar(0.0));
  for (int i = 0; i < b; ++i) {
    const auto pred_i = tape.slice_rows(pred, i, i + 1);
    const auto tgt_i = tape.slice_rows(z_t1, i, i + 1);
    const auto neg_i = tape.slice_rows(z_neg, i, i + 1);
    const auto positive = tape.scalar_mul(tape.squared_distance(tgt_i, pred_i), inv_rows);
    const auto neg_dist = tape.scalar_mul(tape.squared_distance(neg_i, tgt_i), inv_rows);
    const auto hinge = tape.relu(tape.sub(margin, neg_dist));
    total = tape.add(total, tape.add(positive, hinge));
  }
  graph.loss = tape.scalar_mul(total, 1.0 / static_cast<double>(b));
  return graph;
}

Tensor FlatMlpModel::encode_flat(const Tensor& flat_obs) const {
  Tape tape;
  std::vector<Tape::Id> scratch(static_cast<std::size_t>(params_.size()), -1);
  const nn::Mlp3Ids enc = nn::mlp3_leaves(tape, params_, blocks_->enc, scratch);
  return tape.value(nn::mlp3_forward(tape, enc, tape.constant(flat_obs)));
}

Tensor FlatMlpModel::transition_flat(const Tensor& z, const ActionId& a) const {
  Tape tape;
  std::vector<Tape::Id> scratch(static_cast<std::size_t>(params_.size()), -1);
  const nn::Mlp3Ids trans = nn::mlp3_leaves(tape, params_, blocks_->trans, scratch);
  const auto zc = tape.constant(z);
  const auto out = tape.add(
      zc, nn::mlp3_forward(tape, trans,
                           tape.concat_cols(zc, tape.constant(action_flat(a, env_.n)))));
  return tape.value(out);
}

Tensor FlatMlpModel::embed(const Observation& obs, const Scene&) const {
  return unflatten_rows(encode_flat(flatten(layout_rows_by_id(obs, env_.n))), env_.n);
}

std::vector<Tensor> FlatMlpModel::rollout(const Observation& obs_t, const Scene&,
                                          const std::vector<ActionId>& actions) const {
  Tensor z = encode_flat(flatten(layout_rows_by_id(obs_t, env_.n)));
  std::vector<Tensor> out;
  out.reserve(actions.size());
  for (const ActionId& a : actions) {
    z = transition_flat(z, a);
    out.push_back(unflatten_rows(z, env_.n));
  }
  return out;
}

}  // namespace oolib
