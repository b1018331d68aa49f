#include "oolib/howm.hpp"

#include "nn_internal.hpp"

namespace oolib {

struct HowmModel::Blocks {
  nn::Mlp enc;
  int bg = -1;
  int wk = -1;
  int wq = -1;
  nn::Mlp edge;
  nn::Mlp node;
};

HowmModel::HowmModel(EnvSpec env, Hyper hyper, std::vector<Scene> train_scenes,
                     std::uint64_t init_seed)
    : env_(env), hyper_(hyper), train_scenes_(std::move(train_scenes)) {
  const Library lib = env_.make_library();
  const int f = lib.feature_dim();
  const int d = hyper_.d_slot;
  Rng rng(derive_seed(init_seed, 0x401));
  auto blocks = std::make_shared<Blocks>();
  blocks->enc = nn::add_mlp(params_, "enc", f, hyper_.hidden, d, rng);
  blocks->bg = params_.add("bg", Tensor::zeros(1, d));
  blocks->wk = params_.add("att.k", nn::init_weight(rng, env_.n, hyper_.d_att));
  blocks->wq = params_.add("att.q", nn::init_weight(rng, d, hyper_.d_att));
  blocks->edge = nn::add_mlp(params_, "edge", 2 * d, hyper_.hidden, d, rng);
  blocks->node = nn::add_mlp(params_, "node", d + 4 + d, hyper_.hidden, d, rng);
  blocks_ = std::move(blocks);
}

namespace {

Tensor stack_obs_features(const std::vector<TransitionSample>& batch,
                          const Observation* TransitionSample::* field, int k, int f) {
  Tensor out(static_cast<int>(batch.size()) * k, f);
  double* dst = out.data.data();
  for (const TransitionSample& s : batch) {
    const Observation& obs = *(s.*field);
    for (const auto& row : obs.slot_features) {
      std::copy(row.begin(), row.end(), dst);
      dst += f;
    }
  }
  return out;
}

// rows of [E; BG] reordered to per-sample blocks of K slots + 1 background
std::shared_ptr<const std::vector<int>> interleave_index(int batch, int k) {
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<std::size_t>(batch) * (k + 1));
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < k; ++j) idx->push_back(b * k + j);
    idx->push_back(batch * k + b);
  }
  return idx;
}

}  // namespace

LossGraph HowmModel::build_loss(Tape& tape,
                                const std::vector<TransitionSample>& batch) const {
  return build_loss_ex(tape, batch, LossOptions{});
}

HowmModel::FrozenLifts HowmModel::compute_lifts(
    const std::vector<TransitionSample>& batch) const {
  FrozenLifts lifts;
  for (const TransitionSample& s : batch) {
    lifts.t.push_back(ridged_pinv(attention(encode_obs(*s.obs_t)), hyper_.eps_pinv));
    lifts.t1.push_back(ridged_pinv(attention(encode_obs(*s.obs_t1)), hyper_.eps_pinv));
    lifts.neg.push_back(ridged_pinv(attention(encode_obs(*s.obs_neg)), hyper_.eps_pinv));
  }
  return lifts;
}

LossGraph HowmModel::build_loss_ex(Tape& tape,
                                   const std::vector<TransitionSample>& batch,
                                   const LossOptions& options) const {
  const Library lib = env_.make_library();
  const int b = static_cast<int>(batch.size());
  const int k = env_.k;
  const int n_slots = k + 1;
  const int f = lib.feature_dim();
  const int n = env_.n;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(hyper_.d_att));

  LossGraph graph;
  graph.param_ids.assign(static_cast<std::size_t>(params_.size()), -1);
  const nn::MlpIds enc = nn::mlp_leaves(tape, params_, blocks_->enc, graph.param_ids);
  const auto bg = graph.param_ids[static_cast<std::size_t>(blocks_->bg)] =
      tape.leaf(params_[blocks_->bg]);
  const auto wk = graph.param_ids[static_cast<std::size_t>(blocks_->wk)] =
      tape.leaf(params_[blocks_->wk]);
  const auto wq = graph.param_ids[static_cast<std::size_t>(blocks_->wq)] =
      tape.leaf(params_[blocks_->wq]);
  const nn::MlpIds edge = nn::mlp_leaves(tape, params_, blocks_->edge, graph.param_ids);
  const nn::MlpIds node = nn::mlp_leaves(tape, params_, blocks_->node, graph.param_ids);

  const auto ones = tape.constant(Tensor::full(b, 1, 1.0));
  const auto inter = interleave_index(b, k);
  const auto encode_stack = [&](const Observation* TransitionSample::* field) {
    const auto x = tape.constant(stack_obs_features(batch, field, k, f));
    const auto e = nn::mlp_forward(tape, enc, x, /*layer_norm_output=*/true);
    const auto bg_tile = tape.matmul(ones, bg);
    return tape.gather_rows(tape.concat_rows(e, bg_tile), inter);
  };
  const auto s_t = encode_stack(&TransitionSample::obs_t);
  const auto s_t1 = encode_stack(&TransitionSample::obs_t1);
  const auto s_neg = encode_stack(&TransitionSample::obs_neg);

  // slot attention per sample; softmax over slots for each object's row
  const auto attention_of = [&](Tape::Id slots) {
    const auto q = tape.matmul(slots, wq);
    const auto logits = tape.scalar_mul(tape.matmul(wk, tape.transpose(q)), att_scale);
    return tape.transpose(tape.softmax_rows(logits));  // (K+1) x N
  };

  std::vector<Tape::Id> bound_actions;
  std::vector<Tensor> lift_t, lift_t1, lift_neg;
  bound_actions.reserve(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const auto slots_t = tape.slice_rows(s_t, i * n_slots, (i + 1) * n_slots);
    const auto slots_t1 = tape.slice_rows(s_t1, i * n_slots, (i + 1) * n_slots);
    const auto slots_neg = tape.slice_rows(s_neg, i * n_slots, (i + 1) * n_slots);
    const auto m_t = attention_of(slots_t);
    const auto a_mat = tape.constant(action_matrix_by_id(batch[static_cast<std::size_t>(i)].action, n));
    if (options.detach_bound_actions) {
      bound_actions.push_back(tape.constant(matmul(tape.value(m_t), tape.value(a_mat))));
    } else {
      bound_actions.push_back(tape.matmul(m_t, a_mat));
    }
    // detached lift matrices: gradients reach the attention only through
    // the bound actions
    if (options.lifts != nullptr) {
      lift_t.push_back(options.lifts->t[static_cast<std::size_t>(i)]);
      lift_t1.push_back(options.lifts->t1[static_cast<std::size_t>(i)]);
      lift_neg.push_back(options.lifts->neg[static_cast<std::size_t>(i)]);
    } else {
      const auto m_t1 = attention_of(slots_t1);
      const auto m_neg = attention_of(slots_neg);
      lift_t.push_back(ridged_pinv(tape.value(m_t), hyper_.eps_pinv));
      lift_t1.push_back(ridged_pinv(tape.value(m_t1), hyper_.eps_pinv));
      lift_neg.push_back(ridged_pinv(tape.value(m_neg), hyper_.eps_pinv));
    }
  }
  const auto actions = tape.concat_rows_many(bound_actions);
  const auto pred = nn::gnn_forward(tape, edge, node, s_t, actions, b, n_slots);

  const double inv_rows = 1.0 / static_cast<double>(n);
  const auto margin = tape.constant(Tensor::scalar(hyper_.margin));
  Tape::Id total = tape.constant(Tensor::scalar(0.0));
  for (int i = 0; i < b; ++i) {
    const auto pred_i = tape.slice_rows(pred, i * n_slots, (i + 1) * n_slots);
    const auto tgt_i = tape.slice_rows(s_t1, i * n_slots, (i + 1) * n_slots);
    const auto neg_i = tape.slice_rows(s_neg, i * n_slots, (i + 1) * n_slots);
    const auto up_pred = tape.matmul(tape.constant(lift_t[static_cast<std::size_t>(i)]), pred_i);
    const auto up_tgt = tape.matmul(tape.constant(lift_t1[static_cast<std::size_t>(i)]), tgt_i);
    const auto up_neg = tape.matmul(tape.constant(lift_neg[static_cast<std::size_t>(i)]), neg_i);
    const auto positive = tape.scalar_mul(tape.squared_distance(up_tgt, up_pred), inv_rows);
    const auto neg_dist = tape.scalar_mul(tape.squared_distance(up_neg, up_tgt), inv_rows);
    const auto hinge = tape.relu(tape.sub(margin, neg_dist));
    total = tape.add(total, tape.add(positive, hinge));
  }
  graph.loss = tape.scalar_mul(total, 1.0 / static_cast<double>(b));
  return graph;
}

Tensor HowmModel::encode_slots(const Tensor& features) const {
  Tape tape;
  std::vector<Tape::Id> scratch(static_cast<std::size_t>(params_.size()), -1);
  const nn::MlpIds enc = nn::mlp_leaves(tape, params_, blocks_->enc, scratch);
  const auto e = nn::mlp_forward(tape, enc, tape.constant(features),
                                 /*layer_norm_output=*/true);
  const auto out = tape.concat_rows(e, tape.leaf(params_[blocks_->bg]));
  return tape.value(out);
}

Tensor HowmModel::encode_obs(const Observation& obs) const {
  const int f = env_.make_library().feature_dim();
  Tensor x(obs.k(), f);
  for (int i = 0; i < obs.k(); ++i) {
    std::copy(obs.slot_features[static_cast<std::size_t>(i)].begin(),
              obs.slot_features[static_cast<std::size_t>(i)].end(),
              x.data.begin() + static_cast<std::size_t>(i) * f);
  }
  return encode_slots(x);
}

Tensor HowmModel::attention(const Tensor& slots) const {
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(hyper_.d_att));
  const Tensor q = matmul(slots, params_[blocks_->wq]);
  const Tensor logits =
      scalar_mul(matmul(params_[blocks_->wk], transpose(q)), att_scale);
  return transpose(softmax_rows(logits));
}

Tensor HowmModel::bind_action(const Tensor& m, const ActionId& a) const {
  return matmul(m, action_matrix_by_id(a, env_.n));
}

Tensor HowmModel::lift(const Tensor& m, const Tensor& slots) const {
  return matmul(ridged_pinv(m, hyper_.eps_pinv), slots);
}

Tensor HowmModel::transition_step(const Tensor& slots, const Tensor& bound_action) const {
  Tape tape;
  std::vector<Tape::Id> scratch(static_cast<std::size_t>(params_.size()), -1);
  const nn::MlpIds edge = nn::mlp_leaves(tape, params_, blocks_->edge, scratch);
  const nn::MlpIds node = nn::mlp_leaves(tape, params_, blocks_->node, scratch);
  const auto out = nn::gnn_forward(tape, edge, node, tape.constant(slots),
                                   tape.constant(bound_action), 1, slots.rows);
  return tape.value(out);
}

Tensor HowmModel::binding_matrix(const Observation& obs, const Scene&) const {
  return attention(encode_obs(obs));
}

Tensor HowmModel::embed(const Observation& obs, const Scene&) const {
  const Tensor slots = encode_obs(obs);
  return lift(attention(slots), slots);
}

std::vector<Tensor> HowmModel::rollout(const Observation& obs_t, const Scene&,
                                       const std::vector<ActionId>& actions) const {
  // bind every future action with M_t and lift every prediction with its
  // pseudoinverse; intermediate observations are never consumed
  const Tensor m_t = attention(encode_obs(obs_t));
  const Tensor up_t = ridged_pinv(m_t, hyper_.eps_pinv);
  Tensor slots = encode_obs(obs_t);
  std::vector<Tensor> lifted;
  lifted.reserve(actions.size());
  for (const ActionId& a : actions) {
    slots = transition_step(slots, bind_action(m_t, a));
    lifted.push_back(matmul(up_t, slots));
  }
  return lifted;
}

}  // namespace oolib
