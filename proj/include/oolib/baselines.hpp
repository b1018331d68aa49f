#pragma once

#include <set>

#include "oolib/models.hpp"

namespace oolib {

// Comparison models sharing the encoder/GNN blocks and the contrastive loss.
//
// ExactSigmaN   - N dedicated rows bound by the oracle ordering; equivariant
//                 to object relabeling by weight sharing.
// SigmaKNoBind  - K slots; action factors attached by ascending-id rank while
//                 slot order follows the extractor layout, so the action may
//                 not control the object in the slot on unseen scenes.
// SigmaKCopyAll - K slots with the full factorized action copied to each.
class BaselineGnnModel : public WorldModel {
 public:
  BaselineGnnModel(ModelKind kind, EnvSpec env, Hyper hyper,
                   std::vector<Scene> train_scenes, std::uint64_t init_seed);

  ModelKind kind() const override { return kind_; }
  const EnvSpec& env() const override { return env_; }
  const Hyper& hyper() const override { return hyper_; }
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  const std::vector<Scene>& train_scenes() const override { return train_scenes_; }

  LossGraph build_loss(Tape& tape,
                       const std::vector<TransitionSample>& batch) const override;
  Tensor embed(const Observation& obs, const Scene& scene) const override;
  std::vector<Tensor> rollout(const Observation& obs_t, const Scene& scene,
                              const std::vector<ActionId>& actions) const override;

  // layout and action encodings, exposed for the equivariance suites
  Tensor layout(const Observation& obs, const Scene& scene) const;
  Tensor action_rows(const ActionId& a, const Scene& scene) const;
  Tensor encode_rows(const Tensor& features) const;
  Tensor transition_rows(const Tensor& state, const Tensor& action) const;
  bool scene_seen(const Scene& scene) const;

 private:
  int rows() const { return kind_ == ModelKind::ExactSigmaN ? env_.n : env_.k; }
  int action_dim() const { return kind_ == ModelKind::SigmaKCopyAll ? 4 * env_.n : 4; }

  ModelKind kind_;
  EnvSpec env_;
  Hyper hyper_;
  std::vector<Scene> train_scenes_;
  std::set<std::uint64_t> train_keys_;
  ParamSet params_;
  struct Blocks;
  std::shared_ptr<const Blocks> blocks_;
};

// Flat-MLP world model: the dedicated-row layout flattened into one vector,
// with non-factorized encoder and transition networks. Deliberately breaks
// permutation equivariance.
class FlatMlpModel : public WorldModel {
 public:
  FlatMlpModel(EnvSpec env, Hyper hyper, std::vector<Scene> train_scenes,
               std::uint64_t init_seed);

  ModelKind kind() const override { return ModelKind::FlatMlp; }
  const EnvSpec& env() const override { return env_; }
  const Hyper& hyper() const override { return hyper_; }
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  const std::vector<Scene>& train_scenes() const override { return train_scenes_; }

  LossGraph build_loss(Tape& tape,
                       const std::vector<TransitionSample>& batch) const override;
  Tensor embed(const Observation& obs, const Scene& scene) const override;
  std::vector<Tensor> rollout(const Observation& obs_t, const Scene& scene,
                              const std::vector<ActionId>& actions) const override;

 private:
  Tensor encode_flat(const Tensor& flat_obs) const;      // 1 x N*D
  Tensor transition_flat(const Tensor& z, const ActionId& a) const;

  EnvSpec env_;
  Hyper hyper_;
  std::vector<Scene> train_scenes_;
  ParamSet params_;
  struct Blocks;
  std::shared_ptr<const Blocks> blocks_;
};

}  // namespace oolib
