#pragma once

#include "oolib/models.hpp"

namespace oolib {

// K-slot world model with learned action binding: shared slot encoder plus a
// background slot, attention from object identities to slots, pseudoinverse
// lifting into the N-row space, and a residual message-passing transition.
// Gradients reach the attention only through the bound actions; the lift
// matrices are always detached.
class HowmModel : public WorldModel {
 public:
  HowmModel(EnvSpec env, Hyper hyper, std::vector<Scene> train_scenes,
            std::uint64_t init_seed);

  ModelKind kind() const override { return ModelKind::Howm; }
  const EnvSpec& env() const override { return env_; }
  const Hyper& hyper() const override { return hyper_; }
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  const std::vector<Scene>& train_scenes() const override { return train_scenes_; }

  LossGraph build_loss(Tape& tape,
                       const std::vector<TransitionSample>& batch) const override;

  // Detached lift matrices (ridged pseudoinverses of the attention) for the
  // observations of a batch, in batch order.
  struct FrozenLifts {
    std::vector<Tensor> t;
    std::vector<Tensor> t1;
    std::vector<Tensor> neg;
  };
  FrozenLifts compute_lifts(const std::vector<TransitionSample>& batch) const;

  struct LossOptions {
    const FrozenLifts* lifts = nullptr;  // substitute externally detached copies
    bool detach_bound_actions = false;   // severs the only gradient path into
                                         // the attention projections
  };
  LossGraph build_loss_ex(Tape& tape, const std::vector<TransitionSample>& batch,
                          const LossOptions& options) const;

  Tensor embed(const Observation& obs, const Scene& scene) const override;
  std::vector<Tensor> rollout(const Observation& obs_t, const Scene& scene,
                              const std::vector<ActionId>& actions) const override;

  bool has_binding() const override { return true; }
  Tensor binding_matrix(const Observation& obs, const Scene& scene) const override;

  // Stage pieces, exposed for the equivariance and gradient suites.
  Tensor encode_obs(const Observation& obs) const;        // (K+1) x D_slot
  Tensor encode_slots(const Tensor& features) const;      // rows + background
  Tensor attention(const Tensor& slots) const;            // (K+1) x N, columns sum to 1
  Tensor bind_action(const Tensor& m, const ActionId& a) const;  // (K+1) x 4
  Tensor lift(const Tensor& m, const Tensor& slots) const;       // N x D_slot
  Tensor transition_step(const Tensor& slots, const Tensor& bound_action) const;

 private:
  EnvSpec env_;
  Hyper hyper_;
  std::vector<Scene> train_scenes_;
  ParamSet params_;
  struct Blocks;
  std::shared_ptr<const Blocks> blocks_;
};

}  // namespace oolib
