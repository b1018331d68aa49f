#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "oolib/dataset.hpp"
#include "oolib/optim.hpp"
#include "oolib/tape.hpp"

namespace oolib {

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotABindingModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Hyper {
  int d_slot = 16;
  int d_att = 16;
  int hidden = 64;
  int flat_hidden = 256;  // width of the non-factorized baseline
  double margin = 1.0;
  double eps_pinv = 1e-6;
  double same_scene_negative_frac = 0.5;  // remainder drawn across scenes
};

enum class ModelKind { Howm, ExactSigmaN, SigmaKNoBind, SigmaKCopyAll, FlatMlp };

std::string kind_name(ModelKind kind);
ModelKind kind_from_name(const std::string& name);

struct TransitionSample {
  const Observation* obs_t = nullptr;
  const Observation* obs_t1 = nullptr;
  const Observation* obs_neg = nullptr;
  const Scene* scene = nullptr;
  const Scene* scene_neg = nullptr;
  ActionId action;
};

struct LossGraph {
  Tape::Id loss = -1;
  std::vector<Tape::Id> param_ids;  // parallel to ParamSet order
};

class WorldModel {
 public:
  virtual ~WorldModel() = default;

  virtual ModelKind kind() const = 0;
  virtual const EnvSpec& env() const = 0;
  virtual const Hyper& hyper() const = 0;
  virtual ParamSet& params() = 0;
  virtual const ParamSet& params() const = 0;
  virtual const std::vector<Scene>& train_scenes() const = 0;

  // Contrastive minibatch loss; records which tape leaves hold the params.
  virtual LossGraph build_loss(Tape& tape,
                               const std::vector<TransitionSample>& batch) const = 0;

  // Embedding of an observation in the model's comparison space (the lifted
  // N-row space for the binding model, the native layout otherwise).
  virtual Tensor embed(const Observation& obs, const Scene& scene) const = 0;

  // Latent rollout: predictions after applying actions[0..j] for every j,
  // in the comparison space. No ground-truth observations are consumed
  // beyond obs_t.
  virtual std::vector<Tensor> rollout(const Observation& obs_t, const Scene& scene,
                                      const std::vector<ActionId>& actions) const = 0;

  virtual bool has_binding() const { return false; }
  virtual Tensor binding_matrix(const Observation&, const Scene&) const {
    throw NotABindingModel(kind_name(kind()) + " has no binding matrix");
  }
};

std::unique_ptr<WorldModel> make_model(ModelKind kind, const EnvSpec& env,
                                       const Hyper& hyper,
                                       std::vector<Scene> train_scenes,
                                       std::uint64_t init_seed);

void save_model(const std::string& path, const WorldModel& model,
                std::uint64_t train_seed);
std::unique_ptr<WorldModel> load_model(const std::string& path);

struct TrainConfig {
  int epochs = 50;   // per phase
  int batch = 512;
  double lr = 5e-4;
  int restarts = 1;  // optimizer phases; each restarts Adam's moments
  std::uint64_t seed = 1;
  std::string metrics_csv_path;  // optional per-epoch log
  int log_queries = 64;          // size of the per-epoch train-MRR probe
};

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_mrr_1step;
};

// Single-threaded, deterministic per seed. Throws NonFiniteLoss with
// diagnostics if the loss leaves the finite range.
TrainLog train_model(WorldModel& model, const Dataset& data, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Layout helpers shared by the models (also used by tests).
// ---------------------------------------------------------------------------

// Dedicated-row layout: row id holds the object's features, absent rows zero.
Tensor layout_rows_by_id(const Observation& obs, int n);
// Rows reordered to the given object-id order.
Tensor layout_rows_in_order(const Observation& obs, const std::vector<int>& id_order);
// The K-slot layout policy: ascending ids for scenes seen in training,
// a scene-keyed pseudorandom order otherwise.
std::vector<int> sigma_k_layout_order(const Scene& scene, bool seen_in_training);

Tensor action_matrix_by_id(const ActionId& a, int n);                    // N x 4
Tensor action_matrix_by_rank(const ActionId& a, const Scene& scene);     // K x 4
Tensor action_rows_copy_all(const ActionId& a, int n, int k);            // K x 4N
Tensor action_flat(const ActionId& a, int n);                            // 1 x 4N

}  // namespace oolib
