#pragma once

#include <string>
#include <vector>

#include "oolib/models.hpp"

namespace oolib {

struct TargetMissing : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Candidate next-states in the model's comparison space, deduplicated by the
// underlying grid state so revisited states rank as one candidate.
struct ReferenceSet {
  std::vector<Tensor> embeddings;
  std::vector<int> scene_of;          // reference -> scene index in the dataset
  std::vector<int> per_scene_counts;  // composition record
};

// 1-based rank of the true target among candidates ordered by squared
// distance, ties broken by stable candidate order.
int rank_query(const Tensor& predicted, const ReferenceSet& refs, int true_index);

struct EvalConfig {
  std::vector<int> horizons{1, 5};
  int max_references = 2000;
  std::uint64_t seed = 7;
};

struct HorizonMetrics {
  int horizon = 0;
  double hits_at_1 = 0.0;
  double mrr = 0.0;
  int n_queries = 0;
  int n_references = 0;
};

struct MetricsReport {
  std::string split;
  std::vector<HorizonMetrics> per_horizon;

  const HorizonMetrics& at_horizon(int h) const;
};

// Rolls the model out with recorded actions and ranks each prediction
// against the stratified reference set of same-horizon targets.
MetricsReport evaluate(const WorldModel& model, const Dataset& data,
                       const EvalConfig& cfg, const std::string& split_label);

struct GapReport {
  int horizon = 0;
  double train_mrr = 0.0;
  double eval_mrr = 0.0;
  double train_h1 = 0.0;
  double eval_h1 = 0.0;
  double mrr_gap = 0.0;  // train - eval
  double h1_gap = 0.0;
};

std::vector<GapReport> generalization_gap(const MetricsReport& train,
                                          const MetricsReport& eval);

// Fraction of moving transitions whose action column argmax lands on the
// slot actually holding the acted object (oracle slot order; ties broken
// uniformly at random from the seed).
double binding_accuracy(const WorldModel& model, const Dataset& data,
                        std::uint64_t seed = 11);

// Table-shaped CSV: method,env,n,k,horizon,split,h@1,mrr,gap
std::string metrics_csv(const std::string& method, const EnvSpec& env,
                        const MetricsReport& train, const MetricsReport& eval);
std::string metrics_json(const std::string& method, const EnvSpec& env,
                         const MetricsReport& train, const MetricsReport& eval);

}  // namespace oolib
