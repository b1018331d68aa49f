#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oolib/env.hpp"
#include "oolib/perm.hpp"

namespace oolib {

struct TooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotAHomomorphism : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScalingViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ActionOnAbsentObject : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotIsomorphic : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense-in-contract, sparse-in-storage transition table. Every row sums to 1.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  // rows[s * n_actions + a] = sorted (next state, probability) pairs
  std::vector<std::vector<std::pair<int, double>>> rows;

  const std::vector<std::pair<int, double>>& row(int s, int a) const {
    return rows[static_cast<std::size_t>(s) * n_actions + a];
  }
  double prob(int s, int a, int s2) const;
  void set_row(int s, int a, std::vector<std::pair<int, double>> entries);
  // max |row sum - 1| over all rows
  double max_row_sum_deviation() const;
};

// Enumeration of the full and slot state spaces for a tiny Shapes instance.
//
// Slot states are ordered K-tuples of distinct cells (lexicographic). A full
// state is (scene, placement) where the placement lists the positions of the
// scene's objects in ascending-id order; its index is
// scene_index * n_slot_states + placement_index, which makes the enumeration
// lexicographic by (present-id tuple, position tuple).
class FullSpace {
 public:
  FullSpace(int n, int k, int grid_w, int grid_h);

  int n() const { return n_; }
  int k() const { return k_; }
  int grid_w() const { return grid_w_; }
  int grid_h() const { return grid_h_; }
  int cells() const { return grid_w_ * grid_h_; }

  const std::vector<Scene>& scenes() const { return scenes_; }
  const std::vector<std::vector<int>>& slot_states() const { return slot_states_; }
  int n_scenes() const { return static_cast<int>(scenes_.size()); }
  int n_slot_states() const { return static_cast<int>(slot_states_.size()); }
  int n_full_states() const { return n_scenes() * n_slot_states(); }
  int n_full_actions() const { return 4 * n_; }
  int n_slot_actions() const { return 4 * k_; }

  int scene_index(const Scene& s) const;
  int slot_state_index(const std::vector<int>& cells) const;

  int full_index(int scene_idx, int placement_idx) const {
    return scene_idx * n_slot_states() + placement_idx;
  }
  int scene_of(int full_idx) const { return full_idx / n_slot_states(); }
  int placement_of(int full_idx) const { return full_idx % n_slot_states(); }

  // Shapes dynamics on a tuple of distinct cells: move entry j by the
  // absolute primitive; blocked moves return the input tuple.
  std::pair<std::vector<int>, bool> step_tuple(const std::vector<int>& cells, int j,
                                               int primitive) const;

  // Relabeling action of sigma in Sigma_N on full states/actions.
  int relabel_full_state(const Permutation& sigma, int full_idx) const;
  int relabel_full_action(const Permutation& sigma, int action) const;
  // Relabeling action of sigma_bar in Sigma_K on slot states/actions.
  int relabel_slot_state(const Permutation& sigma_bar, int slot_idx) const;
  int relabel_slot_action(const Permutation& sigma_bar, int action) const;

 private:
  int n_, k_, grid_w_, grid_h_;
  std::vector<Scene> scenes_;
  std::vector<std::vector<int>> slot_states_;
  std::vector<std::uint64_t> slot_rank_;  // packed key -> index helper
};

// h = <phi, alpha>: for each scene, state_assignment[scene][rank] is the slot
// whose state coordinate holds the rank-th (ascending id) object, and
// action_assignment[scene][rank] the slot its action factor is routed to.
// A good binding keeps the two consistent; the canonical binding is the
// identity assignment on both sides for every scene.
struct Binding {
  std::vector<std::vector<int>> state_assignment;
  std::vector<std::vector<int>> action_assignment;

  static Binding canonical(const FullSpace& space);

  int phi(const FullSpace& space, int full_idx) const;
  // alpha_s(a); requires the action's object to be present in s.
  int alpha(const FullSpace& space, int full_idx, int action) const;
  // Slot permutation induced by sigma at this scene (the projection-property
  // witness candidate).
  Permutation induced_slot_perm(const FullSpace& space, const Permutation& sigma,
                                int scene_idx) const;
};

// The exact environment table: deterministic Shapes moves, self-loops for
// actions on absent objects.
TabularMdp build_full_mdp(const FullSpace& space);

// Deterministic slot-level environment table.
TabularMdp build_slot_env_mdp(const FullSpace& space);

// Slot table with an epsilon perturbation: every row (z, (slot j, prim))
// moves eps of its mass to the state reached by applying prim to slot 0.
// The rule is deliberately not Sigma_K-equivariant.
TabularMdp build_perturbed_slot_mdp(const FullSpace& space, double eps);

// Lifts a slot table to the full space, spreading each destination's mass
// over its C(N,K) scene preimages. own_scene_boost = 0 gives the even spread
// (the uniform-sign family); own_scene_boost in (0, 1) overweights the acting
// scene (mixed-sign family, used for the inequality check).
TabularMdp lift_slot_table(const FullSpace& space, const TabularMdp& slot_table,
                           const Binding& binding, double own_scene_boost);

// Eq.-1 induced table; throws NotAHomomorphism when two (s, a) with equal
// images push forward to different rows (beyond tol).
TabularMdp induce_slot_model(const TabularMdp& full_table, const FullSpace& space,
                             const Binding& binding, double tol = 1e-12);

struct ProjectionReport {
  bool pass = true;
  std::string counterexample;  // empty when pass
};

ProjectionReport check_projection_property(const FullSpace& space,
                                           const Binding& binding);

// Def. 4.2 sample error on the full table.
double sample_equivariance_error_full(const TabularMdp& table, const FullSpace& space,
                                      const Permutation& sigma, int s, int a, int s2);
// Def. 4.2 sample error on a slot table.
double sample_equivariance_error_slot(const TabularMdp& table, const FullSpace& space,
                                      const Permutation& sigma_bar, int z, int b,
                                      int z2);
// Expectation over supported triples (uniform) and uniform sigma.
double expected_equivariance_error_full(const TabularMdp& table, const FullSpace& space,
                                        const std::vector<Permutation>& group);

struct PropositionReport {
  int n = 0;
  int k = 0;
  int grid_w = 0;
  int grid_h = 0;
  std::int64_t preimage_count = 0;  // C = C(N,K)
  bool projection_pass = false;
  bool equality_pass = false;     // lambda_K == C * lambda_L per sample
  bool inequality_pass = false;   // lambda_K <= C * lambda_L per sample (mixed family)
  bool expectation_pass = false;  // E[lambda_K] == C * E[lambda_L]
  bool zero_error_pass = false;   // exact env table has error 0 for every sigma
  double max_equality_deviation = 0.0;
  double max_zero_error = 0.0;
  double expected_full_error = 0.0;
  double expected_slot_error = 0.0;
  std::int64_t samples_checked = 0;
  std::string counterexample;

  bool ok() const {
    return projection_pass && equality_pass && inequality_pass && expectation_pass &&
           zero_error_pass;
  }
  std::string to_json() const;
};

// End-to-end verification on one instance. Samples (s, a, s') range over
// same-scene supported triples (the transitions of the scene sub-MDPs);
// this sampling measure is reported alongside the results.
PropositionReport verify_proposition_scaling(int n, int k, int grid_w, int grid_h,
                                             double eps, double tol = 1e-9);

// Throwing form of the per-sample equality check.
void require_proposition_scaling(const PropositionReport& report);

struct SceneIsomorphism {
  int scene_from = 0;  // scene j
  int scene_to = 0;    // scene i
  std::vector<int> state_map;   // full index (scene j) -> full index (scene i)
  std::vector<int> action_map;  // flat action on scene j objects -> scene i
};

// The bijection M_{O_j} -> M_{O_i} through the slot MDP; verified to commute
// with transitions on every enumerated state-action pair.
SceneIsomorphism scene_isomorphism(const FullSpace& space, const TabularMdp& full_table,
                                   const Binding& binding, int scene_i_idx,
                                   int scene_j_idx);

}  // namespace oolib
