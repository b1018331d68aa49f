#include "oolib/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace oolib {

namespace {

std::uint64_t pack_tuple(const std::vector<int>& v) {
  std::uint64_t key = 0;
  for (int x : v) key = key * 64 + static_cast<std::uint64_t>(x) + 1;
  return key;
}

void accumulate(std::vector<std::pair<int, double>>& row, int state, double p) {
  for (auto& e : row) {
    if (e.first == state) {
      e.second += p;
      return;
    }
  }
  row.emplace_back(state, p);
}

void sort_row(std::vector<std::pair<int, double>>& row) {
  std::sort(row.begin(), row.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
}

}  // namespace

double TabularMdp::prob(int s, int a, int s2) const {
  for (const auto& [state, p] : row(s, a)) {
    if (state == s2) return p;
  }
  return 0.0;
}

void TabularMdp::set_row(int s, int a, std::vector<std::pair<int, double>> entries) {
  sort_row(entries);
  rows[static_cast<std::size_t>(s) * n_actions + a] = std::move(entries);
}

double TabularMdp::max_row_sum_deviation() const {
  double worst = 0.0;
  for (const auto& row : rows) {
    double sum = 0.0;
    for (const auto& [state, p] : row) sum += p;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

FullSpace::FullSpace(int n, int k, int grid_w, int grid_h)
    : n_(n), k_(k), grid_w_(grid_w), grid_h_(grid_h) {
  if (n > 5 || k >= n || k < 1 || grid_w * grid_h > 9 || grid_w < 1 || grid_h < 1) {
    throw TooLarge("enumeration guard: N <= 5, K < N, grid cells <= 9");
  }
  // scenes: K-combinations of [0, N) in lexicographic order
  std::vector<int> combo(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) combo[static_cast<std::size_t>(i)] = i;
  while (true) {
    scenes_.push_back(Scene{combo});
    int i = k - 1;
    while (i >= 0 && combo[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++combo[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) {
      combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  // slot states: ordered K-tuples of distinct cells, lexicographic
  std::vector<int> tuple;
  std::vector<char> taken(static_cast<std::size_t>(cells()), 0);
  const std::function<void()> rec = [&] {
    if (static_cast<int>(tuple.size()) == k) {
      slot_states_.push_back(tuple);
      return;
    }
    for (int c = 0; c < cells(); ++c) {
      if (taken[static_cast<std::size_t>(c)]) continue;
      taken[static_cast<std::size_t>(c)] = 1;
      tuple.push_back(c);
      rec();
      tuple.pop_back();
      taken[static_cast<std::size_t>(c)] = 0;
    }
  };
  rec();
  slot_rank_.reserve(slot_states_.size());
  for (const auto& z : slot_states_) slot_rank_.push_back(pack_tuple(z));
}

int FullSpace::scene_index(const Scene& s) const {
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    if (scenes_[i] == s) return static_cast<int>(i);
  }
  throw ConfigError("scene not in enumeration");
}

int FullSpace::slot_state_index(const std::vector<int>& cells_tuple) const {
  const std::uint64_t key = pack_tuple(cells_tuple);
  for (std::size_t i = 0; i < slot_rank_.size(); ++i) {
    if (slot_rank_[i] == key) return static_cast<int>(i);
  }
  throw ConfigError("slot state not in enumeration");
}

std::pair<std::vector<int>, bool> FullSpace::step_tuple(const std::vector<int>& cells_in,
                                                        int j, int primitive) const {
  const GridPos d = action_delta(Variant::Shapes, Orientation::North, primitive);
  const int cell = cells_in[static_cast<std::size_t>(j)];
  const int row = cell / grid_w_ + d.row;
  const int col = cell % grid_w_ + d.col;
  if (row < 0 || row >= grid_h_ || col < 0 || col >= grid_w_) {
    return {cells_in, false};
  }
  const int target = row * grid_w_ + col;
  for (std::size_t i = 0; i < cells_in.size(); ++i) {
    if (static_cast<int>(i) != j && cells_in[i] == target) return {cells_in, false};
  }
  std::vector<int> out = cells_in;
  out[static_cast<std::size_t>(j)] = target;
  return {out, true};
}

int FullSpace::relabel_full_state(const Permutation& sigma, int full_idx) const {
  const Scene& scene = scenes_[static_cast<std::size_t>(scene_of(full_idx))];
  const std::vector<int>& pl = slot_states_[static_cast<std::size_t>(placement_of(full_idx))];
  std::vector<std::pair<int, int>> relabeled;  // (new id, cell)
  relabeled.reserve(pl.size());
  for (std::size_t r = 0; r < pl.size(); ++r) {
    relabeled.emplace_back(sigma(scene.object_ids[r]), pl[r]);
  }
  std::sort(relabeled.begin(), relabeled.end());
  std::vector<int> ids, cells_out;
  for (const auto& [id, cell] : relabeled) {
    ids.push_back(id);
    cells_out.push_back(cell);
  }
  return full_index(scene_index(Scene{ids}), slot_state_index(cells_out));
}

int FullSpace::relabel_full_action(const Permutation& sigma, int action) const {
  return 4 * sigma(action / 4) + action % 4;
}

int FullSpace::relabel_slot_state(const Permutation& sigma_bar, int slot_idx) const {
  const std::vector<int>& z = slot_states_[static_cast<std::size_t>(slot_idx)];
  std::vector<int> out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    out[static_cast<std::size_t>(sigma_bar(static_cast<int>(j)))] = z[j];
  }
  return slot_state_index(out);
}

int FullSpace::relabel_slot_action(const Permutation& sigma_bar, int action) const {
  return 4 * sigma_bar(action / 4) + action % 4;
}

Binding Binding::canonical(const FullSpace& space) {
  Binding b;
  b.state_assignment.assign(static_cast<std::size_t>(space.n_scenes()),
                            std::vector<int>(static_cast<std::size_t>(space.k())));
  for (auto& per_scene : b.state_assignment) {
    for (int r = 0; r < space.k(); ++r) per_scene[static_cast<std::size_t>(r)] = r;
  }
  b.action_assignment = b.state_assignment;
  return b;
}

int Binding::phi(const FullSpace& space, int full_idx) const {
  const int sc = space.scene_of(full_idx);
  const std::vector<int>& pl =
      space.slot_states()[static_cast<std::size_t>(space.placement_of(full_idx))];
  std::vector<int> z(pl.size());
  const std::vector<int>& assign = state_assignment[static_cast<std::size_t>(sc)];
  for (std::size_t r = 0; r < pl.size(); ++r) {
    z[static_cast<std::size_t>(assign[r])] = pl[r];
  }
  return space.slot_state_index(z);
}

int Binding::alpha(const FullSpace& space, int full_idx, int action) const {
  const int sc = space.scene_of(full_idx);
  const Scene& scene = space.scenes()[static_cast<std::size_t>(sc)];
  const int object = action / 4;
  const auto it = std::lower_bound(scene.object_ids.begin(), scene.object_ids.end(),
                                   object);
  if (it == scene.object_ids.end() || *it != object) {
    throw ActionOnAbsentObject("alpha undefined for absent object " +
                               std::to_string(object));
  }
  const int rank = static_cast<int>(it - scene.object_ids.begin());
  return 4 * action_assignment[static_cast<std::size_t>(sc)]
                              [static_cast<std::size_t>(rank)] +
         action % 4;
}

Permutation Binding::induced_slot_perm(const FullSpace& space, const Permutation& sigma,
                                       int scene_idx) const {
  const Scene& scene = space.scenes()[static_cast<std::size_t>(scene_idx)];
  const Scene mapped = apply_to_scene(sigma, scene);
  const int mapped_idx = space.scene_index(mapped);
  std::vector<int> image(static_cast<std::size_t>(space.k()));
  for (int r = 0; r < space.k(); ++r) {
    const int new_id = sigma(scene.object_ids[static_cast<std::size_t>(r)]);
    const auto it = std::lower_bound(mapped.object_ids.begin(), mapped.object_ids.end(),
                                     new_id);
    const int new_rank = static_cast<int>(it - mapped.object_ids.begin());
    const int slot = state_assignment[static_cast<std::size_t>(scene_idx)]
                                     [static_cast<std::size_t>(r)];
    const int new_slot = state_assignment[static_cast<std::size_t>(mapped_idx)]
                                         [static_cast<std::size_t>(new_rank)];
    image[static_cast<std::size_t>(slot)] = new_slot;
  }
  return Permutation::from_image(std::move(image));
}

TabularMdp build_full_mdp(const FullSpace& space) {
  TabularMdp mdp;
  mdp.n_states = space.n_full_states();
  mdp.n_actions = space.n_full_actions();
  mdp.rows.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int sc = 0; sc < space.n_scenes(); ++sc) {
    const Scene& scene = space.scenes()[static_cast<std::size_t>(sc)];
    for (int pl = 0; pl < space.n_slot_states(); ++pl) {
      const int s = space.full_index(sc, pl);
      const std::vector<int>& cells = space.slot_states()[static_cast<std::size_t>(pl)];
      for (int a = 0; a < mdp.n_actions; ++a) {
        const int object = a / 4;
        const auto it = std::lower_bound(scene.object_ids.begin(),
                                         scene.object_ids.end(), object);
        if (it == scene.object_ids.end() || *it != object) {
          mdp.set_row(s, a, {{s, 1.0}});  // absent object: self-loop
          continue;
        }
        const int rank = static_cast<int>(it - scene.object_ids.begin());
        const auto [next, moved] = space.step_tuple(cells, rank, a % 4);
        const int s2 = space.full_index(sc, space.slot_state_index(next));
        mdp.set_row(s, a, {{s2, 1.0}});
      }
    }
  }
  return mdp;
}

TabularMdp build_slot_env_mdp(const FullSpace& space) {
  TabularMdp mdp;
  mdp.n_states = space.n_slot_states();
  mdp.n_actions = space.n_slot_actions();
  mdp.rows.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int z = 0; z < mdp.n_states; ++z) {
    const std::vector<int>& cells = space.slot_states()[static_cast<std::size_t>(z)];
    for (int b = 0; b < mdp.n_actions; ++b) {
      const auto [next, moved] = space.step_tuple(cells, b / 4, b % 4);
      mdp.set_row(z, b, {{space.slot_state_index(next), 1.0}});
    }
  }
  return mdp;
}

TabularMdp build_perturbed_slot_mdp(const FullSpace& space, double eps) {
  TabularMdp mdp = build_slot_env_mdp(space);
  for (int z = 0; z < mdp.n_states; ++z) {
    const std::vector<int>& cells = space.slot_states()[static_cast<std::size_t>(z)];
    for (int b = 0; b < mdp.n_actions; ++b) {
      const int dest = mdp.row(z, b)[0].first;
      const int pert =
          space.slot_state_index(space.step_tuple(cells, 0, b % 4).first);
      if (pert == dest) continue;
      std::vector<std::pair<int, double>> row{{dest, 1.0 - eps}, {pert, eps}};
      mdp.set_row(z, b, std::move(row));
    }
  }
  return mdp;
}

TabularMdp lift_slot_table(const FullSpace& space, const TabularMdp& slot_table,
                           const Binding& binding, double own_scene_boost) {
  const int c = space.n_scenes();
  const double own = (1.0 + own_scene_boost * (c - 1)) / c;
  const double other = (1.0 - own_scene_boost) / c;
  TabularMdp mdp;
  mdp.n_states = space.n_full_states();
  mdp.n_actions = space.n_full_actions();
  mdp.rows.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int sc = 0; sc < space.n_scenes(); ++sc) {
    const Scene& scene = space.scenes()[static_cast<std::size_t>(sc)];
    for (int pl = 0; pl < space.n_slot_states(); ++pl) {
      const int s = space.full_index(sc, pl);
      for (int a = 0; a < mdp.n_actions; ++a) {
        if (!scene.contains(a / 4)) {
          mdp.set_row(s, a, {{s, 1.0}});
          continue;
        }
        const int z = binding.phi(space, s);
        const int b = binding.alpha(space, s, a);
        std::vector<std::pair<int, double>> row;
        for (const auto& [z2, p] : slot_table.row(z, b)) {
          const std::vector<int>& zt =
              space.slot_states()[static_cast<std::size_t>(z2)];
          for (int sj = 0; sj < space.n_scenes(); ++sj) {
            // lift z2 into scene sj through the binding
            const std::vector<int>& assign =
                binding.state_assignment[static_cast<std::size_t>(sj)];
            std::vector<int> placement(static_cast<std::size_t>(space.k()));
            for (int r = 0; r < space.k(); ++r) {
              placement[static_cast<std::size_t>(r)] =
                  zt[static_cast<std::size_t>(assign[static_cast<std::size_t>(r)])];
            }
            const int target =
                space.full_index(sj, space.slot_state_index(placement));
            accumulate(row, target, p * (sj == sc ? own : other));
          }
        }
        mdp.set_row(s, a, std::move(row));
      }
    }
  }
  return mdp;
}

TabularMdp induce_slot_model(const TabularMdp& full_table, const FullSpace& space,
                             const Binding& binding, double tol) {
  TabularMdp slot;
  slot.n_states = space.n_slot_states();
  slot.n_actions = space.n_slot_actions();
  slot.rows.resize(static_cast<std::size_t>(slot.n_states) * slot.n_actions);
  std::vector<char> defined(slot.rows.size(), 0);
  for (int s = 0; s < full_table.n_states; ++s) {
    const int sc = space.scene_of(s);
    const Scene& scene = space.scenes()[static_cast<std::size_t>(sc)];
    for (int a = 0; a < full_table.n_actions; ++a) {
      if (!scene.contains(a / 4)) continue;
      const int z = binding.phi(space, s);
      const int b = binding.alpha(space, s, a);
      std::vector<std::pair<int, double>> pushed;
      for (const auto& [s2, p] : full_table.row(s, a)) {
        accumulate(pushed, binding.phi(space, s2), p);
      }
      sort_row(pushed);
      const std::size_t idx = static_cast<std::size_t>(z) * slot.n_actions + b;
      if (!defined[idx]) {
        slot.rows[idx] = std::move(pushed);
        defined[idx] = 1;
        continue;
      }
      // Eq. 1 consistency: every preimage pair must push the same row.
      const auto& existing = slot.rows[idx];
      bool same = existing.size() == pushed.size();
      if (same) {
        for (std::size_t i = 0; i < existing.size(); ++i) {
          if (existing[i].first != pushed[i].first ||
              std::abs(existing[i].second - pushed[i].second) > tol) {
            same = false;
            break;
          }
        }
      }
      if (!same) {
        throw NotAHomomorphism("witness: full state " + std::to_string(s) +
                               ", action " + std::to_string(a) +
                               " disagrees with an earlier preimage of slot pair (" +
                               std::to_string(z) + ", " + std::to_string(b) + ")");
      }
    }
  }
  for (std::size_t i = 0; i < defined.size(); ++i) {
    if (!defined[i]) {
      throw NotAHomomorphism("phi/alpha not surjective: slot pair " +
                             std::to_string(i) + " has no preimage");
    }
  }
  return slot;
}

ProjectionReport check_projection_property(const FullSpace& space,
                                           const Binding& binding) {
  const auto sigma_group = enumerate_group(space.n());
  const auto sigma_bar_group = enumerate_group(space.k());
  ProjectionReport report;
  for (const Permutation& sigma : sigma_group) {
    for (int s = 0; s < space.n_full_states(); ++s) {
      const int sc = space.scene_of(s);
      const Scene& scene = space.scenes()[static_cast<std::size_t>(sc)];
      const int s_mapped = space.relabel_full_state(sigma, s);
      const int phi_s = binding.phi(space, s);
      const int phi_mapped = binding.phi(space, s_mapped);
      for (int a = 0; a < space.n_full_actions(); ++a) {
        if (!scene.contains(a / 4)) continue;
        const int alpha_sa = binding.alpha(space, s, a);
        const int a_mapped = space.relabel_full_action(sigma, a);
        const int alpha_mapped = binding.alpha(space, s_mapped, a_mapped);
        // candidate from the binding first, then exhaustive search
        bool found = false;
        const Permutation witness = binding.induced_slot_perm(space, sigma, sc);
        if (space.relabel_slot_state(witness, phi_s) == phi_mapped &&
            space.relabel_slot_action(witness, alpha_sa) == alpha_mapped) {
          found = true;
        } else {
          for (const Permutation& sb : sigma_bar_group) {
            if (space.relabel_slot_state(sb, phi_s) == phi_mapped &&
                space.relabel_slot_action(sb, alpha_sa) == alpha_mapped) {
              found = true;
              break;
            }
          }
        }
        if (!found) {
          report.pass = false;
          std::ostringstream os;
          os << "sigma=" << print_cycles(sigma) << " state=" << s << " action=" << a
             << ": no sigma_bar satisfies both conditions";
          report.counterexample = os.str();
          return report;
        }
      }
    }
  }
  return report;
}

double sample_equivariance_error_full(const TabularMdp& table, const FullSpace& space,
                                      const Permutation& sigma, int s, int a, int s2) {
  const Scene& scene = space.scenes()[static_cast<std::size_t>(space.scene_of(s))];
  if (!scene.contains(a / 4)) {
    throw ActionOnAbsentObject("sample action acts on an absent object");
  }
  const double lhs = table.prob(s, a, s2);
  const double rhs = table.prob(space.relabel_full_state(sigma, s),
                                space.relabel_full_action(sigma, a),
                                space.relabel_full_state(sigma, s2));
  return std::abs(lhs - rhs);
}

double sample_equivariance_error_slot(const TabularMdp& table, const FullSpace& space,
                                      const Permutation& sigma_bar, int z, int b,
                                      int z2) {
  const double lhs = table.prob(z, b, z2);
  const double rhs = table.prob(space.relabel_slot_state(sigma_bar, z),
                                space.relabel_slot_action(sigma_bar, b),
                                space.relabel_slot_state(sigma_bar, z2));
  return std::abs(lhs - rhs);
}

namespace {

// Supported next states for (s, a) under sigma: union of the row's support
// and the sigma-pullback of the relabeled row's support.
std::vector<int> supported_next(const TabularMdp& table, const FullSpace& space,
                                const Permutation& sigma, const Permutation& sigma_inv,
                                int s, int a) {
  std::vector<int> out;
  for (const auto& [s2, p] : table.row(s, a)) {
    if (p > 0.0) out.push_back(s2);
  }
  const int ms = space.relabel_full_state(sigma, s);
  const int ma = space.relabel_full_action(sigma, a);
  for (const auto& [s2, p] : table.row(ms, ma)) {
    if (p > 0.0) out.push_back(space.relabel_full_state(sigma_inv, s2));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

double expected_equivariance_error_full(const TabularMdp& table, const FullSpace& space,
                                        const std::vector<Permutation>& group) {
  double sum = 0.0;
  std::int64_t count = 0;
  for (const Permutation& sigma : group) {
    const Permutation sigma_inv = sigma.inverse();
    for (int s = 0; s < table.n_states; ++s) {
      const Scene& scene = space.scenes()[static_cast<std::size_t>(space.scene_of(s))];
      for (int a = 0; a < table.n_actions; ++a) {
        if (!scene.contains(a / 4)) continue;
        for (int s2 : supported_next(table, space, sigma, sigma_inv, s, a)) {
          sum += sample_equivariance_error_full(table, space, sigma, s, a, s2);
          ++count;
        }
      }
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

PropositionReport verify_proposition_scaling(int n, int k, int grid_w, int grid_h,
                                             double eps, double tol) {
  const FullSpace space(n, k, grid_w, grid_h);
  const Binding binding = Binding::canonical(space);
  const auto group = enumerate_group(n);
  PropositionReport report;
  report.n = n;
  report.k = k;
  report.grid_w = grid_w;
  report.grid_h = grid_h;
  report.preimage_count = binom(n, k);
  const double c = static_cast<double>(report.preimage_count);

  // Zero-error law on the exact environment table.
  const TabularMdp env = build_full_mdp(space);
  double max_env_error = 0.0;
  for (const Permutation& sigma : group) {
    const Permutation sigma_inv = sigma.inverse();
    for (int s = 0; s < env.n_states; ++s) {
      const Scene& scene = space.scenes()[static_cast<std::size_t>(space.scene_of(s))];
      for (int a = 0; a < env.n_actions; ++a) {
        if (!scene.contains(a / 4)) continue;
        for (int s2 : supported_next(env, space, sigma, sigma_inv, s, a)) {
          max_env_error = std::max(
              max_env_error, sample_equivariance_error_full(env, space, sigma, s, a, s2));
        }
      }
    }
  }
  report.max_zero_error = max_env_error;
  report.zero_error_pass = max_env_error == 0.0;

  const ProjectionReport proj = check_projection_property(space, binding);
  report.projection_pass = proj.pass;
  if (!proj.pass) {
    report.counterexample = proj.counterexample;
    return report;
  }

  const TabularMdp slot_pert = build_perturbed_slot_mdp(space, eps);

  // Per-sample scan over same-scene supported triples. `boost` selects the
  // even spread (equality family) or the own-scene overweighting (inequality
  // family).
  const auto scan = [&](double boost, bool equality) -> bool {
    const TabularMdp lifted = lift_slot_table(space, slot_pert, binding, boost);
    const TabularMdp induced = induce_slot_model(lifted, space, binding);
    bool pass = true;
    for (const Permutation& sigma : group) {
      const Permutation sigma_inv = sigma.inverse();
      for (int s = 0; s < lifted.n_states; ++s) {
        const int sc = space.scene_of(s);
        const Scene& scene = space.scenes()[static_cast<std::size_t>(sc)];
        const Permutation sigma_bar = binding.induced_slot_perm(space, sigma, sc);
        for (int a = 0; a < lifted.n_actions; ++a) {
          if (!scene.contains(a / 4)) continue;
          const int z = binding.phi(space, s);
          const int b = binding.alpha(space, s, a);
          for (int s2 : supported_next(lifted, space, sigma, sigma_inv, s, a)) {
            if (space.scene_of(s2) != sc) continue;  // same-scene sampling measure
            const double lam_full =
                sample_equivariance_error_full(lifted, space, sigma, s, a, s2);
            const double lam_slot = sample_equivariance_error_slot(
                induced, space, sigma_bar, z, b, binding.phi(space, s2));
            if (equality) {
              const double dev = std::abs(lam_slot - c * lam_full);
              report.max_equality_deviation =
                  std::max(report.max_equality_deviation, dev);
              report.expected_full_error += lam_full;
              report.expected_slot_error += lam_slot;
              ++report.samples_checked;
              if (dev > tol && pass) {
                pass = false;
                std::ostringstream os;
                os << "equality violated: sigma=" << print_cycles(sigma) << " s=" << s
                   << " a=" << a << " s'=" << s2 << " lambda_L=" << lam_full
                   << " lambda_K=" << lam_slot;
                report.counterexample = os.str();
              }
            } else {
              if (lam_slot > c * lam_full + 1e-12 && pass) {
                pass = false;
                std::ostringstream os;
                os << "inequality violated: sigma=" << print_cycles(sigma) << " s=" << s
                   << " a=" << a << " s'=" << s2;
                if (report.counterexample.empty()) report.counterexample = os.str();
              }
            }
          }
        }
      }
    }
    return pass;
  };

  report.equality_pass = scan(0.0, true);
  if (report.samples_checked > 0) {
    report.expected_full_error /= static_cast<double>(report.samples_checked);
    report.expected_slot_error /= static_cast<double>(report.samples_checked);
  }
  report.expectation_pass =
      std::abs(report.expected_slot_error - c * report.expected_full_error) <= tol;
  report.inequality_pass = scan(0.5, false);
  return report;
}

void require_proposition_scaling(const PropositionReport& report) {
  if (!report.ok()) {
    throw ScalingViolation(report.counterexample.empty() ? "proposition check failed"
                                                         : report.counterexample);
  }
}

std::string PropositionReport::to_json() const {
  nlohmann::json j;
  j["instance"] = {{"n", n}, {"k", k}, {"grid_w", grid_w}, {"grid_h", grid_h}};
  j["C"] = preimage_count;
  j["max_ratio_deviation"] = max_equality_deviation;
  j["projection_property"] = projection_pass ? "pass" : "fail";
  j["equality_per_sample"] = equality_pass ? "pass" : "fail";
  j["inequality_per_sample"] = inequality_pass ? "pass" : "fail";
  j["expectation_form"] = expectation_pass ? "pass" : "fail";
  j["zero_error_law"] = zero_error_pass ? "pass" : "fail";
  j["expected_full_error"] = expected_full_error;
  j["expected_slot_error"] = expected_slot_error;
  j["samples_checked"] = samples_checked;
  j["sampling_measure"] = "uniform over same-scene supported (s,a,s') triples";
  if (!counterexample.empty()) j["counterexample"] = counterexample;
  return j.dump(2);
}

SceneIsomorphism scene_isomorphism(const FullSpace& space, const TabularMdp& full_table,
                                   const Binding& binding, int scene_i_idx,
                                   int scene_j_idx) {
  SceneIsomorphism iso;
  iso.scene_from = scene_j_idx;
  iso.scene_to = scene_i_idx;
  const Scene& scene_i = space.scenes()[static_cast<std::size_t>(scene_i_idx)];
  const Scene& scene_j = space.scenes()[static_cast<std::size_t>(scene_j_idx)];
  const std::vector<int>& assign_i =
      binding.state_assignment[static_cast<std::size_t>(scene_i_idx)];
  const std::vector<int>& assign_j =
      binding.state_assignment[static_cast<std::size_t>(scene_j_idx)];

  // rank (in scene j) -> rank (in scene i) through the shared slot
  std::vector<int> rank_map(static_cast<std::size_t>(space.k()));
  for (int r = 0; r < space.k(); ++r) {
    const int slot = assign_j[static_cast<std::size_t>(r)];
    const auto it = std::find(assign_i.begin(), assign_i.end(), slot);
    rank_map[static_cast<std::size_t>(r)] = static_cast<int>(it - assign_i.begin());
  }

  iso.state_map.assign(static_cast<std::size_t>(space.n_full_states()), -1);
  for (int pl = 0; pl < space.n_slot_states(); ++pl) {
    const int s = space.full_index(scene_j_idx, pl);
    const std::vector<int>& cells = space.slot_states()[static_cast<std::size_t>(pl)];
    std::vector<int> mapped(static_cast<std::size_t>(space.k()));
    for (int r = 0; r < space.k(); ++r) {
      mapped[static_cast<std::size_t>(rank_map[static_cast<std::size_t>(r)])] =
          cells[static_cast<std::size_t>(r)];
    }
    iso.state_map[static_cast<std::size_t>(s)] =
        space.full_index(scene_i_idx, space.slot_state_index(mapped));
  }

  iso.action_map.assign(static_cast<std::size_t>(space.n_full_actions()), -1);
  for (int r = 0; r < space.k(); ++r) {
    const int obj_j = scene_j.object_ids[static_cast<std::size_t>(r)];
    const int obj_i =
        scene_i.object_ids[static_cast<std::size_t>(rank_map[static_cast<std::size_t>(r)])];
    for (int p = 0; p < 4; ++p) {
      iso.action_map[static_cast<std::size_t>(4 * obj_j + p)] = 4 * obj_i + p;
    }
  }

  // isomorphism check: the mapped transition commutes with stepping
  for (int pl = 0; pl < space.n_slot_states(); ++pl) {
    const int s = space.full_index(scene_j_idx, pl);
    for (int a = 0; a < space.n_full_actions(); ++a) {
      if (!scene_j.contains(a / 4)) continue;
      const auto& row_j = full_table.row(s, a);
      const int s_i = iso.state_map[static_cast<std::size_t>(s)];
      const int a_i = iso.action_map[static_cast<std::size_t>(a)];
      const auto& row_i = full_table.row(s_i, a_i);
      if (row_j.size() != row_i.size()) {
        throw NotIsomorphic("support size mismatch");
      }
      for (const auto& [s2, p] : row_j) {
        const int mapped = iso.state_map[static_cast<std::size_t>(s2)];
        if (mapped < 0 || std::abs(full_table.prob(s_i, a_i, mapped) - p) > 1e-12) {
          throw NotIsomorphic("transitions do not commute at state " +
                              std::to_string(s) + ", action " + std::to_string(a));
        }
      }
    }
  }
  return iso;
}

}  // namespace oolib
