#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oolib/env.hpp"

namespace oolib {

struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EnvSpec {
  Variant variant = Variant::Shapes;
  int n = 10;
  int k = 5;
  int grid_w = 5;
  int grid_h = 5;

  Library make_library() const {
    return variant == Variant::Shapes ? Library::shapes(n) : Library::rush_hour(n);
  }
};

struct SceneSplit {
  std::vector<Scene> train_scenes;
  std::vector<Scene> eval_scenes;
};

// Disjoint train/eval scene sets: train covers the whole library and both
// sides keep per-object frequency within +-25% of uniform (integer-relaxed);
// resamples until the constraints hold or attempts run out.
SceneSplit sample_scene_split(const Library& lib, int k, int n_train, int n_eval,
                              std::uint64_t seed, int max_attempts = 10000);

struct StepRec {
  Observation obs;  // drawn before the action, fresh random slot order
  ActionId action;
  bool moved = false;
};

struct Episode {
  Scene scene;
  std::uint64_t seed = 0;
  std::vector<StepRec> steps;

  int n_transitions() const { return std::max(0, static_cast<int>(steps.size()) - 1); }
};

// Episodes cycle through the given scenes. Actions are uniform over present
// objects x 4 primitives, re-sampled up to 10 times when blocked so most
// recorded transitions move an object.
std::vector<Episode> generate_episodes(const Library& lib, const std::vector<Scene>& scenes,
                                       int n_episodes, int ep_len, int grid_w, int grid_h,
                                       std::uint64_t seed);

double moved_fraction(const std::vector<Episode>& episodes);

// Full corpus replay: every recorded transition must agree with step().
void validate_episodes(const std::vector<Episode>& episodes, const Library& lib,
                       int grid_w, int grid_h);

// One JSON object per line:
//   {"scene":[ids],"seed":s,"steps":[{"slots":[[...]],"order":[ids],
//    "action":{"obj":o,"prim":p},"moved":m}]}
// A ".gz" suffix selects the gzip-compressed variant.
void write_jsonl(const std::vector<Episode>& episodes, const std::string& path);
std::vector<Episode> read_jsonl(const std::string& path);

// Reconstructs the grid state a recorded observation describes.
EnvState state_from_obs(const Observation& obs, const Scene& scene, Variant variant,
                        int grid_w, int grid_h);

// Transition-indexed view used by training and evaluation.
struct Dataset {
  EnvSpec env;
  std::vector<Episode> episodes;
  std::vector<Scene> scenes;                     // unique scenes, sorted by first use
  std::vector<int> episode_scene;                // episode -> index into scenes
  std::vector<std::vector<int>> scene_episodes;  // scene -> episode indices
  std::vector<std::pair<int, int>> transitions;  // (episode, t) with t+1 valid

  static Dataset build(EnvSpec env, std::vector<Episode> eps);
};

}  // namespace oolib
