#pragma once

#include <string>

#include "oolib/models.hpp"

namespace oolib {

// Run configuration, loaded from JSON. Flags may override individual keys;
// every output directory receives an echo of the effective config.
struct RunConfig {
  EnvSpec env;

  struct Split {
    int n_train_scenes = 20;
    int n_eval_scenes = 20;
  } split;

  struct Data {
    int train_episodes = 200;
    int ep_len = 50;
    int eval_episodes = 500;
    int eval_ep_len = 10;
  } data;

  struct Model {
    ModelKind kind = ModelKind::Howm;
    Hyper hyper;
  } model;

  struct Train {
    int epochs = 16;
    int batch = 64;
    double lr = 2e-3;
    int restarts = 2;
    std::uint64_t seed = 1;
  } train;

  std::uint64_t seed = 1;  // data-generation seed
  std::vector<int> horizons{1, 5};

  std::string to_json() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Cross-module constraint checks (scene sizes, split feasibility, grid
// capacity); throws ConfigError.
void validate_config(const RunConfig& cfg);

}  // namespace oolib
