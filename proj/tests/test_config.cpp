#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oolib/config.hpp"

using namespace oolib;

TEST_CASE("config: defaults, parse, echo round trip") {
  const RunConfig defaults;
  const RunConfig parsed = parse_config("{}");
  CHECK(parsed.env.n == defaults.env.n);
  CHECK(parsed.model.kind == ModelKind::Howm);

  const char* text = R"({
    "env": {"variant": "rush_hour", "n": 8, "k": 3, "grid_w": 4, "grid_h": 4},
    "split": {"n_train_scenes": 12, "n_eval_scenes": 6},
    "data": {"train_episodes": 10, "ep_len": 5, "eval_episodes": 4, "eval_ep_len": 5},
    "model": {"kind": "sigma_k_copyall", "hyper": {"d_att": 4, "eps_pinv": 0.1}},
    "train": {"epochs": 3, "batch": 32, "lr": 0.001, "restarts": 2, "seed": 9},
    "seed": 4,
    "horizons": [1, 3]
  })";
  const RunConfig cfg = parse_config(text);
  CHECK(cfg.env.variant == Variant::RushHour);
  CHECK(cfg.env.n == 8);
  CHECK(cfg.model.kind == ModelKind::SigmaKCopyAll);
  CHECK(cfg.model.hyper.d_att == 4);
  CHECK(cfg.model.hyper.eps_pinv == doctest::Approx(0.1));
  CHECK(cfg.model.hyper.d_slot == 16);  // untouched default
  CHECK(cfg.train.restarts == 2);
  CHECK(cfg.horizons == std::vector<int>{1, 3});

  // echo parses back to the same values
  const RunConfig again = parse_config(cfg.to_json());
  CHECK(again.env.n == cfg.env.n);
  CHECK(again.train.seed == cfg.train.seed);
  CHECK(again.model.hyper.eps_pinv == cfg.model.hyper.eps_pinv);
  CHECK(again.horizons == cfg.horizons);
}

TEST_CASE("config: constraint validation") {
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"env": {"variant": "pixels"}})"), ConfigError);
  // K >= N
  CHECK_THROWS_AS(parse_config(R"({"env": {"n": 4, "k": 4}})"), ConfigError);
  // more scenes than C(N,K)
  CHECK_THROWS_AS(
      parse_config(R"({"env": {"n": 4, "k": 2}, "split": {"n_train_scenes": 5, "n_eval_scenes": 3}})"),
      ConfigError);
  // train scenes cannot cover the library
  CHECK_THROWS_AS(
      parse_config(R"({"env": {"n": 10, "k": 2}, "split": {"n_train_scenes": 4, "n_eval_scenes": 2}})"),
      ConfigError);
  // grid too small for K
  CHECK_THROWS_AS(
      parse_config(R"({"env": {"n": 10, "k": 5, "grid_w": 2, "grid_h": 2}})"),
      ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"train": {"epochs": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"horizons": [0]})"), ConfigError);
  CHECK_THROWS_AS(load_config("/tmp/oolib_missing_config.json"), ConfigError);
}
