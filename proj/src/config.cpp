#include "oolib/config.hpp"

#include <fstream>

#include <json.hpp>

#include "oolib/perm.hpp"

namespace oolib {

namespace {

Variant variant_from_name(const std::string& name) {
  if (name == "shapes") return Variant::Shapes;
  if (name == "rush_hour") return Variant::RushHour;
  throw ConfigError("unknown env variant: " + name);
}

}  // namespace

std::string RunConfig::to_json() const {
  nlohmann::json j;
  j["env"] = {{"variant", env.variant == Variant::Shapes ? "shapes" : "rush_hour"},
              {"n", env.n},
              {"k", env.k},
              {"grid_w", env.grid_w},
              {"grid_h", env.grid_h}};
  j["split"] = {{"n_train_scenes", split.n_train_scenes},
                {"n_eval_scenes", split.n_eval_scenes}};
  j["data"] = {{"train_episodes", data.train_episodes},
               {"ep_len", data.ep_len},
               {"eval_episodes", data.eval_episodes},
               {"eval_ep_len", data.eval_ep_len}};
  j["model"] = {{"kind", kind_name(model.kind)},
                {"hyper",
                 {{"d_slot", model.hyper.d_slot},
                  {"d_att", model.hyper.d_att},
                  {"hidden", model.hyper.hidden},
                  {"flat_hidden", model.hyper.flat_hidden},
                  {"margin", model.hyper.margin},
                  {"eps_pinv", model.hyper.eps_pinv},
                  {"same_scene_negative_frac", model.hyper.same_scene_negative_frac}}}};
  j["train"] = {{"epochs", train.epochs},
                {"batch", train.batch},
                {"lr", train.lr},
                {"restarts", train.restarts},
                {"seed", train.seed}};
  j["seed"] = seed;
  j["horizons"] = horizons;
  return j.dump(2);
}

RunConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    if (j.contains("env")) {
      const auto& e = j.at("env");
      if (e.contains("variant")) cfg.env.variant = variant_from_name(e.at("variant"));
      cfg.env.n = e.value("n", cfg.env.n);
      cfg.env.k = e.value("k", cfg.env.k);
      cfg.env.grid_w = e.value("grid_w", cfg.env.grid_w);
      cfg.env.grid_h = e.value("grid_h", cfg.env.grid_h);
    }
    if (j.contains("split")) {
      cfg.split.n_train_scenes = j.at("split").value("n_train_scenes", cfg.split.n_train_scenes);
      cfg.split.n_eval_scenes = j.at("split").value("n_eval_scenes", cfg.split.n_eval_scenes);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      cfg.data.train_episodes = d.value("train_episodes", cfg.data.train_episodes);
      cfg.data.ep_len = d.value("ep_len", cfg.data.ep_len);
      cfg.data.eval_episodes = d.value("eval_episodes", cfg.data.eval_episodes);
      cfg.data.eval_ep_len = d.value("eval_ep_len", cfg.data.eval_ep_len);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      if (m.contains("kind")) cfg.model.kind = kind_from_name(m.at("kind"));
      if (m.contains("hyper")) {
        const auto& h = m.at("hyper");
        Hyper& hy = cfg.model.hyper;
        hy.d_slot = h.value("d_slot", hy.d_slot);
        hy.d_att = h.value("d_att", hy.d_att);
        hy.hidden = h.value("hidden", hy.hidden);
        hy.flat_hidden = h.value("flat_hidden", hy.flat_hidden);
        hy.margin = h.value("margin", hy.margin);
        hy.eps_pinv = h.value("eps_pinv", hy.eps_pinv);
        hy.same_scene_negative_frac =
            h.value("same_scene_negative_frac", hy.same_scene_negative_frac);
      }
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.batch = t.value("batch", cfg.train.batch);
      cfg.train.lr = t.value("lr", cfg.train.lr);
      cfg.train.restarts = t.value("restarts", cfg.train.restarts);
      cfg.train.seed = t.value("seed", cfg.train.seed);
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("horizons")) cfg.horizons = j.at("horizons").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_config(text);
}

void validate_config(const RunConfig& cfg) {
  const EnvSpec& env = cfg.env;
  if (env.n < 3) throw ConfigError("library needs at least 3 objects");
  if (env.k <= 1 || env.k >= env.n) throw ConfigError("scene size must satisfy 1 < K < N");
  if (env.grid_w < 1 || env.grid_h < 1) throw ConfigError("grid dimensions must be positive");
  if (env.k > env.grid_w * env.grid_h) throw ConfigError("K exceeds grid capacity");
  const std::int64_t total = binom(env.n, env.k);
  if (cfg.split.n_train_scenes < 1) throw ConfigError("need at least one train scene");
  if (cfg.split.n_train_scenes + cfg.split.n_eval_scenes > total) {
    throw ConfigError("n_train_scenes + n_eval_scenes exceeds C(N,K) = " +
                      std::to_string(total));
  }
  if (static_cast<std::int64_t>(cfg.split.n_train_scenes) * env.k < env.n) {
    throw ConfigError("train scenes cannot cover the library: n_train * K < N");
  }
  if (cfg.data.ep_len < 2 || cfg.data.eval_ep_len < 2) {
    throw ConfigError("episodes need at least 2 steps");
  }
  if (cfg.train.epochs < 1 || cfg.train.batch < 1 || cfg.train.restarts < 1) {
    throw ConfigError("train settings must be positive");
  }
  if (cfg.train.lr <= 0.0) throw ConfigError("learning rate must be positive");
  for (int h : cfg.horizons) {
    if (h < 1) throw ConfigError("horizons must be positive");
  }
}

}  // namespace oolib
