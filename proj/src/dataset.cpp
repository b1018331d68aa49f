#include "oolib/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>
#include <zlib.h>

#include "oolib/perm.hpp"

namespace oolib {

namespace {

Scene random_scene(const Library& lib, int k, Rng& rng) {
  std::vector<int> ids = rng.sample_without_replacement(lib.size(), k);
  std::sort(ids.begin(), ids.end());
  return Scene{std::move(ids)};
}

bool frequency_ok(const std::vector<Scene>& scenes, int n, int k) {
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  for (const Scene& s : scenes) {
    for (int id : s.object_ids) ++counts[static_cast<std::size_t>(id)];
  }
  const double target = static_cast<double>(scenes.size()) * k / n;
  const int lo = static_cast<int>(std::floor(0.75 * target));
  const int hi = static_cast<int>(std::ceil(1.25 * target));
  for (int c : counts) {
    if (c < lo || c > hi) return false;
  }
  return true;
}

bool covers_library(const std::vector<Scene>& scenes, int n) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const Scene& s : scenes) {
    for (int id : s.object_ids) seen[static_cast<std::size_t>(id)] = 1;
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

}  // namespace

SceneSplit sample_scene_split(const Library& lib, int k, int n_train, int n_eval,
                              std::uint64_t seed, int max_attempts) {
  const int n = lib.size();
  if (k <= 1 || k >= n) throw ConfigError("scene size must satisfy 1 < K < N");
  const std::int64_t total = binom(n, k);
  if (n_train < 1 || n_eval < 0 || n_train + n_eval > total) {
    throw ConfigError("requested more scenes than C(N,K) = " + std::to_string(total));
  }
  if (static_cast<std::int64_t>(n_train) * k < n) {
    throw ConfigError("n_train * K < N: train scenes cannot cover the library");
  }
  Rng rng(derive_seed(seed, 0x5117));
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::set<std::vector<int>> taken;
    std::vector<Scene> train;
    int guard = 0;
    while (static_cast<int>(train.size()) < n_train && guard < 100 * n_train + 1000) {
      ++guard;
      Scene s = random_scene(lib, k, rng);
      if (taken.insert(s.object_ids).second) train.push_back(std::move(s));
    }
    if (static_cast<int>(train.size()) < n_train) continue;
    if (!covers_library(train, n) || !frequency_ok(train, n, k)) continue;

    std::vector<Scene> eval;
    guard = 0;
    while (static_cast<int>(eval.size()) < n_eval && guard < 100 * n_eval + 1000) {
      ++guard;
      Scene s = random_scene(lib, k, rng);
      if (taken.insert(s.object_ids).second) eval.push_back(std::move(s));
    }
    if (static_cast<int>(eval.size()) < n_eval) continue;
    if (n_eval > 0 && !frequency_ok(eval, n, k)) continue;
    return SceneSplit{std::move(train), std::move(eval)};
  }
  throw Infeasible("split constraints not met within attempt budget");
}

std::vector<Episode> generate_episodes(const Library& lib, const std::vector<Scene>& scenes,
                                       int n_episodes, int ep_len, int grid_w, int grid_h,
                                       std::uint64_t seed) {
  if (scenes.empty()) throw ConfigError("no scenes to generate from");
  if (ep_len < 2) throw ConfigError("episodes need at least 2 steps");
  std::vector<Episode> episodes(static_cast<std::size_t>(n_episodes));
  // per-episode derived seeds keep parallel generation deterministic
  parallel_for(n_episodes, thread_cap(), [&](int e) {
    const Scene& scene = scenes[static_cast<std::size_t>(e) % scenes.size()];
    const std::uint64_t ep_seed = derive_seed(seed, static_cast<std::uint64_t>(e));
    Episode ep;
    ep.scene = scene;
    ep.seed = ep_seed;
    EnvState state = reset(lib, scene, grid_w, grid_h, ep_seed);
    Rng rng(derive_seed(ep_seed, 1));
    ep.steps.reserve(static_cast<std::size_t>(ep_len));
    for (int t = 0; t < ep_len; ++t) {
      StepRec rec;
      rec.obs = observe(state, lib, rng);
      StepResult result{state, false};
      for (int try_i = 0; try_i < 10; ++try_i) {
        rec.action = ActionId{
            scene.object_ids[static_cast<std::size_t>(rng.below(scene.k()))],
            rng.below(4)};
        result = step(state, rec.action, lib);
        if (result.moved) break;
      }
      rec.moved = result.moved;
      state = result.state;
      ep.steps.push_back(std::move(rec));
    }
    episodes[static_cast<std::size_t>(e)] = std::move(ep);
  });
  return episodes;
}

double moved_fraction(const std::vector<Episode>& episodes) {
  std::int64_t moved = 0, total = 0;
  for (const Episode& ep : episodes) {
    for (const StepRec& rec : ep.steps) {
      moved += rec.moved ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(moved) / static_cast<double>(total);
}

EnvState state_from_obs(const Observation& obs, const Scene& scene, Variant variant,
                        int grid_w, int grid_h) {
  EnvState state;
  state.scene = scene;
  state.variant = variant;
  state.grid_w = grid_w;
  state.grid_h = grid_h;
  state.positions.resize(scene.object_ids.size());
  for (int i = 0; i < obs.k(); ++i) {
    const int id = obs.slot_order[static_cast<std::size_t>(i)];
    const auto it = std::lower_bound(scene.object_ids.begin(), scene.object_ids.end(), id);
    if (it == scene.object_ids.end() || *it != id) {
      throw DataError("observation refers to an object outside its scene");
    }
    state.positions[static_cast<std::size_t>(it - scene.object_ids.begin())] =
        feature_position(obs.slot_features[static_cast<std::size_t>(i)], grid_w, grid_h);
  }
  return state;
}

void validate_episodes(const std::vector<Episode>& episodes, const Library& lib,
                       int grid_w, int grid_h) {
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const StepRec& rec = ep.steps[t];
      const EnvState state =
          state_from_obs(rec.obs, ep.scene, lib.variant(), grid_w, grid_h);
      const StepResult result = step(state, rec.action, lib);
      if (result.moved != rec.moved) {
        throw DataError("episode " + std::to_string(e) + " step " + std::to_string(t) +
                        ": moved flag does not replay");
      }
      if (t + 1 < ep.steps.size()) {
        const EnvState next = state_from_obs(ep.steps[t + 1].obs, ep.scene,
                                             lib.variant(), grid_w, grid_h);
        if (!(next.positions == result.state.positions)) {
          throw DataError("episode " + std::to_string(e) + " step " + std::to_string(t) +
                          ": next observation does not replay");
        }
      }
    }
  }
}

namespace {

nlohmann::json episode_to_json(const Episode& ep) {
  nlohmann::json steps = nlohmann::json::array();
  for (const StepRec& rec : ep.steps) {
    steps.push_back({{"slots", rec.obs.slot_features},
                     {"order", rec.obs.slot_order},
                     {"action", {{"obj", rec.action.object_id}, {"prim", rec.action.primitive}}},
                     {"moved", rec.moved}});
  }
  return nlohmann::json{
      {"scene", ep.scene.object_ids}, {"seed", ep.seed}, {"steps", std::move(steps)}};
}

Episode episode_from_json(const nlohmann::json& j) {
  Episode ep;
  ep.scene.object_ids = j.at("scene").get<std::vector<int>>();
  ep.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("steps")) {
    StepRec rec;
    rec.obs.slot_features = s.at("slots").get<std::vector<std::vector<double>>>();
    rec.obs.slot_order = s.at("order").get<std::vector<int>>();
    rec.action.object_id = s.at("action").at("obj").get<int>();
    rec.action.primitive = s.at("action").at("prim").get<int>();
    rec.moved = s.at("moved").get<bool>();
    ep.steps.push_back(std::move(rec));
  }
  return ep;
}

bool has_gz_suffix(const std::string& path) {
  return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

}  // namespace

void write_jsonl(const std::vector<Episode>& episodes, const std::string& path) {
  std::string buffer;
  for (const Episode& ep : episodes) {
    buffer += episode_to_json(ep).dump();
    buffer += '\n';
  }
  if (has_gz_suffix(path)) {
    gzFile gz = gzopen(path.c_str(), "wb");
    if (gz == nullptr) throw IoError("cannot open " + path + " for writing");
    const int written = gzwrite(gz, buffer.data(), static_cast<unsigned>(buffer.size()));
    gzclose(gz);
    if (written != static_cast<int>(buffer.size())) throw IoError("short gzip write");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw IoError("short write to " + path);
}

std::vector<Episode> read_jsonl(const std::string& path) {
  std::string buffer;
  if (has_gz_suffix(path)) {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (gz == nullptr) throw IoError("cannot open " + path);
    char chunk[1 << 16];
    int got;
    while ((got = gzread(gz, chunk, sizeof(chunk))) > 0) {
      buffer.append(chunk, static_cast<std::size_t>(got));
    }
    gzclose(gz);
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    buffer.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::vector<Episode> episodes;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < buffer.size()) {
    std::size_t end = buffer.find('\n', pos);
    if (end == std::string::npos) end = buffer.size();
    ++line_no;
    const std::string_view line(buffer.data() + pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    try {
      episodes.push_back(episode_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return episodes;
}

Dataset Dataset::build(EnvSpec env, std::vector<Episode> eps) {
  Dataset ds;
  ds.env = env;
  ds.episodes = std::move(eps);
  std::map<std::vector<int>, int> scene_lookup;
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    const Scene& scene = ds.episodes[e].scene;
    auto [it, inserted] = scene_lookup.try_emplace(scene.object_ids,
                                                   static_cast<int>(ds.scenes.size()));
    if (inserted) {
      ds.scenes.push_back(scene);
      ds.scene_episodes.emplace_back();
    }
    ds.episode_scene.push_back(it->second);
    ds.scene_episodes[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(e));
    for (int t = 0; t + 1 < static_cast<int>(ds.episodes[e].steps.size()); ++t) {
      ds.transitions.emplace_back(static_cast<int>(e), t);
    }
  }
  return ds;
}

}  // namespace oolib
