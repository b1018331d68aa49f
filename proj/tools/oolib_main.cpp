#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "oolib/config.hpp"
#include "oolib/dataset.hpp"
#include "oolib/eval.hpp"
#include "oolib/models.hpp"
#include "oolib/tabular.hpp"

namespace fs = std::filesystem;
using namespace oolib;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitVerification = 5;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  write_text(dir / "config.json", cfg.to_json() + "\n");
}

std::string split_to_json(const SceneSplit& split) {
  nlohmann::json j;
  nlohmann::json train = nlohmann::json::array();
  for (const Scene& s : split.train_scenes) train.push_back(s.object_ids);
  nlohmann::json eval = nlohmann::json::array();
  for (const Scene& s : split.eval_scenes) eval.push_back(s.object_ids);
  j["train_scenes"] = std::move(train);
  j["eval_scenes"] = std::move(eval);
  return j.dump(2);
}

SceneSplit split_from_json(const std::string& text) {
  SceneSplit split;
  const nlohmann::json j = nlohmann::json::parse(text);
  for (const auto& ids : j.at("train_scenes")) {
    split.train_scenes.push_back(Scene{ids.get<std::vector<int>>()});
  }
  for (const auto& ids : j.at("eval_scenes")) {
    split.eval_scenes.push_back(Scene{ids.get<std::vector<int>>()});
  }
  return split;
}

SceneSplit read_split(const fs::path& data_dir) {
  std::ifstream in(data_dir / "split.json");
  if (!in) throw DataError("missing " + (data_dir / "split.json").string());
  return split_from_json(std::string((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>()));
}

Dataset read_corpus(const RunConfig& cfg, const fs::path& data_dir, const char* name) {
  const fs::path plain = data_dir / (std::string(name) + ".jsonl");
  const fs::path gz = data_dir / (std::string(name) + ".jsonl.gz");
  const fs::path path = fs::exists(plain) ? plain : gz;
  if (!fs::exists(path)) throw DataError("missing corpus " + plain.string());
  return Dataset::build(cfg.env, read_jsonl(path.string()));
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Library lib = cfg.env.make_library();
  const SceneSplit split = sample_scene_split(lib, cfg.env.k, cfg.split.n_train_scenes,
                                              cfg.split.n_eval_scenes, cfg.seed);
  const auto train = generate_episodes(lib, split.train_scenes, cfg.data.train_episodes,
                                       cfg.data.ep_len, cfg.env.grid_w, cfg.env.grid_h,
                                       derive_seed(cfg.seed, 1));
  const auto eval = generate_episodes(lib, split.eval_scenes, cfg.data.eval_episodes,
                                      cfg.data.eval_ep_len, cfg.env.grid_w,
                                      cfg.env.grid_h, derive_seed(cfg.seed, 2));
  // self-check before anything is written
  validate_episodes(train, lib, cfg.env.grid_w, cfg.env.grid_h);
  validate_episodes(eval, lib, cfg.env.grid_w, cfg.env.grid_h);

  const fs::path dir(out_dir);
  write_text(dir / "split.json", split_to_json(split) + "\n");
  write_jsonl(train, (dir / "train.jsonl").string());
  write_jsonl(eval, (dir / "eval.jsonl").string());
  echo_config(cfg, dir);

  std::cout << "scenes: train=" << split.train_scenes.size()
            << " eval=" << split.eval_scenes.size() << "\n"
            << "episodes: train=" << train.size() << " x " << cfg.data.ep_len
            << ", eval=" << eval.size() << " x " << cfg.data.eval_ep_len << "\n"
            << "moved fraction: train=" << moved_fraction(train)
            << " eval=" << moved_fraction(eval) << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir,
              const std::string& out_dir, bool force) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const fs::path ckpt = dir / "model.ckpt";
  if (fs::exists(ckpt) && !force) {
    throw ConfigError(ckpt.string() + " exists; pass --force to overwrite");
  }
  const SceneSplit split = read_split(data_dir);
  const Dataset train_ds = read_corpus(cfg, data_dir, "train");
  auto model = make_model(cfg.model.kind, cfg.env, cfg.model.hyper, split.train_scenes,
                          cfg.train.seed);
  TrainConfig tcfg;
  tcfg.epochs = cfg.train.epochs;
  tcfg.batch = cfg.train.batch;
  tcfg.lr = cfg.train.lr;
  tcfg.restarts = cfg.train.restarts;
  tcfg.seed = cfg.train.seed;
  tcfg.metrics_csv_path = (dir / "metrics.csv").string();
  const TrainLog log = train_model(*model, train_ds, tcfg);
  save_model(ckpt.string(), *model, cfg.train.seed);
  echo_config(cfg, dir);
  std::cout << "epochs: " << log.epoch_loss.size() << "\n"
            << "final loss: " << log.epoch_loss.back() << "\n"
            << "final train mrr (1-step probe): " << log.epoch_mrr_1step.back() << "\n"
            << "checkpoint: " << ckpt.string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint,
                 const std::string& data_dir, const std::vector<int>& horizons,
                 const std::string& out_dir) {
  auto model = load_model(checkpoint);
  const Dataset train_ds = read_corpus(cfg, data_dir, "train");
  const Dataset eval_ds = read_corpus(cfg, data_dir, "eval");
  EvalConfig ecfg;
  ecfg.horizons = horizons.empty() ? cfg.horizons : horizons;
  const MetricsReport train = evaluate(*model, train_ds, ecfg, "train");
  const MetricsReport eval = evaluate(*model, eval_ds, ecfg, "eval");
  const std::string method = kind_name(model->kind());
  const std::string csv = metrics_csv(method, model->env(), train, eval);
  const std::string json = metrics_json(method, model->env(), train, eval);
  std::cout << csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "metrics.csv", csv);
    write_text(fs::path(out_dir) / "metrics.json", json + "\n");
    echo_config(cfg, fs::path(out_dir));
  }
  return kExitOk;
}

int cmd_verify_prop(int n, int k, const std::string& grid, double eps) {
  int grid_w = 0, grid_h = 0;
  if (std::sscanf(grid.c_str(), "%dx%d", &grid_w, &grid_h) != 2) {
    throw ConfigError("--grid expects WxH, e.g. 2x2");
  }
  const PropositionReport report = verify_proposition_scaling(n, k, grid_w, grid_h, eps);
  std::cout << report.to_json() << "\n";
  return report.ok() ? kExitOk : kExitVerification;
}

int cmd_render(const RunConfig& cfg, const std::vector<int>& scene_ids,
               std::uint64_t seed, const std::string& out_dir) {
  const Library lib = cfg.env.make_library();
  const Scene scene = make_scene(scene_ids, lib.size());
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  EnvState state = reset(lib, scene, cfg.env.grid_w, cfg.env.grid_h, seed);
  Rng rng(derive_seed(seed, 1));
  const auto dump = [&](int frame, const EnvState& s) {
    const auto ppm = render_ppm(s, lib);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.ppm", frame);
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(ppm.data()),
              static_cast<std::streamsize>(ppm.size()));
  };
  dump(0, state);
  for (int t = 0; t < cfg.data.ep_len; ++t) {
    StepResult result{state, false};
    for (int attempt = 0; attempt < 10; ++attempt) {
      const ActionId action{
          scene.object_ids[static_cast<std::size_t>(rng.below(scene.k()))],
          rng.below(4)};
      result = step(state, action, lib);
      if (result.moved) break;
    }
    state = result.state;
    dump(t + 1, state);
  }
  echo_config(cfg, dir);
  std::cout << "frames: " << cfg.data.ep_len + 1 << " -> " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object Library world-model toolkit"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (also: OOLIB_THREADS)");

  std::string config_path, out_dir, data_dir, checkpoint, grid = "2x2", scene_csv;
  std::vector<int> horizons;
  bool force = false;
  int n = 4, k = 2;
  double eps = 1e-3;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;

  CLI::App* gen = app.add_subcommand("gen-data", "generate split and corpora");
  gen->add_option("--config", config_path)->required();
  gen->add_option("--out", out_dir)->required();
  gen->add_option("--seed", seed_flag)->each([&](const std::string&) { seed_set = true; });

  CLI::App* train = app.add_subcommand("train", "train a model on a corpus");
  train->add_option("--config", config_path)->required();
  train->add_option("--data", data_dir)->required();
  train->add_option("--out", out_dir)->required();
  train->add_flag("--force", force, "overwrite an existing checkpoint");

  CLI::App* evalc = app.add_subcommand("evaluate", "rank-based dynamics evaluation");
  evalc->add_option("--config", config_path)->required();
  evalc->add_option("--checkpoint", checkpoint)->required();
  evalc->add_option("--data", data_dir)->required();
  evalc->add_option("--horizons", horizons)->delimiter(',');
  evalc->add_option("--out", out_dir);

  CLI::App* verify = app.add_subcommand("verify-prop", "exact scaling-law verification");
  verify->add_option("--n", n);
  verify->add_option("--k", k);
  verify->add_option("--grid", grid);
  verify->add_option("--eps", eps);

  CLI::App* render = app.add_subcommand("render", "write PPM frames of a random episode");
  render->add_option("--config", config_path)->required();
  render->add_option("--scene", scene_csv)->required();
  render->add_option("--seed", seed_flag)->each([&](const std::string&) { seed_set = true; });
  render->add_option("--out", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) {
    setenv("OOLIB_THREADS", std::to_string(threads).c_str(), 1);
  }

  try {
    if (gen->parsed()) {
      RunConfig cfg = load_config(config_path);
      if (seed_set) cfg.seed = seed_flag;
      return cmd_gen_data(cfg, out_dir);
    }
    if (train->parsed()) {
      return cmd_train(load_config(config_path), data_dir, out_dir, force);
    }
    if (evalc->parsed()) {
      return cmd_evaluate(load_config(config_path), checkpoint, data_dir, horizons,
                          out_dir);
    }
    if (verify->parsed()) {
      return cmd_verify_prop(n, k, grid, eps);
    }
    if (render->parsed()) {
      RunConfig cfg = load_config(config_path);
      std::vector<int> ids;
      std::stringstream ss(scene_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) ids.push_back(std::stoi(tok));
      return cmd_render(cfg, ids, seed_set ? seed_flag : cfg.seed, out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TooLarge& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const OutOfRange& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NonFinite& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const SingularSystem& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ScalingViolation& e) {
    std::cerr << "verification failure: " << e.what() << "\n";
    return kExitVerification;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
