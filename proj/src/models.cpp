#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "oolib/baselines.hpp"
#include "oolib/checkpoint.hpp"
#include "oolib/howm.hpp"
#include "oolib/models.hpp"

namespace oolib {

std::string kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Howm: return "howm";
    case ModelKind::ExactSigmaN: return "exact_sigma_n";
    case ModelKind::SigmaKNoBind: return "sigma_k_nobind";
    case ModelKind::SigmaKCopyAll: return "sigma_k_copyall";
    case ModelKind::FlatMlp: return "flat_mlp";
  }
  throw ConfigError("unknown model kind");
}

ModelKind kind_from_name(const std::string& name) {
  if (name == "howm") return ModelKind::Howm;
  if (name == "exact_sigma_n") return ModelKind::ExactSigmaN;
  if (name == "sigma_k_nobind") return ModelKind::SigmaKNoBind;
  if (name == "sigma_k_copyall") return ModelKind::SigmaKCopyAll;
  if (name == "flat_mlp") return ModelKind::FlatMlp;
  throw ConfigError("unknown model kind: " + name);
}

// ---------------------------------------------------------------------------
// Layouts and action encodings
// ---------------------------------------------------------------------------

Tensor layout_rows_by_id(const Observation& obs, int n) {
  const int f = static_cast<int>(obs.slot_features.at(0).size());
  Tensor out(n, f);
  for (int i = 0; i < obs.k(); ++i) {
    const int id = obs.slot_order[static_cast<std::size_t>(i)];
    std::copy(obs.slot_features[static_cast<std::size_t>(i)].begin(),
              obs.slot_features[static_cast<std::size_t>(i)].end(),
              out.data.begin() + static_cast<std::size_t>(id) * f);
  }
  return out;
}

Tensor layout_rows_in_order(const Observation& obs, const std::vector<int>& id_order) {
  const int f = static_cast<int>(obs.slot_features.at(0).size());
  Tensor out(static_cast<int>(id_order.size()), f);
  for (std::size_t r = 0; r < id_order.size(); ++r) {
    const auto it = std::find(obs.slot_order.begin(), obs.slot_order.end(), id_order[r]);
    if (it == obs.slot_order.end()) {
      throw DataError("layout order refers to an object missing from the observation");
    }
    const std::size_t slot = static_cast<std::size_t>(it - obs.slot_order.begin());
    std::copy(obs.slot_features[slot].begin(), obs.slot_features[slot].end(),
              out.data.begin() + r * static_cast<std::size_t>(f));
  }
  return out;
}

std::vector<int> sigma_k_layout_order(const Scene& scene, bool seen_in_training) {
  std::vector<int> order = scene.object_ids;  // ascending ids
  if (!seen_in_training) {
    // the extractor's arbitrary-but-consistent ordering for a novel scene
    Rng rng(derive_seed(scene_key(scene), 0x0bad0bad));
    rng.shuffle(order);
  }
  return order;
}

Tensor action_matrix_by_id(const ActionId& a, int n) {
  Tensor out(n, 4);
  out.at(a.object_id, a.primitive) = 1.0;
  return out;
}

Tensor action_matrix_by_rank(const ActionId& a, const Scene& scene) {
  Tensor out(scene.k(), 4);
  const auto it = std::lower_bound(scene.object_ids.begin(), scene.object_ids.end(),
                                   a.object_id);
  if (it == scene.object_ids.end() || *it != a.object_id) {
    throw AbsentObject("action object not in scene");
  }
  out.at(static_cast<int>(it - scene.object_ids.begin()), a.primitive) = 1.0;
  return out;
}

Tensor action_rows_copy_all(const ActionId& a, int n, int k) {
  Tensor out(k, 4 * n);
  for (int r = 0; r < k; ++r) out.at(r, flat_action(a)) = 1.0;
  return out;
}

Tensor action_flat(const ActionId& a, int n) {
  Tensor out(1, 4 * n);
  out.at(0, flat_action(a)) = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Factory and persistence
// ---------------------------------------------------------------------------

std::unique_ptr<WorldModel> make_model(ModelKind kind, const EnvSpec& env,
                                       const Hyper& hyper,
                                       std::vector<Scene> train_scenes,
                                       std::uint64_t init_seed) {
  switch (kind) {
    case ModelKind::Howm:
      return std::make_unique<HowmModel>(env, hyper, std::move(train_scenes), init_seed);
    case ModelKind::FlatMlp:
      return std::make_unique<FlatMlpModel>(env, hyper, std::move(train_scenes),
                                            init_seed);
    default:
      return std::make_unique<BaselineGnnModel>(kind, env, hyper,
                                                std::move(train_scenes), init_seed);
  }
}

void save_model(const std::string& path, const WorldModel& model,
                std::uint64_t train_seed) {
  nlohmann::json meta;
  meta["kind"] = kind_name(model.kind());
  meta["env"] = {{"variant", model.env().variant == Variant::Shapes ? "shapes" : "rush_hour"},
                 {"n", model.env().n},
                 {"k", model.env().k},
                 {"grid_w", model.env().grid_w},
                 {"grid_h", model.env().grid_h}};
  meta["hyper"] = {{"d_slot", model.hyper().d_slot},
                   {"d_att", model.hyper().d_att},
                   {"hidden", model.hyper().hidden},
                   {"flat_hidden", model.hyper().flat_hidden},
                   {"margin", model.hyper().margin},
                   {"eps_pinv", model.hyper().eps_pinv},
                   {"same_scene_negative_frac", model.hyper().same_scene_negative_frac}};
  nlohmann::json scenes = nlohmann::json::array();
  for (const Scene& s : model.train_scenes()) scenes.push_back(s.object_ids);
  meta["train_scenes"] = std::move(scenes);
  meta["train_seed"] = train_seed;
  save_checkpoint(path, model.params(), meta.dump());
}

std::unique_ptr<WorldModel> load_model(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  nlohmann::json meta = nlohmann::json::parse(ckpt.meta_json);
  EnvSpec env;
  env.variant = meta.at("env").at("variant").get<std::string>() == "shapes"
                    ? Variant::Shapes
                    : Variant::RushHour;
  env.n = meta.at("env").at("n").get<int>();
  env.k = meta.at("env").at("k").get<int>();
  env.grid_w = meta.at("env").at("grid_w").get<int>();
  env.grid_h = meta.at("env").at("grid_h").get<int>();
  Hyper hyper;
  hyper.d_slot = meta.at("hyper").at("d_slot").get<int>();
  hyper.d_att = meta.at("hyper").at("d_att").get<int>();
  hyper.hidden = meta.at("hyper").at("hidden").get<int>();
  hyper.flat_hidden = meta.at("hyper").value("flat_hidden", 256);
  hyper.margin = meta.at("hyper").at("margin").get<double>();
  hyper.eps_pinv = meta.at("hyper").at("eps_pinv").get<double>();
  hyper.same_scene_negative_frac =
      meta.at("hyper").at("same_scene_negative_frac").get<double>();
  std::vector<Scene> scenes;
  for (const auto& ids : meta.at("train_scenes")) {
    scenes.push_back(Scene{ids.get<std::vector<int>>()});
  }
  auto model = make_model(kind_from_name(meta.at("kind").get<std::string>()), env, hyper,
                          std::move(scenes), 0);
  ParamSet& params = model->params();
  if (ckpt.params.names != params.names) {
    throw IoError("checkpoint parameters do not match the model kind");
  }
  for (int i = 0; i < params.size(); ++i) {
    if (!ckpt.params[i].same_shape(params[i])) {
      throw IoError("checkpoint shape mismatch for " + params.names[static_cast<std::size_t>(i)]);
    }
    params[i] = ckpt.params[i];
  }
  return model;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

// deterministic negative draw per the 50/50 same/cross-scene strategy
const Observation* draw_negative(const Dataset& data, int episode, int t, Rng& rng,
                                 double same_frac, const Scene** scene_out) {
  const int scene_idx = data.episode_scene[static_cast<std::size_t>(episode)];
  const bool same_scene =
      data.scenes.size() <= 1 || rng.unit() < same_frac;
  for (int attempt = 0; attempt < 16; ++attempt) {
    int e2;
    if (same_scene) {
      const auto& eps = data.scene_episodes[static_cast<std::size_t>(scene_idx)];
      e2 = eps[static_cast<std::size_t>(rng.below(static_cast<int>(eps.size())))];
    } else {
      e2 = rng.below(static_cast<int>(data.episodes.size()));
      if (data.episode_scene[static_cast<std::size_t>(e2)] == scene_idx) continue;
    }
    const int len = static_cast<int>(data.episodes[static_cast<std::size_t>(e2)].steps.size());
    const int t2 = rng.below(len);
    if (e2 == episode && t2 == t + 1) continue;  // never the positive target
    *scene_out = &data.episodes[static_cast<std::size_t>(e2)].scene;
    return &data.episodes[static_cast<std::size_t>(e2)].steps[static_cast<std::size_t>(t2)].obs;
  }
  *scene_out = &data.episodes[static_cast<std::size_t>(episode)].scene;
  return &data.episodes[static_cast<std::size_t>(episode)].steps[0].obs;
}

// small 1-step ranking probe on training transitions, deduplicated by the
// underlying grid state
double probe_mrr(const WorldModel& model, const Dataset& data,
                 const std::vector<std::pair<int, int>>& queries) {
  if (queries.empty()) return 0.0;
  std::vector<Tensor> refs;
  std::vector<int> true_ref(queries.size());
  std::map<std::string, int> ref_index;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto [e, t] = queries[q];
    const Episode& ep = data.episodes[static_cast<std::size_t>(e)];
    const Observation& target = ep.steps[static_cast<std::size_t>(t + 1)].obs;
    const EnvState state = state_from_obs(target, ep.scene, data.env.variant,
                                          data.env.grid_w, data.env.grid_h);
    std::string key;
    for (int id : ep.scene.object_ids) key += std::to_string(id) + ",";
    key += "|";
    for (const GridPos& p : state.positions) {
      key += std::to_string(p.row) + ":" + std::to_string(p.col) + ",";
    }
    const auto [it, inserted] = ref_index.try_emplace(key, static_cast<int>(refs.size()));
    if (inserted) refs.push_back(model.embed(target, ep.scene));
    true_ref[q] = it->second;
  }
  double mrr = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto [e, t] = queries[q];
    const Episode& ep = data.episodes[static_cast<std::size_t>(e)];
    const Tensor pred =
        model
            .rollout(ep.steps[static_cast<std::size_t>(t)].obs, ep.scene,
                     {ep.steps[static_cast<std::size_t>(t)].action})
            .back();
    const double d_true = squared_distance(pred, refs[static_cast<std::size_t>(true_ref[q])]);
    int rank = 1;
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const double d = squared_distance(pred, refs[r]);
      if (d < d_true || (d == d_true && static_cast<int>(r) < true_ref[q])) ++rank;
    }
    mrr += 1.0 / rank;
  }
  return mrr / static_cast<double>(queries.size());
}

}  // namespace

TrainLog train_model(WorldModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.transitions.empty()) throw DataError("dataset has no transitions");
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  AdamState adam = AdamState::init(model.params(), adam_cfg);

  std::ofstream csv;
  if (!cfg.metrics_csv_path.empty()) {
    csv.open(cfg.metrics_csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + cfg.metrics_csv_path);
    csv << "epoch,loss,train_mrr_1step\n";
  }

  TrainLog log;
  std::vector<std::pair<int, int>> order = data.transitions;
  const int total_epochs = cfg.epochs * std::max(1, cfg.restarts);
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    if (epoch > 0 && epoch % cfg.epochs == 0) {
      adam = AdamState::init(model.params(), adam_cfg);  // warm restart
    }
    Rng rng(derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(epoch) + 1));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::int64_t n_samples = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch));
      std::vector<TransitionSample> batch;
      batch.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) {
        const auto [e, t] = order[i];
        const Episode& ep = data.episodes[static_cast<std::size_t>(e)];
        TransitionSample s;
        s.obs_t = &ep.steps[static_cast<std::size_t>(t)].obs;
        s.obs_t1 = &ep.steps[static_cast<std::size_t>(t + 1)].obs;
        s.action = ep.steps[static_cast<std::size_t>(t)].action;
        s.scene = &ep.scene;
        s.obs_neg = draw_negative(data, e, t, rng, model.hyper().same_scene_negative_frac,
                                  &s.scene_neg);
        batch.push_back(s);
      }
      Tape tape;
      const LossGraph graph = model.build_loss(tape, batch);
      const double loss = tape.value(graph.loss).item();
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch offset " + std::to_string(at));
      }
      tape.backward(graph.loss);
      std::vector<Tensor> grads(static_cast<std::size_t>(model.params().size()));
      for (int p = 0; p < model.params().size(); ++p) {
        const Tape::Id id = graph.param_ids[static_cast<std::size_t>(p)];
        if (id >= 0) grads[static_cast<std::size_t>(p)] = tape.grad(id);
      }
      adam_step(model.params(), grads, adam);
      epoch_loss += loss * static_cast<double>(end - at);
      n_samples += static_cast<std::int64_t>(end - at);
    }
    epoch_loss /= static_cast<double>(n_samples);

    Rng probe_rng(derive_seed(cfg.seed, 0x9999));
    std::vector<std::pair<int, int>> probe = data.transitions;
    probe_rng.shuffle(probe);
    probe.resize(std::min<std::size_t>(probe.size(), static_cast<std::size_t>(cfg.log_queries)));
    const double mrr = probe_mrr(model, data, probe);

    log.epoch_loss.push_back(epoch_loss);
    log.epoch_mrr_1step.push_back(mrr);
    if (csv.is_open()) {
      csv << epoch << "," << epoch_loss << "," << mrr << "\n";
      csv.flush();
    }
  }
  return log;
}

}  // namespace oolib
