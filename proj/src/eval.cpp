#include "oolib/eval.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <json.hpp>

namespace oolib {

namespace {

std::string state_key(const Observation& obs, const Scene& scene, const EnvSpec& env) {
  const EnvState state = state_from_obs(obs, scene, env.variant, env.grid_w, env.grid_h);
  std::string key;
  for (int id : scene.object_ids) {
    key += std::to_string(id);
    key += ',';
  }
  key += '|';
  for (const GridPos& p : state.positions) {
    key += std::to_string(p.row * env.grid_w + p.col);
    key += ',';
  }
  return key;
}

struct Query {
  int episode = 0;
  int t = 0;
  int true_ref = -1;
};

}  // namespace

int rank_query(const Tensor& predicted, const ReferenceSet& refs, int true_index) {
  if (true_index < 0 || true_index >= static_cast<int>(refs.embeddings.size())) {
    throw TargetMissing("true target is not in the reference set");
  }
  const double d_true =
      squared_distance(predicted, refs.embeddings[static_cast<std::size_t>(true_index)]);
  int rank = 1;
  for (std::size_t r = 0; r < refs.embeddings.size(); ++r) {
    const double d = squared_distance(predicted, refs.embeddings[r]);
    if (d < d_true || (d == d_true && static_cast<int>(r) < true_index)) ++rank;
  }
  return rank;
}

MetricsReport evaluate(const WorldModel& model, const Dataset& data,
                       const EvalConfig& cfg, const std::string& split_label) {
  MetricsReport report;
  report.split = split_label;
  // rollouts are shared: queries at the same (episode, t) with different
  // horizons reuse one model unroll to the largest horizon
  std::map<std::pair<int, int>, std::vector<Tensor>> rollout_cache;
  std::vector<int> horizons_desc = cfg.horizons;
  std::sort(horizons_desc.rbegin(), horizons_desc.rend());
  for (const int h : horizons_desc) {
    // queries (episode, t) with the h-step target recorded
    std::vector<std::vector<std::pair<int, int>>> by_scene(data.scenes.size());
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
      const int len = static_cast<int>(data.episodes[e].steps.size());
      for (int t = 0; t + h <= len - 1; ++t) {
        by_scene[static_cast<std::size_t>(data.episode_scene[e])].emplace_back(
            static_cast<int>(e), t);
      }
    }
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(h)));
    for (auto& bucket : by_scene) rng.shuffle(bucket);

    // stratified round-robin cap
    std::vector<std::pair<int, int>> picked;
    std::size_t cursor = 0;
    while (static_cast<int>(picked.size()) < cfg.max_references) {
      bool any = false;
      for (auto& bucket : by_scene) {
        if (cursor < bucket.size()) {
          picked.push_back(bucket[cursor]);
          any = true;
          if (static_cast<int>(picked.size()) >= cfg.max_references) break;
        }
      }
      if (!any) break;
      ++cursor;
    }
    if (picked.empty()) continue;  // horizon longer than the episodes

    // references: deduplicated h-step-ahead target states
    ReferenceSet refs;
    refs.per_scene_counts.assign(data.scenes.size(), 0);
    std::map<std::string, int> ref_of_key;
    std::vector<Query> queries;
    queries.reserve(picked.size());
    for (const auto& [e, t] : picked) {
      const Episode& ep = data.episodes[static_cast<std::size_t>(e)];
      const Observation& target = ep.steps[static_cast<std::size_t>(t + h)].obs;
      const std::string key = state_key(target, ep.scene, data.env);
      auto [it, inserted] = ref_of_key.try_emplace(key, static_cast<int>(refs.embeddings.size()));
      if (inserted) {
        refs.embeddings.push_back(model.embed(target, ep.scene));
        refs.scene_of.push_back(data.episode_scene[static_cast<std::size_t>(e)]);
        ++refs.per_scene_counts[static_cast<std::size_t>(
            data.episode_scene[static_cast<std::size_t>(e)])];
      }
      queries.push_back(Query{e, t, it->second});
    }

    HorizonMetrics metrics;
    metrics.horizon = h;
    metrics.n_queries = static_cast<int>(queries.size());
    metrics.n_references = static_cast<int>(refs.embeddings.size());
    for (const Query& q : queries) {
      const Episode& ep = data.episodes[static_cast<std::size_t>(q.episode)];
      std::vector<ActionId> actions;
      actions.reserve(static_cast<std::size_t>(h));
      for (int i = 0; i < h; ++i) {
        actions.push_back(ep.steps[static_cast<std::size_t>(q.t + i)].action);
      }
      auto [it, inserted] = rollout_cache.try_emplace({q.episode, q.t});
      if (inserted || static_cast<int>(it->second.size()) < h) {
        it->second = model.rollout(ep.steps[static_cast<std::size_t>(q.t)].obs,
                                   ep.scene, actions);
      }
      const Tensor& pred = it->second[static_cast<std::size_t>(h - 1)];
      const int rank = rank_query(pred, refs, q.true_ref);
      if (rank == 1) metrics.hits_at_1 += 1.0;
      metrics.mrr += 1.0 / rank;
    }
    metrics.hits_at_1 /= static_cast<double>(queries.size());
    metrics.mrr /= static_cast<double>(queries.size());
    report.per_horizon.push_back(metrics);
  }
  // emit rows in the order the caller asked for
  std::vector<HorizonMetrics> ordered;
  for (int h : cfg.horizons) {
    for (const HorizonMetrics& m : report.per_horizon) {
      if (m.horizon == h) ordered.push_back(m);
    }
  }
  report.per_horizon = std::move(ordered);
  return report;
}

const HorizonMetrics& MetricsReport::at_horizon(int h) const {
  for (const HorizonMetrics& m : per_horizon) {
    if (m.horizon == h) return m;
  }
  throw ConfigError("no metrics for horizon " + std::to_string(h));
}

std::vector<GapReport> generalization_gap(const MetricsReport& train,
                                          const MetricsReport& eval) {
  std::vector<GapReport> out;
  for (const HorizonMetrics& tm : train.per_horizon) {
    for (const HorizonMetrics& em : eval.per_horizon) {
      if (tm.horizon != em.horizon) continue;
      GapReport g;
      g.horizon = tm.horizon;
      g.train_mrr = tm.mrr;
      g.eval_mrr = em.mrr;
      g.train_h1 = tm.hits_at_1;
      g.eval_h1 = em.hits_at_1;
      g.mrr_gap = tm.mrr - em.mrr;
      g.h1_gap = tm.hits_at_1 - em.hits_at_1;
      out.push_back(g);
    }
  }
  return out;
}

double binding_accuracy(const WorldModel& model, const Dataset& data, std::uint64_t seed) {
  if (!model.has_binding()) {
    throw NotABindingModel(kind_name(model.kind()) + " has no binding matrix");
  }
  Rng rng(derive_seed(seed, 0xb1d));
  std::int64_t correct = 0, total = 0;
  for (const auto& [e, t] : data.transitions) {
    const Episode& ep = data.episodes[static_cast<std::size_t>(e)];
    const StepRec& rec = ep.steps[static_cast<std::size_t>(t)];
    if (!rec.moved) continue;
    const Tensor m = model.binding_matrix(rec.obs, ep.scene);
    const int column = rec.action.object_id;
    // argmax over slots with uniform tie-breaking
    double best = -1.0;
    std::vector<int> arg;
    for (int r = 0; r < m.rows; ++r) {
      const double v = m.at(r, column);
      if (v > best) {
        best = v;
        arg.assign(1, r);
      } else if (v == best) {
        arg.push_back(r);
      }
    }
    const int picked = arg[static_cast<std::size_t>(rng.below(static_cast<int>(arg.size())))];
    const auto it = std::find(rec.obs.slot_order.begin(), rec.obs.slot_order.end(),
                              rec.action.object_id);
    const int true_slot = static_cast<int>(it - rec.obs.slot_order.begin());
    correct += picked == true_slot ? 1 : 0;
    ++total;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::string metrics_csv(const std::string& method, const EnvSpec& env,
                        const MetricsReport& train, const MetricsReport& eval) {
  std::ostringstream os;
  os << "method,env,n,k,horizon,split,h@1,mrr,gap\n";
  const char* env_name = env.variant == Variant::Shapes ? "shapes" : "rush_hour";
  const auto gaps = generalization_gap(train, eval);
  const auto gap_for = [&](int h) -> const GapReport* {
    for (const GapReport& g : gaps) {
      if (g.horizon == h) return &g;
    }
    return nullptr;
  };
  for (const MetricsReport* rep : {&train, &eval}) {
    for (const HorizonMetrics& m : rep->per_horizon) {
      const GapReport* g = gap_for(m.horizon);
      os << method << ',' << env_name << ',' << env.n << ',' << env.k << ','
         << m.horizon << ',' << rep->split << ',' << m.hits_at_1 << ',' << m.mrr << ',';
      if (g != nullptr && rep == &eval) {
        os << g->mrr_gap;
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string metrics_json(const std::string& method, const EnvSpec& env,
                         const MetricsReport& train, const MetricsReport& eval) {
  nlohmann::json j;
  j["method"] = method;
  j["env"] = env.variant == Variant::Shapes ? "shapes" : "rush_hour";
  j["n"] = env.n;
  j["k"] = env.k;
  const auto fill = [](const MetricsReport& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const HorizonMetrics& m : rep.per_horizon) {
      rows.push_back({{"horizon", m.horizon},
                      {"h@1", m.hits_at_1},
                      {"mrr", m.mrr},
                      {"queries", m.n_queries},
                      {"references", m.n_references}});
    }
    return rows;
  };
  j["train"] = fill(train);
  j["eval"] = fill(eval);
  nlohmann::json gaps = nlohmann::json::array();
  for (const GapReport& g : generalization_gap(train, eval)) {
    gaps.push_back({{"horizon", g.horizon}, {"mrr_gap", g.mrr_gap}, {"h1_gap", g.h1_gap}});
  }
  j["gap"] = std::move(gaps);
  return j.dump(2);
}

}  // namespace oolib
