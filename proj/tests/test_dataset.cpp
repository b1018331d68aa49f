#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "oolib/dataset.hpp"
#include "oolib/perm.hpp"

using namespace oolib;

TEST_CASE("split: N=4 K=2 with 3+3 partitions the six scenes") {
  const Library lib = Library::shapes(4);
  const SceneSplit split = sample_scene_split(lib, 2, 3, 3, 17);
  CHECK(split.train_scenes.size() == 3);
  CHECK(split.eval_scenes.size() == 3);
  std::set<std::vector<int>> all;
  for (const Scene& s : split.train_scenes) all.insert(s.object_ids);
  for (const Scene& s : split.eval_scenes) all.insert(s.object_ids);
  CHECK(all.size() == 6);  // disjoint and exhaustive
}

TEST_CASE("split: disjointness, coverage, frequency at N=10 K=5") {
  const Library lib = Library::shapes(10);
  const SceneSplit split = sample_scene_split(lib, 5, 20, 20, 99);
  std::set<std::vector<int>> train_set;
  for (const Scene& s : split.train_scenes) train_set.insert(s.object_ids);
  CHECK(train_set.size() == 20);
  for (const Scene& s : split.eval_scenes) {
    CHECK(train_set.find(s.object_ids) == train_set.end());
  }
  // coverage: every object id appears in >= 1 train scene
  std::set<int> covered;
  for (const Scene& s : split.train_scenes) covered.insert(s.object_ids.begin(),
                                                           s.object_ids.end());
  CHECK(covered.size() == 10);
  // frequency within the integer-relaxed +-25% band
  for (const auto& scenes : {split.train_scenes, split.eval_scenes}) {
    std::vector<int> counts(10, 0);
    for (const Scene& s : scenes) {
      for (int id : s.object_ids) ++counts[static_cast<std::size_t>(id)];
    }
    const double target = scenes.size() * 5.0 / 10.0;
    for (int c : counts) {
      CHECK(c >= static_cast<int>(std::floor(0.75 * target)));
      CHECK(c <= static_cast<int>(std::ceil(1.25 * target)));
    }
  }
}

TEST_CASE("split: infeasible requests are rejected") {
  const Library lib = Library::shapes(4);
  CHECK_THROWS_AS(sample_scene_split(lib, 2, 4, 3, 1), ConfigError);  // > C(4,2)
  CHECK_THROWS_AS(sample_scene_split(lib, 2, 1, 1, 1), ConfigError);  // no coverage
}

TEST_CASE("episodes: scene persistence, movement bias, determinism") {
  const Library lib = Library::shapes(10);
  const SceneSplit split = sample_scene_split(lib, 5, 20, 20, 4);
  const auto eps = generate_episodes(lib, split.train_scenes, 40, 20, 5, 5, 123);
  CHECK(eps.size() == 40);
  for (const Episode& ep : eps) {
    CHECK(ep.steps.size() == 20);
    for (const StepRec& rec : ep.steps) {
      CHECK(rec.obs.k() == 5);
      // the acting object is always in the scene
      CHECK(ep.scene.contains(rec.action.object_id));
    }
  }
  CHECK(moved_fraction(eps) >= 0.9);
  CHECK_NOTHROW(validate_episodes(eps, lib, 5, 5));

  // byte-identical corpus from the same seed
  const auto eps2 = generate_episodes(lib, split.train_scenes, 40, 20, 5, 5, 123);
  REQUIRE(eps2.size() == eps.size());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    CHECK(eps[e].scene.object_ids == eps2[e].scene.object_ids);
    for (std::size_t t = 0; t < eps[e].steps.size(); ++t) {
      CHECK(eps[e].steps[t].obs.slot_order == eps2[e].steps[t].obs.slot_order);
      CHECK(eps[e].steps[t].obs.slot_features == eps2[e].steps[t].obs.slot_features);
      CHECK(eps[e].steps[t].action.object_id == eps2[e].steps[t].action.object_id);
      CHECK(eps[e].steps[t].action.primitive == eps2[e].steps[t].action.primitive);
    }
  }
}

TEST_CASE("rush hour episodes replay too") {
  const Library lib = Library::rush_hour(10);
  const SceneSplit split = sample_scene_split(lib, 5, 12, 6, 8);
  const auto eps = generate_episodes(lib, split.train_scenes, 12, 15, 5, 5, 5);
  CHECK_NOTHROW(validate_episodes(eps, lib, 5, 5));
  CHECK(moved_fraction(eps) >= 0.9);
}

TEST_CASE("jsonl round trip, including the gzip variant") {
  const Library lib = Library::shapes(6);
  const auto eps = generate_episodes(
      lib, {make_scene({0, 1, 2}, 6), make_scene({3, 4, 5}, 6)}, 3, 6, 5, 5, 77);
  for (const char* name : {"/tmp/oolib_eps.jsonl", "/tmp/oolib_eps.jsonl.gz"}) {
    write_jsonl(eps, name);
    const auto loaded = read_jsonl(name);
    REQUIRE(loaded.size() == eps.size());
    for (std::size_t e = 0; e < eps.size(); ++e) {
      CHECK(loaded[e].scene.object_ids == eps[e].scene.object_ids);
      CHECK(loaded[e].seed == eps[e].seed);
      REQUIRE(loaded[e].steps.size() == eps[e].steps.size());
      for (std::size_t t = 0; t < eps[e].steps.size(); ++t) {
        CHECK(loaded[e].steps[t].obs.slot_features == eps[e].steps[t].obs.slot_features);
        CHECK(loaded[e].steps[t].obs.slot_order == eps[e].steps[t].obs.slot_order);
        CHECK(loaded[e].steps[t].action.object_id == eps[e].steps[t].action.object_id);
        CHECK(loaded[e].steps[t].moved == eps[e].steps[t].moved);
      }
    }
    std::remove(name);
  }
}

TEST_CASE("jsonl: empty file and truncated line") {
  {
    std::ofstream out("/tmp/oolib_empty.jsonl");
  }
  CHECK(read_jsonl("/tmp/oolib_empty.jsonl").empty());
  std::remove("/tmp/oolib_empty.jsonl");

  {
    std::ofstream out("/tmp/oolib_bad.jsonl");
    const Library lib = Library::shapes(6);
    const auto eps = generate_episodes(lib, {make_scene({0, 1, 2}, 6)}, 1, 4, 5, 5, 3);
    write_jsonl(eps, "/tmp/oolib_good.jsonl");
    std::ifstream in("/tmp/oolib_good.jsonl");
    std::string line;
    std::getline(in, line);
    out << line << "\n" << line.substr(0, line.size() / 2) << "\n";
  }
  try {
    read_jsonl("/tmp/oolib_bad.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::remove("/tmp/oolib_bad.jsonl");
  std::remove("/tmp/oolib_good.jsonl");
  CHECK_THROWS_AS(read_jsonl("/tmp/oolib_nonexistent.jsonl"), IoError);
}

TEST_CASE("parallel_for writes each slot deterministically") {
  std::vector<int> out(100, -1);
  parallel_for(100, 4, [&](int i) { out[static_cast<std::size_t>(i)] = i * i; });
  for (int i = 0; i < 100; ++i) CHECK(out[static_cast<std::size_t>(i)] == i * i);
  CHECK(thread_cap(3) == 3);
}

TEST_CASE("dataset index") {
  const Library lib = Library::shapes(6);
  const std::vector<Scene> scenes{make_scene({0, 1, 2}, 6), make_scene({3, 4, 5}, 6)};
  auto eps = generate_episodes(lib, scenes, 6, 5, 5, 5, 21);
  EnvSpec env;
  env.variant = Variant::Shapes;
  env.n = 6;
  env.k = 3;
  const Dataset ds = Dataset::build(env, std::move(eps));
  CHECK(ds.scenes.size() == 2);
  CHECK(ds.transitions.size() == 6 * 4);
  CHECK(ds.scene_episodes[0].size() == 3);
  CHECK(ds.scene_episodes[1].size() == 3);
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    CHECK(ds.scenes[static_cast<std::size_t>(ds.episode_scene[e])].object_ids ==
          ds.episodes[e].scene.object_ids);
  }
}
