#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "oolib/perm.hpp"

using namespace oolib;

TEST_CASE("parse_cycles matches the worked example") {
  // (123)(45) over 1..5: 1->2, 2->3, 3->1, 4->5, 5->4
  const Permutation p = parse_cycles("(123)(45)", 5);
  CHECK(p(2) == 0);  // pi(3)=1, 0-based
  CHECK(p(3) == 4);  // pi(4)=5
  CHECK(p(0) == 1);
  CHECK(p(4) == 3);

  const Permutation spaced = parse_cycles("(1 2 3)(4 5)", 5);
  CHECK(p == spaced);
}

TEST_CASE("parse_cycles empty text is the identity") {
  CHECK(parse_cycles("", 5).is_identity());
  CHECK(parse_cycles("  ", 3).is_identity());
}

TEST_CASE("parse_cycles rejects malformed input") {
  CHECK_THROWS_AS(parse_cycles("(12)(21)", 3), RepeatedLabel);
  CHECK_THROWS_AS(parse_cycles("(11)", 3), RepeatedLabel);
  CHECK_THROWS_AS(parse_cycles("(12", 3), MalformedCycles);
  CHECK_THROWS_AS(parse_cycles("(1a)", 3), MalformedCycles);
  CHECK_THROWS_AS(parse_cycles("(14)", 3), LabelOutOfRange);
  CHECK_THROWS_AS(parse_cycles("(0 1)", 3), LabelOutOfRange);
  CHECK_THROWS_AS(parse_cycles("(123)", 12), MalformedCycles);
  CHECK_NOTHROW(parse_cycles("(1 2 3)", 12));
}

TEST_CASE("print/parse round trip") {
  for (const Permutation& p : enumerate_group(5)) {
    CHECK(parse_cycles(print_cycles(p), 5) == p);
  }
  CHECK(print_cycles(Permutation(4)) == "()");
}

TEST_CASE("compose: identity and inverse axioms") {
  const Permutation id(4);
  for (const Permutation& p : enumerate_group(4)) {
    CHECK(compose(p, p.inverse()) == id);
    CHECK(compose(p.inverse(), p) == id);
    CHECK(compose(id, p) == p);
    CHECK(compose(p, id) == p);
  }
  CHECK_THROWS_AS(compose(Permutation(3), Permutation(4)), DegreeMismatch);
}

TEST_CASE("compose: associativity, brute force over all of Sigma_4") {
  const auto group = enumerate_group(4);
  for (const auto& p : group) {
    for (const auto& q : group) {
      const Permutation pq = compose(p, q);
      for (const auto& r : group) {
        CHECK(compose(pq, r) == compose(p, compose(q, r)));
      }
    }
  }
}

TEST_CASE("enumerate_group sizes and uniqueness") {
  CHECK(enumerate_group(3).size() == 6);
  CHECK(enumerate_group(1).size() == 1);
  CHECK(enumerate_group(1)[0].is_identity());
  const auto g4 = enumerate_group(4);
  CHECK(g4.size() == 24);
  std::set<std::vector<int>> images;
  for (const auto& p : g4) images.insert(p.image());
  CHECK(images.size() == 24);
  // lexicographic by image
  for (std::size_t i = 1; i < g4.size(); ++i) CHECK(g4[i - 1] < g4[i]);
  CHECK_THROWS_AS(enumerate_group(9), DegreeTooLarge);
}

TEST_CASE("apply_to_scene matches the worked example") {
  // pi=(123)(45), scene {3,4} (1-based) -> {1,5}; 0-based: {2,3} -> {0,4}
  const Permutation p = parse_cycles("(123)(45)", 5);
  const Scene s{{2, 3}};
  const Scene out = apply_to_scene(p, s);
  CHECK(out.object_ids == std::vector<int>{0, 4});
}

TEST_CASE("apply_to_scene: identity, cardinality, group-action law") {
  const auto group = enumerate_group(4);
  std::vector<Scene> scenes;
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) scenes.push_back(Scene{{a, b}});
  }
  CHECK(scenes.size() == 6);
  for (const auto& s : scenes) {
    CHECK(apply_to_scene(Permutation(4), s) == s);
  }
  // p_K(pi o rho, O) = p_K(pi, p_K(rho, O)) over all 24*24*6 cases
  for (const auto& pi : group) {
    for (const auto& rho : group) {
      const Permutation pr = compose(pi, rho);
      for (const auto& s : scenes) {
        const Scene lhs = apply_to_scene(pr, s);
        const Scene rhs = apply_to_scene(pi, apply_to_scene(rho, s));
        CHECK(lhs == rhs);
        CHECK(lhs.k() == s.k());
      }
    }
  }
  CHECK_THROWS_AS(apply_to_scene(Permutation(3), Scene{{1, 3}}), DegreeMismatch);
}

namespace {
// Pascal-triangle oracle, independent of the multiplicative implementation.
std::int64_t binom_oracle(int n, int k) {
  std::vector<std::vector<std::int64_t>> c(n + 1);
  for (int i = 0; i <= n; ++i) {
    c[i].assign(i + 1, 1);
    for (int j = 1; j < i; ++j) c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
  }
  return c[n][k];
}
}  // namespace

TEST_CASE("binom: examples and oracle") {
  CHECK(binom(4, 2) == 6);
  for (int n = 0; n <= 12; ++n) CHECK(binom(n, 0) == 1);
  CHECK(binom(30, 5) == 142506);
  CHECK(binom(30, 5) == binom_oracle(30, 5));
  for (int n = 0; n <= 20; ++n) {
    for (int k = 0; k <= n; ++k) CHECK(binom(n, k) == binom_oracle(n, k));
  }
  CHECK_THROWS_AS(binom(3, 4), OutOfRange);
  CHECK_THROWS_AS(binom(3, -1), OutOfRange);
}
