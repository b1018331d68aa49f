#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "oolib/env.hpp"

namespace oolib {

struct MalformedCycles : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RepeatedLabel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LabelOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegreeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegreeTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An element of the symmetric group on [0, n). image()[i] is the image of i.
class Permutation {
 public:
  explicit Permutation(int degree);  // identity
  static Permutation from_image(std::vector<int> image);

  int degree() const { return static_cast<int>(image_.size()); }
  int operator()(int i) const { return image_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& image() const { return image_; }

  Permutation inverse() const;
  bool is_identity() const;

  bool operator==(const Permutation& o) const { return image_ == o.image_; }
  bool operator<(const Permutation& o) const { return image_ < o.image_; }

 private:
  explicit Permutation(std::vector<int> image) : image_(std::move(image)) {}
  std::vector<int> image_;
};

// (p.q)(i) = p(q(i)).
Permutation compose(const Permutation& p, const Permutation& q);

// Disjoint-cycle text over 1-based labels 1..n, e.g. "(123)(45)" or
// "(1 2 3)(4 5)". Runs without separators are read digit-by-digit, which is
// only unambiguous for n <= 9; larger degrees need separators. "" is the
// identity.
Permutation parse_cycles(std::string_view text, int degree);

// 1-based disjoint cycles with space separators; identity prints as "()".
std::string print_cycles(const Permutation& p);

// The induced operation on scenes: {i_1..i_K} -> {p(i_1)..p(i_K)}, sorted.
Scene apply_to_scene(const Permutation& p, const Scene& scene);

// All n! permutations, lexicographic by image. Guarded at n <= 8.
std::vector<Permutation> enumerate_group(int degree);

// Exact binomial coefficient.
std::int64_t binom(int n, int k);

}  // namespace oolib
