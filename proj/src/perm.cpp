#include "oolib/perm.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace oolib {

Permutation::Permutation(int degree) {
  if (degree < 0) throw OutOfRange("negative degree");
  image_.resize(static_cast<std::size_t>(degree));
  std::iota(image_.begin(), image_.end(), 0);
}

Permutation Permutation::from_image(std::vector<int> image) {
  std::vector<char> seen(image.size(), 0);
  for (int v : image) {
    if (v < 0 || v >= static_cast<int>(image.size()) || seen[static_cast<std::size_t>(v)]) {
      throw OutOfRange("image is not a bijection");
    }
    seen[static_cast<std::size_t>(v)] = 1;
  }
  return Permutation(std::move(image));
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(image_.size());
  for (std::size_t i = 0; i < image_.size(); ++i) {
    inv[static_cast<std::size_t>(image_[i])] = static_cast<int>(i);
  }
  return Permutation(std::move(inv));
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < image_.size(); ++i) {
    if (image_[i] != static_cast<int>(i)) return false;
  }
  return true;
}

Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.degree() != q.degree()) throw DegreeMismatch("composing unequal degrees");
  std::vector<int> img(static_cast<std::size_t>(p.degree()));
  for (int i = 0; i < p.degree(); ++i) img[static_cast<std::size_t>(i)] = p(q(i));
  return Permutation::from_image(std::move(img));
}

Permutation parse_cycles(std::string_view text, int degree) {
  if (degree < 0) throw OutOfRange("negative degree");
  std::vector<int> img(static_cast<std::size_t>(degree));
  std::iota(img.begin(), img.end(), 0);
  std::vector<char> used(static_cast<std::size_t>(degree), 0);

  std::size_t i = 0;
  const auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  skip_ws();
  while (i < text.size()) {
    if (text[i] != '(') throw MalformedCycles("expected '('");
    ++i;
    std::vector<int> cycle;
    bool saw_separator = false;
    std::vector<std::string> tokens;
    std::string cur;
    for (; i < text.size() && text[i] != ')'; ++i) {
      const char c = text[i];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        cur.push_back(c);
      } else if (c == ' ' || c == ',' || c == '\t') {
        saw_separator = true;
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
      } else {
        throw MalformedCycles("unexpected character in cycle");
      }
    }
    if (i >= text.size()) throw MalformedCycles("unbalanced parentheses");
    ++i;  // consume ')'
    if (!cur.empty()) tokens.push_back(std::move(cur));
    if (!saw_separator && tokens.size() == 1 && tokens[0].size() > 1) {
      if (degree > 9) {
        throw MalformedCycles("labels above 9 require separators");
      }
      std::string run = std::move(tokens[0]);
      tokens.clear();
      for (char c : run) tokens.emplace_back(1, c);
    }
    for (const std::string& tok : tokens) {
      const long v = std::stol(tok);
      if (v < 1 || v > degree) {
        throw LabelOutOfRange("cycle label " + tok + " outside 1.." +
                              std::to_string(degree));
      }
      cycle.push_back(static_cast<int>(v - 1));
    }
    for (int label : cycle) {
      if (used[static_cast<std::size_t>(label)]) {
        throw RepeatedLabel("label " + std::to_string(label + 1) +
                            " appears in more than one position");
      }
      used[static_cast<std::size_t>(label)] = 1;
    }
    for (std::size_t j = 0; j < cycle.size(); ++j) {
      img[static_cast<std::size_t>(cycle[j])] = cycle[(j + 1) % cycle.size()];
    }
    skip_ws();
  }
  return Permutation::from_image(std::move(img));
}

std::string print_cycles(const Permutation& p) {
  std::vector<char> done(static_cast<std::size_t>(p.degree()), 0);
  std::string out;
  for (int start = 0; start < p.degree(); ++start) {
    if (done[static_cast<std::size_t>(start)] || p(start) == start) continue;
    out.push_back('(');
    int x = start;
    bool first = true;
    do {
      if (!first) out.push_back(' ');
      out += std::to_string(x + 1);
      done[static_cast<std::size_t>(x)] = 1;
      x = p(x);
      first = false;
    } while (x != start);
    out.push_back(')');
  }
  if (out.empty()) out = "()";
  return out;
}

Scene apply_to_scene(const Permutation& p, const Scene& scene) {
  std::vector<int> ids;
  ids.reserve(scene.object_ids.size());
  for (int id : scene.object_ids) {
    if (id < 0 || id >= p.degree()) throw DegreeMismatch("scene id outside degree");
    ids.push_back(p(id));
  }
  std::sort(ids.begin(), ids.end());
  return Scene{std::move(ids)};
}

std::vector<Permutation> enumerate_group(int degree) {
  if (degree < 0 || degree > 8) throw DegreeTooLarge("group enumeration capped at 8");
  std::vector<int> img(static_cast<std::size_t>(degree));
  std::iota(img.begin(), img.end(), 0);
  std::vector<Permutation> out;
  do {
    out.push_back(Permutation::from_image(img));
  } while (std::next_permutation(img.begin(), img.end()));
  return out;
}

std::int64_t binom(int n, int k) {
  if (n < 0 || k < 0 || k > n) throw OutOfRange("binom arguments out of range");
  if (n > 62) throw OutOfRange("binom guarded at n <= 62");
  k = std::min(k, n - k);
  __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > INT64_MAX) throw OutOfRange("binom overflow");
  }
  return static_cast<std::int64_t>(r);
}

}  // namespace oolib
