#include "oolib/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace oolib {

Library Library::shapes(int n) {
  if (n < 1) throw ConfigError("library size must be positive");
  Library lib;
  lib.variant_ = Variant::Shapes;
  lib.n_colors_ = n;
  lib.objects_.reserve(n);
  for (int i = 0; i < n; ++i) {
    lib.objects_.push_back(ObjectSpec{i, static_cast<Shape>(i % kNumShapes), i,
                                      Orientation::North});
  }
  return lib;
}

Library Library::rush_hour(int n) {
  if (n < 1) throw ConfigError("library size must be positive");
  Library lib;
  lib.variant_ = Variant::RushHour;
  lib.n_colors_ = n;
  lib.objects_.reserve(n);
  // Cars are the four triangles; the drawn heading doubles as the
  // orientation used by the relative action space.
  static constexpr Shape kCars[4] = {Shape::TriangleUp, Shape::TriangleRight,
                                     Shape::TriangleDown, Shape::TriangleLeft};
  static constexpr Orientation kHeading[4] = {Orientation::North, Orientation::East,
                                              Orientation::South, Orientation::West};
  for (int i = 0; i < n; ++i) {
    lib.objects_.push_back(ObjectSpec{i, kCars[i % 4], i, kHeading[i % 4]});
  }
  return lib;
}

const ObjectSpec& Library::object(int id) const {
  if (id < 0 || id >= size()) throw ConfigError("object id out of range");
  return objects_[id];
}

bool Scene::contains(int id) const {
  return std::binary_search(object_ids.begin(), object_ids.end(), id);
}

Scene make_scene(std::vector<int> ids, int library_size) {
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ConfigError("scene has duplicate object ids");
  }
  const int k = static_cast<int>(ids.size());
  if (k <= 1 || k >= library_size) {
    throw ConfigError("scene size must satisfy 1 < K < N");
  }
  if (ids.front() < 0 || ids.back() >= library_size) {
    throw ConfigError("scene object id out of range");
  }
  return Scene{std::move(ids)};
}

std::uint64_t scene_key(const Scene& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int id : s.object_ids) {
    h ^= static_cast<std::uint64_t>(id) + 1;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int EnvState::slot_of(int object_id) const {
  const auto it = std::lower_bound(scene.object_ids.begin(), scene.object_ids.end(),
                                   object_id);
  if (it == scene.object_ids.end() || *it != object_id) {
    throw AbsentObject("object " + std::to_string(object_id) + " not in scene");
  }
  return static_cast<int>(it - scene.object_ids.begin());
}

const GridPos& EnvState::pos_of(int object_id) const {
  return positions[static_cast<std::size_t>(slot_of(object_id))];
}

bool EnvState::occupied(const GridPos& p) const {
  return std::find(positions.begin(), positions.end(), p) != positions.end();
}

GridPos action_delta(Variant variant, Orientation orientation, int primitive) {
  if (primitive < 0 || primitive >= 4) throw InvalidAction("primitive out of range");
  // compass: 0=north 1=east 2=south 3=west
  static constexpr int kDr[4] = {-1, 0, 1, 0};
  static constexpr int kDc[4] = {0, 1, 0, -1};
  int compass;
  if (variant == Variant::Shapes) {
    // north, south, east, west
    static constexpr int kAbs[4] = {0, 2, 1, 3};
    compass = kAbs[primitive];
  } else {
    // forward = heading, backward = opposite, left = ccw, right = cw
    const int o = static_cast<int>(orientation);
    static constexpr int kTurn[4] = {0, 2, 3, 1};
    compass = (o + kTurn[primitive]) % 4;
  }
  return GridPos{kDr[compass], kDc[compass]};
}

StepResult step(const EnvState& state, const ActionId& action, const Library& lib) {
  if (action.primitive < 0 || action.primitive >= 4) {
    throw InvalidAction("primitive out of range");
  }
  const int slot = state.slot_of(action.object_id);  // throws AbsentObject
  const ObjectSpec& spec = lib.object(action.object_id);
  const GridPos d = action_delta(state.variant, spec.orientation, action.primitive);
  const GridPos cur = state.positions[static_cast<std::size_t>(slot)];
  const GridPos tgt{cur.row + d.row, cur.col + d.col};
  if (tgt.row < 0 || tgt.row >= state.grid_h || tgt.col < 0 || tgt.col >= state.grid_w ||
      state.occupied(tgt)) {
    return StepResult{state, false};
  }
  StepResult out{state, true};
  out.state.positions[static_cast<std::size_t>(slot)] = tgt;
  return out;
}

EnvState reset(const Library& lib, const Scene& scene, int grid_w, int grid_h,
               std::uint64_t seed) {
  const int k = scene.k();
  const int cells = grid_w * grid_h;
  if (k > cells) throw GridTooSmall("K exceeds grid capacity");
  Rng rng(derive_seed(seed, 0x7e5e7));
  const std::vector<int> picked = rng.sample_without_replacement(cells, k);
  EnvState s;
  s.scene = scene;
  s.variant = lib.variant();
  s.grid_w = grid_w;
  s.grid_h = grid_h;
  s.positions.reserve(k);
  for (int c : picked) s.positions.push_back(GridPos{c / grid_w, c % grid_w});
  return s;
}

std::vector<double> object_features(const Library& lib, int object_id, GridPos pos,
                                    int grid_w, int grid_h) {
  const ObjectSpec& spec = lib.object(object_id);
  std::vector<double> f(static_cast<std::size_t>(lib.feature_dim()), 0.0);
  f[static_cast<std::size_t>(spec.shape)] = 1.0;
  f[static_cast<std::size_t>(kNumShapes + spec.color)] = 1.0;
  f[static_cast<std::size_t>(kNumShapes + lib.n_colors() +
                             static_cast<int>(spec.orientation))] = 1.0;
  const std::size_t base = static_cast<std::size_t>(kNumShapes + lib.n_colors() + 4);
  f[base] = static_cast<double>(pos.row) / grid_h;
  f[base + 1] = static_cast<double>(pos.col) / grid_w;
  return f;
}

GridPos feature_position(const std::vector<double>& feature, int grid_w, int grid_h) {
  const std::size_t base = feature.size() - 2;
  return GridPos{static_cast<int>(std::llround(feature[base] * grid_h)),
                 static_cast<int>(std::llround(feature[base + 1] * grid_w))};
}

Observation observe(const EnvState& state, const Library& lib, Rng& rng) {
  const int k = state.scene.k();
  std::vector<int> order(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  Observation obs;
  obs.slot_order.reserve(k);
  obs.slot_features.reserve(k);
  for (int idx : order) {
    const int id = state.scene.object_ids[static_cast<std::size_t>(idx)];
    obs.slot_order.push_back(id);
    obs.slot_features.push_back(object_features(
        lib, id, state.positions[static_cast<std::size_t>(idx)], state.grid_w,
        state.grid_h));
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

// 10x10 glyph masks evaluated at pixel centers of the cell.
bool glyph_hit(Shape shape, int px, int py) {
  const double x = px + 0.5;
  const double y = py + 0.5;
  const double cx = 5.0, cy = 5.0;
  switch (shape) {
    case Shape::TriangleUp:
      return std::abs(x - cx) <= (y + 0.5) * 0.45 && y <= 9.5;
    case Shape::TriangleDown:
      return std::abs(x - cx) <= (10.0 - y + 0.5) * 0.45;
    case Shape::TriangleLeft:
      return std::abs(y - cy) <= (x + 0.5) * 0.45 && x <= 9.5;
    case Shape::TriangleRight:
      return std::abs(y - cy) <= (10.0 - x + 0.5) * 0.45;
    case Shape::Square:
      return x >= 1.0 && x <= 9.0 && y >= 1.0 && y <= 9.0;
    case Shape::Circle:
      return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= 4.3 * 4.3;
    case Shape::Diamond:
      return std::abs(x - cx) + std::abs(y - cy) <= 4.6;
    case Shape::Cross:
      return std::abs(x - cx) <= 1.6 || std::abs(y - cy) <= 1.6;
    case Shape::Pentagon: {
      // regular pentagon, apex up
      bool inside = true;
      for (int i = 0; i < 5; ++i) {
        const double a0 = -1.5707963267948966 + 2.0 * 3.141592653589793 * i / 5.0;
        const double a1 = -1.5707963267948966 + 2.0 * 3.141592653589793 * (i + 1) / 5.0;
        const double x0 = cx + 4.6 * std::cos(a0), y0 = cy + 4.6 * std::sin(a0);
        const double x1 = cx + 4.6 * std::cos(a1), y1 = cy + 4.6 * std::sin(a1);
        if ((x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < 0.0) {
          inside = false;
          break;
        }
      }
      return inside;
    }
    case Shape::Star: {
      // 5-point star via alternating-radius decagon, even-odd test
      double vx[10], vy[10];
      for (int i = 0; i < 10; ++i) {
        const double r = (i % 2 == 0) ? 4.9 : 1.9;
        const double a = -1.5707963267948966 + 3.141592653589793 * i / 5.0;
        vx[i] = cx + r * std::cos(a);
        vy[i] = cy + r * std::sin(a);
      }
      bool inside = false;
      for (int i = 0, j = 9; i < 10; j = i++) {
        if ((vy[i] > y) != (vy[j] > y) &&
            x < (vx[j] - vx[i]) * (y - vy[i]) / (vy[j] - vy[i]) + vx[i]) {
          inside = !inside;
        }
      }
      return inside;
    }
  }
  return false;
}

void color_rgb(int color, unsigned char out[3]) {
  // golden-ratio hue walk gives well-separated colors for any palette size
  const double h = std::fmod(0.13 + color * 0.61803398874989485, 1.0) * 6.0;
  const double s = 0.85, v = 0.95;
  const int i = static_cast<int>(h);
  const double f = h - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  double r, g, b;
  switch (i % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  out[0] = static_cast<unsigned char>(std::lround(r * 255.0));
  out[1] = static_cast<unsigned char>(std::lround(g * 255.0));
  out[2] = static_cast<unsigned char>(std::lround(b * 255.0));
}

}  // namespace

std::vector<unsigned char> render_ppm(const EnvState& state, const Library& lib) {
  if (state.grid_w != 5 || state.grid_h != 5) {
    throw UnsupportedGrid("rendering is defined for 5x5 grids only");
  }
  constexpr int kCell = 10;
  constexpr int kSide = 50;
  const char* header = "P6\n50 50\n255\n";
  std::vector<unsigned char> img(std::strlen(header) + 3 * kSide * kSide, 0);
  std::memcpy(img.data(), header, std::strlen(header));
  unsigned char* pix = img.data() + std::strlen(header);
  for (std::size_t i = 0; i < state.positions.size(); ++i) {
    const ObjectSpec& spec = lib.object(state.scene.object_ids[i]);
    unsigned char rgb[3];
    color_rgb(spec.color, rgb);
    const GridPos& p = state.positions[i];
    for (int py = 0; py < kCell; ++py) {
      for (int px = 0; px < kCell; ++px) {
        if (!glyph_hit(spec.shape, px, py)) continue;
        const int y = p.row * kCell + py;
        const int x = p.col * kCell + px;
        unsigned char* dst = pix + 3 * (y * kSide + x);
        dst[0] = rgb[0];
        dst[1] = rgb[1];
        dst[2] = rgb[2];
      }
    }
  }
  return img;
}

}  // namespace oolib
