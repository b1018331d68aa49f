#pragma once

#include <cstdint>
#include <vector>

#include "oolib/common.hpp"

namespace oolib {

// ---------------------------------------------------------------------------
// Object vocabulary
// ---------------------------------------------------------------------------

enum class Shape : std::uint8_t {
  TriangleUp,
  TriangleDown,
  TriangleLeft,
  TriangleRight,
  Square,
  Circle,
  Diamond,
  Cross,
  Pentagon,
  Star,
};
constexpr int kNumShapes = 10;

enum class Orientation : std::uint8_t { North, East, South, West };

enum class Variant : std::uint8_t { Shapes, RushHour };

struct ObjectSpec {
  int id = 0;
  Shape shape = Shape::Square;
  int color = 0;
  Orientation orientation = Orientation::North;
};

// The full vocabulary of N objects. ids are contiguous from 0 and every
// (shape, color) pair is unique.
class Library {
 public:
  static Library shapes(int n);
  static Library rush_hour(int n);

  int size() const { return static_cast<int>(objects_.size()); }
  int n_colors() const { return n_colors_; }
  Variant variant() const { return variant_; }
  const ObjectSpec& object(int id) const;

  // one-hot(shape) + one-hot(color) + one-hot(orientation) + (row/H, col/W)
  int feature_dim() const { return kNumShapes + n_colors_ + 4 + 2; }

 private:
  std::vector<ObjectSpec> objects_;
  int n_colors_ = 0;
  Variant variant_ = Variant::Shapes;
};

// A K-subset of library ids, kept sorted.
struct Scene {
  std::vector<int> object_ids;

  int k() const { return static_cast<int>(object_ids.size()); }
  bool contains(int id) const;
  bool operator==(const Scene& o) const { return object_ids == o.object_ids; }
};

// Validates 1 < K < N, ids in range, no duplicates. Returns the sorted scene.
Scene make_scene(std::vector<int> ids, int library_size);

// Deterministic order-insensitive key, used for split bookkeeping and for
// deriving per-scene streams.
std::uint64_t scene_key(const Scene& s);

// ---------------------------------------------------------------------------
// Grid state
// ---------------------------------------------------------------------------

struct GridPos {
  int row = 0;
  int col = 0;
  bool operator==(const GridPos& o) const { return row == o.row && col == o.col; }
};

struct EnvState {
  Scene scene;
  std::vector<GridPos> positions;  // parallel to scene.object_ids
  Variant variant = Variant::Shapes;
  int grid_w = 5;
  int grid_h = 5;

  // Index into scene.object_ids / positions; throws AbsentObject.
  int slot_of(int object_id) const;
  const GridPos& pos_of(int object_id) const;
  bool occupied(const GridPos& p) const;
};

struct AbsentObject : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidAction : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GridTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedGrid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

// primitive meaning depends on the variant:
//   Shapes:   0=north 1=south 2=east 3=west (absolute compass moves)
//   RushHour: 0=forward 1=backward 2=left 3=right (relative to orientation)
struct ActionId {
  int object_id = 0;
  int primitive = 0;
};

inline int flat_action(const ActionId& a) { return 4 * a.object_id + a.primitive; }
inline ActionId unflat_action(int idx) { return ActionId{idx / 4, idx % 4}; }

// Absolute displacement of an action for an object with the given
// orientation. Compass indices: 0=north 1=east 2=south 3=west.
GridPos action_delta(Variant variant, Orientation orientation, int primitive);

struct StepResult {
  EnvState state;
  bool moved = false;
};

// Deterministic single-object move; blocked or off-grid moves leave the state
// unchanged with moved=false.
StepResult step(const EnvState& state, const ActionId& action, const Library& lib);

EnvState reset(const Library& lib, const Scene& scene, int grid_w, int grid_h,
               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

struct Observation {
  // slot_features[i] describes the object slot_order[i]; the order is drawn
  // fresh and uniformly on every call to observe().
  std::vector<std::vector<double>> slot_features;
  std::vector<int> slot_order;

  int k() const { return static_cast<int>(slot_order.size()); }
};

Observation observe(const EnvState& state, const Library& lib, Rng& rng);

// Feature vector of one object at a position (also used to rebuild layouts
// from recorded corpora).
std::vector<double> object_features(const Library& lib, int object_id, GridPos pos,
                                    int grid_w, int grid_h);

// Recovers the grid position encoded in a feature vector.
GridPos feature_position(const std::vector<double>& feature, int grid_w, int grid_h);

// ---------------------------------------------------------------------------
// Rendering (5x5 grids only): binary P6, 50x50, 10x10 cell per object.
// ---------------------------------------------------------------------------

std::vector<unsigned char> render_ppm(const EnvState& state, const Library& lib);

}  // namespace oolib
