#pragma once

// Single-bin packing as a deterministic single-player MDP.
//
// Coordinates are integers. 2D problems are embedded in 3D with a third
// extent of 1 and z = 0; gravity acts along y in 2D and along z in 3D.
// The bin is not fixed: the cost is that of the tight enclosing box of
// everything placed so far, and an episode ends once every item is placed.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "r2/error.hpp"

namespace r2 {

using Vec3 = std::array<int, 3>;

struct Orientation {
  int code = 0;
  friend auto operator<=>(const Orientation&, const Orientation&) = default;
};

[[nodiscard]] constexpr auto orientation_count(int dim) -> int { return dim == 3 ? 6 : 2; }

[[nodiscard]] constexpr auto gravity_axis(int dim) -> int { return dim == 3 ? 2 : 1; }

// Canonical mapping, 3D: 0:(l,w,h) 1:(l,h,w) 2:(w,l,h) 3:(w,h,l) 4:(h,l,w) 5:(h,w,l)
//                   2D: 0:(l,w)   1:(w,l)
[[nodiscard]] inline auto oriented_dims(const Vec3& d, Orientation o, int dim) -> Vec3 {
  if (o.code < 0 || o.code >= orientation_count(dim)) {
    throw ContractError("orientation code " + std::to_string(o.code) + " invalid for " +
                        std::to_string(dim) + "D");
  }
  const auto [l, w, h] = d;
  if (dim == 2) return o.code == 0 ? Vec3{l, w, h} : Vec3{w, l, h};
  switch (o.code) {
    case 0: return {l, w, h};
    case 1: return {l, h, w};
    case 2: return {w, l, h};
    case 3: return {w, h, l};
    case 4: return {h, l, w};
    default: return {h, w, l};
  }
}

struct Box {
  Vec3 pos{};
  Vec3 size{};
};

// Open-interval intersection on every axis: touching faces do not overlap.
[[nodiscard]] constexpr auto overlaps(const Box& a, const Box& b) noexcept -> bool {
  for (int k = 0; k < 3; ++k) {
    if (a.pos[k] >= b.pos[k] + b.size[k] || b.pos[k] >= a.pos[k] + a.size[k]) return false;
  }
  return true;
}

struct Item {
  int id = 0;
  Vec3 dims{1, 1, 1};

  [[nodiscard]] auto volume() const noexcept -> std::int64_t {
    return std::int64_t{dims[0]} * dims[1] * dims[2];
  }
  friend auto operator==(const Item&, const Item&) -> bool = default;
};

// A placement and an action carry the same quintuplet (item, x, y, z, orientation).
struct Placement {
  int item_id = 0;
  Vec3 pos{};
  Orientation orient{};
  friend auto operator<=>(const Placement&, const Placement&) = default;
};
using Action = Placement;

struct Instance {
  int dim = 2;
  std::vector<Item> items;
  Vec3 bin{1, 1, 1};
  std::uint64_t seed = 0;
  // Split layout kept from generation. Only the supervised baseline and
  // optimality accounting may look at it.
  std::vector<Placement> optimal_layout;

  [[nodiscard]] auto size() const noexcept -> int { return static_cast<int>(items.size()); }

  [[nodiscard]] auto total_volume() const noexcept -> std::int64_t {
    std::int64_t v = 0;
    for (const auto& it : items) v += it.volume();
    return v;
  }

  [[nodiscard]] auto bin_volume() const noexcept -> std::int64_t {
    return std::int64_t{bin[0]} * bin[1] * bin[2];
  }

  friend auto operator==(const Instance&, const Instance&) -> bool = default;
};

[[nodiscard]] inline auto placed_box(const Instance& inst, const Placement& p) -> Box {
  if (p.item_id < 0 || p.item_id >= inst.size()) {
    throw ContractError("item id " + std::to_string(p.item_id) + " out of range");
  }
  return {p.pos, oriented_dims(inst.items[static_cast<std::size_t>(p.item_id)].dims, p.orient, inst.dim)};
}

// Returns a description of the first broken instance invariant, if any.
[[nodiscard]] inline auto instance_problem(const Instance& inst) -> std::optional<std::string> {
  if (inst.dim != 2 && inst.dim != 3) return "dim must be 2 or 3";
  if (inst.items.empty()) return "instance has no items";
  if (inst.dim == 2 && inst.bin[2] != 1) return "2D bin must have third extent 1";
  for (int k = 0; k < 3; ++k) {
    if (inst.bin[k] < 1) return "bin dims must be >= 1";
  }
  for (std::size_t i = 0; i < inst.items.size(); ++i) {
    const auto& it = inst.items[i];
    if (it.id != static_cast<int>(i)) return "item ids must be 0..N-1 in order";
    for (int k = 0; k < 3; ++k) {
      if (it.dims[k] < 1) return "item " + std::to_string(i) + " has a dimension < 1";
    }
    if (inst.dim == 2 && it.dims[2] != 1) return "2D item " + std::to_string(i) + " must have third extent 1";
  }
  if (inst.total_volume() != inst.bin_volume()) return "volume conservation: item volumes do not sum to the bin volume";
  if (inst.optimal_layout.empty()) return std::nullopt;

  if (inst.optimal_layout.size() != inst.items.size()) return "layout tiling: layout size differs from item count";
  std::vector<char> seen(inst.items.size(), 0);
  std::vector<Box> boxes;
  for (const auto& p : inst.optimal_layout) {
    if (p.item_id < 0 || p.item_id >= inst.size() || seen[static_cast<std::size_t>(p.item_id)]) {
      return "layout tiling: bad or repeated item id";
    }
    seen[static_cast<std::size_t>(p.item_id)] = 1;
    if (p.orient.code < 0 || p.orient.code >= orientation_count(inst.dim)) return "layout tiling: bad orientation";
    const Box b = placed_box(inst, p);
    for (int k = 0; k < 3; ++k) {
      if (b.pos[k] < 0 || b.pos[k] + b.size[k] > inst.bin[k]) return "layout tiling: box outside the bin";
    }
    for (const auto& o : boxes) {
      if (overlaps(o, b)) return "layout tiling: boxes overlap";
    }
    boxes.push_back(b);
  }
  // In-bin, pairwise disjoint and volume-conserving implies gap-free.
  return std::nullopt;
}

class PackState;
auto apply_action(const PackState& state, const Action& a) -> PackState;
auto apply_legal_action(const PackState& state, const Action& a) -> PackState;

class PackState {
 public:
  explicit PackState(std::shared_ptr<const Instance> inst) : m_instance(std::move(inst)) {
    if (!m_instance) throw ContractError("PackState needs an instance");
    m_is_placed.assign(m_instance->items.size(), 0);
  }

  [[nodiscard]] auto instance() const noexcept -> const Instance& { return *m_instance; }
  [[nodiscard]] auto instance_ptr() const noexcept -> const std::shared_ptr<const Instance>& { return m_instance; }
  [[nodiscard]] auto dim() const noexcept -> int { return m_instance->dim; }
  [[nodiscard]] auto placed() const noexcept -> std::span<const Placement> { return m_placed; }
  [[nodiscard]] auto boxes() const noexcept -> std::span<const Box> { return m_boxes; }
  [[nodiscard]] auto step() const noexcept -> int { return static_cast<int>(m_placed.size()); }
  [[nodiscard]] auto item_count() const noexcept -> int { return m_instance->size(); }
  [[nodiscard]] auto terminal() const noexcept -> bool { return step() == item_count(); }
  [[nodiscard]] auto is_placed(int id) const -> bool { return m_is_placed.at(static_cast<std::size_t>(id)) != 0; }

  // Upper corner of the tight enclosing box; the lower corner is the origin
  // because the first item always lands there.
  [[nodiscard]] auto extent() const noexcept -> const Vec3& { return m_extent; }

  [[nodiscard]] auto unplaced() const -> std::vector<int> {
    std::vector<int> ids;
    for (int i = 0; i < item_count(); ++i) {
      if (!m_is_placed[static_cast<std::size_t>(i)]) ids.push_back(i);
    }
    return ids;
  }

  [[nodiscard]] auto placed_volume() const noexcept -> std::int64_t {
    std::int64_t v = 0;
    for (const auto& b : m_boxes) v += std::int64_t{b.size[0]} * b.size[1] * b.size[2];
    return v;
  }

  friend auto operator==(const PackState& a, const PackState& b) -> bool {
    return *a.m_instance == *b.m_instance && a.m_placed == b.m_placed;
  }

 private:
  friend auto apply_legal_action(const PackState& state, const Action& a) -> PackState;

  void place(const Action& a) {
    const Box b = placed_box(*m_instance, a);
    m_placed.push_back(a);
    m_boxes.push_back(b);
    m_is_placed[static_cast<std::size_t>(a.item_id)] = 1;
    for (int k = 0; k < 3; ++k) m_extent[k] = std::max(m_extent[k], b.pos[k] + b.size[k]);
  }

  std::shared_ptr<const Instance> m_instance;
  std::vector<Placement> m_placed;
  std::vector<Box> m_boxes;
  std::vector<std::uint8_t> m_is_placed;
  Vec3 m_extent{0, 0, 0};
};

// Event-point coordinates per axis: {0} plus every placed box's far face.
[[nodiscard]] inline auto candidate_axes(const PackState& s) -> std::array<std::vector<int>, 3> {
  std::array<std::vector<int>, 3> axes;
  for (int k = 0; k < 3; ++k) {
    auto& v = axes[static_cast<std::size_t>(k)];
    v.push_back(0);
    if (k == 2 && s.dim() == 2) continue;
    for (const auto& b : s.boxes()) v.push_back(b.pos[k] + b.size[k]);
    std::ranges::sort(v);
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return axes;
}

// Cartesian product of the per-axis event points, lexicographic (x, y, z).
[[nodiscard]] inline auto candidate_positions(const PackState& s) -> std::vector<Vec3> {
  const auto axes = candidate_axes(s);
  std::vector<Vec3> out;
  out.reserve(axes[0].size() * axes[1].size() * axes[2].size());
  for (int x : axes[0]) {
    for (int y : axes[1]) {
      for (int z : axes[2]) out.push_back({x, y, z});
    }
  }
  return out;
}

namespace detail {

// Footprint-center containment in one supporting top face, closed region.
// Doubled coordinates keep the center integral.
[[nodiscard]] inline auto box_supported(std::span<const Box> placed, const Box& b, int dim) -> bool {
  const int g = gravity_axis(dim);
  if (b.pos[g] == 0) return true;
  for (const auto& p : placed) {
    if (p.pos[g] + p.size[g] != b.pos[g]) continue;
    bool inside = true;
    for (int k = 0; k < dim; ++k) {
      if (k == g) continue;
      const int c2 = 2 * b.pos[k] + b.size[k];
      if (c2 < 2 * p.pos[k] || c2 > 2 * (p.pos[k] + p.size[k])) {
        inside = false;
        break;
      }
    }
    if (inside) return true;
  }
  return false;
}

[[nodiscard]] inline auto box_collides(std::span<const Box> placed, const Box& b) -> bool {
  return std::ranges::any_of(placed, [&](const Box& p) { return overlaps(p, b); });
}

// Orientation codes whose oriented dims differ from every lower code.
[[nodiscard]] inline auto distinct_orientations(const Vec3& dims, int dim) -> std::vector<Orientation> {
  std::vector<Orientation> out;
  std::vector<Vec3> seen;
  for (int c = 0; c < orientation_count(dim); ++c) {
    const Vec3 od = oriented_dims(dims, Orientation{c}, dim);
    if (std::ranges::find(seen, od) != seen.end()) continue;
    seen.push_back(od);
    out.push_back(Orientation{c});
  }
  return out;
}

}  // namespace detail

[[nodiscard]] inline auto is_supported(const PackState& s, const Action& a) -> bool {
  return detail::box_supported(s.boxes(), placed_box(s.instance(), a), s.dim());
}

// All (item, orientation, candidate position) triples that pass the overlap
// and support checks, ordered by item id, orientation code, then position.
[[nodiscard]] inline auto legal_actions(const PackState& s) -> std::vector<Action> {
  std::vector<Action> out;
  if (s.terminal()) return out;
  const auto positions = candidate_positions(s);
  const auto& inst = s.instance();
  for (int id : s.unplaced()) {
    const auto& dims = inst.items[static_cast<std::size_t>(id)].dims;
    for (const auto o : detail::distinct_orientations(dims, inst.dim)) {
      const Vec3 size = oriented_dims(dims, o, inst.dim);
      for (const auto& pos : positions) {
        const Box b{pos, size};
        if (detail::box_collides(s.boxes(), b)) continue;
        if (!detail::box_supported(s.boxes(), b, inst.dim)) continue;
        out.push_back(Action{id, pos, o});
      }
    }
  }
  return out;
}

// Name of the first constraint `a` violates in `s`, or nothing if legal.
[[nodiscard]] inline auto violated_constraint(const PackState& s, const Action& a) -> std::optional<std::string> {
  const auto& inst = s.instance();
  if (s.terminal()) return "terminal-state";
  if (a.item_id < 0 || a.item_id >= inst.size()) return "item-range";
  if (s.is_placed(a.item_id)) return "item-already-placed";
  if (a.orient.code < 0 || a.orient.code >= orientation_count(inst.dim)) return "orientation";
  const auto& dims = inst.items[static_cast<std::size_t>(a.item_id)].dims;
  const auto distinct = detail::distinct_orientations(dims, inst.dim);
  if (std::ranges::find(distinct, a.orient) == distinct.end()) return "duplicate-orientation";
  const auto axes = candidate_axes(s);
  for (int k = 0; k < 3; ++k) {
    if (!std::ranges::binary_search(axes[static_cast<std::size_t>(k)], a.pos[k])) return "candidate-position";
  }
  const Box b = placed_box(inst, a);
  if (detail::box_collides(s.boxes(), b)) return "overlap";
  if (!detail::box_supported(s.boxes(), b, inst.dim)) return "support";
  return std::nullopt;
}

inline auto apply_action(const PackState& state, const Action& a) -> PackState {
  if (auto bad = violated_constraint(state, a)) {
    throw ConstraintViolation(*bad, "item " + std::to_string(a.item_id) + " at (" + std::to_string(a.pos[0]) + "," +
                                        std::to_string(a.pos[1]) + "," + std::to_string(a.pos[2]) + ") orientation " +
                                        std::to_string(a.orient.code));
  }
  return apply_legal_action(state, a);
}

// Skips validation; `a` must come from legal_actions(state).
inline auto apply_legal_action(const PackState& state, const Action& a) -> PackState {
  PackState next = state;
  next.place(a);
  return next;
}

// Replays a sequence through apply_action, so every step is re-validated.
[[nodiscard]] inline auto replay(std::shared_ptr<const Instance> inst, std::span<const Action> actions) -> PackState {
  PackState s(std::move(inst));
  for (const auto& a : actions) s = apply_action(s, a);
  return s;
}

// Integer cost of the tight enclosing box: LW + WH + LH (3D), L + W (2D).
[[nodiscard]] inline auto bin_cost_exact(const PackState& s) -> std::int64_t {
  if (s.step() == 0) throw ContractError("bin cost of an empty state is undefined");
  const std::int64_t L = s.extent()[0], W = s.extent()[1], H = s.extent()[2];
  return s.dim() == 3 ? L * W + W * H + L * H : L + W;
}

[[nodiscard]] inline auto bin_cost(const PackState& s) -> double { return static_cast<double>(bin_cost_exact(s)); }

// Cost of the ideal cube (square) holding the total item volume (area).
[[nodiscard]] inline auto ideal_cost(const Instance& inst) -> double {
  if (inst.items.empty()) throw ContractError("ideal cost of an empty instance");
  const auto v = static_cast<double>(inst.total_volume());
  if (inst.dim == 3) {
    const double edge = std::cbrt(v);
    return 3.0 * edge * edge;
  }
  return 2.0 * std::sqrt(v);
}

// C == C* decided in integers: 2D C^2 == 4A, 3D C^3 == 27 V^2.
[[nodiscard]] inline auto cost_is_ideal(const Instance& inst, std::int64_t cost) -> bool {
  const auto v = static_cast<__int128>(inst.total_volume());
  const auto c = static_cast<__int128>(cost);
  if (inst.dim == 3) return c * c * c == 27 * v * v;
  return c * c == 4 * v;
}

[[nodiscard]] inline auto is_optimal(const PackState& s) -> bool {
  return s.terminal() && cost_is_ideal(s.instance(), bin_cost_exact(s));
}

// C*/C at terminal states; exactly 1.0 when the cost is ideal.
[[nodiscard]] inline auto terminal_reward(const PackState& s) -> double {
  if (!s.terminal()) throw ContractError("terminal_reward requested on a non-terminal state");
  const auto cost = bin_cost_exact(s);
  if (cost_is_ideal(s.instance(), cost)) return 1.0;
  return std::min(1.0, ideal_cost(s.instance()) / static_cast<double>(cost));
}

}  // namespace r2
