#pragma once

// Instance generator: recursive random splitting of a square or cube.
//
// Weight functions (swap here to try another reading of the split rule):
//   item pick      ~ item volume, among items with at least one edge >= 2
//   axis pick      ~ edge length, among axes with length >= 2
//   cut position p ~ min(p, e - p) + 1 for p in 1..e-1 (favours central cuts)

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "r2/env.hpp"

namespace r2 {

namespace gen_weights {

inline auto item(const Box& b) -> double {
  return static_cast<double>(std::int64_t{b.size[0]} * b.size[1] * b.size[2]);
}
inline auto axis(int edge) -> double { return edge >= 2 ? static_cast<double>(edge) : 0.0; }
inline auto cut(int p, int edge) -> double { return static_cast<double>(std::min(p, edge - p) + 1); }

}  // namespace gen_weights

// Splits `bin` into `n` integer boxes. Deterministic in `seed`.
[[nodiscard]] inline auto generate(int n, Vec3 bin, std::uint64_t seed, int dim) -> Instance {
  if (dim != 2 && dim != 3) throw ContractError("dim must be 2 or 3");
  if (dim == 2) bin[2] = 1;
  if (n < 1) throw ContractError("need at least one item");
  for (int k = 0; k < 3; ++k) {
    if (bin[k] < 1) throw ContractError("bin dims must be >= 1");
  }
  const std::int64_t volume = std::int64_t{bin[0]} * bin[1] * bin[2];
  if (n > volume) {
    throw ContractError("cannot split a bin of volume " + std::to_string(volume) + " into " + std::to_string(n) +
                        " items");
  }

  std::mt19937_64 rng(seed);
  std::vector<Box> pieces{Box{{0, 0, 0}, bin}};
  while (static_cast<int>(pieces.size()) < n) {
    // Unit cubes cannot be split; they get weight zero and are never popped.
    std::vector<double> w(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const auto& s = pieces[i].size;
      const bool splittable = s[0] > 1 || s[1] > 1 || (dim == 3 && s[2] > 1);
      w[i] = splittable ? gen_weights::item(pieces[i]) : 0.0;
    }
    const auto idx = std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng);
    const Box piece = pieces[idx];
    pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(idx));

    std::vector<double> aw(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) aw[static_cast<std::size_t>(k)] = gen_weights::axis(piece.size[k]);
    const int axis = static_cast<int>(std::discrete_distribution<int>(aw.begin(), aw.end())(rng));

    const int edge = piece.size[axis];
    std::vector<double> cw(static_cast<std::size_t>(edge - 1));
    for (int p = 1; p < edge; ++p) cw[static_cast<std::size_t>(p - 1)] = gen_weights::cut(p, edge);
    const int cut = 1 + static_cast<int>(std::discrete_distribution<int>(cw.begin(), cw.end())(rng));

    Box lo = piece, hi = piece;
    lo.size[axis] = cut;
    hi.pos[axis] = piece.pos[axis] + cut;
    hi.size[axis] = edge - cut;
    pieces.push_back(lo);
    pieces.push_back(hi);
  }

  Instance inst;
  inst.dim = dim;
  inst.bin = bin;
  inst.seed = seed;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const int id = static_cast<int>(i);
    inst.items.push_back(Item{id, pieces[i].size});
    inst.optimal_layout.push_back(Placement{id, pieces[i].pos, Orientation{0}});
  }
  return inst;
}

// No support-respecting replay of the split layout exists.
class SequenceError : public std::runtime_error {
 public:
  explicit SequenceError(std::uint64_t seed)
      : std::runtime_error("no support-respecting replay of the optimal layout (seed " + std::to_string(seed) + ")"),
        m_seed(seed) {}
  [[nodiscard]] auto seed() const noexcept -> std::uint64_t { return m_seed; }

 private:
  std::uint64_t m_seed;
};

namespace detail {

// Mirrors the layout inside the bin along every axis set in `mask`.
[[nodiscard]] inline auto reflect_layout(const Instance& inst, unsigned mask) -> std::vector<Placement> {
  auto out = inst.optimal_layout;
  for (auto& p : out) {
    const Box b = placed_box(inst, p);
    for (int k = 0; k < inst.dim; ++k) {
      if (mask & (1U << k)) p.pos[k] = inst.bin[k] - (b.pos[k] + b.size[k]);
    }
  }
  return out;
}

// Greedy replay: at each step place the legal layout box with the smallest
// resulting enclosing cost (ties: larger volume, then lower id). Legality
// only grows as boxes are added, so the greedy order completes whenever any
// order does.
[[nodiscard]] inline auto greedy_replay(const std::shared_ptr<const Instance>& inst,
                                        std::vector<Placement> remaining) -> std::optional<std::vector<Action>> {
  PackState s(inst);
  std::vector<Action> seq;
  while (!remaining.empty()) {
    std::size_t best = remaining.size();
    std::int64_t best_cost = 0, best_vol = 0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (violated_constraint(s, remaining[i])) continue;
      const Box b = placed_box(*inst, remaining[i]);
      std::int64_t cost = 0;
      {
        Vec3 ext = s.extent();
        for (int k = 0; k < 3; ++k) ext[k] = std::max(ext[k], b.pos[k] + b.size[k]);
        const std::int64_t L = ext[0], W = ext[1], H = ext[2];
        cost = inst->dim == 3 ? L * W + W * H + L * H : L + W;
      }
      const std::int64_t vol = std::int64_t{b.size[0]} * b.size[1] * b.size[2];
      if (best == remaining.size() || cost < best_cost || (cost == best_cost && vol > best_vol)) {
        best = i;
        best_cost = cost;
        best_vol = vol;
      }
    }
    if (best == remaining.size()) return std::nullopt;
    s = apply_action(s, remaining[best]);
    seq.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return seq;
}

}  // namespace detail

// A legal action sequence that rebuilds the (possibly mirrored) split layout.
// Mirror images whose origin box is the largest item are tried first.
// Throws SequenceError when no mirror image admits a replay.
[[nodiscard]] inline auto optimal_sequence(const std::shared_ptr<const Instance>& inst) -> std::vector<Action> {
  if (inst->optimal_layout.empty()) throw ContractError("instance carries no optimal layout");
  struct Candidate {
    unsigned mask;
    std::int64_t origin_volume;
    std::vector<Placement> layout;
  };
  std::vector<Candidate> candidates;
  for (unsigned mask = 0; mask < (1U << inst->dim); ++mask) {
    auto layout = detail::reflect_layout(*inst, mask);
    std::int64_t origin_volume = 0;
    for (const auto& p : layout) {
      if (p.pos == Vec3{0, 0, 0}) origin_volume = inst->items[static_cast<std::size_t>(p.item_id)].volume();
    }
    candidates.push_back({mask, origin_volume, std::move(layout)});
  }
  std::ranges::stable_sort(candidates, std::greater<>{}, &Candidate::origin_volume);
  for (auto& c : candidates) {
    std::ranges::sort(c.layout, {}, &Placement::item_id);
    if (auto seq = detail::greedy_replay(inst, std::move(c.layout))) return *seq;
  }
  throw SequenceError(inst->seed);
}

}  // namespace r2
