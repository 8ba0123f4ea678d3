#pragma once

// Per-action feature rows for the policy/value network.
//
// Lengths are normalized by the ideal edge E = (total volume)^(1/d), which
// equals the generator's origin-bin edge for square/cube bins.
//
//   per action: oriented dims (d)  / E
//               position (d)       / E
//               item volume fraction
//               enclosing cost after the action / ideal cost
//   global:     fraction of items placed
//               current enclosing extents (d) / E
//               current cost / ideal cost (0 before the first placement)
//
// 2D: F = 10, 3D: F = 13. Item ids are deliberately not encoded.

#include <Eigen/Dense>
#include <cmath>
#include <span>

#include "r2/env.hpp"

namespace r2 {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

[[nodiscard]] constexpr auto feature_width(int dim) -> int { return dim == 3 ? 13 : 10; }

[[nodiscard]] inline auto ideal_edge(const Instance& inst) -> double {
  const auto v = static_cast<double>(inst.total_volume());
  return inst.dim == 3 ? std::cbrt(v) : std::sqrt(v);
}

[[nodiscard]] inline auto featurize(const PackState& s, std::span<const Action> actions) -> FeatureMatrix {
  if (actions.empty()) throw ContractError("featurize needs at least one action");
  const auto& inst = s.instance();
  const int d = inst.dim;
  const double edge = ideal_edge(inst);
  const double ideal = ideal_cost(inst);
  const double total = static_cast<double>(inst.total_volume());
  const double frac_placed = static_cast<double>(s.step()) / static_cast<double>(inst.size());
  const double cur_cost = s.step() == 0 ? 0.0 : bin_cost(s) / ideal;

  FeatureMatrix f(static_cast<Eigen::Index>(actions.size()), feature_width(d));
  for (std::size_t r = 0; r < actions.size(); ++r) {
    const auto& a = actions[r];
    const Box b = placed_box(inst, a);
    const auto row = static_cast<Eigen::Index>(r);
    Eigen::Index c = 0;
    for (int k = 0; k < d; ++k) f(row, c++) = b.size[k] / edge;
    for (int k = 0; k < d; ++k) f(row, c++) = b.pos[k] / edge;
    f(row, c++) = static_cast<double>(inst.items[static_cast<std::size_t>(a.item_id)].volume()) / total;
    Vec3 ext = s.extent();
    for (int k = 0; k < 3; ++k) ext[k] = std::max(ext[k], b.pos[k] + b.size[k]);
    const double L = ext[0], W = ext[1], H = ext[2];
    f(row, c++) = (d == 3 ? L * W + W * H + L * H : L + W) / ideal;
    f(row, c++) = frac_placed;
    for (int k = 0; k < d; ++k) f(row, c++) = s.extent()[k] / edge;
    f(row, c++) = cur_cost;
  }
  return f;
}

}  // namespace r2
