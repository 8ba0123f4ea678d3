#pragma once

#include <memory>
#include <vector>

#include "r2/env.hpp"
#include "r2/generator.hpp"

namespace r2::fixture {

// Items only; the bin is a placeholder row of unit cells.
inline auto make_instance(int dim, std::vector<Vec3> dims) -> std::shared_ptr<const Instance> {
  auto inst = std::make_shared<Instance>();
  inst->dim = dim;
  std::int64_t v = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dim == 2) dims[i][2] = 1;
    inst->items.push_back(Item{static_cast<int>(i), dims[i]});
    v += std::int64_t{dims[i][0]} * dims[i][1] * dims[i][2];
  }
  inst->bin = {static_cast<int>(v), 1, 1};
  return inst;
}

inline auto generated(std::uint64_t seed, int n, int dim = 2, int edge = 10) -> std::shared_ptr<const Instance> {
  return std::make_shared<const Instance>(generate(n, {edge, edge, dim == 3 ? edge : 1}, seed, dim));
}

}  // namespace r2::fixture
