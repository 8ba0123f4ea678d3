// Generates one instance, packs it with the lego heuristic and with plain
// MCTS, and prints both layouts.
#include <iostream>
#include <random>

#include "r2/baselines.hpp"

namespace {

void show(const char* name, const r2::Solution& sol) {
  std::cout << name << ": reward " << sol.reward() << ", cost " << r2::bin_cost_exact(sol.state) << "\n";
  for (const auto& b : sol.state.boxes()) {
    std::cout << "  at (" << b.pos[0] << ", " << b.pos[1] << ") size " << b.size[0] << " x " << b.size[1] << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
  const auto inst = std::make_shared<const r2::Instance>(r2::generate(8, {10, 10, 1}, seed, 2));
  std::cout << "items:";
  for (const auto& it : inst->items) std::cout << ' ' << it.dims[0] << 'x' << it.dims[1];
  std::cout << "\n";

  show("lego", r2::lego_solve(inst));
  std::mt19937_64 rng(seed);
  show("plain-mcts", r2::plain_mcts_solve(inst, 200, rng));
}
