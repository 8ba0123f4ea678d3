#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "r2/generator.hpp"
#include "r2/mcts.hpp"
#include "support/oracles.hpp"

using namespace r2;
using Catch::Approx;

namespace {

auto slabs_state() -> PackState {
  auto inst = std::make_shared<Instance>();
  inst->dim = 2;
  inst->bin = {10, 10, 1};
  inst->items = {Item{0, {10, 5, 1}}, Item{1, {10, 5, 1}}};
  return apply_action(PackState(inst), Action{0, {0, 0, 0}, Orientation{0}});
}

auto generated_root(std::uint64_t seed, int n) -> PackState {
  return PackState(std::make_shared<const Instance>(generate(n, {10, 10, 1}, seed, 2)));
}

}  // namespace

TEST_CASE("improved policy", "[mcts]") {
  const std::vector<int> c{30, 10, 60};
  const auto p1 = improved_policy(c, 1.0);
  CHECK(p1[0] == Approx(0.3));
  CHECK(p1[1] == Approx(0.1));
  CHECK(p1[2] == Approx(0.6));
  CHECK(improved_policy(c, 0.0) == std::vector<double>{0, 0, 1});
  CHECK(improved_policy(std::vector<int>{5, 5}, 0.0) == std::vector<double>{1, 0});
  const auto sharp = improved_policy(c, 0.5);
  CHECK(sharp[2] == Approx(3600.0 / (900 + 100 + 3600)));
  CHECK_THROWS_AS(improved_policy(std::vector<int>{0, 0}, 1.0), ContractError);
  CHECK_THROWS_AS(improved_policy(std::vector<int>{1, -1}, 1.0), ContractError);
}

TEST_CASE("single simulation visits one child", "[mcts]") {
  std::mt19937_64 rng(1);
  const auto net = init_params({10, 16}, 1);
  SearchConfig cfg;
  cfg.simulations = 1;
  const auto res = search(generated_root(3, 5), net_evaluator(net), TerminalValue::warmup(), cfg, rng);
  CHECK(std::accumulate(res.counts.begin(), res.counts.end(), 0) == 1);
  CHECK(std::ranges::count(res.counts, 1) == 1);
}

TEST_CASE("visit counts sum to S, including after tree reuse", "[mcts]") {
  std::mt19937_64 rng(2);
  const auto net = init_params({10, 16}, 2);
  SearchConfig cfg;
  cfg.simulations = 120;
  cfg.root_noise = true;
  Search tree(generated_root(8, 6), cfg);
  for (int move = 0; move < 6; ++move) {
    const auto counts = tree.run(net_evaluator(net), TerminalValue::warmup(), rng);
    REQUIRE(std::accumulate(counts.begin(), counts.end(), 0) == 120);
    REQUIRE(tree.root().visits - 1 == tree.root().child_visit_total());
    const auto best = static_cast<std::size_t>(std::ranges::max_element(counts) - counts.begin());
    const int kept = counts[best];
    const double w = tree.root().child_value[best];
    if (move == 5) break;
    tree.advance(best);
    REQUIRE(tree.root().visits == kept);
    REQUIRE(tree.root().value_sum == Approx(w));
  }
}

TEST_CASE("terminal root is rejected", "[mcts]") {
  auto s = slabs_state();
  s = apply_action(s, legal_actions(s).front());
  CHECK_THROWS_AS(Search(s, SearchConfig{}), ContractError);
}

TEST_CASE("ranked backup finds the only optimal completion", "[mcts]") {
  const auto root = slabs_state();
  const auto acts = legal_actions(root);
  REQUIRE(acts.size() == 4);
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto net = init_params({10, 64}, seed);
    SearchConfig cfg;
    cfg.root_noise = true;
    const auto res = search(root, net_evaluator(net), TerminalValue::ranked(0.9), cfg, rng);
    REQUIRE(res.actions == acts);
    if (2 * res.counts[0] > 300) ++wins;
  }
  CHECK(wins == 20);
}

TEST_CASE("huge exploration constant visits round-robin", "[mcts]") {
  std::mt19937_64 rng(3);
  SearchConfig cfg;
  cfg.c_puct = 1e12;
  const auto root = generated_root(5, 4);
  const auto n = legal_actions(root).size();
  cfg.simulations = static_cast<int>(3 * n);
  const auto res = search(root, uniform_evaluator(), TerminalValue::warmup(), cfg, rng);
  for (int c : res.counts) CHECK(c == 3);
}

TEST_CASE("guided backups stay within [-1, 1]", "[mcts]") {
  std::mt19937_64 rng(4);
  const auto net = init_params({10, 16}, 9);
  SearchConfig cfg;
  cfg.simulations = 200;
  Search tree(generated_root(12, 5), cfg);
  tree.run(net_evaluator(net), TerminalValue::ranked(0.8), rng);
  const auto& r = tree.root();
  for (std::size_t a = 0; a < r.actions.size(); ++a) {
    CHECK(r.q(a) >= -1.0);
    CHECK(r.q(a) <= 1.0);
  }
}

TEST_CASE("search is deterministic for a fixed seed", "[mcts]") {
  const auto net = init_params({10, 16}, 4);
  SearchConfig cfg;
  cfg.simulations = 80;
  cfg.root_noise = true;
  std::mt19937_64 a(77), b(77);
  const auto root = generated_root(21, 6);
  const auto ra = search(root, net_evaluator(net), TerminalValue::ranked(0.85), cfg, a);
  const auto rb = search(root, net_evaluator(net), TerminalValue::ranked(0.85), cfg, b);
  CHECK(ra.counts == rb.counts);
}

TEST_CASE("roll-out values", "[mcts][rollout]") {
  std::mt19937_64 rng(5);
  auto done = slabs_state();
  done = apply_action(done, legal_actions(done).front());
  CHECK(rollout_value(done, rng) == terminal_reward(done));

  auto square = std::make_shared<Instance>();
  square->dim = 2;
  square->items = {Item{0, {4, 4, 1}}};
  square->bin = {4, 4, 1};
  CHECK(rollout_value(PackState(square), rng) == 1.0);

  const auto root = generated_root(31, 3);
  const double expected = oracle::expected_random_reward(root);
  double sum = 0.0, sq = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const double r = rollout_value(root, rng);
    sum += r;
    sq += r * r;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(std::max(sq / n - mean * mean, 0.0));
  CHECK(std::abs(mean - expected) <= 3.0 * sd / std::sqrt(double{n}) + 1e-12);
}

TEST_CASE("rollout mode backs up raw rewards", "[mcts][rollout]") {
  std::mt19937_64 rng(6);
  SearchConfig cfg;
  cfg.mode = SearchMode::rollout;
  cfg.simulations = 100;
  Search tree(generated_root(40, 4), cfg);
  const auto counts = tree.run(Evaluator{}, TerminalValue::raw(), rng);
  CHECK(std::accumulate(counts.begin(), counts.end(), 0) == 100);
  const auto& r = tree.root();
  for (std::size_t a = 0; a < r.actions.size(); ++a) {
    CHECK(r.q(a) >= 0.0);
    CHECK(r.q(a) <= 1.0);
  }
}
