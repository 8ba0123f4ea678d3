#pragma once

// Non-learning and learned agents that share the environment's action set:
// the Lego heuristic, uniform random play, greedy network play, guided and
// plain MCTS, and an exhaustive oracle for small instances. Plus the
// supervised baseline trainer.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "r2/checkpoint.hpp"
#include "r2/env.hpp"
#include "r2/generator.hpp"
#include "r2/mcts.hpp"
#include "r2/seeds.hpp"

namespace r2 {

// Outcome of one agent on one instance. `completed` is false on a dead end or
// an agent failure; the partial state is kept.
struct Solution {
  PackState state;
  std::vector<Action> actions;
  bool completed = false;
  std::string failure;

  [[nodiscard]] auto reward() const -> double { return completed ? terminal_reward(state) : 0.0; }
};

namespace detail {

inline auto extent_after(const PackState& s, const Action& a) -> Vec3 {
  const Box b = placed_box(s.instance(), a);
  Vec3 ext = s.extent();
  for (int k = 0; k < 3; ++k) ext[k] = std::max(ext[k], b.pos[k] + b.size[k]);
  return ext;
}

inline auto extent_cost(const Vec3& e, int dim) -> std::int64_t {
  const std::int64_t L = e[0], W = e[1], H = e[2];
  return dim == 3 ? L * W + W * H + L * H : L + W;
}

inline auto extent_volume(const Vec3& e) -> std::int64_t { return std::int64_t{e[0]} * e[1] * e[2]; }

}  // namespace detail

// Greedy heuristic. Step 0 puts the largest item (lowest id on ties) at the
// origin with its edges in non-increasing order. Later steps maximise
// placed volume / enclosing-box volume, then minimise the enclosing box's
// surface (perimeter in 2D), then keep the first action in action order.
[[nodiscard]] inline auto lego_solve(const std::shared_ptr<const Instance>& inst) -> Solution {
  Solution sol{PackState(inst), {}, false, {}};
  const auto& items = inst->items;
  const auto first = std::ranges::max_element(items, [](const Item& a, const Item& b) {
    return a.volume() < b.volume() || (a.volume() == b.volume() && a.id > b.id);
  });
  Vec3 sorted = first->dims;
  std::sort(sorted.begin(), sorted.begin() + inst->dim, std::greater<>{});
  for (const auto& a : legal_actions(sol.state)) {
    if (a.item_id == first->id && a.pos == Vec3{0, 0, 0} &&
        oriented_dims(first->dims, a.orient, inst->dim) == sorted) {
      sol.state = apply_legal_action(sol.state, a);
      sol.actions.push_back(a);
      break;
    }
  }
  if (sol.actions.empty()) {
    sol.failure = "no origin placement for the largest item";
    return sol;
  }
  while (!sol.state.terminal()) {
    const auto actions = legal_actions(sol.state);
    if (actions.empty()) {
      sol.failure = "dead end after " + std::to_string(sol.state.step()) + " placements";
      return sol;
    }
    const Action* best = nullptr;
    std::int64_t best_fill = 0, best_box = 1, best_surface = 0;
    for (const auto& a : actions) {
      const auto ext = detail::extent_after(sol.state, a);
      const std::int64_t fill = sol.state.placed_volume() + items[static_cast<std::size_t>(a.item_id)].volume();
      const std::int64_t box = detail::extent_volume(ext);
      const std::int64_t surface = detail::extent_cost(ext, inst->dim);
      // fill / box > best_fill / best_box, compared exactly.
      const auto lhs = static_cast<__int128>(fill) * best_box, rhs = static_cast<__int128>(best_fill) * box;
      if (!best || lhs > rhs || (lhs == rhs && surface < best_surface)) {
        best = &a;
        best_fill = fill;
        best_box = box;
        best_surface = surface;
      }
    }
    sol.state = apply_legal_action(sol.state, *best);
    sol.actions.push_back(*best);
  }
  sol.completed = true;
  return sol;
}

// Uniformly random legal moves.
template <class Rng>
[[nodiscard]] auto random_solve(const std::shared_ptr<const Instance>& inst, Rng& rng) -> Solution {
  Solution sol{PackState(inst), {}, false, {}};
  while (!sol.state.terminal()) {
    const auto actions = legal_actions(sol.state);
    if (actions.empty()) {
      sol.failure = "dead end";
      return sol;
    }
    const auto& a = actions[std::uniform_int_distribution<std::size_t>(0, actions.size() - 1)(rng)];
    sol.state = apply_legal_action(sol.state, a);
    sol.actions.push_back(a);
  }
  sol.completed = true;
  return sol;
}

// Greedy arg-max of the policy head, no search.
[[nodiscard]] inline auto net_solve(const std::shared_ptr<const Instance>& inst, const NetParams& net) -> Solution {
  Solution sol{PackState(inst), {}, false, {}};
  while (!sol.state.terminal()) {
    const auto actions = legal_actions(sol.state);
    if (actions.empty()) {
      sol.failure = "dead end";
      return sol;
    }
    const auto out = forward(net, featurize(sol.state, actions));
    Eigen::Index best = 0;
    out.policy.maxCoeff(&best);
    sol.state = apply_legal_action(sol.state, actions[static_cast<std::size_t>(best)]);
    sol.actions.push_back(actions[static_cast<std::size_t>(best)]);
  }
  sol.completed = true;
  return sol;
}

// Plays the most-visited root action after every search, reusing the subtree.
template <class Rng>
[[nodiscard]] auto mcts_solve(const std::shared_ptr<const Instance>& inst, const Evaluator& eval,
                              const TerminalValue& terminal, const SearchConfig& cfg, Rng& rng) -> Solution {
  Solution sol{PackState(inst), {}, false, {}};
  if (sol.state.terminal()) {
    sol.completed = true;
    return sol;
  }
  try {
    Search tree(sol.state, cfg);
    while (true) {
      const auto counts = tree.run(eval, terminal, rng);
      const auto pick = static_cast<std::size_t>(std::ranges::max_element(counts) - counts.begin());
      const auto a = tree.root().actions[pick];
      sol.state = apply_legal_action(sol.state, a);
      sol.actions.push_back(a);
      if (sol.state.terminal()) break;
      tree.advance(pick);
    }
  } catch (const ContractError& e) {
    sol.failure = e.what();
    return sol;
  }
  sol.completed = true;
  return sol;
}

// Terminal backup for evaluating a trained checkpoint: the threshold of its
// saved reward buffer, the warm-up map if that buffer is empty, or the raw
// reward for rank-free checkpoints.
[[nodiscard]] inline auto checkpoint_terminal_value(const Checkpoint& c) -> TerminalValue {
  if (c.value_target == ValueTarget::raw) return TerminalValue::raw();
  if (c.buffer.empty()) return TerminalValue::warmup();
  return TerminalValue::ranked(c.buffer.threshold(Percentile(c.alpha)));
}

template <class Rng>
[[nodiscard]] auto r2_solve(const std::shared_ptr<const Instance>& inst, const Checkpoint& c, int simulations,
                            Rng& rng) -> Solution {
  SearchConfig cfg;
  cfg.simulations = simulations;
  return mcts_solve(inst, net_evaluator(c.net), checkpoint_terminal_value(c), cfg, rng);
}

template <class Rng>
[[nodiscard]] auto plain_mcts_solve(const std::shared_ptr<const Instance>& inst, int simulations, Rng& rng)
    -> Solution {
  SearchConfig cfg;
  cfg.simulations = simulations;
  cfg.mode = SearchMode::rollout;
  return mcts_solve(inst, Evaluator{}, TerminalValue::raw(), cfg, rng);
}

inline constexpr int exhaustive_max_items = 6;

class ExhaustiveRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExhaustiveStats {
  std::int64_t nodes = 0;
};

namespace detail {

inline auto state_key(const PackState& s) -> std::string {
  std::vector<std::array<int, 7>> rows;
  for (std::size_t i = 0; i < s.placed().size(); ++i) {
    const auto& b = s.boxes()[i];
    rows.push_back({s.placed()[i].item_id, b.pos[0], b.pos[1], b.pos[2], b.size[0], b.size[1], b.size[2]});
  }
  std::ranges::sort(rows);
  std::string key;
  key.reserve(rows.size() * sizeof(rows[0]));
  for (const auto& r : rows) key.append(reinterpret_cast<const char*>(r.data()), sizeof(r));
  return key;
}

struct ExhaustiveSearch {
  bool prune;
  std::int64_t best_cost = 0;
  std::optional<std::vector<Action>> best;
  std::vector<Action> path;
  std::unordered_set<std::string> seen;
  ExhaustiveStats stats;

  bool ideal = false;  // best already reaches the ideal cost

  [[nodiscard]] auto done() const -> bool { return ideal; }

  void visit(const PackState& s) {
    ++stats.nodes;
    if (s.terminal()) {
      const auto c = bin_cost_exact(s);
      if (!best || c < best_cost) {
        best_cost = c;
        best = path;
        ideal = is_optimal(s);
      }
      return;
    }
    if (prune) {
      // Enclosing cost never shrinks, and a state already expanded was
      // explored under a looser bound.
      if (done() || (best && s.step() > 0 && bin_cost_exact(s) >= best_cost)) return;
      if (!seen.insert(state_key(s)).second) return;
    }
    auto actions = legal_actions(s);
    if (prune) {
      // Cheapest continuation first so the bound tightens early.
      std::ranges::stable_sort(actions, {}, [&](const Action& a) { return extent_cost(extent_after(s, a), s.dim()); });
    }
    for (const auto& a : actions) {
      path.push_back(a);
      visit(apply_legal_action(s, a));
      path.pop_back();
      if (prune && done()) return;
    }
  }
};

}  // namespace detail

// Best reachable layout by depth-first enumeration of the whole action tree.
// With pruning: enclosing-cost bound, transposition set and early exit at an
// ideal-cost packing; the optimum is the same either way.
[[nodiscard]] inline auto exhaustive_solve(const std::shared_ptr<const Instance>& inst, bool prune = true,
                                           ExhaustiveStats* stats = nullptr) -> Solution {
  if (inst->size() > exhaustive_max_items) {
    throw ExhaustiveRefused("exhaustive search refused: " + std::to_string(inst->size()) + " items (limit " +
                            std::to_string(exhaustive_max_items) + ")");
  }
  detail::ExhaustiveSearch search{prune};
  search.visit(PackState(inst));
  if (stats) *stats = search.stats;
  if (!search.best) return {PackState(inst), {}, false, "no complete packing reachable"};
  Solution sol{replay(inst, *search.best), *search.best, true, {}};
  return sol;
}

// Supervised baseline: cross-entropy toward the optimal layout's actions and
// value target +1 along those trajectories.
struct SupervisedConfig {
  int instances = 2000;
  int epochs = 5;
  int batch_size = 32;
  double learning_rate = default_learning_rate;
  double weight_decay = default_weight_decay;
  int hidden = 64;
  int items = 10;
  int bin_edge = 10;
  int dim = 2;
  std::uint64_t seed = 0;

  [[nodiscard]] auto bin() const -> Vec3 { return {bin_edge, bin_edge, dim == 3 ? bin_edge : 1}; }
};

struct LabelledState {
  FeatureMatrix features;
  Eigen::Index target = 0;  // row of the optimal action
};

struct SupervisedResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;  // mean sample loss per epoch
  int skipped = 0;                 // instances without a replayable optimal sequence
  std::size_t examples = 0;
};

// One labelled state per step of each instance's optimal sequence. Instances
// whose sequence cannot be replayed are skipped and counted.
[[nodiscard]] inline auto optimal_examples(int count, const Vec3& bin, int items, int dim, std::uint64_t seed,
                                           int* skipped = nullptr) -> std::vector<LabelledState> {
  std::vector<LabelledState> out;
  int skip = 0;
  for (int i = 0; i < count; ++i) {
    const auto inst = std::make_shared<const Instance>(
        generate(items, bin, derive_seed(seed, {stream::instance, static_cast<std::uint64_t>(i)}), dim));
    std::vector<Action> seq;
    try {
      seq = optimal_sequence(inst);
    } catch (const SequenceError&) {
      ++skip;
      continue;
    }
    PackState s(inst);
    for (const auto& a : seq) {
      const auto actions = legal_actions(s);
      const auto it = std::ranges::find(actions, a);
      if (it == actions.end()) throw ContractError("optimal action missing from the legal action list");
      out.push_back({featurize(s, actions), it - actions.begin()});
      s = apply_legal_action(s, a);
    }
  }
  if (skipped) *skipped = skip;
  return out;
}

// Fraction of states where the policy's arg-max is the labelled action.
[[nodiscard]] inline auto policy_accuracy(const NetParams& net, const std::vector<LabelledState>& data) -> double {
  if (data.empty()) return 0.0;
  int hits = 0;
  for (const auto& d : data) {
    Eigen::Index best = 0;
    forward(net, d.features).policy.maxCoeff(&best);
    hits += best == d.target;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

[[nodiscard]] inline auto supervised_train(const SupervisedConfig& cfg) -> SupervisedResult {
  if (cfg.instances < 1 || cfg.epochs < 0 || cfg.batch_size < 1) throw ContractError("bad supervised config");
  SupervisedResult res;
  const auto data = optimal_examples(cfg.instances, cfg.bin(), cfg.items, cfg.dim, cfg.seed, &res.skipped);
  if (data.empty()) throw ContractError("no usable training instances");
  res.examples = data.size();
  auto& ckpt = res.checkpoint;
  ckpt.net = init_params({feature_width(cfg.dim), cfg.hidden}, derive_seed(cfg.seed, {stream::init}));
  std::mt19937_64 rng(derive_seed(cfg.seed, {stream::minibatch}));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::VectorXd grad(ckpt.net.theta.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(end - start);
      grad.setZero();
      for (std::size_t i = start; i < end; ++i) {
        const auto& d = data[order[i]];
        Eigen::VectorXd target = Eigen::VectorXd::Zero(d.features.rows());
        target(d.target) = 1.0;
        const auto terms = accumulate_data_grad(ckpt.net, d.features, target, 1.0, grad, scale);
        total += terms.policy + terms.value;
      }
      grad += 2.0 * cfg.weight_decay * ckpt.net.theta;
      adam_step(ckpt.net, grad, cfg.learning_rate);
    }
    res.epoch_loss.push_back(total / static_cast<double>(data.size()));
  }
  ckpt.iteration = cfg.epochs - 1;
  return res;
}

}  // namespace r2
