#pragma once

// Monte Carlo tree search over PackState.
//
// Guided mode: PUCT selection with network priors, network values at
// non-terminal leaves, and a TerminalValue (ranked reward, warm-up map or
// raw reward) at terminal leaves.
// Rollout mode: UCT selection, one uniformly random roll-out per leaf,
// raw MDP reward backed up.
//
// Visit accounting: a node's own evaluation counts as one visit, so for
// every node sum(child N) = node visits - 1. Each call to Search::run tops
// the root's child visits up to `simulations`, which keeps the returned
// counts summing to S even when the tree is reused across moves.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "r2/env.hpp"
#include "r2/features.hpp"
#include "r2/net.hpp"
#include "r2/ranked_reward.hpp"

namespace r2 {

enum class SearchMode { guided, rollout };

struct SearchConfig {
  int simulations = 300;
  double c_puct = 1.25;
  double c_uct = 0.5;
  bool root_noise = false;  // training only
  double dirichlet_epsilon = 0.25;
  double dirichlet_alpha = 0.3;
  SearchMode mode = SearchMode::guided;
};

// Value backed up from a terminal leaf in guided mode.
class TerminalValue {
 public:
  enum class Kind { ranked, warmup, raw };

  static auto ranked(double threshold) -> TerminalValue { return {Kind::ranked, threshold}; }
  // 2r - 1, used while the reward buffer is still empty.
  static auto warmup() -> TerminalValue { return {Kind::warmup, 0.0}; }
  static auto raw() -> TerminalValue { return {Kind::raw, 0.0}; }

  template <class Rng>
  auto operator()(const PackState& terminal, Rng& rng) const -> double {
    const double r = terminal_reward(terminal);
    switch (m_kind) {
      case Kind::ranked: return static_cast<double>(rank(r, m_threshold, rng, is_optimal(terminal)));
      case Kind::warmup: return 2.0 * r - 1.0;
      default: return r;
    }
  }

  [[nodiscard]] auto kind() const noexcept -> Kind { return m_kind; }
  [[nodiscard]] auto threshold() const noexcept -> double { return m_threshold; }

 private:
  TerminalValue(Kind k, double t) : m_kind(k), m_threshold(t) {}
  Kind m_kind;
  double m_threshold;
};

struct Evaluation {
  std::vector<double> priors;
  double value = 0.0;
};

using Evaluator = std::function<Evaluation(const PackState&, std::span<const Action>)>;

[[nodiscard]] inline auto net_evaluator(const NetParams& params) -> Evaluator {
  return [&params](const PackState& s, std::span<const Action> actions) {
    auto out = forward(params, featurize(s, actions));
    return Evaluation{{out.policy.data(), out.policy.data() + out.policy.size()}, out.value};
  };
}

[[nodiscard]] inline auto uniform_evaluator(double value = 0.0) -> Evaluator {
  return [value](const PackState&, std::span<const Action> actions) {
    return Evaluation{std::vector<double>(actions.size(), 1.0 / static_cast<double>(actions.size())), value};
  };
}

// Plays uniformly random legal actions to the end; returns the raw reward.
template <class Rng>
[[nodiscard]] auto rollout_value(PackState s, Rng& rng) -> double {
  while (!s.terminal()) {
    const auto actions = legal_actions(s);
    if (actions.empty()) throw ContractError("dead end during roll-out");
    std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
    s = apply_legal_action(s, actions[pick(rng)]);
  }
  return terminal_reward(s);
}

struct SearchNode {
  explicit SearchNode(PackState s) : state(std::move(s)) {}

  PackState state;
  bool expanded = false;
  int visits = 0;
  double value_sum = 0.0;
  std::vector<Action> actions;
  std::vector<double> prior;
  std::vector<int> child_visits;
  std::vector<double> child_value;  // W(a)
  std::vector<std::unique_ptr<SearchNode>> children;

  [[nodiscard]] auto mean_value() const -> double { return visits > 0 ? value_sum / visits : 0.0; }
  [[nodiscard]] auto q(std::size_t a) const -> double {
    return child_visits[a] > 0 ? child_value[a] / child_visits[a] : 0.0;
  }
  [[nodiscard]] auto child_visit_total() const -> int {
    return std::accumulate(child_visits.begin(), child_visits.end(), 0);
  }
};

class Search {
 public:
  Search(PackState root, SearchConfig cfg) : m_cfg(cfg), m_root(std::make_unique<SearchNode>(std::move(root))) {
    if (m_root->state.terminal()) throw ContractError("search started from a terminal state");
    if (cfg.simulations < 1) throw ContractError("simulations must be >= 1");
  }

  // Runs simulations until the root's children hold `simulations` visits in
  // total; returns those counts, aligned with root().actions.
  template <class Rng>
  auto run(const Evaluator& eval, const TerminalValue& terminal, Rng& rng) -> std::vector<int> {
    if (!m_root->expanded) backup({m_root.get()}, {}, expand(*m_root, eval, rng));
    m_root_prior = m_root->prior;
    if (m_cfg.root_noise && m_cfg.mode == SearchMode::guided && m_root->actions.size() > 1) {
      std::gamma_distribution<double> gamma(m_cfg.dirichlet_alpha, 1.0);
      std::vector<double> noise(m_root->actions.size());
      double total = 0.0;
      for (auto& x : noise) total += (x = gamma(rng));
      for (std::size_t a = 0; a < noise.size(); ++a) {
        const double n = total > 0.0 ? noise[a] / total : 1.0 / static_cast<double>(noise.size());
        m_root_prior[a] = (1.0 - m_cfg.dirichlet_epsilon) * m_root->prior[a] + m_cfg.dirichlet_epsilon * n;
      }
    }
    while (m_root->child_visit_total() < m_cfg.simulations) simulate(eval, terminal, rng);
    return m_root->child_visits;
  }

  // Re-roots the tree at the child reached by root().actions[index],
  // keeping that subtree's statistics.
  void advance(std::size_t index) {
    if (index >= m_root->actions.size()) throw ContractError("advance: action index out of range");
    auto child = std::move(m_root->children[index]);
    if (!child) child = std::make_unique<SearchNode>(apply_legal_action(m_root->state, m_root->actions[index]));
    m_root = std::move(child);
  }

  [[nodiscard]] auto root() const noexcept -> const SearchNode& { return *m_root; }
  [[nodiscard]] auto config() const noexcept -> const SearchConfig& { return m_cfg; }

  // Per-action prior, visits and Q at the root, one line each.
  void write_trace(std::ostream& out) const {
    const auto& r = *m_root;
    out << "step " << r.state.step() << " visits " << r.visits << "\n";
    for (std::size_t a = 0; a < r.actions.size(); ++a) {
      const auto& act = r.actions[a];
      out << "  item " << act.item_id << " pos (" << act.pos[0] << "," << act.pos[1] << "," << act.pos[2]
          << ") orient " << act.orient.code << " prior " << r.prior[a] << " N " << r.child_visits[a] << " Q "
          << r.q(a) << "\n";
    }
  }

 private:
  template <class Rng>
  auto expand(SearchNode& node, const Evaluator& eval, Rng& rng) -> double {
    node.expanded = true;
    if (node.state.terminal()) return 0.0;
    node.actions = legal_actions(node.state);
    if (node.actions.empty()) throw ContractError("non-terminal state without legal actions");
    const auto n = node.actions.size();
    node.child_visits.assign(n, 0);
    node.child_value.assign(n, 0.0);
    node.children.resize(n);
    if (m_cfg.mode == SearchMode::rollout) {
      node.prior.assign(n, 1.0 / static_cast<double>(n));
      return rollout_value(node.state, rng);
    }
    auto ev = eval(node.state, node.actions);
    if (ev.priors.size() != n) throw ContractError("evaluator returned the wrong number of priors");
    node.prior = std::move(ev.priors);
    return ev.value;
  }

  auto select(const SearchNode& node) const -> std::size_t {
    const bool at_root = &node == m_root.get();
    const auto& prior = at_root ? m_root_prior : node.prior;
    const int total = node.child_visit_total();
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    if (m_cfg.mode == SearchMode::rollout) {
      for (std::size_t a = 0; a < node.actions.size(); ++a) {
        if (node.child_visits[a] == 0) return a;
        const double score =
            node.q(a) + m_cfg.c_uct * std::sqrt(std::log(static_cast<double>(total)) / node.child_visits[a]);
        if (score > best_score) {
          best_score = score;
          best = a;
        }
      }
      return best;
    }
    // Unvisited children start at the parent's mean value.
    const double fpu = node.mean_value();
    const double sqrt_total = std::sqrt(static_cast<double>(std::max(1, total)));
    for (std::size_t a = 0; a < node.actions.size(); ++a) {
      const double q = node.child_visits[a] > 0 ? node.q(a) : fpu;
      const double score = q + m_cfg.c_puct * prior[a] * sqrt_total / (1.0 + node.child_visits[a]);
      if (score > best_score) {
        best_score = score;
        best = a;
      }
    }
    return best;
  }

  template <class Rng>
  void simulate(const Evaluator& eval, const TerminalValue& terminal, Rng& rng) {
    std::vector<SearchNode*> path{m_root.get()};
    std::vector<std::size_t> edges;
    SearchNode* node = m_root.get();
    double value = 0.0;
    while (true) {
      if (node->state.terminal()) {
        node->expanded = true;
        value = m_cfg.mode == SearchMode::rollout ? terminal_reward(node->state) : terminal(node->state, rng);
        break;
      }
      if (!node->expanded) {
        value = expand(*node, eval, rng);
        break;
      }
      const auto a = select(*node);
      if (!node->children[a]) {
        node->children[a] = std::make_unique<SearchNode>(apply_legal_action(node->state, node->actions[a]));
      }
      edges.push_back(a);
      node = node->children[a].get();
      path.push_back(node);
    }
    backup(path, edges, value);
  }

  static void backup(const std::vector<SearchNode*>& path, const std::vector<std::size_t>& edges, double value) {
    for (std::size_t i = 0; i < path.size(); ++i) {
      path[i]->visits += 1;
      path[i]->value_sum += value;
      if (i < edges.size()) {
        path[i]->child_visits[edges[i]] += 1;
        path[i]->child_value[edges[i]] += value;
      }
    }
  }

  SearchConfig m_cfg;
  std::unique_ptr<SearchNode> m_root;
  std::vector<double> m_root_prior;
};

struct SearchResult {
  std::vector<Action> actions;
  std::vector<int> counts;
};

// One-shot search from a fresh tree.
template <class Rng>
[[nodiscard]] auto search(const PackState& root, const Evaluator& eval, const TerminalValue& terminal,
                          const SearchConfig& cfg, Rng& rng) -> SearchResult {
  Search s(root, cfg);
  auto counts = s.run(eval, terminal, rng);
  return {s.root().actions, std::move(counts)};
}

// pi(a) ~ N(a)^(1/tau); tau = 0 gives a one-hot on the first maximum.
[[nodiscard]] inline auto improved_policy(std::span<const int> counts, double tau) -> std::vector<double> {
  if (tau < 0.0) throw ContractError("temperature must be >= 0");
  if (counts.empty() || std::ranges::any_of(counts, [](int c) { return c < 0; })) {
    throw ContractError("visit counts must be non-negative and non-empty");
  }
  const auto top = std::ranges::max_element(counts);
  if (*top == 0) throw ContractError("all visit counts are zero");
  std::vector<double> pi(counts.size(), 0.0);
  if (tau == 0.0) {
    pi[static_cast<std::size_t>(top - counts.begin())] = 1.0;
    return pi;
  }
  const double log_top = std::log(static_cast<double>(*top));
  double total = 0.0;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    if (counts[a] > 0) total += pi[a] = std::exp((std::log(static_cast<double>(counts[a])) - log_top) / tau);
  }
  for (auto& p : pi) p /= total;
  return pi;
}

}  // namespace r2
