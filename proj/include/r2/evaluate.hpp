#pragma once

// Comparison harness: every agent plays every test instance (the same
// instance list for all agents), failures score zero, and every reported
// reward is recomputed from the stored layout before it is accepted.

#include <chrono>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "r2/baselines.hpp"
#include "r2/parallel.hpp"

namespace r2 {

enum class AgentKind { r2_mcts, net_only, plain_mcts, lego, supervised_net, random, exhaustive };

inline constexpr std::array<std::pair<AgentKind, std::string_view>, 7> agent_names{{
    {AgentKind::r2_mcts, "r2-mcts"},
    {AgentKind::net_only, "net-only"},
    {AgentKind::plain_mcts, "plain-mcts"},
    {AgentKind::lego, "lego"},
    {AgentKind::supervised_net, "supervised-net"},
    {AgentKind::random, "random"},
    {AgentKind::exhaustive, "exhaustive"},
}};

[[nodiscard]] inline auto agent_name(AgentKind k) -> std::string_view {
  for (const auto& [kind, name] : agent_names) {
    if (kind == k) return name;
  }
  return "?";
}

[[nodiscard]] inline auto parse_agent(std::string_view s) -> AgentKind {
  for (const auto& [kind, name] : agent_names) {
    if (name == s) return kind;
  }
  std::string known;
  for (const auto& [kind, name] : agent_names) known += (known.empty() ? "" : ", ") + std::string(name);
  throw ContractError("unknown agent `" + std::string(s) + "` (known: " + known + ")");
}

struct EvalConfig {
  int instances = 100;
  int items = 10;
  int dim = 2;
  int bin_edge = 10;
  std::uint64_t seed = 0;
  int simulations = 300;
  int threads = 1;
  std::optional<Checkpoint> r2;          // r2-mcts and net-only
  std::optional<Checkpoint> supervised;  // supervised-net

  [[nodiscard]] auto bin() const -> Vec3 { return {bin_edge, bin_edge, dim == 3 ? bin_edge : 1}; }
};

struct EvalRow {
  AgentKind agent{};
  std::uint64_t instance_seed = 0;
  int n_items = 0;
  int dim = 0;
  double reward = 0.0;
  std::int64_t cost = 0;  // 0 when the agent failed
  bool optimal = false;
  double millis = 0.0;
  std::string failure;
  std::vector<Action> actions;
};

struct AgentSummary {
  AgentKind agent{};
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double optimality_pct = 0.0;
  // Box-plot data: quartiles and Tukey whiskers (furthest points within 1.5 IQR).
  double min = 0.0, whisker_low = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, whisker_high = 0.0, max = 0.0;
};

struct EvalReport {
  std::vector<std::uint64_t> instance_seeds;
  std::vector<EvalRow> rows;  // agent-major, instances in test-set order
  std::vector<AgentSummary> summary;

  [[nodiscard]] auto of(AgentKind k) const -> const AgentSummary& {
    for (const auto& s : summary) {
      if (s.agent == k) return s;
    }
    throw ContractError("agent not in report: " + std::string(agent_name(k)));
  }
};

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The test set: instance i is generated from derive_seed(seed, eval, i).
[[nodiscard]] inline auto test_instances(const EvalConfig& cfg) -> std::vector<std::shared_ptr<const Instance>> {
  std::vector<std::shared_ptr<const Instance>> out;
  for (int i = 0; i < cfg.instances; ++i) {
    const auto s = derive_seed(cfg.seed, {stream::eval, static_cast<std::uint64_t>(i)});
    out.push_back(std::make_shared<const Instance>(generate(cfg.items, cfg.bin(), s, cfg.dim)));
  }
  return out;
}

[[nodiscard]] inline auto run_agent(AgentKind k, const std::shared_ptr<const Instance>& inst, const EvalConfig& cfg)
    -> Solution {
  std::mt19937_64 rng(derive_seed(inst->seed, {stream::eval, static_cast<std::uint64_t>(k)}));
  switch (k) {
    case AgentKind::r2_mcts: return r2_solve(inst, *cfg.r2, cfg.simulations, rng);
    case AgentKind::net_only: return net_solve(inst, cfg.r2->net);
    case AgentKind::plain_mcts: return plain_mcts_solve(inst, cfg.simulations, rng);
    case AgentKind::lego: return lego_solve(inst);
    case AgentKind::supervised_net: return net_solve(inst, cfg.supervised->net);
    case AgentKind::random: return random_solve(inst, rng);
    case AgentKind::exhaustive: return exhaustive_solve(inst);
  }
  throw ContractError("unhandled agent kind");
}

namespace detail {

// Linear interpolation between closest ranks on sorted data.
inline auto quantile(const std::vector<double>& sorted, double q) -> double {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

[[nodiscard]] inline auto summarize(AgentKind k, const std::vector<EvalRow>& rows) -> AgentSummary {
  AgentSummary s;
  s.agent = k;
  std::vector<double> r;
  int optimal = 0;
  for (const auto& row : rows) {
    if (row.agent != k) continue;
    r.push_back(row.reward);
    optimal += row.optimal;
  }
  if (r.empty()) return s;
  const auto n = static_cast<double>(r.size());
  for (double x : r) s.mean_reward += x;
  s.mean_reward /= n;
  double ss = 0.0;
  for (double x : r) ss += (x - s.mean_reward) * (x - s.mean_reward);
  s.std_reward = r.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.optimality_pct = 100.0 * optimal / n;
  std::ranges::sort(r);
  s.min = r.front();
  s.max = r.back();
  s.q1 = detail::quantile(r, 0.25);
  s.median = detail::quantile(r, 0.5);
  s.q3 = detail::quantile(r, 0.75);
  const double iqr = s.q3 - s.q1;
  s.whisker_low = *std::ranges::find_if(r, [&](double x) { return x >= s.q1 - 1.5 * iqr; });
  s.whisker_high = *std::ranges::find_if(r.rbegin(), r.rend(), [&](double x) { return x <= s.q3 + 1.5 * iqr; });
  return s;
}

// Replays a row's layout through the checked environment and compares the
// recomputed reward, cost and optimality flag.
inline void verify_row(const EvalRow& row, const std::shared_ptr<const Instance>& inst) {
  if (!row.failure.empty()) {
    if (row.reward != 0.0) throw IntegrityError("failed run reported a non-zero reward");
    return;
  }
  PackState s(inst);
  try {
    for (const auto& a : row.actions) s = apply_action(s, a);
  } catch (const ConstraintViolation& e) {
    throw IntegrityError(std::string(agent_name(row.agent)) + " produced an illegal layout: " + e.what());
  }
  if (!s.terminal()) throw IntegrityError(std::string(agent_name(row.agent)) + " left items unplaced");
  if (terminal_reward(s) != row.reward || bin_cost_exact(s) != row.cost || is_optimal(s) != row.optimal) {
    throw IntegrityError(std::string(agent_name(row.agent)) + " reported a reward its layout does not earn");
  }
}

[[nodiscard]] inline auto evaluate(const std::vector<AgentKind>& agents, const EvalConfig& cfg) -> EvalReport {
  if (cfg.instances < 1) throw ContractError("test set must hold at least one instance");
  for (auto k : agents) {
    if ((k == AgentKind::r2_mcts || k == AgentKind::net_only) && !cfg.r2) {
      throw ContractError(std::string(agent_name(k)) + " needs a trained checkpoint");
    }
    if (k == AgentKind::supervised_net && !cfg.supervised) {
      throw ContractError("supervised-net needs a supervised checkpoint");
    }
    if (k == AgentKind::exhaustive && cfg.items > exhaustive_max_items) {
      throw ExhaustiveRefused("exhaustive agent refused: " + std::to_string(cfg.items) + " items (limit " +
                              std::to_string(exhaustive_max_items) + ")");
    }
  }
  const auto tests = test_instances(cfg);
  EvalReport rep;
  for (const auto& t : tests) rep.instance_seeds.push_back(t->seed);
  const auto n = tests.size();
  rep.rows.resize(agents.size() * n);
  detail::parallel_for(static_cast<int>(rep.rows.size()), cfg.threads, [&](int idx) {
    const auto i = static_cast<std::size_t>(idx);
    const auto k = agents[i / n];
    const auto& inst = tests[i % n];
    EvalRow row;
    row.agent = k;
    row.instance_seed = inst->seed;
    row.n_items = static_cast<int>(inst->size());
    row.dim = inst->dim;
    const auto t0 = std::chrono::steady_clock::now();
    auto sol = [&] {
      try {
        return run_agent(k, inst, cfg);
      } catch (const std::exception& e) {
        return Solution{PackState(inst), {}, false, e.what()};
      }
    }();
    row.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (sol.completed) {
      row.reward = terminal_reward(sol.state);
      row.cost = bin_cost_exact(sol.state);
      row.optimal = is_optimal(sol.state);
      row.actions = std::move(sol.actions);
    } else {
      row.failure = sol.failure.empty() ? "incomplete" : sol.failure;
    }
    verify_row(row, inst);
    rep.rows[i] = std::move(row);
  });
  for (auto k : agents) rep.summary.push_back(summarize(k, rep.rows));
  return rep;
}

inline void write_report_csv(std::ostream& out, const EvalReport& rep) {
  out << "agent,instance_seed,n_items,dim,reward,cost,optimal,millis\n";
  for (const auto& r : rep.rows) {
    out << agent_name(r.agent) << ',' << r.instance_seed << ',' << r.n_items << ',' << r.dim << ',' << std::fixed
        << std::setprecision(6) << r.reward << ',' << r.cost << ',' << (r.optimal ? 1 : 0) << ','
        << std::setprecision(3) << r.millis << '\n';
  }
  out << std::defaultfloat;
}

inline void write_summary_csv(std::ostream& out, const EvalReport& rep) {
  out << "agent,mean_reward,std_reward,optimality_pct\n";
  for (const auto& s : rep.summary) {
    out << agent_name(s.agent) << ',' << std::fixed << std::setprecision(6) << s.mean_reward << ',' << s.std_reward
        << ',' << s.optimality_pct << '\n';
  }
  out << std::defaultfloat;
}

inline void write_boxplot_csv(std::ostream& out, const EvalReport& rep) {
  out << "agent,min,whisker_low,q1,median,q3,whisker_high,max\n";
  for (const auto& s : rep.summary) {
    out << agent_name(s.agent) << ',' << std::fixed << std::setprecision(6) << s.min << ',' << s.whisker_low << ','
        << s.q1 << ',' << s.median << ',' << s.q3 << ',' << s.whisker_high << ',' << s.max << '\n';
  }
  out << std::defaultfloat;
}

}  // namespace r2
