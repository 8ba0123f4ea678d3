// Command-line front end: instance generation, training, solving,
// evaluation and file inspection.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "r2/baselines.hpp"
#include "r2/checkpoint.hpp"
#include "r2/evaluate.hpp"
#include "r2/instance_io.hpp"
#include "r2/trainer.hpp"

namespace fs = std::filesystem;
using namespace r2;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_failure = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::optional<int> dim;
  std::optional<int> items;
  std::optional<double> alpha;
  std::optional<int> threads;
  std::optional<std::string> out;

  [[nodiscard]] auto thread_count() const -> int {
    if (threads) return *threads;
    if (const char* env = std::getenv("R2_THREADS")) {
      try {
        const int n = std::stoi(env);
        if (n >= 1) return n;
      } catch (const std::exception&) {
      }
      throw CLI::ValidationError("R2_THREADS", std::string("not a positive integer: ") + env);
    }
    return 1;
  }
};

// Usage problems detected after parsing (missing files, bad combinations).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

auto print_layout(std::ostream& out, const Solution& sol) {
  const auto& inst = sol.state.instance();
  out << "# item x y z orient l w h\n";
  for (const auto& a : sol.actions) {
    const Box b = placed_box(inst, a);
    out << a.item_id << ' ' << a.pos[0] << ' ' << a.pos[1] << ' ' << a.pos[2] << ' ' << a.orient.code << ' '
        << b.size[0] << ' ' << b.size[1] << ' ' << b.size[2] << '\n';
  }
}

auto load_instance_or_generate(const std::optional<std::string>& path, const Globals& g, int bin_edge)
    -> std::shared_ptr<const Instance> {
  if (path) return std::make_shared<const Instance>(load_instance(*path));
  const int dim = g.dim.value_or(2);
  return std::make_shared<const Instance>(
      generate(g.items.value_or(10), {bin_edge, bin_edge, dim == 3 ? bin_edge : 1}, g.seed.value_or(0), dim));
}

auto is_checkpoint_file(const fs::path& p) -> bool {
  std::ifstream in(p, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  return in.gcount() == 8 && std::equal(magic, magic + 8, checkpoint_magic);
}

void inspect(const fs::path& p, std::ostream& out) {
  if (!fs::exists(p)) throw UsageError("no such file: " + p.string());
  if (is_checkpoint_file(p)) {
    const auto c = load_checkpoint(p);
    out << "checkpoint " << p.string() << "\n  feature width " << c.net.arch.feature_width << " (dim "
        << (c.net.arch.feature_width == feature_width(3) ? 3 : 2) << ")\n  hidden " << c.net.arch.hidden
        << "\n  parameters " << c.net.theta.size() << "\n  adam steps " << c.net.step << "\n  iteration "
        << c.iteration << "\n  value target " << (c.value_target == ValueTarget::ranked ? "ranked" : "raw")
        << "\n  alpha " << c.alpha << "\n  reward buffer " << c.buffer.size() << "/" << c.buffer.capacity();
    if (!c.buffer.empty()) out << ", threshold " << c.buffer.threshold(Percentile(c.alpha));
    out << "\n";
    return;
  }
  const auto inst = load_instance(p);
  out << "instance " << p.string() << "\n  dim " << inst.dim << "\n  seed " << inst.seed << "\n  bin "
      << inst.bin[0] << "x" << inst.bin[1];
  if (inst.dim == 3) out << "x" << inst.bin[2];
  out << "\n  items " << inst.size() << "\n  total volume " << inst.total_volume() << "\n  ideal cost "
      << ideal_cost(inst) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ranked-reward bin packing: generate, train, solve and evaluate"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--config", g.config, "Training config file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--dim", g.dim, "2 or 3")->check(CLI::IsMember({2, 3}));
  app.add_option("--items", g.items, "Items per instance")->check(CLI::PositiveNumber);
  app.add_option("--alpha", g.alpha, "Ranking percentile in (0, 100)")->check(CLI::Range(0.0, 100.0));
  app.add_option("--threads", g.threads, "Worker threads (falls back to R2_THREADS)")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");

  // gen
  auto* gen = app.add_subcommand("gen", "Write generated instances to files");
  int gen_count = 1, gen_edge = 10;
  gen->add_option("--count", gen_count, "Number of instances")->check(CLI::PositiveNumber);
  gen->add_option("--bin-edge", gen_edge, "Edge of the square/cube origin bin")->check(CLI::PositiveNumber);

  // train
  auto* tr = app.add_subcommand("train", "Self-play training with ranked rewards");
  std::optional<int> tr_iters, tr_episodes, tr_sims, tr_hidden;
  std::optional<std::string> tr_resume;
  bool tr_rank_free = false;
  tr->add_option("--iterations", tr_iters, "Iterations K")->check(CLI::PositiveNumber);
  tr->add_option("--episodes", tr_episodes, "Episodes per iteration M")->check(CLI::PositiveNumber);
  tr->add_option("--simulations", tr_sims, "MCTS simulations per move S")->check(CLI::PositiveNumber);
  tr->add_option("--hidden", tr_hidden, "Hidden width")->check(CLI::PositiveNumber);
  tr->add_option("--resume", tr_resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  tr->add_flag("--rank-free", tr_rank_free, "Train on raw rewards instead of ranked rewards");

  // train-supervised
  auto* sup = app.add_subcommand("train-supervised", "Train the network on known optimal layouts");
  SupervisedConfig sup_cfg;
  sup->add_option("--instances", sup_cfg.instances, "Training instances")->check(CLI::PositiveNumber);
  sup->add_option("--epochs", sup_cfg.epochs, "Passes over the data")->check(CLI::NonNegativeNumber);
  sup->add_option("--hidden", sup_cfg.hidden, "Hidden width")->check(CLI::PositiveNumber);

  // solve
  auto* solve = app.add_subcommand("solve", "Solve one instance with one agent");
  std::optional<std::string> solve_instance, solve_ckpt;
  std::string solve_agent = "lego";
  int solve_sims = 300, solve_edge = 10;
  solve->add_option("--instance", solve_instance, "Instance file (default: generate from --seed)")
      ->check(CLI::ExistingFile);
  solve->add_option("--agent", solve_agent, "r2-mcts, net-only, plain-mcts, lego, supervised-net, random, exhaustive");
  solve->add_option("--checkpoint", solve_ckpt, "Network checkpoint for r2-mcts / net-only / supervised-net")
      ->check(CLI::ExistingFile);
  solve->add_option("--simulations", solve_sims, "MCTS simulations per move")->check(CLI::PositiveNumber);
  solve->add_option("--bin-edge", solve_edge, "Bin edge when generating")->check(CLI::PositiveNumber);

  // eval
  auto* ev = app.add_subcommand("eval", "Compare agents on a paired test set");
  std::string ev_agents = "lego,plain-mcts,random";
  std::optional<std::string> ev_ckpt, ev_sup;
  EvalConfig ev_cfg;
  ev->add_option("--agents", ev_agents, "Comma-separated agent list");
  ev->add_option("--instances", ev_cfg.instances, "Test-set size")->check(CLI::PositiveNumber);
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint for r2-mcts / net-only")->check(CLI::ExistingFile);
  ev->add_option("--supervised", ev_sup, "Checkpoint for supervised-net")->check(CLI::ExistingFile);
  ev->add_option("--simulations", ev_cfg.simulations, "MCTS simulations per move")->check(CLI::PositiveNumber);
  ev->add_option("--bin-edge", ev_cfg.bin_edge, "Bin edge")->check(CLI::PositiveNumber);

  // inspect
  auto* ins = app.add_subcommand("inspect", "Print checkpoint or instance metadata");
  std::vector<std::string> ins_paths;
  ins->add_option("paths", ins_paths, "Checkpoint or instance files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    const int threads = g.thread_count();
    if (gen->parsed()) {
      const fs::path dir = g.out.value_or("instances");
      fs::create_directories(dir);
      const int dim = g.dim.value_or(2);
      for (int i = 0; i < gen_count; ++i) {
        const auto seed = derive_seed(g.seed.value_or(0), {stream::instance, static_cast<std::uint64_t>(i)});
        const auto inst = generate(g.items.value_or(10), {gen_edge, gen_edge, dim == 3 ? gen_edge : 1}, seed, dim);
        std::ostringstream name;
        name << "inst_" << std::setw(4) << std::setfill('0') << i << ".txt";
        save_instance(inst, dir / name.str());
      }
      std::cout << "wrote " << gen_count << " instances to " << dir.string() << "\n";
    } else if (tr->parsed()) {
      TrainConfig cfg = g.config ? load_train_config(*g.config) : TrainConfig{};
      if (g.seed) cfg.seed = *g.seed;
      if (g.dim) cfg.dim = *g.dim;
      if (g.items) cfg.items = *g.items;
      if (g.alpha) cfg.alpha = *g.alpha;
      if (g.threads || std::getenv("R2_THREADS")) cfg.threads = threads;
      if (tr_iters) cfg.iterations = *tr_iters;
      if (tr_episodes) cfg.episodes = *tr_episodes;
      if (tr_sims) cfg.simulations = *tr_sims;
      if (tr_hidden) cfg.hidden = *tr_hidden;
      if (tr_rank_free) cfg.ranked = false;
      try {
        cfg.validate();
      } catch (const ContractError& e) {
        throw UsageError(e.what());
      }
      const fs::path dir = g.out.value_or("run");
      fs::create_directories(dir);
      std::ofstream(dir / "config.txt") << format_train_config(cfg);
      std::optional<fs::path> resume;
      if (tr_resume) resume = *tr_resume;
      const auto res = train(cfg, dir, resume, &std::cerr);
      std::cout << "trained to iteration " << res.final.iteration << "; checkpoints and metrics.csv in "
                << dir.string() << "\n";
    } else if (sup->parsed()) {
      sup_cfg.seed = g.seed.value_or(0);
      sup_cfg.dim = g.dim.value_or(2);
      sup_cfg.items = g.items.value_or(10);
      const auto res = supervised_train(sup_cfg);
      const fs::path dir = g.out.value_or("supervised");
      fs::create_directories(dir);
      save_checkpoint(res.checkpoint, dir / "supervised.r2");
      std::cout << "examples " << res.examples << ", skipped instances " << res.skipped << "\n";
      for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
        std::cout << "epoch " << e << " loss " << res.epoch_loss[e] << "\n";
      }
      std::cout << "wrote " << (dir / "supervised.r2").string() << "\n";
    } else if (solve->parsed()) {
      const auto kind = parse_agent(solve_agent);
      const auto inst = load_instance_or_generate(solve_instance, g, solve_edge);
      std::optional<Checkpoint> ckpt;
      if (solve_ckpt) ckpt = load_checkpoint(*solve_ckpt, feature_width(inst->dim));
      const bool needs_net =
          kind == AgentKind::r2_mcts || kind == AgentKind::net_only || kind == AgentKind::supervised_net;
      if (needs_net && !ckpt) throw UsageError(solve_agent + " needs --checkpoint");
      EvalConfig cfg;
      cfg.simulations = solve_sims;
      cfg.r2 = ckpt;
      cfg.supervised = ckpt;
      const auto sol = run_agent(kind, inst, cfg);
      print_layout(std::cout, sol);
      if (!sol.completed) {
        std::cerr << "r2: " << solve_agent << " failed: " << sol.failure << "\n";
        return exit_failure;
      }
      std::cout << "reward " << std::setprecision(10) << terminal_reward(sol.state) << "\ncost "
                << bin_cost_exact(sol.state) << "\noptimal " << (is_optimal(sol.state) ? "yes" : "no") << "\n";
    } else if (ev->parsed()) {
      std::vector<AgentKind> agents;
      std::stringstream list(ev_agents);
      for (std::string name; std::getline(list, name, ',');) {
        if (!name.empty()) agents.push_back(parse_agent(text::trim(name)));
      }
      if (agents.empty()) throw UsageError("--agents is empty");
      ev_cfg.seed = g.seed.value_or(0);
      ev_cfg.dim = g.dim.value_or(2);
      ev_cfg.items = g.items.value_or(10);
      ev_cfg.threads = threads;
      if (ev_ckpt) ev_cfg.r2 = load_checkpoint(*ev_ckpt, feature_width(ev_cfg.dim));
      if (ev_sup) ev_cfg.supervised = load_checkpoint(*ev_sup, feature_width(ev_cfg.dim));
      const auto rep = evaluate(agents, ev_cfg);
      const fs::path dir = g.out.value_or("eval");
      fs::create_directories(dir);
      std::ofstream report(dir / "report.csv"), summary(dir / "summary.csv"), box(dir / "boxplot.csv");
      write_report_csv(report, rep);
      write_summary_csv(summary, rep);
      write_boxplot_csv(box, rep);
      write_summary_csv(std::cout, rep);
    } else if (ins->parsed()) {
      for (const auto& p : ins_paths) inspect(p, std::cout);
    }
  } catch (const UsageError& e) {
    std::cerr << "r2: " << e.what() << "\n";
    return exit_usage;
  } catch (const ExhaustiveRefused& e) {
    std::cerr << "r2: " << e.what() << "\n";
    return exit_usage;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "r2: " << e.what() << "\n";
    return exit_usage;
  } catch (const ContractError& e) {
    // Bad agent names, refused exhaustive runs and similar caller mistakes.
    std::cerr << "r2: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "r2: " << e.what() << "\n";
    return exit_failure;
  }
  return 0;
}
