#pragma once

// Self-play training loop: M searched episodes per iteration against a frozen
// net snapshot, ranked-reward labelling through a single buffer owner, then J
// Adam steps on minibatches drawn from the last `dataset_games` games.

#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "r2/checkpoint.hpp"
#include "r2/features.hpp"
#include "r2/generator.hpp"
#include "r2/mcts.hpp"
#include "r2/net.hpp"
#include "r2/parallel.hpp"
#include "r2/ranked_reward.hpp"
#include "r2/seeds.hpp"
#include "r2/text_format.hpp"

namespace r2 {

struct TrainConfig {
  int episodes = 50;  // M
  int simulations = 300;
  int buffer_capacity = 250;
  int dataset_games = 500;
  int batch_size = 32;
  int steps = 50;  // J
  double alpha = 75.0;
  int iterations = 40;  // K
  double learning_rate = default_learning_rate;
  double weight_decay = default_weight_decay;
  int hidden = 64;
  int items = 10;
  int bin_edge = 10;
  int dim = 2;
  std::uint64_t seed = 0;
  int threads = 1;
  bool ranked = true;  // false: value targets and terminal backups use the raw reward
  double c_puct = 1.25;
  double dirichlet_alpha = 0.3;
  double dirichlet_epsilon = 0.25;

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) throw ContractError(std::string(name) + " must be positive");
    };
    positive(episodes, "episodes");
    positive(simulations, "simulations");
    positive(buffer_capacity, "buffer_capacity");
    positive(dataset_games, "dataset_games");
    positive(batch_size, "batch_size");
    positive(iterations, "iterations");
    positive(hidden, "hidden");
    positive(items, "items");
    positive(bin_edge, "bin_edge");
    positive(threads, "threads");
    if (steps < 0) throw ContractError("steps must be >= 0");
    if (!(alpha > 0.0 && alpha < 100.0)) throw ContractError("alpha must lie in (0, 100)");
    if (dim != 2 && dim != 3) throw ContractError("dim must be 2 or 3");
    if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ContractError("weight_decay must be >= 0");
    if (!(c_puct > 0.0)) throw ContractError("c_puct must be positive");
    const long long volume = static_cast<long long>(bin_edge) * bin_edge * (dim == 3 ? bin_edge : 1);
    if (items > volume) throw ContractError("more items than unit cells in the bin");
  }

  [[nodiscard]] auto bin() const -> Vec3 { return {bin_edge, bin_edge, dim == 3 ? bin_edge : 1}; }
  [[nodiscard]] auto arch() const -> NetArch { return {feature_width(dim), hidden}; }
  [[nodiscard]] auto value_target() const -> ValueTarget { return ranked ? ValueTarget::ranked : ValueTarget::raw; }

  [[nodiscard]] auto search_config(bool training) const -> SearchConfig {
    SearchConfig s;
    s.simulations = simulations;
    s.c_puct = c_puct;
    s.root_noise = training;
    s.dirichlet_alpha = dirichlet_alpha;
    s.dirichlet_epsilon = dirichlet_epsilon;
    return s;
  }
};

namespace detail {

template <class T>
void read_field(const text::Field& f, const std::string& source, T& out) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!f.value.is_boolean()) throw ParseError("expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!f.value.is_number_integer()) throw ParseError("expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (f.value.is_number_integer() && !f.value.is_number_unsigned()) throw ParseError("expected >= 0");
      }
    } else {
      if (!f.value.is_number()) throw ParseError("expected a number");
    }
    out = f.value.get<T>();
  } catch (const std::exception& e) {
    throw ParseError(text::where(source, f) + ": " + e.what());
  }
}

}  // namespace detail

// Fields not present keep the values of `base`.
[[nodiscard]] inline auto parse_train_config(std::istream& in, const std::string& source, TrainConfig base = {})
    -> TrainConfig {
  for (const auto& f : text::parse(in, source)) {
    auto& c = base;
    if (f.key == "episodes") detail::read_field(f, source, c.episodes);
    else if (f.key == "simulations") detail::read_field(f, source, c.simulations);
    else if (f.key == "buffer_capacity") detail::read_field(f, source, c.buffer_capacity);
    else if (f.key == "dataset_games") detail::read_field(f, source, c.dataset_games);
    else if (f.key == "batch_size") detail::read_field(f, source, c.batch_size);
    else if (f.key == "steps") detail::read_field(f, source, c.steps);
    else if (f.key == "alpha") detail::read_field(f, source, c.alpha);
    else if (f.key == "iterations") detail::read_field(f, source, c.iterations);
    else if (f.key == "learning_rate") detail::read_field(f, source, c.learning_rate);
    else if (f.key == "weight_decay") detail::read_field(f, source, c.weight_decay);
    else if (f.key == "hidden") detail::read_field(f, source, c.hidden);
    else if (f.key == "items") detail::read_field(f, source, c.items);
    else if (f.key == "bin_edge") detail::read_field(f, source, c.bin_edge);
    else if (f.key == "dim") detail::read_field(f, source, c.dim);
    else if (f.key == "seed") detail::read_field(f, source, c.seed);
    else if (f.key == "threads") detail::read_field(f, source, c.threads);
    else if (f.key == "ranked") detail::read_field(f, source, c.ranked);
    else if (f.key == "c_puct") detail::read_field(f, source, c.c_puct);
    else if (f.key == "dirichlet_alpha") detail::read_field(f, source, c.dirichlet_alpha);
    else if (f.key == "dirichlet_epsilon") detail::read_field(f, source, c.dirichlet_epsilon);
    else throw ParseError(text::where(source, f) + ": unknown key");
  }
  try {
    base.validate();
  } catch (const ContractError& e) {
    throw ParseError(source + ": " + e.what());
  }
  return base;
}

[[nodiscard]] inline auto load_train_config(const std::filesystem::path& path, TrainConfig base = {}) -> TrainConfig {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  return parse_train_config(in, path.string(), base);
}

[[nodiscard]] inline auto format_train_config(const TrainConfig& c) -> std::string {
  std::ostringstream o;
  o << std::setprecision(17);
  o << "episodes = " << c.episodes << "\nsimulations = " << c.simulations
    << "\nbuffer_capacity = " << c.buffer_capacity << "\ndataset_games = " << c.dataset_games
    << "\nbatch_size = " << c.batch_size << "\nsteps = " << c.steps << "\nalpha = " << c.alpha
    << "\niterations = " << c.iterations << "\nlearning_rate = " << c.learning_rate
    << "\nweight_decay = " << c.weight_decay << "\nhidden = " << c.hidden << "\nitems = " << c.items
    << "\nbin_edge = " << c.bin_edge << "\ndim = " << c.dim << "\nseed = " << c.seed << "\nthreads = " << c.threads
    << "\nranked = " << (c.ranked ? "true" : "false") << "\nc_puct = " << c.c_puct
    << "\ndirichlet_alpha = " << c.dirichlet_alpha << "\ndirichlet_epsilon = " << c.dirichlet_epsilon << "\n";
  return o.str();
}

struct GameStep {
  FeatureMatrix features;   // one row per legal action, in action order
  Eigen::VectorXd policy;   // normalised visit counts
};

struct GameRecord {
  std::uint64_t instance_seed = 0;
  std::vector<GameStep> steps;
  std::vector<Action> actions;
  double reward = 0.0;
  bool optimal = false;
  std::int64_t cost = 0;
};

class EpisodeError : public std::runtime_error {
 public:
  EpisodeError(std::uint64_t seed, const std::string& what)
      : std::runtime_error("episode on instance seed " + std::to_string(seed) + ": " + what), m_seed(seed) {}
  [[nodiscard]] auto seed() const noexcept -> std::uint64_t { return m_seed; }

 private:
  std::uint64_t m_seed;
};

// Games in arrival order; the oldest game is evicted whole.
class ExampleStore {
 public:
  struct Game {
    std::vector<GameStep> steps;
    double z = 0.0;
  };

  explicit ExampleStore(std::size_t capacity_games = 500) : m_capacity(capacity_games) {
    if (capacity_games == 0) throw ContractError("example store capacity must be positive");
  }

  void add(std::vector<GameStep> steps, double z) {
    if (steps.empty()) throw ContractError("cannot store an empty game");
    for (const auto& s : steps) {
      if (s.policy.size() != s.features.rows()) throw ContractError("policy length does not match the action list");
    }
    m_triplets += steps.size();
    m_games.push_back({std::move(steps), z});
    if (m_games.size() > m_capacity) {
      m_triplets -= m_games.front().steps.size();
      m_games.pop_front();
    }
  }

  // Uniform over every stored (state, policy, z) triplet.
  template <class Rng>
  [[nodiscard]] auto sample(Rng& rng) const -> std::pair<const GameStep*, double> {
    if (m_triplets == 0) throw ContractError("sampling from an empty example store");
    auto k = std::uniform_int_distribution<std::size_t>(0, m_triplets - 1)(rng);
    for (const auto& g : m_games) {
      if (k < g.steps.size()) return {&g.steps[k], g.z};
      k -= g.steps.size();
    }
    throw ContractError("example store index out of range");
  }

  [[nodiscard]] auto games() const noexcept -> const std::deque<Game>& { return m_games; }
  [[nodiscard]] auto game_count() const noexcept -> std::size_t { return m_games.size(); }
  [[nodiscard]] auto triplet_count() const noexcept -> std::size_t { return m_triplets; }
  [[nodiscard]] auto capacity() const noexcept -> std::size_t { return m_capacity; }
  [[nodiscard]] auto empty() const noexcept -> bool { return m_games.empty(); }

 private:
  std::size_t m_capacity;
  std::size_t m_triplets = 0;
  std::deque<Game> m_games;
};

// Sole owner of the reward buffer. Workers read threshold snapshots and hand
// finished games to rank_and_store, which serialises push-then-rank.
class BufferOwner {
 public:
  BufferOwner(RewardBuffer buffer, Percentile alpha, ValueTarget target)
      : m_buffer(std::move(buffer)), m_alpha(alpha), m_target(target) {}

  [[nodiscard]] auto terminal_value() const -> TerminalValue {
    if (m_target == ValueTarget::raw) return TerminalValue::raw();
    std::lock_guard lock(m_mutex);
    if (m_buffer.empty()) return TerminalValue::warmup();
    return TerminalValue::ranked(m_buffer.threshold(m_alpha));
  }

  // Pushes r, thresholds the buffer including r, labels the game and stores it.
  // Returns the stored z.
  template <class Rng>
  auto rank_and_store(GameRecord& record, ExampleStore& store, Rng& rng) -> double {
    std::lock_guard lock(m_mutex);
    m_buffer.push(record.reward);
    double z = record.reward;
    if (m_target == ValueTarget::ranked) {
      z = static_cast<double>(rank(record.reward, m_buffer.threshold(m_alpha), rng, record.optimal));
    }
    store.add(std::move(record.steps), z);
    record.steps.clear();
    return z;
  }

  [[nodiscard]] auto buffer() const -> RewardBuffer {
    std::lock_guard lock(m_mutex);
    return m_buffer;
  }
  [[nodiscard]] auto threshold() const -> std::optional<double> {
    std::lock_guard lock(m_mutex);
    if (m_buffer.empty()) return std::nullopt;
    return m_buffer.threshold(m_alpha);
  }
  [[nodiscard]] auto alpha() const noexcept -> Percentile { return m_alpha; }

 private:
  mutable std::mutex m_mutex;
  RewardBuffer m_buffer;
  Percentile m_alpha;
  ValueTarget m_target;
};

// Moves played with temperature 1 before switching to the most-visited action.
[[nodiscard]] inline auto exploration_moves(int n_items) -> int { return (n_items + 2) / 3; }

// One self-play game on a freshly generated instance.
template <class Rng>
auto run_episode(const NetParams& net, const BufferOwner& owner, const TrainConfig& cfg, std::uint64_t instance_seed,
                 Rng& rng) -> GameRecord {
  GameRecord rec;
  rec.instance_seed = instance_seed;
  try {
    auto inst = std::make_shared<const Instance>(generate(cfg.items, cfg.bin(), instance_seed, cfg.dim));
    const auto eval = net_evaluator(net);
    Search tree(PackState(inst), cfg.search_config(true));
    const int explore = exploration_moves(cfg.items);
    for (int t = 0;; ++t) {
      const auto counts = tree.run(eval, owner.terminal_value(), rng);
      const auto pi = improved_policy(counts, 1.0);
      const auto& root = tree.root();
      rec.steps.push_back({featurize(root.state, root.actions), Eigen::Map<const Eigen::VectorXd>(
                                                                   pi.data(), static_cast<Eigen::Index>(pi.size()))});
      std::size_t pick = 0;
      if (t < explore) {
        pick = std::discrete_distribution<std::size_t>(pi.begin(), pi.end())(rng);
      } else {
        pick = static_cast<std::size_t>(std::ranges::max_element(counts) - counts.begin());
      }
      rec.actions.push_back(root.actions[pick]);
      auto next = apply_legal_action(root.state, root.actions[pick]);
      if (next.terminal()) {
        rec.reward = terminal_reward(next);
        rec.optimal = is_optimal(next);
        rec.cost = bin_cost_exact(next);
        break;
      }
      tree.advance(pick);
    }
  } catch (const ContractError& e) {
    throw EpisodeError(instance_seed, e.what());
  } catch (const ConstraintViolation& e) {
    throw EpisodeError(instance_seed, e.what());
  }
  return rec;
}

// J Adam steps, each on the mean gradient of b triplets sampled uniformly
// with replacement.
template <class Rng>
[[nodiscard]] auto train_iteration(NetParams params, const ExampleStore& store, const TrainConfig& cfg, Rng& rng)
    -> NetParams {
  if (cfg.steps == 0) return params;
  if (store.empty()) throw ContractError("train_iteration on an empty example store");
  const double scale = 1.0 / static_cast<double>(cfg.batch_size);
  Eigen::VectorXd grad(params.theta.size());
  for (int j = 0; j < cfg.steps; ++j) {
    grad.setZero();
    for (int i = 0; i < cfg.batch_size; ++i) {
      const auto [step, z] = store.sample(rng);
      accumulate_data_grad(params, step->features, step->policy, z, grad, scale);
    }
    grad += 2.0 * cfg.weight_decay * params.theta;
    adam_step(params, grad, cfg.learning_rate);
  }
  return params;
}

inline constexpr int histogram_bins = 20;

struct IterationMetrics {
  std::int64_t iteration = 0;
  double mean_reward = 0.0;
  double optimality_pct = 0.0;
  double r_alpha = 0.0;
  std::array<int, histogram_bins> histogram{};
  double seconds = 0.0;
};

[[nodiscard]] inline auto histogram_bin(double r) -> int {
  return std::clamp(static_cast<int>(std::floor(r * histogram_bins)), 0, histogram_bins - 1);
}

[[nodiscard]] inline auto metrics_header() -> std::string {
  std::string h = "iter,mean_reward,optimality_pct,r_alpha";
  for (int b = 0; b < histogram_bins; ++b) h += (b < 10 ? ",hist_0" : ",hist_") + std::to_string(b);
  return h + ",seconds";
}

[[nodiscard]] inline auto format_metrics_row(const IterationMetrics& m) -> std::string {
  std::ostringstream o;
  o << m.iteration << std::fixed << std::setprecision(6) << ',' << m.mean_reward << ',' << m.optimality_pct << ','
    << m.r_alpha;
  for (int h : m.histogram) o << ',' << h;
  o << std::setprecision(3) << ',' << m.seconds;
  return o.str();
}

[[nodiscard]] inline auto checkpoint_name(std::int64_t iteration) -> std::string {
  return "ckpt_" + std::to_string(iteration) + ".r2";
}

struct TrainResult {
  Checkpoint final;
  std::vector<IterationMetrics> history;  // iterations run by this call
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs iterations [start, cfg.iterations) where start is 0 for a fresh run or
// one past the resumed checkpoint's iteration. Writes `ckpt_<k>.r2` and a
// metrics row after every iteration. The example store starts empty on resume.
inline auto train(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt, std::ostream* log = nullptr)
    -> TrainResult {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  Checkpoint state;
  if (resume) {
    state = load_checkpoint(*resume, cfg.arch().feature_width);
    if (state.net.arch.hidden != cfg.hidden) throw ContractError("resumed checkpoint has a different hidden width");
    if (state.value_target != cfg.value_target()) throw ContractError("resumed checkpoint uses the other value target");
    if (state.buffer.capacity() != static_cast<std::size_t>(cfg.buffer_capacity)) {
      throw ContractError("resumed checkpoint has a different reward buffer capacity");
    }
  } else {
    state.net = init_params(cfg.arch(), derive_seed(cfg.seed, {stream::init}));
    state.buffer = RewardBuffer(static_cast<std::size_t>(cfg.buffer_capacity));
  }
  state.value_target = cfg.value_target();
  state.alpha = cfg.alpha;

  const auto metrics_path = out_dir / "metrics.csv";
  const bool fresh_metrics = !resume || !std::filesystem::exists(metrics_path);
  std::ofstream metrics(metrics_path, fresh_metrics ? std::ios::trunc : std::ios::app);
  if (!metrics) throw std::runtime_error("cannot write " + metrics_path.string());
  if (fresh_metrics) metrics << metrics_header() << "\n";

  BufferOwner owner(state.buffer, Percentile(cfg.alpha), cfg.value_target());
  ExampleStore store(static_cast<std::size_t>(cfg.dataset_games));
  TrainResult result;
  std::optional<std::filesystem::path> last_good = resume;

  for (std::int64_t k = state.iteration + 1; k < cfg.iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ku = static_cast<std::uint64_t>(k);
    std::vector<double> rewards(static_cast<std::size_t>(cfg.episodes));
    std::vector<char> optimal(rewards.size());
    const NetParams& snapshot = state.net;
    try {
      detail::parallel_for(cfg.episodes, cfg.threads, [&](int e) {
        const auto eu = static_cast<std::uint64_t>(e);
        std::mt19937_64 rng(derive_seed(cfg.seed, {stream::episode, ku, eu}));
        auto rec = run_episode(snapshot, owner, cfg, derive_seed(cfg.seed, {stream::instance, ku, eu}), rng);
        rewards[eu] = rec.reward;
        optimal[eu] = rec.optimal;
        owner.rank_and_store(rec, store, rng);
      });
      std::mt19937_64 mb_rng(derive_seed(cfg.seed, {stream::minibatch, ku}));
      state.net = train_iteration(std::move(state.net), store, cfg, mb_rng);
    } catch (const NumericError& e) {
      throw TrainingAborted(std::string("numeric failure in iteration ") + std::to_string(k) + ": " + e.what() +
                            (last_good ? "; last good checkpoint " + last_good->string() : ""));
    }

    IterationMetrics m;
    m.iteration = k;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      m.mean_reward += rewards[i];
      m.optimality_pct += optimal[i] ? 1.0 : 0.0;
      ++m.histogram[static_cast<std::size_t>(histogram_bin(rewards[i]))];
    }
    m.mean_reward /= static_cast<double>(rewards.size());
    m.optimality_pct *= 100.0 / static_cast<double>(rewards.size());
    m.r_alpha = owner.threshold().value_or(0.0);

    state.iteration = k;
    state.buffer = owner.buffer();
    const auto ckpt = out_dir / checkpoint_name(k);
    save_checkpoint(state, ckpt);
    last_good = ckpt;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    metrics << format_metrics_row(m) << "\n" << std::flush;
    if (log) {
      *log << "iter " << k << " mean_reward " << std::fixed << std::setprecision(4) << m.mean_reward << " optimal "
           << std::setprecision(1) << m.optimality_pct << "% r_alpha " << std::setprecision(4) << m.r_alpha << " ("
           << std::setprecision(1) << m.seconds << "s)\n"
           << std::defaultfloat;
    }
    result.history.push_back(m);
  }
  state.buffer = owner.buffer();
  result.final = std::move(state);
  return result;
}

}  // namespace r2
