#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "r2/baselines.hpp"
#include "r2/trainer.hpp"
#include "support/fixtures.hpp"

using namespace r2;
namespace fs = std::filesystem;

namespace {

auto tiny_config() -> TrainConfig {
  TrainConfig c;
  c.episodes = 4;
  c.simulations = 16;
  c.iterations = 3;
  c.items = 4;
  c.bin_edge = 6;
  c.batch_size = 8;
  c.steps = 3;
  c.hidden = 8;
  c.seed = 11;
  return c;
}

auto read_file(const fs::path& p) -> std::string {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Drops the trailing wall-time column.
auto without_seconds(const std::string& csv) -> std::string {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

auto scratch(const std::string& name) -> fs::path {
  auto p = fs::temp_directory_path() / ("r2_trainer_" + name);
  fs::remove_all(p);
  return p;
}

auto one_step_game(int rows) -> std::vector<GameStep> {
  GameStep s;
  s.features = FeatureMatrix::Constant(rows, 10, 0.5);
  s.policy = Eigen::VectorXd::Constant(rows, 1.0 / rows);
  return {s};
}

}  // namespace

TEST_CASE("train config defaults and parsing", "[trainer][config]") {
  const TrainConfig d;
  CHECK(d.episodes == 50);
  CHECK(d.simulations == 300);
  CHECK(d.buffer_capacity == 250);
  CHECK(d.dataset_games == 500);
  CHECK(d.batch_size == 32);
  CHECK(d.steps == 50);
  CHECK(d.alpha == 75.0);

  auto c = tiny_config();
  c.ranked = false;
  c.alpha = 90.0;
  std::istringstream in(format_train_config(c));
  const auto back = parse_train_config(in, "cfg");
  CHECK(format_train_config(back) == format_train_config(c));

  auto fails = [](const std::string& text) {
    std::istringstream s(text);
    try {
      (void)parse_train_config(s, "cfg");
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(fails("episodes = 5\nbogus = 1\n").find("cfg:2") != std::string::npos);
  CHECK(fails("episodes = 2.5\n").find("episodes") != std::string::npos);
  CHECK(fails("alpha = 100\n").find("alpha") != std::string::npos);
  CHECK(fails("ranked = 1\n").find("ranked") != std::string::npos);
  CHECK(fails("seed = -3\n").find("seed") != std::string::npos);
  CHECK(fails("# comment only\nsteps = 0\n").empty());
}

TEST_CASE("example store evicts whole games in FIFO order", "[trainer][store]") {
  ExampleStore store(3);
  for (int g = 0; g < 5; ++g) {
    std::vector<GameStep> steps;
    for (int t = 0; t <= g; ++t) steps.push_back(one_step_game(2 + t).front());
    store.add(std::move(steps), g % 2 ? 1.0 : -1.0);
    CHECK(store.game_count() == static_cast<std::size_t>(std::min(g + 1, 3)));
  }
  CHECK(store.triplet_count() == 3 + 4 + 5);
  CHECK(store.games().front().steps.size() == 3);
  CHECK(store.games().front().z == -1.0);

  GameStep bad = one_step_game(3).front();
  bad.policy = Eigen::VectorXd::Constant(2, 0.5);
  CHECK_THROWS_AS(store.add({bad}, 1.0), ContractError);
  CHECK_THROWS_AS(store.add({}, 1.0), ContractError);
}

TEST_CASE("example store samples triplets uniformly", "[trainer][store]") {
  ExampleStore store(10);
  store.add(one_step_game(1), 1.0);  // 1 triplet
  std::vector<GameStep> three;
  for (int t = 0; t < 3; ++t) three.push_back(one_step_game(2).front());
  store.add(std::move(three), -1.0);  // 3 triplets
  std::mt19937_64 rng(3);
  int first = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) first += store.sample(rng).second == 1.0;
  const double p = 0.25, sd = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(static_cast<double>(first) / n - p) < 4 * sd);
}

TEST_CASE("rank_and_store labelling", "[trainer][ranked]") {
  std::mt19937_64 rng(1);
  GameRecord rec;

  SECTION("a perfect packing is always positive") {
    BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::ranked);
    ExampleStore store;
    for (int i = 0; i < 50; ++i) {
      rec.steps = one_step_game(2);
      rec.reward = std::min(1.0, 0.5 + 0.01 * i);
      owner.rank_and_store(rec, store, rng);
    }
    for (int i = 0; i < 20; ++i) {
      rec.steps = one_step_game(2);
      rec.reward = 1.0;
      rec.optimal = true;
      CHECK(owner.rank_and_store(rec, store, rng) == 1.0);
    }
  }

  SECTION("the first game ties with itself") {
    int plus = 0;
    for (int s = 0; s < 200; ++s) {
      BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::ranked);
      CHECK(owner.terminal_value().kind() == TerminalValue::Kind::warmup);
      ExampleStore store;
      rec.steps = one_step_game(3);
      rec.reward = 0.8;
      rec.optimal = false;
      std::mt19937_64 r(static_cast<std::uint64_t>(s));
      const double z = owner.rank_and_store(rec, store, r);
      REQUIRE((z == 1.0 || z == -1.0));
      plus += z > 0;
      REQUIRE(owner.threshold() == 0.8);
    }
    CHECK(plus > 50);
    CHECK(plus < 150);
  }

  SECTION("low rewards against a full buffer are negative, and every triplet carries z") {
    BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::ranked);
    ExampleStore store;
    for (int i = 0; i < 250; ++i) {
      rec.steps = one_step_game(2);
      rec.reward = 0.5 + 0.4 * i / 249.0;
      rec.optimal = false;
      owner.rank_and_store(rec, store, rng);
    }
    for (double r : {0.51, 0.52}) {
      rec.steps = {one_step_game(2).front(), one_step_game(4).front()};
      rec.reward = r;
      CHECK(owner.rank_and_store(rec, store, rng) == -1.0);
      for (const auto& s : store.games().back().steps) CHECK(s.policy.size() == s.features.rows());
      CHECK(store.games().back().z == -1.0);
    }
    CHECK(owner.buffer().size() == 250);
  }

  SECTION("rank-free stores the raw reward") {
    BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::raw);
    ExampleStore store;
    rec.steps = one_step_game(2);
    rec.reward = 0.73;
    CHECK(owner.terminal_value().kind() == TerminalValue::Kind::raw);
    CHECK(owner.rank_and_store(rec, store, rng) == 0.73);
    CHECK(store.games().back().z == 0.73);
  }
}

TEST_CASE("stationary rewards are ranked positive about a quarter of the time", "[trainer][ranked][property]") {
  BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::ranked);
  ExampleStore store(1);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  GameRecord rec;
  for (int i = 0; i < 250; ++i) {
    rec.steps = one_step_game(1);
    rec.reward = u(rng);
    owner.rank_and_store(rec, store, rng);
  }
  const int n = 20000;
  int plus = 0;
  for (int i = 0; i < n; ++i) {
    rec.steps = one_step_game(1);
    rec.reward = u(rng);
    plus += owner.rank_and_store(rec, store, rng) > 0;
  }
  const double p = 0.25, sd = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(static_cast<double>(plus) / n - p) < 3 * sd);
}

TEST_CASE("self-play episodes", "[trainer][episode]") {
  auto cfg = tiny_config();
  cfg.items = 5;
  cfg.bin_edge = 10;
  const auto net = init_params(cfg.arch(), 5);
  BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::ranked);
  std::mt19937_64 rng(9);
  const auto rec = run_episode(net, owner, cfg, 1234, rng);
  CHECK(rec.steps.size() == 5);
  CHECK(rec.actions.size() == 5);
  CHECK(rec.reward > 0.0);
  CHECK(rec.reward <= 1.0);
  for (const auto& s : rec.steps) {
    CHECK(s.policy.sum() == Catch::Approx(1.0));
    CHECK(s.policy.size() == s.features.rows());
  }
  const auto inst = fixture::generated(1234, 5);
  CHECK(terminal_reward(replay(inst, rec.actions)) == rec.reward);
  CHECK(exploration_moves(10) == 4);
  CHECK(exploration_moves(9) == 3);
}

TEST_CASE("searched play beats random play", "[trainer][episode][slow]") {
  TrainConfig cfg;
  cfg.items = 5;
  cfg.hidden = 16;
  const auto net = init_params(cfg.arch(), 1);
  BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::ranked);
  double searched = 0.0, random = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    std::mt19937_64 rng(i);
    searched += run_episode(net, owner, cfg, 500 + i, rng).reward;
    random += random_solve(fixture::generated(500 + i, 5), rng).reward();
  }
  CHECK(searched >= random);
}

TEST_CASE("train_iteration", "[trainer][sgd]") {
  auto cfg = tiny_config();
  const auto net = init_params(cfg.arch(), 2);
  BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::ranked);
  ExampleStore store;
  std::mt19937_64 rng(4);
  for (int g = 0; g < 3; ++g) {
    auto rec = run_episode(net, owner, cfg, 40 + static_cast<std::uint64_t>(g), rng);
    owner.rank_and_store(rec, store, rng);
  }

  cfg.steps = 0;
  CHECK(train_iteration(net, store, cfg, rng) == net);

  cfg.steps = 4;
  std::mt19937_64 a(8), b(8);
  CHECK(train_iteration(net, store, cfg, a) == train_iteration(net, store, cfg, b));
  CHECK_THROWS_AS(train_iteration(net, ExampleStore{}, cfg, a), ContractError);
}

TEST_CASE("one step lowers the loss on a fixed batch", "[trainer][sgd]") {
  int lowered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cfg = tiny_config();
    cfg.hidden = 64;
    const auto net = init_params(cfg.arch(), seed);
    BufferOwner owner(RewardBuffer(250), Percentile(75), ValueTarget::ranked);
    ExampleStore store;
    std::mt19937_64 rng(seed);
    auto rec = run_episode(net, owner, cfg, seed, rng);
    owner.rank_and_store(rec, store, rng);
    auto batch_loss = [&](const NetParams& p) {
      double total = 0.0;
      for (const auto& s : store.games().front().steps) {
        total += loss_value(p, s.features, s.policy, store.games().front().z, cfg.weight_decay);
      }
      return total;
    };
    cfg.steps = 1;
    cfg.batch_size = 512;
    const auto after = train_iteration(net, store, cfg, rng);
    lowered += batch_loss(after) < batch_loss(net);
  }
  CHECK(lowered >= 19);
}

TEST_CASE("train writes checkpoints and metrics", "[trainer][train]") {
  const auto cfg = tiny_config();
  const auto dir = scratch("run");
  const auto res = train(cfg, dir);
  REQUIRE(res.history.size() == 3);
  CHECK(res.final.iteration == 2);
  CHECK(res.final.buffer.size() == 12);

  std::ifstream in(dir / "metrics.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == metrics_header());
  CHECK(line.rfind("iter,mean_reward,optimality_pct,r_alpha,hist_00,", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::vector<std::string> v;
    while (std::getline(cells, cell, ',')) v.push_back(cell);
    REQUIRE(v.size() == 25);
    CHECK(std::stoi(v[0]) == rows);
    int hist = 0;
    for (int b = 4; b < 24; ++b) hist += std::stoi(v[static_cast<std::size_t>(b)]);
    CHECK(hist == cfg.episodes);
    ++rows;
  }
  CHECK(rows == 3);
  for (const auto& m : res.history) {
    double mean = 0.0;
    CHECK(m.optimality_pct >= 0.0);
    CHECK(std::fmod(m.optimality_pct, 100.0 / cfg.episodes) == Catch::Approx(0.0).margin(1e-9));
    for (int b = 0; b < histogram_bins; ++b) mean += m.histogram[static_cast<std::size_t>(b)];
    CHECK(mean == cfg.episodes);
  }
  for (int k = 0; k < 3; ++k) CHECK(fs::exists(dir / checkpoint_name(k)));
  CHECK(load_checkpoint(dir / checkpoint_name(2)).net == res.final.net);
  fs::remove_all(dir);
}

TEST_CASE("optimality column counts integer-optimal episodes", "[trainer][train]") {
  auto cfg = tiny_config();
  cfg.items = 1;  // a single square item always packs perfectly
  cfg.iterations = 1;
  const auto dir = scratch("opt");
  const auto res = train(cfg, dir);
  CHECK(res.history.front().optimality_pct == 100.0);
  CHECK(res.history.front().mean_reward == 1.0);
  CHECK(res.history.front().histogram[19] == cfg.episodes);
  fs::remove_all(dir);
}

TEST_CASE("training is reproducible and resumable", "[trainer][train]") {
  const auto cfg = tiny_config();
  const auto a = scratch("det_a"), b = scratch("det_b");
  (void)train(cfg, a);
  (void)train(cfg, b);
  CHECK(without_seconds(read_file(a / "metrics.csv")) == without_seconds(read_file(b / "metrics.csv")));
  for (int k = 0; k < 3; ++k) CHECK(read_file(a / checkpoint_name(k)) == read_file(b / checkpoint_name(k)));

  // Two resumes from the same checkpoint agree bit for bit.
  const auto c = scratch("res_c"), d = scratch("res_d");
  fs::create_directories(c);
  fs::create_directories(d);
  auto short_cfg = cfg;
  short_cfg.iterations = 2;
  const auto rc = train(short_cfg, c, a / checkpoint_name(0));
  const auto rd = train(short_cfg, d, a / checkpoint_name(0));
  REQUIRE(rc.history.size() == 1);
  CHECK(rc.history.front().iteration == 1);
  CHECK(read_file(c / checkpoint_name(1)) == read_file(d / checkpoint_name(1)));
  CHECK(rc.final.buffer.size() == 8);

  auto other = cfg;
  other.ranked = false;
  CHECK_THROWS_AS(train(other, c, a / checkpoint_name(0)), ContractError);
  for (const auto& p : {a, b, c, d}) fs::remove_all(p);
}

TEST_CASE("worker pool completes an iteration", "[trainer][train]") {
  auto cfg = tiny_config();
  cfg.threads = 3;
  cfg.iterations = 1;
  const auto dir = scratch("pool");
  const auto res = train(cfg, dir);
  CHECK(res.final.buffer.size() == static_cast<std::size_t>(cfg.episodes));
  fs::remove_all(dir);
}

TEST_CASE("non-finite parameters abort with the last good checkpoint", "[trainer][train]") {
  const auto cfg = tiny_config();
  const auto dir = scratch("nan");
  (void)train(cfg, dir);
  auto bad = load_checkpoint(dir / checkpoint_name(1));
  bad.net.theta(0) = std::numeric_limits<double>::quiet_NaN();
  save_checkpoint(bad, dir / "poisoned.r2");
  const auto before = read_file(dir / checkpoint_name(2));
  CHECK_THROWS_WITH(train(cfg, dir, dir / "poisoned.r2"), Catch::Matchers::ContainsSubstring("poisoned.r2"));
  CHECK(read_file(dir / checkpoint_name(2)) == before);
  fs::remove_all(dir);
}
