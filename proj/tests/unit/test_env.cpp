#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "r2/env.hpp"
#include "support/oracles.hpp"

using namespace r2;
using Catch::Approx;

namespace {

auto make_instance(int dim, std::vector<Vec3> dims) -> std::shared_ptr<const Instance> {
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

auto as_tuples(const std::vector<Action>& acts) -> std::set<std::tuple<int, int, int, int, int>> {
  std::set<std::tuple<int, int, int, int, int>> out;
  for (const auto& a : acts) out.insert({a.item_id, a.orient.code, a.pos[0], a.pos[1], a.pos[2]});
  return out;
}

}  // namespace

TEST_CASE("oriented_dims follows the canonical table", "[env]") {
  CHECK(oriented_dims({2, 3, 4}, Orientation{0}, 3) == Vec3{2, 3, 4});
  CHECK(oriented_dims({2, 3, 4}, Orientation{3}, 3) == Vec3{3, 4, 2});
  CHECK(oriented_dims({2, 3, 4}, Orientation{5}, 3) == Vec3{4, 3, 2});
  CHECK(oriented_dims({5, 2, 1}, Orientation{1}, 2) == Vec3{2, 5, 1});
  CHECK_THROWS_AS(oriented_dims({5, 2, 1}, Orientation{2}, 2), ContractError);
  CHECK_THROWS_AS(oriented_dims({5, 2, 1}, Orientation{6}, 3), ContractError);

  std::set<Vec3> perms;
  for (int c = 0; c < 6; ++c) perms.insert(oriented_dims({2, 3, 4}, Orientation{c}, 3));
  CHECK(perms.size() == 6);
}

TEST_CASE("overlaps uses open intervals", "[env]") {
  CHECK_FALSE(overlaps({{0, 0, 0}, {2, 2, 2}}, {{2, 0, 0}, {2, 2, 2}}));
  CHECK(overlaps({{0, 0, 0}, {3, 3, 3}}, {{1, 1, 1}, {1, 1, 1}}));
  CHECK(overlaps({{0, 0, 0}, {2, 2, 2}}, {{1, 0, 0}, {2, 2, 2}}));

  std::mt19937 rng(3);
  std::uniform_int_distribution<int> pos(0, 5), ext(1, 4);
  for (int i = 0; i < 2000; ++i) {
    const Box a{{pos(rng), pos(rng), pos(rng)}, {ext(rng), ext(rng), ext(rng)}};
    const Box b{{pos(rng), pos(rng), pos(rng)}, {ext(rng), ext(rng), ext(rng)}};
    REQUIRE(overlaps(a, b) == oracle::voxel_overlap(a, b));
  }
}

TEST_CASE("support needs the footprint centre on one top face", "[env]") {
  auto inst = make_instance(3, {{6, 6, 4}, {2, 2, 2}});
  auto s = apply_action(PackState(inst), Action{0, {0, 0, 0}, Orientation{0}});

  CHECK(is_supported(s, Action{1, {0, 0, 0}, Orientation{0}}));
  CHECK(is_supported(s, Action{1, {0, 0, 4}, Orientation{0}}));
  // centre (6,6) sits on the face boundary: closed region counts
  CHECK(is_supported(s, Action{1, {5, 5, 4}, Orientation{0}}));
  CHECK_FALSE(is_supported(s, Action{1, {6, 0, 4}, Orientation{0}}));
  CHECK_FALSE(is_supported(s, Action{1, {0, 0, 5}, Orientation{0}}));
}

TEST_CASE("candidate positions are event points", "[env]") {
  auto inst = make_instance(2, {{4, 3, 1}, {1, 1, 1}});
  PackState s(inst);
  CHECK(candidate_positions(s) == std::vector<Vec3>{{0, 0, 0}});
  s = apply_action(s, Action{0, {0, 0, 0}, Orientation{0}});
  const auto c = candidate_positions(s);
  CHECK(c == std::vector<Vec3>{{0, 0, 0}, {0, 3, 0}, {4, 0, 0}, {4, 3, 0}});
}

TEST_CASE("legal actions dedupe symmetric orientations", "[env]") {
  CHECK(legal_actions(PackState(make_instance(2, {{2, 2, 1}}))).size() == 1);
  const auto two = legal_actions(PackState(make_instance(2, {{2, 3, 1}})));
  REQUIRE(two.size() == 2);
  CHECK(two[0].orient.code == 0);
  CHECK(two[1].orient.code == 1);
  CHECK(legal_actions(PackState(make_instance(3, {{2, 2, 2}}))).size() == 1);
  CHECK(legal_actions(PackState(make_instance(3, {{2, 2, 3}}))).size() == 3);
}

TEST_CASE("stacked 10x5 slabs", "[env]") {
  auto inst = make_instance(2, {{10, 5, 1}, {10, 5, 1}});
  auto s = apply_action(PackState(inst), Action{0, {0, 0, 0}, Orientation{0}});
  const auto acts = as_tuples(legal_actions(s));
  CHECK(acts.count({1, 0, 0, 5, 0}) == 1);
  CHECK(acts.count({1, 0, 0, 2, 0}) == 0);
  CHECK(acts == oracle::legal_set(*inst, {s.placed().begin(), s.placed().end()}));

  CHECK_THROWS_AS(apply_action(s, Action{1, {0, 2, 0}, Orientation{0}}), ConstraintViolation);
  try {
    (void)apply_action(s, Action{0, {0, 5, 0}, Orientation{0}});
    FAIL("expected a constraint violation");
  } catch (const ConstraintViolation& e) {
    CHECK(e.constraint() == "item-already-placed");
  }
  try {
    (void)apply_action(s, Action{1, {10, 5, 0}, Orientation{0}});
    FAIL("expected a constraint violation");
  } catch (const ConstraintViolation& e) {
    CHECK(e.constraint() == "support");
  }
}

TEST_CASE("apply_action has value semantics", "[env]") {
  auto inst = make_instance(2, {{3, 2, 1}, {1, 4, 1}, {2, 2, 1}});
  PackState s0(inst);
  const auto a = legal_actions(s0).front();
  const auto s1 = apply_action(s0, a);
  CHECK(s0.step() == 0);
  CHECK(s1.step() == 1);
  CHECK(s0.unplaced().size() == 3);
  CHECK(s1.unplaced().size() == 2);

  std::mt19937 rng(1);
  PackState s = s0;
  while (!s.terminal()) {
    const auto acts = legal_actions(s);
    REQUIRE_FALSE(acts.empty());
    s = apply_action(s, acts[std::uniform_int_distribution<std::size_t>(0, acts.size() - 1)(rng)]);
  }
  CHECK(s.step() == 3);
  CHECK(legal_actions(s).empty());
}

TEST_CASE("costs and rewards", "[env]") {
  auto cube = make_instance(3, {{10, 10, 10}});
  auto s = apply_action(PackState(cube), Action{0, {0, 0, 0}, Orientation{0}});
  CHECK(bin_cost(s) == 300.0);
  CHECK(ideal_cost(*cube) == Approx(300.0));
  CHECK(terminal_reward(s) == 1.0);

  auto slabs = make_instance(2, {{10, 5, 1}, {10, 5, 1}});
  auto base = apply_action(PackState(slabs), Action{0, {0, 0, 0}, Orientation{0}});
  auto stacked = apply_action(base, Action{1, {0, 5, 0}, Orientation{0}});
  auto side = apply_action(base, Action{1, {10, 0, 0}, Orientation{0}});
  CHECK(bin_cost(stacked) == 20.0);
  CHECK(bin_cost(side) == 25.0);
  CHECK(ideal_cost(*slabs) == Approx(20.0));
  CHECK(terminal_reward(stacked) == 1.0);
  CHECK(is_optimal(stacked));
  CHECK(terminal_reward(side) == Approx(0.8));
  CHECK_FALSE(is_optimal(side));

  CHECK(ideal_cost(*make_instance(2, {{10, 5, 1}})) == Approx(2.0 * std::sqrt(50.0)));
  CHECK_THROWS_AS(terminal_reward(base), ContractError);
  CHECK_THROWS_AS(bin_cost(PackState(slabs)), ContractError);
}

TEST_CASE("legal actions match the voxel oracle on random walks", "[env][oracle]") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> dimpick(2, 3), count(1, 5), side(1, 6);
  for (int trial = 0; trial < 60; ++trial) {
    const int dim = dimpick(rng);
    std::vector<Vec3> dims(static_cast<std::size_t>(count(rng)));
    for (auto& d : dims) d = {side(rng), side(rng), dim == 3 ? side(rng) : 1};
    auto inst = make_instance(dim, dims);
    PackState s(inst);
    while (!s.terminal()) {
      const auto acts = legal_actions(s);
      REQUIRE(as_tuples(acts) == oracle::legal_set(*inst, {s.placed().begin(), s.placed().end()}));
      REQUIRE(acts == legal_actions(s));
      s = apply_action(s, acts[std::uniform_int_distribution<std::size_t>(0, acts.size() - 1)(rng)]);
    }
    const double r = terminal_reward(s);
    CHECK(r > 0.0);
    CHECK(r <= 1.0);
    CHECK((r == 1.0) == (bin_cost(s) == ideal_cost(*inst)));
  }
}

TEST_CASE("random walks never produce overlapping boxes", "[env][fuzz]") {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> count(2, 6), side(1, 5);
  for (int episode = 0; episode < 10000; ++episode) {
    const int dim = episode % 2 ? 3 : 2;
    std::vector<Vec3> dims(static_cast<std::size_t>(count(rng)));
    for (auto& d : dims) d = {side(rng), side(rng), dim == 3 ? side(rng) : 1};
    PackState s(make_instance(dim, dims));
    while (!s.terminal()) {
      const auto acts = legal_actions(s);
      s = apply_action(s, acts[std::uniform_int_distribution<std::size_t>(0, acts.size() - 1)(rng)]);
    }
    const auto boxes = s.boxes();
    for (std::size_t i = 0; i < boxes.size(); ++i)
      for (std::size_t j = i + 1; j < boxes.size(); ++j) REQUIRE_FALSE(oracle::voxel_overlap(boxes[i], boxes[j]));
  }
}
