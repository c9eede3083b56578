#include <catch2/catch_amalgamated.hpp>

#include "temdp/mdp.hpp"

#include "oracles.hpp"

using temdp::Distribution;
using temdp::LabeledMdp;
using temdp::StateSpace;

TEST_CASE("state space composes expensive-major full indices") {
  StateSpace s;
  s.expensive = {"e0", "e1", "e2"};
  s.free_vars = {"f0", "f1"};
  CHECK(s.size() == 6);
  CHECK(s.compose(0, 0) == 0);
  CHECK(s.compose(0, 1) == 1);
  CHECK(s.compose(1, 0) == 2);
  CHECK(s.compose(2, 1) == 5);
  for (int x = 0; x < s.size(); ++x) {
    auto [e, f] = s.decompose(x);
    CHECK(s.compose(e, f) == x);
  }
  CHECK(s.name(3) == "(e1,f1)");
}

TEST_CASE("state name drops a singleton expensive factor") {
  StateSpace s;
  s.expensive = {"only"};
  s.free_vars = {"a", "b"};
  CHECK(s.name(1) == "b");
}

TEST_CASE("distribution basics and the null convention") {
  Distribution d(3);
  CHECK(d.is_null());
  CHECK_FALSE(d.is_normalized());
  d = Distribution::point(3, 1);
  CHECK(d.is_normalized());
  CHECK(d.mass[1] == 1.0);
  d = Distribution::uniform(4);
  CHECK(d.is_normalized());
  CHECK(d.mass[2] == Catch::Approx(0.25));
  d.mass[0] = -0.25;
  d.mass[1] = 0.75;
  CHECK_FALSE(d.is_normalized());  // negative entries are never normalized
}

namespace {

LabeledMdp two_state_chain() {
  LabeledMdp m;
  m.states.expensive = {"e"};
  m.states.free_vars = {"a", "b"};
  m.actions = {"go", "stay"};
  m.atomic_props = {"done"};
  m.kernel.assign(2 * 2 * 2, 0.0);
  m.p(0, 0, 1) = 1.0;   // go: a -> b
  m.p(0, 1, 0) = 1.0;   // stay
  m.p(1, 0, 1) = 1.0;
  m.p(1, 1, 1) = 1.0;
  m.labels = {0u, 1u};
  return m;
}

}  // namespace

TEST_CASE("validate accepts a well-formed MDP") {
  CHECK(temdp::validate(two_state_chain()).empty());
}

TEST_CASE("validate reports rows that do not sum to one") {
  LabeledMdp m = two_state_chain();
  m.p(0, 0, 1) = 0.5;
  auto v = temdp::validate(m);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("sums to") != std::string::npos);
}

TEST_CASE("validate reports negative entries") {
  LabeledMdp m = two_state_chain();
  m.p(1, 1, 0) = -0.5;
  m.p(1, 1, 1) = 1.5;
  auto v = temdp::validate(m);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("negative") != std::string::npos);
}

TEST_CASE("validate reports duplicate names and a partial labeling") {
  LabeledMdp m = two_state_chain();
  m.actions = {"go", "go"};
  m.labels.pop_back();
  auto v = temdp::validate(m);
  REQUIRE(v.size() == 2);
  CHECK(v[0].find("duplicate action") != std::string::npos);
  CHECK(v[1].find("not total") != std::string::npos);
}

TEST_CASE("validate reports a kernel of the wrong size") {
  LabeledMdp m = two_state_chain();
  m.kernel.pop_back();
  auto v = temdp::validate(m);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "kernel has wrong size");
}

TEST_CASE("renormalize fixes tiny drift but leaves gross errors alone") {
  LabeledMdp m = two_state_chain();
  m.p(0, 0, 1) = 1.0 + 5e-10;
  m.p(1, 1, 1) = 0.25;  // way off: must stay untouched
  temdp::renormalize_rows(m);
  CHECK(m.p(0, 0, 1) == 1.0);
  CHECK(m.p(1, 1, 1) == 0.25);
  auto v = temdp::validate(m);
  REQUIRE(v.size() == 1);
}

TEST_CASE("step_distribution pushes mass through kernel and policy") {
  LabeledMdp m = two_state_chain();
  Distribution d = Distribution::point(2, 0);
  std::vector<Distribution> slice(2, Distribution(2));
  slice[0].mass = {0.75, 0.25};  // mostly go
  slice[1].mass = {0.5, 0.5};
  Distribution out = temdp::step_distribution(m, d, slice);
  CHECK(out.mass[0] == Catch::Approx(0.25));
  CHECK(out.mass[1] == Catch::Approx(0.75));
  CHECK(out.is_normalized(1e-12));
}

TEST_CASE("step_distribution preserves total mass on random models") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    LabeledMdp m = oracles::random_mdp(rng, 2, 3, 3, {"p"});
    const int nx = m.num_states();
    Distribution d(nx);
    std::exponential_distribution<double> ed(1.0);
    double s = 0.0;
    for (auto& x : d.mass) s += (x = ed(rng));
    for (auto& x : d.mass) x /= s;
    std::vector<Distribution> slice(nx, Distribution::uniform(3));
    Distribution out = temdp::step_distribution(m, d, slice);
    CHECK(out.total() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("step_distribution rejects mismatched dimensions") {
  LabeledMdp m = two_state_chain();
  Distribution d(3);
  std::vector<Distribution> slice(2, Distribution::uniform(2));
  CHECK_THROWS_AS(temdp::step_distribution(m, d, slice), temdp::Error);
}
