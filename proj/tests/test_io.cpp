#include <cstdio>
#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "temdp/io.hpp"

using temdp::CompiledScenario;
using temdp::compile_scenario;
using temdp::json;
using temdp::PolicyFile;
using temdp::read_policy;
using temdp::read_scenario;
using temdp::ScenarioFile;
using temdp::write_policy;
using temdp::write_scenario;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("temdp_test_" + name);
}

std::string scenario_path(const std::string& name) {
  return std::string(TEMDP_SCENARIO_DIR) + "/" + name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("bundled scenario files load and compile") {
  ScenarioFile s = read_scenario(scenario_path("moving_obstacle.json"));
  CHECK(s.grid_kind == "moving_obstacle");
  CHECK(s.horizon == 25);
  CHECK(s.beta == 0.5);
  CompiledScenario c = compile_scenario(s);
  CHECK(c.mdp.states.num_expensive() == 3);
  CHECK(c.mdp.states.num_free() == 35);
  CHECK(c.dfa.num_states == 3);
  CHECK(c.product.num_states() > 0);
  CHECK(c.solver.beta == 0.5);
  CHECK(c.solver.horizon == 25);

  s = read_scenario(scenario_path("scout_rover.json"));
  CHECK(s.grid_kind == "static_uncertain");
  c = compile_scenario(s);
  CHECK(c.mdp.states.num_expensive() == 36);

  s = read_scenario(scenario_path("tiny_explicit.json"));
  CHECK(s.explicit_mdp.has_value());
  c = compile_scenario(s);
  CHECK(c.mdp.num_states() == 4);
  CHECK(c.initial_state == 0);
  CHECK(c.solver.memory == 1);
  CHECK(c.solver.seed == 7u);
}

TEST_CASE("scenario write/read round trip preserves everything") {
  ScenarioFile s = read_scenario(scenario_path("moving_obstacle.json"));
  const auto p = temp_file("scenario_rt.json");
  write_scenario(p.string(), s);
  ScenarioFile r = read_scenario(p.string());
  CHECK(r.name == s.name);
  CHECK(r.grid_kind == s.grid_kind);
  CHECK(r.formula == s.formula);
  CHECK(r.horizon == s.horizon);
  CHECK(r.beta == s.beta);
  CHECK(r.grid->width == s.grid->width);
  CHECK(r.grid->static_obstacles == s.grid->static_obstacles);
  CHECK(r.grid->moving_obstacle->roam_cells ==
        s.grid->moving_obstacle->roam_cells);
  CHECK(r.solver.memory == s.solver.memory);
  CHECK(r.solver.tol_objective == s.solver.tol_objective);
  std::filesystem::remove(p);
}

TEST_CASE("explicit MDP round trip preserves the kernel bit-exactly") {
  ScenarioFile s = read_scenario(scenario_path("tiny_explicit.json"));
  const auto p = temp_file("explicit_rt.json");
  write_scenario(p.string(), s);
  ScenarioFile r = read_scenario(p.string());
  REQUIRE(r.explicit_mdp.has_value());
  CHECK(r.explicit_mdp->kernel == s.explicit_mdp->kernel);
  CHECK(r.explicit_mdp->labels == s.explicit_mdp->labels);
  CHECK(r.explicit_initial == s.explicit_initial);
  std::filesystem::remove(p);
}

TEST_CASE("scenario validation errors") {
  const auto p = temp_file("bad_scenario.json");

  write_text(p, R"({"formula": "F p", "horizon": 2, "beta": 1.0})");
  CHECK_THROWS_WITH(read_scenario(p.string()),
                    Catch::Matchers::ContainsSubstring("exactly one of"));

  write_text(p, R"({"grid": {"width": 2, "height": 1, "goal_cells": [1],
                   "agent_start": 0}, "formula": "F goal", "horizon": 2})");
  CHECK_THROWS_WITH(read_scenario(p.string()),
                    Catch::Matchers::ContainsSubstring("beta"));

  write_text(p, "{not json");
  CHECK_THROWS_WITH(read_scenario(p.string()),
                    Catch::Matchers::ContainsSubstring("parse error"));

  CHECK_THROWS_WITH(read_scenario("/nonexistent/path.json"),
                    Catch::Matchers::ContainsSubstring("cannot open"));
  std::filesystem::remove(p);
}

TEST_CASE("compile rejects an invalid kernel unless renormalize is set") {
  ScenarioFile s = read_scenario(scenario_path("tiny_explicit.json"));
  s.explicit_mdp->p(0, 0, 1) = 0.9 + 3e-10;  // tiny drift
  s.renormalize = false;
  CHECK_THROWS_WITH(compile_scenario(s),
                    Catch::Matchers::ContainsSubstring("invalid MDP"));
  s.renormalize = true;
  CompiledScenario c = compile_scenario(s);
  CHECK(temdp::validate(c.mdp).empty());
}

TEST_CASE("policy file round trip") {
  ScenarioFile s = read_scenario(scenario_path("tiny_explicit.json"));
  CompiledScenario c = compile_scenario(s);
  auto [q, rep] = temdp::solve(c.product, c.solver);
  PolicyFile pf = temdp::make_policy_file(c.product, q, rep, c.solver);
  const auto p = temp_file("policy_rt.json");
  write_policy(p.string(), pf);
  PolicyFile r = read_policy(p.string());
  CHECK(r.beta == pf.beta);
  CHECK(r.memory == pf.memory);
  CHECK(r.horizon == pf.horizon);
  CHECK(r.solver_version == temdp::kSolverVersion);
  CHECK(r.objective == Catch::Approx(pf.objective).margin(1e-15));
  CHECK(r.state_names == c.product.state_names);
  CHECK(r.action_names == c.product.action_names);
  REQUIRE(r.table.q.size() == q.q.size());
  for (std::size_t t = 0; t < q.q.size(); ++t)
    for (std::size_t i = 0; i < q.q[t].size(); ++i)
      CHECK(r.table.q[t][i] == Catch::Approx(q.q[t][i]).margin(1e-15));
  std::filesystem::remove(p);
}

TEST_CASE("policy files with broken rows or shapes are rejected") {
  ScenarioFile s = read_scenario(scenario_path("tiny_explicit.json"));
  CompiledScenario c = compile_scenario(s);
  auto [q, rep] = temdp::solve(c.product, c.solver);
  PolicyFile pf = temdp::make_policy_file(c.product, q, rep, c.solver);
  const auto p = temp_file("policy_bad.json");

  PolicyFile broken = pf;
  broken.table.q[0][0] += 0.5;  // row no longer sums to 1
  write_policy(p.string(), broken);
  CHECK_THROWS_WITH(read_policy(p.string()),
                    Catch::Matchers::ContainsSubstring("sum to 1"));

  broken = pf;
  broken.table.q.pop_back();
  write_policy(p.string(), broken);
  CHECK_THROWS_WITH(read_policy(p.string()),
                    Catch::Matchers::ContainsSubstring("horizon mismatch"));

  broken = pf;
  broken.table.q[1].pop_back();
  write_policy(p.string(), broken);
  CHECK_THROWS_WITH(read_policy(p.string()),
                    Catch::Matchers::ContainsSubstring("wrong size"));
  std::filesystem::remove(p);
}

TEST_CASE("agent marginals sum to one per time step and map cells correctly") {
  ScenarioFile s = read_scenario(scenario_path("moving_obstacle.json"));
  CompiledScenario c = compile_scenario(s);
  temdp::PolicyTable q = temdp::PolicyTable::uniform(c.product, 4, 0);
  auto rows = temdp::agent_marginals(c, q, {0, 2, 4});
  REQUIRE(rows.size() == 3u * 35u);
  double t0_sum = 0.0;
  for (const auto& r : rows)
    if (r.t == 0) t0_sum += r.probability;
  CHECK(t0_sum == Catch::Approx(1.0).margin(1e-12));
  // At t = 0 all mass sits on the agent start (cell 34 = column 4, row 6).
  for (const auto& r : rows) {
    if (r.t != 0) continue;
    const bool is_start = r.cell_x == 4 && r.cell_y == 6;
    CHECK(r.probability == (is_start ? 1.0 : 0.0));
  }
  double t4_sum = 0.0;
  for (const auto& r : rows)
    if (r.t == 4) t4_sum += r.probability;
  CHECK(t4_sum == Catch::Approx(1.0).margin(1e-12));

  CHECK_THROWS_AS(temdp::agent_marginals(c, q, {9}), temdp::Error);

  ScenarioFile e = read_scenario(scenario_path("tiny_explicit.json"));
  CompiledScenario ce = compile_scenario(e);
  temdp::PolicyTable qe = temdp::PolicyTable::uniform(ce.product, 2, 0);
  CHECK_THROWS_AS(temdp::agent_marginals(ce, qe, {0}), temdp::Error);
}

TEST_CASE("beta sweep returns one point per beta with finite entries") {
  ScenarioFile s = read_scenario(scenario_path("tiny_explicit.json"));
  CompiledScenario c = compile_scenario(s);
  const std::vector<double> betas = {0.1, 1.0, 10.0};
  auto pts = temdp::sweep_betas(c.product, c.solver, betas);
  REQUIRE(pts.size() == 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i].beta == betas[i]);
    CHECK(std::isfinite(pts[i].te_bits));
    CHECK(pts[i].te_bits >= -1e-12);
    CHECK(pts[i].failure_probability >= -1e-12);
    CHECK(pts[i].failure_probability <= 1.0 + 1e-12);
  }
  // Information decreases and failure increases along the grid.
  CHECK(pts[2].te_bits <= pts[0].te_bits + 1e-9);
  CHECK(pts[2].failure_probability >= pts[0].failure_probability - 1e-9);
}
