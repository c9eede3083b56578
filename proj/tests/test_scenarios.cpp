#include <catch2/catch_amalgamated.hpp>

#include "temdp/scenarios.hpp"

using temdp::build_moving_obstacle;
using temdp::build_static_uncertain;
using temdp::GridModel;
using temdp::GridSpec;
using temdp::LabeledMdp;
using temdp::MovingObstacleSpec;

namespace {

GridSpec patrol_grid() {
  GridSpec g;
  g.width = 5;
  g.height = 7;
  g.static_obstacles = {7, 12, 17};
  g.goal_cells = {30};
  g.agent_start = 34;
  g.slip = 0.1;
  MovingObstacleSpec mo;
  mo.roam_cells = {22, 27, 32};
  mo.start_cell = 27;
  g.moving_obstacle = mo;
  return g;
}

GridSpec scout_grid() {
  GridSpec g;
  g.width = 3;
  g.height = 1;
  g.goal_cells = {2};
  g.agent_start = 0;
  g.slip = 0.1;
  g.uncertain_cells = {{2, 0.4}};
  g.scout_range = 1;
  return g;
}

}  // namespace

TEST_CASE("grid geometry helpers") {
  GridSpec g = patrol_grid();
  CHECK(g.num_cells() == 35);
  CHECK(g.row(34) == 6);
  CHECK(g.col(34) == 4);
  CHECK(g.cell_at(6, 4) == 34);
  CHECK(g.in_grid(0, 0));
  CHECK_FALSE(g.in_grid(-1, 0));
  CHECK_FALSE(g.in_grid(0, 5));
  CHECK(g.is_static_obstacle(12));
  CHECK_FALSE(g.is_static_obstacle(11));
}

TEST_CASE("moving-obstacle model has the right shape and is stochastic") {
  GridModel gm = build_moving_obstacle(patrol_grid());
  const LabeledMdp& m = gm.mdp;
  CHECK(m.states.num_expensive() == 3);
  CHECK(m.states.num_free() == 35);
  CHECK(m.num_actions() == 5);
  CHECK(m.atomic_props == std::vector<std::string>{"crash", "goal"});
  CHECK(temdp::validate(m).empty());
  // Initial: obstacle at 27, agent at 34.
  CHECK(gm.initial_state == m.states.compose(1, 34));
  CHECK(m.states.expensive[1] == "obs_27");
}

TEST_CASE("slip kinematics at an interior cell") {
  GridModel gm = build_moving_obstacle(patrol_grid());
  const LabeledMdp& m = gm.mdp;
  const GridSpec g = patrol_grid();
  // Agent at cell 21 (row 4, col 1), obstacle state fixed: marginalize the
  // obstacle to isolate the agent kinematics.
  auto agent_prob = [&](int e, int from, int action, int to) {
    double s = 0.0;
    for (int en = 0; en < 3; ++en)
      s += m.p(m.states.compose(e, from), action, m.states.compose(en, to));
    return s;
  };
  // North from 21: intended 16, diagonals 15 and 17. 17 is a wall, and a
  // slip into a wall is a crash: the mass really lands on 17.
  CHECK(agent_prob(0, 21, 0, 16) == Catch::Approx(0.8));
  CHECK(agent_prob(0, 21, 0, 15) == Catch::Approx(0.1));
  CHECK(agent_prob(0, 21, 0, 17) == Catch::Approx(0.1));  // slip crash
  // East from 21: intended 22, forward diagonals 27 and 17 (a wall).
  CHECK(agent_prob(0, 21, 2, 22) == Catch::Approx(0.8));
  CHECK(agent_prob(0, 21, 2, 27) == Catch::Approx(0.1));
  CHECK(agent_prob(0, 21, 2, 17) == Catch::Approx(0.1));
  // A deliberate move into a wall stays in place: north from 22 targets 17.
  CHECK(agent_prob(0, 22, 0, 22) == Catch::Approx(0.8));
  CHECK(agent_prob(0, 22, 0, 16) == Catch::Approx(0.1));
  CHECK(agent_prob(0, 22, 0, 18) == Catch::Approx(0.1));
  // Wall cells absorb whoever slipped into them.
  CHECK(agent_prob(0, 17, 0, 17) == Catch::Approx(1.0));
  CHECK(agent_prob(0, 17, 2, 17) == Catch::Approx(1.0));
  // Stay is deterministic.
  CHECK(agent_prob(0, 21, 4, 21) == Catch::Approx(1.0));
  // West from 21: intended 20, forward diagonals 25 and 15.
  CHECK(agent_prob(0, 21, 3, 20) == Catch::Approx(0.8));
  CHECK(agent_prob(0, 21, 3, 25) == Catch::Approx(0.1));
  CHECK(agent_prob(0, 21, 3, 15) == Catch::Approx(0.1));
  // West from 20 (col 0): target and both diagonals leave the grid, so
  // every bit of mass collapses onto staying put.
  CHECK(agent_prob(0, 20, 3, 20) == Catch::Approx(1.0));
}

TEST_CASE("obstacle follows the lazy walk on its roaming column") {
  GridModel gm = build_moving_obstacle(patrol_grid());
  const LabeledMdp& m = gm.mdp;
  // Roam cells 22 (idx 0), 27 (idx 1), 32 (idx 2); 27 touches both ends.
  auto obstacle_prob = [&](int e, int en) {
    double s = 0.0;
    for (int fn = 0; fn < 35; ++fn)
      s += m.p(m.states.compose(e, 0), 4, m.states.compose(en, fn));
    return s;
  };
  CHECK(obstacle_prob(0, 0) == Catch::Approx(0.5));
  CHECK(obstacle_prob(0, 1) == Catch::Approx(0.5));
  CHECK(obstacle_prob(0, 2) == Catch::Approx(0.0));
  CHECK(obstacle_prob(1, 0) == Catch::Approx(0.25));
  CHECK(obstacle_prob(1, 1) == Catch::Approx(0.5));
  CHECK(obstacle_prob(1, 2) == Catch::Approx(0.25));
  // The obstacle's move is independent of the agent's action.
  for (int u = 0; u < 5; ++u) {
    double s = 0.0;
    for (int fn = 0; fn < 35; ++fn)
      s += m.p(m.states.compose(2, 34), u, m.states.compose(1, fn));
    CHECK(s == Catch::Approx(0.5));
  }
}

TEST_CASE("moving-obstacle labels: crash on contact or walls, goal at goal") {
  GridModel gm = build_moving_obstacle(patrol_grid());
  const LabeledMdp& m = gm.mdp;
  CHECK(m.label(m.states.compose(0, 12)) == 1u);  // wall: crash
  CHECK(m.label(m.states.compose(0, 22)) == 1u);  // on the obstacle: crash
  CHECK(m.label(m.states.compose(1, 22)) == 0u);  // obstacle elsewhere
  CHECK(m.label(m.states.compose(0, 30)) == 2u);  // goal
  CHECK(m.label(m.states.compose(2, 34)) == 0u);
}

TEST_CASE("explicit obstacle law overrides the lazy walk") {
  GridSpec g = patrol_grid();
  g.moving_obstacle->law = {{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}};
  GridModel gm = build_moving_obstacle(g);
  double s = 0.0;
  for (int fn = 0; fn < 35; ++fn)
    s += gm.mdp.p(gm.mdp.states.compose(0, 0), 4, gm.mdp.states.compose(1, fn));
  CHECK(s == Catch::Approx(1.0));
}

TEST_CASE("moving-obstacle input validation") {
  GridSpec g = patrol_grid();
  g.agent_start = 12;  // on a wall
  CHECK_THROWS_AS(build_moving_obstacle(g), temdp::Error);

  g = patrol_grid();
  g.agent_start = 27;  // on the obstacle
  CHECK_THROWS_AS(build_moving_obstacle(g), temdp::Error);

  g = patrol_grid();
  g.moving_obstacle->start_cell = 20;  // not a roam cell
  CHECK_THROWS_AS(build_moving_obstacle(g), temdp::Error);

  g = patrol_grid();
  g.moving_obstacle->law = {{1.0}};  // wrong shape
  CHECK_THROWS_AS(build_moving_obstacle(g), temdp::Error);

  g = patrol_grid();
  g.moving_obstacle->law = {{0.5, 0.4, 0.0}, {0, 1, 0}, {0, 0, 1}};
  CHECK_THROWS_AS(build_moving_obstacle(g), temdp::Error);

  g = patrol_grid();
  g.slip = 0.5;
  CHECK_THROWS_AS(build_moving_obstacle(g), temdp::Error);

  g = patrol_grid();
  g.moving_obstacle.reset();
  CHECK_THROWS_AS(build_moving_obstacle(g), temdp::Error);
}

TEST_CASE("uncertain-terrain model shape, priors and initial level vector") {
  GridModel gm = build_static_uncertain(scout_grid());
  const LabeledMdp& m = gm.mdp;
  CHECK(m.states.num_expensive() == 6);  // 6^1 level vectors
  CHECK(m.states.num_free() == 3);
  CHECK(temdp::validate(m).empty());
  // Prior 0.4 has level index 2.
  CHECK(gm.initial_state == m.states.compose(2, 0));
  CHECK(m.states.expensive[2] == "o_2");
}

TEST_CASE("uncertain cells resolve within scouting range and freeze outside") {
  GridModel gm = build_static_uncertain(scout_grid());
  const LabeledMdp& m = gm.mdp;
  // From cell 0 the uncertain cell 2 is out of range 1: the level freezes.
  // East: intended 1 (prob 0.8), slips collapse to stay (prob 0.2).
  CHECK(m.p(m.states.compose(2, 0), 2, m.states.compose(2, 1)) ==
        Catch::Approx(0.8));
  CHECK(m.p(m.states.compose(2, 0), 2, m.states.compose(2, 0)) ==
        Catch::Approx(0.2));
  CHECK(m.p(m.states.compose(2, 0), 2, m.states.compose(5, 1)) == 0.0);
  // From cell 1 the cell is in range: level 0.4 resolves to 1 (index 5)
  // with probability 0.4 and to 0 (index 0) with probability 0.6.
  CHECK(m.p(m.states.compose(2, 1), 2, m.states.compose(5, 2)) ==
        Catch::Approx(0.4 * 0.8));
  CHECK(m.p(m.states.compose(2, 1), 2, m.states.compose(0, 2)) ==
        Catch::Approx(0.6 * 0.8));
  CHECK(m.p(m.states.compose(2, 1), 2, m.states.compose(2, 2)) == 0.0);
  // Already-resolved levels never change, in or out of range.
  CHECK(m.p(m.states.compose(5, 1), 2, m.states.compose(5, 2)) ==
        Catch::Approx(0.8));
  CHECK(m.p(m.states.compose(0, 1), 2, m.states.compose(0, 2)) ==
        Catch::Approx(0.8));
}

TEST_CASE("uncertain-terrain labels: crash only on resolved obstacles") {
  GridModel gm = build_static_uncertain(scout_grid());
  const LabeledMdp& m = gm.mdp;
  CHECK(m.label(m.states.compose(5, 2)) == 3u);  // resolved obstacle at goal
  CHECK(m.label(m.states.compose(0, 2)) == 2u);  // resolved clear: just goal
  CHECK(m.label(m.states.compose(2, 2)) == 2u);  // unresolved: no crash yet
  CHECK(m.label(m.states.compose(2, 0)) == 0u);
}

TEST_CASE("two uncertain cells resolve independently") {
  GridSpec g;
  g.width = 4;
  g.height = 1;
  g.goal_cells = {3};
  g.agent_start = 0;
  g.slip = 0.0;
  g.uncertain_cells = {{1, 0.2}, {2, 0.8}};
  g.scout_range = 3;  // everything always in range
  GridModel gm = build_static_uncertain(g);
  const LabeledMdp& m = gm.mdp;
  CHECK(m.states.num_expensive() == 36);
  // Initial levels: cell 1 -> index 1, cell 2 -> index 4; e0 = 1 + 4*6.
  CHECK(gm.initial_state == m.states.compose(1 + 4 * 6, 0));
  // One step east from the start resolves both cells jointly.
  auto p_joint = [&](int l0, int l1) {
    return m.p(gm.initial_state, 2, m.states.compose(l0 + 6 * l1, 1));
  };
  CHECK(p_joint(5, 5) == Catch::Approx(0.2 * 0.8));
  CHECK(p_joint(5, 0) == Catch::Approx(0.2 * 0.2));
  CHECK(p_joint(0, 5) == Catch::Approx(0.8 * 0.8));
  CHECK(p_joint(0, 0) == Catch::Approx(0.8 * 0.2));
  CHECK(temdp::validate(m).empty());
}

TEST_CASE("uncertain-terrain input validation") {
  GridSpec g = scout_grid();
  g.uncertain_cells[0].level = 0.3;  // not an allowed level
  CHECK_THROWS_AS(build_static_uncertain(g), temdp::Error);

  g = scout_grid();
  g.uncertain_cells[0].cell = 9;
  CHECK_THROWS_AS(build_static_uncertain(g), temdp::Error);

  g = scout_grid();
  g.uncertain_cells.clear();
  CHECK_THROWS_AS(build_static_uncertain(g), temdp::Error);

  g = scout_grid();
  g.max_uncertain_cells = 0;
  CHECK_THROWS_AS(build_static_uncertain(g), temdp::Error);
}
