#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "temdp/mdp.hpp"

namespace temdp {

inline constexpr std::array<double, 6> kUncertaintyLevels = {0.0, 0.2, 0.4,
                                                             0.6, 0.8, 1.0};

struct MovingObstacleSpec {
  std::vector<int> roam_cells;
  int start_cell = -1;
  // Optional explicit row-stochastic law over roam_cells; empty means the
  // default lazy uniform walk (stay 1/2, split 1/2 over adjacent roam cells).
  std::vector<std::vector<double>> law;
};

struct UncertainCell {
  int cell = -1;
  double level = 0.0;  // prior, one of kUncertaintyLevels
};

struct GridSpec {
  int width = 0;
  int height = 0;
  std::vector<int> static_obstacles;
  std::vector<int> goal_cells;
  int agent_start = -1;
  double slip = 0.1;
  std::optional<MovingObstacleSpec> moving_obstacle;
  std::vector<UncertainCell> uncertain_cells;
  int scout_range = 2;
  int max_uncertain_cells = 4;

  int num_cells() const { return width * height; }
  int row(int cell) const { return cell / width; }
  int col(int cell) const { return cell % width; }
  int cell_at(int r, int c) const { return r * width + c; }
  bool in_grid(int r, int c) const {
    return r >= 0 && r < height && c >= 0 && c < width;
  }
  bool is_static_obstacle(int cell) const {
    return std::find(static_obstacles.begin(), static_obstacles.end(), cell) !=
           static_obstacles.end();
  }
};

/// A generated grid MDP plus its initial full-state index.
struct GridModel {
  LabeledMdp mdp;
  int initial_state = 0;
};

namespace detail {

inline void check_grid_common(const GridSpec& g) {
  if (g.width <= 0 || g.height <= 0) throw Error("grid dimensions must be positive");
  auto in_range = [&](int cell) { return cell >= 0 && cell < g.num_cells(); };
  for (int c : g.static_obstacles)
    if (!in_range(c)) throw Error("static obstacle cell out of range");
  for (int c : g.goal_cells)
    if (!in_range(c)) throw Error("goal cell out of range");
  if (g.goal_cells.empty()) throw Error("no goal cells");
  if (!in_range(g.agent_start)) throw Error("agent start out of range");
  if (g.is_static_obstacle(g.agent_start))
    throw Error("agent starts on a static obstacle");
  if (g.slip < 0.0 || g.slip >= 0.5) throw Error("slip must lie in [0, 0.5)");
  if (g.scout_range < 0) throw Error("scout range must be non-negative");
}

// Slip kinematics shared by both scenario families: the intended cell gets
// 1 - 2*slip and each forward-diagonal neighbor gets slip. A deliberate move
// into a wall stays in place, but a slip INTO a static obstacle actually
// deposits the agent there (a crash): taking a route that brushes past walls
// therefore carries real risk. Off-grid targets always collapse onto staying,
// and obstacle cells are absorbing once entered.
inline std::vector<double> agent_row(const GridSpec& g, int cell, int action) {
  std::vector<double> row(g.num_cells(), 0.0);
  if (action == 4 || g.is_static_obstacle(cell)) {  // stay / already crashed
    row[cell] = 1.0;
    return row;
  }
  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, 1, -1};
  const int r = g.row(cell), c = g.col(cell);
  auto deposit = [&](int tr, int tc, double mass, bool deliberate) {
    if (!g.in_grid(tr, tc)) {
      row[cell] += mass;
      return;
    }
    const int target = g.cell_at(tr, tc);
    if (deliberate && g.is_static_obstacle(target))
      row[cell] += mass;
    else
      row[target] += mass;
  };
  deposit(r + dr[action], c + dc[action], 1.0 - 2.0 * g.slip, true);
  if (action <= 1) {  // north/south slip east or west
    deposit(r + dr[action], c + 1, g.slip, false);
    deposit(r + dr[action], c - 1, g.slip, false);
  } else {  // east/west slip north or south
    deposit(r + 1, c + dc[action], g.slip, false);
    deposit(r - 1, c + dc[action], g.slip, false);
  }
  return row;
}

inline const std::vector<std::string>& grid_actions() {
  static const std::vector<std::string> a = {"north", "south", "east", "west",
                                             "stay"};
  return a;
}

inline std::vector<std::string> cell_names(const GridSpec& g) {
  std::vector<std::string> names;
  names.reserve(g.num_cells());
  for (int c = 0; c < g.num_cells(); ++c)
    names.push_back("cell_" + std::to_string(c));
  return names;
}

}  // namespace detail

/// Gridworld with a moving obstacle on its roaming set. The agent cell is
/// the free factor, the obstacle cell the expensive one; the obstacle
/// moves independently of the agent's action.
inline GridModel build_moving_obstacle(const GridSpec& g) {
  detail::check_grid_common(g);
  if (!g.moving_obstacle) throw Error("no moving obstacle in spec");
  const MovingObstacleSpec& mo = *g.moving_obstacle;
  if (mo.roam_cells.empty()) throw Error("empty roaming set");
  const int ne = static_cast<int>(mo.roam_cells.size());
  int start_idx = -1;
  for (int i = 0; i < ne; ++i)
    if (mo.roam_cells[i] == mo.start_cell) start_idx = i;
  if (start_idx < 0) throw Error("obstacle start cell not in roaming set");
  if (g.agent_start == mo.start_cell)
    throw Error("agent starts on the moving obstacle");

  // Obstacle law: explicit matrix, or a lazy uniform walk over grid-adjacent
  // roaming cells.
  std::vector<std::vector<double>> law = mo.law;
  if (law.empty()) {
    law.assign(ne, std::vector<double>(ne, 0.0));
    for (int i = 0; i < ne; ++i) {
      std::vector<int> nbrs;
      for (int j = 0; j < ne; ++j) {
        const int a = mo.roam_cells[i], b = mo.roam_cells[j];
        const int dist = std::abs(g.row(a) - g.row(b)) + std::abs(g.col(a) - g.col(b));
        if (dist == 1) nbrs.push_back(j);
      }
      if (nbrs.empty()) {
        law[i][i] = 1.0;
      } else {
        law[i][i] = 0.5;
        for (int j : nbrs) law[i][j] = 0.5 / nbrs.size();
      }
    }
  } else {
    if (static_cast<int>(law.size()) != ne) throw Error("obstacle law has wrong shape");
    for (const auto& row : law) {
      if (static_cast<int>(row.size()) != ne) throw Error("obstacle law has wrong shape");
      double s = 0.0;
      for (double p : row) {
        if (p < 0.0) throw Error("obstacle law has a negative entry");
        s += p;
      }
      if (std::abs(s - 1.0) > kStochasticTol)
        throw Error("obstacle law row does not sum to 1");
    }
  }

  GridModel out;
  LabeledMdp& m = out.mdp;
  for (int c : mo.roam_cells)
    m.states.expensive.push_back("obs_" + std::to_string(c));
  m.states.free_vars = detail::cell_names(g);
  m.actions = detail::grid_actions();
  m.atomic_props = {"crash", "goal"};

  const int nf = g.num_cells();
  const int nx = ne * nf;
  const int nu = m.num_actions();
  m.kernel.assign(static_cast<std::size_t>(nx) * nu * nx, 0.0);
  m.labels.assign(nx, 0);

  for (int f = 0; f < nf; ++f) {
    std::vector<std::vector<double>> agent(nu);
    for (int u = 0; u < nu; ++u) agent[u] = detail::agent_row(g, f, u);
    for (int e = 0; e < ne; ++e) {
      const int x = m.states.compose(e, f);
      std::uint32_t lab = 0;
      if (g.is_static_obstacle(f) || f == mo.roam_cells[e]) lab |= 1u;  // crash
      if (std::find(g.goal_cells.begin(), g.goal_cells.end(), f) !=
          g.goal_cells.end())
        lab |= 2u;  // goal
      m.labels[x] = lab;
      for (int u = 0; u < nu; ++u)
        for (int fn = 0; fn < nf; ++fn) {
          const double pa = agent[u][fn];
          if (pa == 0.0) continue;
          for (int en = 0; en < ne; ++en) {
            const double po = law[e][en];
            if (po != 0.0) m.p(x, u, m.states.compose(en, fn)) = pa * po;
          }
        }
    }
  }
  out.initial_state = m.states.compose(start_idx, g.agent_start);
  return out;
}

/// Gridworld with a priori uncertain cells that resolve to obstacle /
/// no-obstacle when the agent scouts within Chebyshev range d. The level
/// vector is the expensive factor.
inline GridModel build_static_uncertain(const GridSpec& g) {
  detail::check_grid_common(g);
  if (g.uncertain_cells.empty()) throw Error("no uncertain cells in spec");
  const int k = static_cast<int>(g.uncertain_cells.size());
  if (k > g.max_uncertain_cells)
    throw Error("too many uncertain cells: " + std::to_string(k) +
                " exceeds the cap of " + std::to_string(g.max_uncertain_cells) +
                " (6^k level vectors are stored densely)");
  std::vector<int> prior_idx(k);
  for (int j = 0; j < k; ++j) {
    const UncertainCell& uc = g.uncertain_cells[j];
    if (uc.cell < 0 || uc.cell >= g.num_cells())
      throw Error("uncertain cell out of range");
    int idx = -1;
    for (int l = 0; l < 6; ++l)
      if (std::abs(kUncertaintyLevels[l] - uc.level) < 1e-12) idx = l;
    if (idx < 0)
      throw Error("uncertainty level must come from {0, 0.2, 0.4, 0.6, 0.8, 1}");
    prior_idx[j] = idx;
  }

  int ne = 1;
  for (int j = 0; j < k; ++j) ne *= 6;

  auto level_of = [&](int e, int j) {
    for (int i = 0; i < j; ++i) e /= 6;
    return e % 6;
  };
  auto vector_name = [&](int e) {
    std::string s = "o_";
    for (int j = 0; j < k; ++j) s += std::to_string(level_of(e, j));
    return s;
  };

  GridModel out;
  LabeledMdp& m = out.mdp;
  for (int e = 0; e < ne; ++e) m.states.expensive.push_back(vector_name(e));
  m.states.free_vars = detail::cell_names(g);
  m.actions = detail::grid_actions();
  m.atomic_props = {"crash", "goal"};

  const int nf = g.num_cells();
  const int nx = ne * nf;
  const int nu = m.num_actions();
  m.kernel.assign(static_cast<std::size_t>(nx) * nu * nx, 0.0);
  m.labels.assign(nx, 0);

  // Environment law per agent cell: cells within scouting range with an
  // unresolved level collapse to 0 or 1; the rest are frozen.
  auto chebyshev = [&](int a, int b) {
    return std::max(std::abs(g.row(a) - g.row(b)),
                    std::abs(g.col(a) - g.col(b)));
  };
  auto env_row = [&](int e, int f) {
    std::vector<std::pair<int, double>> outcomes = {{0, 1.0}};
    for (int j = k - 1; j >= 0; --j) {
      const int lvl = level_of(e, j);
      int pow6 = 1;
      for (int i = 0; i < j; ++i) pow6 *= 6;
      std::vector<std::pair<int, double>> next;
      const bool scouted = chebyshev(f, g.uncertain_cells[j].cell) <= g.scout_range;
      if (scouted && lvl != 0 && lvl != 5) {
        const double o = kUncertaintyLevels[lvl];
        for (auto [base, p] : outcomes) {
          next.push_back({base + 5 * pow6, p * o});
          next.push_back({base + 0 * pow6, p * (1.0 - o)});
        }
      } else {
        for (auto [base, p] : outcomes) next.push_back({base + lvl * pow6, p});
      }
      outcomes = std::move(next);
    }
    return outcomes;
  };

  for (int f = 0; f < nf; ++f) {
    std::vector<std::vector<double>> agent(nu);
    for (int u = 0; u < nu; ++u) agent[u] = detail::agent_row(g, f, u);
    for (int e = 0; e < ne; ++e) {
      const int x = m.states.compose(e, f);
      std::uint32_t lab = 0;
      bool crash = g.is_static_obstacle(f);
      for (int j = 0; j < k; ++j)
        if (g.uncertain_cells[j].cell == f && level_of(e, j) == 5) crash = true;
      if (crash) lab |= 1u;
      if (std::find(g.goal_cells.begin(), g.goal_cells.end(), f) !=
          g.goal_cells.end())
        lab |= 2u;
      m.labels[x] = lab;
      const auto env = env_row(e, f);
      for (int u = 0; u < nu; ++u)
        for (int fn = 0; fn < nf; ++fn) {
          const double pa = agent[u][fn];
          if (pa == 0.0) continue;
          for (const auto& [en, po] : env)
            m.p(x, u, m.states.compose(en, fn)) += pa * po;
        }
    }
  }
  int e0 = 0;
  for (int j = k - 1; j >= 0; --j) e0 = e0 * 6 + prior_idx[j];
  out.initial_state = m.states.compose(e0, g.agent_start);
  return out;
}

}  // namespace temdp
