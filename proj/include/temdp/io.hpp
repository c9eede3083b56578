#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "temdp/dfa.hpp"
#include "temdp/ltl.hpp"
#include "temdp/mdp.hpp"
#include "temdp/product.hpp"
#include "temdp/scenarios.hpp"
#include "temdp/solver.hpp"

namespace temdp {

inline constexpr const char* kSolverVersion = "0.1.0";

using nlohmann::json;

struct ScenarioFile {
  std::string name;
  std::optional<GridSpec> grid;
  std::string grid_kind;  // "moving_obstacle" | "static_uncertain"
  std::optional<LabeledMdp> explicit_mdp;
  int explicit_initial = 0;
  std::string formula;
  int horizon = 1;
  std::optional<double> beta;
  std::optional<double> target_prob;  // D; exactly one of beta / target_prob
  SolverConfig solver;                // beta and horizon filled at compile time
  bool renormalize = false;
};

struct CompiledScenario {
  LabeledMdp mdp;
  int initial_state = 0;
  LtlFormula formula;
  Dfa dfa;
  ProductMdp product;
  SolverConfig solver;
  std::optional<GridSpec> grid;
};

namespace detail {

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error("JSON parse error in " + path + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << j.dump(2) << "\n";
}

inline GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.width = j.at("width").get<int>();
  g.height = j.at("height").get<int>();
  g.static_obstacles = j.value("static_obstacles", std::vector<int>{});
  g.goal_cells = j.at("goal_cells").get<std::vector<int>>();
  g.agent_start = j.at("agent_start").get<int>();
  g.slip = j.value("slip", 0.1);
  if (j.contains("moving_obstacle")) {
    MovingObstacleSpec mo;
    const json& m = j.at("moving_obstacle");
    mo.roam_cells = m.at("roam_cells").get<std::vector<int>>();
    mo.start_cell = m.at("start_cell").get<int>();
    if (m.contains("law"))
      mo.law = m.at("law").get<std::vector<std::vector<double>>>();
    g.moving_obstacle = std::move(mo);
  }
  if (j.contains("uncertain_cells"))
    for (const json& c : j.at("uncertain_cells"))
      g.uncertain_cells.push_back(
          {c.at("cell").get<int>(), c.at("level").get<double>()});
  g.scout_range = j.value("scout_range", 2);
  g.max_uncertain_cells = j.value("max_uncertain_cells", 4);
  return g;
}

inline json grid_to_json(const GridSpec& g) {
  json j;
  j["width"] = g.width;
  j["height"] = g.height;
  j["static_obstacles"] = g.static_obstacles;
  j["goal_cells"] = g.goal_cells;
  j["agent_start"] = g.agent_start;
  j["slip"] = g.slip;
  if (g.moving_obstacle) {
    json m;
    m["roam_cells"] = g.moving_obstacle->roam_cells;
    m["start_cell"] = g.moving_obstacle->start_cell;
    if (!g.moving_obstacle->law.empty()) m["law"] = g.moving_obstacle->law;
    j["moving_obstacle"] = std::move(m);
  }
  if (!g.uncertain_cells.empty()) {
    json cells = json::array();
    for (const auto& c : g.uncertain_cells)
      cells.push_back({{"cell", c.cell}, {"level", c.level}});
    j["uncertain_cells"] = std::move(cells);
  }
  j["scout_range"] = g.scout_range;
  j["max_uncertain_cells"] = g.max_uncertain_cells;
  return j;
}

inline LabeledMdp mdp_from_json(const json& j, int* initial) {
  LabeledMdp m;
  m.states.expensive = j.at("expensive_states").get<std::vector<std::string>>();
  m.states.free_vars = j.at("free_states").get<std::vector<std::string>>();
  m.actions = j.at("actions").get<std::vector<std::string>>();
  m.atomic_props = j.at("atomic_props").get<std::vector<std::string>>();
  const auto t = j.at("transition").get<std::vector<std::vector<std::vector<double>>>>();
  const int nx = m.num_states();
  const int nu = m.num_actions();
  if (static_cast<int>(t.size()) != nx)
    throw Error("transition table has wrong number of state rows");
  m.kernel.assign(static_cast<std::size_t>(nx) * nu * nx, 0.0);
  for (int x = 0; x < nx; ++x) {
    if (static_cast<int>(t[x].size()) != nu)
      throw Error("transition table row " + std::to_string(x) +
                  " has wrong number of actions");
    for (int u = 0; u < nu; ++u) {
      if (static_cast<int>(t[x][u].size()) != nx)
        throw Error("transition row (x=" + std::to_string(x) +
                    ", u=" + std::to_string(u) + ") has wrong length");
      for (int xn = 0; xn < nx; ++xn) m.p(x, u, xn) = t[x][u][xn];
    }
  }
  const auto labels = j.at("labels").get<std::vector<std::vector<std::string>>>();
  if (static_cast<int>(labels.size()) != nx)
    throw Error("labels must cover every full state");
  m.labels.assign(nx, 0);
  for (int x = 0; x < nx; ++x)
    for (const auto& ap : labels[x]) {
      const int bit = m.ap_index(ap);
      if (bit < 0) throw Error("label '" + ap + "' not in atomic_props");
      m.labels[x] |= 1u << bit;
    }
  const json& init = j.at("initial_state");
  int e = -1, f = -1;
  const std::string en = init.at("expensive").get<std::string>();
  const std::string fn = init.at("free").get<std::string>();
  for (int i = 0; i < m.states.num_expensive(); ++i)
    if (m.states.expensive[i] == en) e = i;
  for (int i = 0; i < m.states.num_free(); ++i)
    if (m.states.free_vars[i] == fn) f = i;
  if (e < 0 || f < 0) throw Error("initial state names not found");
  *initial = m.states.compose(e, f);
  return m;
}

inline json mdp_to_json(const LabeledMdp& m, int initial) {
  json j;
  j["expensive_states"] = m.states.expensive;
  j["free_states"] = m.states.free_vars;
  j["actions"] = m.actions;
  j["atomic_props"] = m.atomic_props;
  const int nx = m.num_states();
  const int nu = m.num_actions();
  std::vector<std::vector<std::vector<double>>> t(
      nx, std::vector<std::vector<double>>(nu, std::vector<double>(nx)));
  for (int x = 0; x < nx; ++x)
    for (int u = 0; u < nu; ++u)
      for (int xn = 0; xn < nx; ++xn) t[x][u][xn] = m.p(x, u, xn);
  j["transition"] = t;
  std::vector<std::vector<std::string>> labels(nx);
  for (int x = 0; x < nx; ++x)
    for (std::size_t b = 0; b < m.atomic_props.size(); ++b)
      if (m.labels[x] >> b & 1u) labels[x].push_back(m.atomic_props[b]);
  j["labels"] = labels;
  const auto [e, f] = m.states.decompose(initial);
  j["initial_state"] = {{"expensive", m.states.expensive[e]},
                        {"free", m.states.free_vars[f]}};
  return j;
}

}  // namespace detail

inline ScenarioFile read_scenario(const std::string& path) {
  const json j = detail::read_json_file(path);
  ScenarioFile s;
  s.name = j.value("name", std::string{});
  if (j.contains("grid") == j.contains("mdp"))
    throw Error("scenario must contain exactly one of 'grid' or 'mdp'");
  if (j.contains("grid")) {
    s.grid = detail::grid_from_json(j.at("grid"));
    s.grid_kind = j.at("grid").value("kind", std::string{});
    if (s.grid_kind.empty())
      s.grid_kind = s.grid->moving_obstacle ? "moving_obstacle" : "static_uncertain";
  } else {
    s.explicit_mdp = detail::mdp_from_json(j.at("mdp"), &s.explicit_initial);
  }
  s.formula = j.at("formula").get<std::string>();
  s.horizon = j.at("horizon").get<int>();
  if (j.contains("beta")) s.beta = j.at("beta").get<double>();
  if (j.contains("target_prob")) s.target_prob = j.at("target_prob").get<double>();
  if (s.beta.has_value() == s.target_prob.has_value())
    throw Error("scenario must set exactly one of 'beta' or 'target_prob'");
  if (j.contains("solver")) {
    const json& c = j.at("solver");
    s.solver.memory = c.value("memory", 0);
    s.solver.max_iters = c.value("max_iters", 500);
    s.solver.tol_objective = c.value("tol_objective", 1e-8);
    s.solver.tol_policy = c.value("tol_policy", 1e-6);
    s.solver.seed = c.value("seed", 0u);
    s.solver.init_perturbation = c.value("init_perturbation", 0.0);
  }
  s.renormalize = j.value("renormalize", false);
  return s;
}

inline void write_scenario(const std::string& path, const ScenarioFile& s) {
  json j;
  if (!s.name.empty()) j["name"] = s.name;
  if (s.grid) {
    j["grid"] = detail::grid_to_json(*s.grid);
    j["grid"]["kind"] = s.grid_kind;
  } else if (s.explicit_mdp) {
    j["mdp"] = detail::mdp_to_json(*s.explicit_mdp, s.explicit_initial);
  }
  j["formula"] = s.formula;
  j["horizon"] = s.horizon;
  if (s.beta) j["beta"] = *s.beta;
  if (s.target_prob) j["target_prob"] = *s.target_prob;
  j["solver"] = {{"memory", s.solver.memory},
                 {"max_iters", s.solver.max_iters},
                 {"tol_objective", s.solver.tol_objective},
                 {"tol_policy", s.solver.tol_policy},
                 {"seed", s.solver.seed},
                 {"init_perturbation", s.solver.init_perturbation}};
  j["renormalize"] = s.renormalize;
  detail::write_json_file(path, j);
}

/// Builds the MDP, translates the formula, and forms the pruned product.
inline CompiledScenario compile_scenario(const ScenarioFile& s) {
  CompiledScenario c;
  if (s.grid) {
    GridModel gm;
    if (s.grid_kind == "moving_obstacle")
      gm = build_moving_obstacle(*s.grid);
    else if (s.grid_kind == "static_uncertain")
      gm = build_static_uncertain(*s.grid);
    else
      throw Error("unknown grid kind '" + s.grid_kind + "'");
    c.mdp = std::move(gm.mdp);
    c.initial_state = gm.initial_state;
    c.grid = s.grid;
  } else {
    c.mdp = *s.explicit_mdp;
    c.initial_state = s.explicit_initial;
    if (s.renormalize) renormalize_rows(c.mdp);
  }
  auto violations = validate(c.mdp);
  if (!violations.empty()) {
    std::string msg = "invalid MDP:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw Error(msg);
  }
  c.formula = parse_ltl(s.formula);
  c.dfa = to_dfa(c.formula, c.mdp.atomic_props);
  c.product = build_product(c.mdp, c.dfa, c.initial_state);
  c.solver = s.solver;
  c.solver.horizon = s.horizon;
  if (s.beta) c.solver.beta = *s.beta;
  return c;
}

struct PolicyFile {
  double beta = 0.0;
  int memory = 0;
  int horizon = 0;
  std::string solver_version = kSolverVersion;
  double objective = 0.0;
  double transfer_entropy_nats = 0.0;
  double transfer_entropy_bits = 0.0;
  double failure_probability = 0.0;
  bool converged = false;
  unsigned seed = 0;
  std::vector<std::string> state_names;
  std::vector<std::string> action_names;
  PolicyTable table;
};

inline PolicyFile make_policy_file(const ProductMdp& pm, const PolicyTable& q,
                                   const SolveReport& rep,
                                   const SolverConfig& cfg) {
  PolicyFile pf;
  pf.beta = cfg.beta;
  pf.memory = cfg.memory;
  pf.horizon = cfg.horizon;
  pf.objective = rep.objective;
  pf.transfer_entropy_nats = rep.transfer_entropy_nats;
  pf.transfer_entropy_bits = rep.transfer_entropy_bits;
  pf.failure_probability = rep.failure_probability;
  pf.converged = rep.converged;
  pf.seed = cfg.seed;
  pf.state_names = pm.state_names;
  pf.action_names = pm.action_names;
  pf.table = q;
  return pf;
}

inline void write_policy(const std::string& path, const PolicyFile& pf) {
  json j;
  j["metadata"] = {{"beta", pf.beta},
                   {"memory", pf.memory},
                   {"horizon", pf.horizon},
                   {"solver_version", pf.solver_version},
                   {"objective", pf.objective},
                   {"transfer_entropy_nats", pf.transfer_entropy_nats},
                   {"transfer_entropy_bits", pf.transfer_entropy_bits},
                   {"failure_probability", pf.failure_probability},
                   {"converged", pf.converged},
                   {"seed", pf.seed}};
  j["states"] = pf.state_names;
  j["actions"] = pf.action_names;
  j["policy"] = pf.table.q;  // [t][(v * W_t + w) * |U| + u]
  detail::write_json_file(path, j);
}

inline PolicyFile read_policy(const std::string& path) {
  const json j = detail::read_json_file(path);
  PolicyFile pf;
  const json& m = j.at("metadata");
  pf.beta = m.at("beta").get<double>();
  pf.memory = m.at("memory").get<int>();
  pf.horizon = m.at("horizon").get<int>();
  pf.solver_version = m.at("solver_version").get<std::string>();
  pf.objective = m.at("objective").get<double>();
  pf.transfer_entropy_nats = m.at("transfer_entropy_nats").get<double>();
  pf.transfer_entropy_bits = m.at("transfer_entropy_bits").get<double>();
  pf.failure_probability = m.at("failure_probability").get<double>();
  pf.converged = m.at("converged").get<bool>();
  pf.seed = m.at("seed").get<unsigned>();
  pf.state_names = j.at("states").get<std::vector<std::string>>();
  pf.action_names = j.at("actions").get<std::vector<std::string>>();
  pf.table.horizon = pf.horizon;
  pf.table.memory = pf.memory;
  pf.table.num_states = static_cast<int>(pf.state_names.size());
  pf.table.num_actions = static_cast<int>(pf.action_names.size());
  pf.table.q = j.at("policy").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(pf.table.q.size()) != pf.horizon)
    throw Error("policy table horizon mismatch");
  WindowSpace ws = pf.table.windows();
  for (int t = 0; t < pf.horizon; ++t) {
    const std::size_t expect = static_cast<std::size_t>(pf.table.num_states) *
                               ws.size_at(t) * pf.table.num_actions;
    if (pf.table.q[t].size() != expect)
      throw Error("policy table slice " + std::to_string(t) + " has wrong size");
    for (std::size_t i = 0; i < pf.table.q[t].size();
         i += pf.table.num_actions) {
      double s = 0.0;
      for (int u = 0; u < pf.table.num_actions; ++u) s += pf.table.q[t][i + u];
      if (std::abs(s - 1.0) > 1e-8)
        throw Error("policy row does not sum to 1 on re-read");
    }
  }
  return pf;
}

/// Agent-cell marginal P(agent at cell, time t) for grid scenarios.
struct MarginalRow {
  int t;
  int cell_x;  // column
  int cell_y;  // row
  double probability;
};

inline std::vector<MarginalRow> agent_marginals(const CompiledScenario& c,
                                                const PolicyTable& q,
                                                const std::vector<int>& times) {
  if (!c.grid) throw Error("agent marginals require a grid scenario");
  SolverConfig cfg = c.solver;
  cfg.memory = q.memory;
  cfg.horizon = q.horizon;
  ForwardResult fwd = forward_pass(c.product, q, cfg);
  WindowSpace ws{c.product.num_actions(), q.memory};
  std::vector<MarginalRow> rows;
  for (int t : times) {
    if (t < 0 || t > q.horizon) throw Error("requested time out of horizon");
    std::vector<double> cell_mass(c.grid->num_cells(), 0.0);
    const int W = ws.size_at(t);
    for (int v = 0; v < c.product.num_states(); ++v) {
      const int x = c.product.states[v].mdp_state;
      const int cell = c.mdp.states.decompose(x).second;
      for (int w = 0; w < W; ++w)
        cell_mass[cell] += fwd.mu[t][static_cast<std::size_t>(v) * W + w];
    }
    for (int cell = 0; cell < c.grid->num_cells(); ++cell)
      rows.push_back({t, c.grid->col(cell), c.grid->row(cell), cell_mass[cell]});
  }
  return rows;
}

struct SweepPoint {
  double beta;
  double te_bits;
  double failure_probability;
  double objective;
  bool converged;
};

/// Solves along a beta grid. Each point is tried from the cold uniform
/// start and warm-started from the previous point's policy; the lower
/// objective wins, except that a converged run beats a truncated one whose
/// objective is only negligibly lower (a truncated best-iterate is not a
/// fixed point, and its metrics carry truncation noise). Deterministic
/// given the scenario and seed.
inline std::vector<SweepPoint> sweep_betas(const ProductMdp& pm,
                                           SolverConfig base,
                                           const std::vector<double>& betas) {
  std::vector<SweepPoint> out;
  std::optional<PolicyTable> warm;
  for (double beta : betas) {
    SolverConfig cfg = base;
    cfg.beta = beta;
    auto [q, rep] = solve(pm, cfg);
    if (warm && beta > 0.0) {
      // Continuation from the previous beta's solution.
      auto [qw, wrep] = solve(pm, cfg, &*warm);
      bool prefer_warm;
      if (wrep.converged == rep.converged)
        prefer_warm = wrep.objective < rep.objective;
      else if (wrep.converged)
        prefer_warm = wrep.objective < rep.objective + 1e-7;
      else
        prefer_warm = wrep.objective < rep.objective - 1e-7;
      if (prefer_warm) {
        rep = std::move(wrep);
        q = std::move(qw);
      }
    }
    out.push_back({beta, rep.transfer_entropy_bits, rep.failure_probability,
                   rep.objective, rep.converged});
    warm = q;
  }
  return out;
}

}  // namespace temdp
