// te-mdp: policy synthesis for labeled MDPs under co-safe LTL missions
// with a transfer-entropy information cost.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "temdp/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitInfeasible = 4;

struct CommonOpts {
  std::string scenario_path;
  std::optional<double> beta;
  std::optional<double> target_prob;
  std::optional<int> memory;
  std::optional<unsigned> seed;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--scenario", o.scenario_path, "Scenario file (JSON)")
      ->required();
  cmd->add_option("--beta", o.beta, "Override the information weight beta");
  cmd->add_option("--target-prob", o.target_prob,
                  "Override the satisfaction threshold D");
  cmd->add_option("--memory", o.memory, "Override the action-history length n");
  cmd->add_option("--seed", o.seed, "Override the initialization seed");
}

temdp::ScenarioFile load_scenario(const CommonOpts& o) {
  temdp::ScenarioFile s = temdp::read_scenario(o.scenario_path);
  if (o.beta) {
    s.beta = o.beta;
    s.target_prob.reset();
  }
  if (o.target_prob) {
    s.target_prob = o.target_prob;
    s.beta.reset();
  }
  if (o.memory) s.solver.memory = *o.memory;
  if (o.seed) s.solver.seed = *o.seed;
  return s;
}

std::vector<double> log_spaced(double lo, double hi, int points) {
  std::vector<double> out;
  if (points == 1) return {lo};
  for (int i = 0; i < points; ++i)
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
  return out;
}

void check_policy_matches(const temdp::CompiledScenario& c,
                          const temdp::PolicyFile& pf) {
  if (pf.state_names != c.product.state_names ||
      pf.action_names != c.product.action_names)
    throw temdp::Error("policy file does not match the scenario's product");
}

int cmd_compile(const CommonOpts& o, const std::string& out_path) {
  temdp::ScenarioFile s = load_scenario(o);
  temdp::CompiledScenario c = temdp::compile_scenario(s);
  std::printf("mdp states        |X| = %d\n", c.mdp.num_states());
  std::printf("  expensive       |Xe| = %d\n", c.mdp.states.num_expensive());
  std::printf("  free            |Xf| = %d\n", c.mdp.states.num_free());
  std::printf("actions           |U| = %d\n", c.mdp.num_actions());
  std::printf("automaton states  |S| = %d\n", c.dfa.num_states);
  std::printf("product states    |V| = %d (after pruning)\n",
              c.product.num_states());
  if (!out_path.empty()) {
    temdp::json j = {{"num_mdp_states", c.mdp.num_states()},
                     {"num_expensive_states", c.mdp.states.num_expensive()},
                     {"num_free_states", c.mdp.states.num_free()},
                     {"num_actions", c.mdp.num_actions()},
                     {"num_dfa_states", c.dfa.num_states},
                     {"num_product_states", c.product.num_states()}};
    temdp::detail::write_json_file(out_path, j);
  }
  return kExitOk;
}

int cmd_solve(const CommonOpts& o, const std::string& out_path) {
  temdp::ScenarioFile s = load_scenario(o);
  temdp::CompiledScenario c = temdp::compile_scenario(s);
  temdp::PolicyTable q;
  temdp::SolveReport rep;
  temdp::SolverConfig cfg = c.solver;
  if (s.target_prob) {
    temdp::ConstrainedResult r =
        temdp::solve_constrained(c.product, *s.target_prob, cfg);
    q = std::move(r.policy);
    rep = std::move(r.report);
    cfg.beta = r.beta_star;
    std::printf("beta* = %.9g\n", r.beta_star);
  } else {
    std::tie(q, rep) = temdp::solve(c.product, cfg);
  }
  std::printf("objective           = %.12g\n", rep.objective);
  std::printf("transfer entropy    = %.12g nats (%.12g bits)\n",
              rep.transfer_entropy_nats, rep.transfer_entropy_bits);
  std::printf("failure probability = %.12g\n", rep.failure_probability);
  std::printf("iterations          = %d (%s)\n", rep.iterations,
              rep.converged ? "converged" : "max iterations reached");
  if (!out_path.empty())
    temdp::write_policy(out_path, temdp::make_policy_file(c.product, q, rep, cfg));
  return rep.converged ? kExitOk : kExitNotConverged;
}

int cmd_sweep(const CommonOpts& o, std::string betas_arg, double beta_min,
              double beta_max, int points, const std::string& out_path) {
  temdp::ScenarioFile s = load_scenario(o);
  temdp::CompiledScenario c = temdp::compile_scenario(s);
  std::vector<double> betas;
  if (!betas_arg.empty()) {
    std::stringstream ss(betas_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) betas.push_back(std::stod(tok));
  } else {
    betas = log_spaced(beta_min, beta_max, points);
  }
  auto pts = temdp::sweep_betas(c.product, c.solver, betas);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw temdp::Error("cannot open output file: " + out_path);
    os = &file;
  }
  *os << "beta,te_bits,failure_probability\n";
  char buf[128];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.beta, p.te_bits,
                  p.failure_probability);
    *os << buf;
  }
  return kExitOk;
}

int cmd_export_marginals(const CommonOpts& o, const std::string& policy_path,
                         const std::string& times_arg,
                         const std::string& out_path) {
  temdp::ScenarioFile s = load_scenario(o);
  temdp::CompiledScenario c = temdp::compile_scenario(s);
  temdp::PolicyFile pf = temdp::read_policy(policy_path);
  check_policy_matches(c, pf);
  std::vector<int> times;
  std::stringstream ss(times_arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) times.push_back(std::stoi(tok));
  auto rows = temdp::agent_marginals(c, pf.table, times);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw temdp::Error("cannot open output file: " + out_path);
    os = &file;
  }
  *os << "t,cell_x,cell_y,probability\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g\n", r.t, r.cell_x, r.cell_y,
                  r.probability);
    *os << buf;
  }
  return kExitOk;
}

int cmd_eval(const CommonOpts& o, const std::string& policy_path) {
  temdp::ScenarioFile s = load_scenario(o);
  temdp::CompiledScenario c = temdp::compile_scenario(s);
  temdp::PolicyFile pf = temdp::read_policy(policy_path);
  check_policy_matches(c, pf);
  temdp::SolverConfig cfg = c.solver;
  cfg.horizon = pf.horizon;
  cfg.memory = pf.memory;
  cfg.beta = pf.beta;
  temdp::ForwardResult fwd = temdp::forward_pass(c.product, pf.table, cfg);
  const double cost = temdp::expected_cost(c.product, pf.table, fwd, cfg);
  const double te = temdp::transfer_entropy(c.product, pf.table, fwd, cfg);
  temdp::json j = {{"objective", cost + cfg.beta * te},
                   {"transfer_entropy_nats", te},
                   {"transfer_entropy_bits", te / std::log(2.0)},
                   {"failure_probability", 1.0 + cost}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"te-mdp: minimal-information policy synthesis for labeled MDPs "
               "under co-safe LTL specifications"};
  app.require_subcommand(1);

  CommonOpts compile_opts, solve_opts, sweep_opts, marg_opts, eval_opts;
  std::string compile_out, solve_out, sweep_out, marg_out;
  std::string sweep_betas, marg_policy, marg_times = "0", eval_policy;
  double sweep_min = 0.1, sweep_max = 100.0;
  int sweep_points = 10;

  CLI::App* compile = app.add_subcommand("compile", "Build and summarize the product MDP");
  add_common(compile, compile_opts);
  compile->add_option("--out", compile_out, "Write a JSON summary");

  CLI::App* solve = app.add_subcommand("solve", "Synthesize a policy");
  add_common(solve, solve_opts);
  solve->add_option("--out", solve_out, "Write the policy file (JSON)");

  CLI::App* sweep = app.add_subcommand("sweep", "Trade-off curve over beta");
  add_common(sweep, sweep_opts);
  sweep->add_option("--betas", sweep_betas, "Comma-separated beta values");
  sweep->add_option("--beta-min", sweep_min, "Smallest beta (log grid)");
  sweep->add_option("--beta-max", sweep_max, "Largest beta (log grid)");
  sweep->add_option("--points", sweep_points, "Number of log-spaced points");
  sweep->add_option("--out", sweep_out, "Write CSV here instead of stdout");

  CLI::App* marg = app.add_subcommand("export-marginals",
                                      "Agent-position marginals per time step");
  add_common(marg, marg_opts);
  marg->add_option("--policy", marg_policy, "Policy file")->required();
  marg->add_option("--times", marg_times, "Comma-separated time steps");
  marg->add_option("--out", marg_out, "Write CSV here instead of stdout");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a stored policy");
  add_common(eval, eval_opts);
  eval->add_option("--policy", eval_policy, "Policy file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (compile->parsed()) return cmd_compile(compile_opts, compile_out);
    if (solve->parsed()) return cmd_solve(solve_opts, solve_out);
    if (sweep->parsed())
      return cmd_sweep(sweep_opts, sweep_betas, sweep_min, sweep_max,
                       sweep_points, sweep_out);
    if (marg->parsed())
      return cmd_export_marginals(marg_opts, marg_policy, marg_times, marg_out);
    if (eval->parsed()) return cmd_eval(eval_opts, eval_policy);
  } catch (const temdp::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const temdp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitOk;
}
