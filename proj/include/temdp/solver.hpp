#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "temdp/product.hpp"

namespace temdp {

/// Action-history windows of length n, truncated near t = 0. Windows are
/// base-|U| indices with the most recent action in the least significant
/// digit; only shift() consistency matters, the layout is never decoded.
struct WindowSpace {
  int num_actions = 1;
  int memory = 0;

  int length_at(int t) const { return std::min(memory, t); }

  int size_at(int t) const {
    int s = 1;
    for (int i = 0; i < length_at(t); ++i) s *= num_actions;
    return s;
  }

  /// Window index at t+1 after taking action u in window w at time t.
  int shift(int t, int w, int u) const {
    if (memory == 0) return 0;
    const int next_len = length_at(t + 1);
    int keep = 1;
    for (int i = 0; i < next_len - 1; ++i) keep *= num_actions;
    return (w % keep) * num_actions + u;
  }
};

/// Time-indexed randomized policy q_t(u | product state, action window).
struct PolicyTable {
  int horizon = 0;
  int memory = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<std::vector<double>> q;  // [t]: nv * W_t * nu

  WindowSpace windows() const { return {num_actions, memory}; }

  double& at(int t, int v, int w, int u) {
    return q[t][(static_cast<std::size_t>(v) * windows().size_at(t) + w) *
                    num_actions +
                u];
  }
  double at(int t, int v, int w, int u) const {
    return q[t][(static_cast<std::size_t>(v) * windows().size_at(t) + w) *
                    num_actions +
                u];
  }

  static PolicyTable uniform(const ProductMdp& pm, int T, int n) {
    PolicyTable p;
    p.horizon = T;
    p.memory = n;
    p.num_states = pm.num_states();
    p.num_actions = pm.num_actions();
    WindowSpace ws = p.windows();
    p.q.resize(T);
    for (int t = 0; t < T; ++t)
      p.q[t].assign(static_cast<std::size_t>(p.num_states) * ws.size_at(t) *
                        p.num_actions,
                    1.0 / p.num_actions);
    return p;
  }

  /// Uniform rows mixed with a seeded Dirichlet(1) sample; amount in [0,1].
  static PolicyTable perturbed_uniform(const ProductMdp& pm, int T, int n,
                                       unsigned seed, double amount) {
    PolicyTable p = uniform(pm, T, n);
    if (amount <= 0.0) return p;
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> exp_dist(1.0);
    for (int t = 0; t < T; ++t) {
      const int W = p.windows().size_at(t);
      for (int v = 0; v < p.num_states; ++v)
        for (int w = 0; w < W; ++w) {
          std::vector<double> g(p.num_actions);
          double s = 0.0;
          for (auto& x : g) s += (x = exp_dist(rng));
          for (int u = 0; u < p.num_actions; ++u)
            p.at(t, v, w, u) =
                (1.0 - amount) / p.num_actions + amount * g[u] / s;
        }
    }
    return p;
  }

  /// Deterministic policy from a value-iteration greedy table
  /// (greedy[k][v] = action with k steps remaining).
  static PolicyTable from_greedy(const ProductMdp& pm, int T, int n,
                                 const ReachResult& vi) {
    PolicyTable p = uniform(pm, T, n);
    for (int t = 0; t < T; ++t) {
      const int W = p.windows().size_at(t);
      for (int v = 0; v < p.num_states; ++v) {
        const int u_star = vi.greedy[T - t - 1][v];
        for (int w = 0; w < W; ++w)
          for (int u = 0; u < p.num_actions; ++u)
            p.at(t, v, w, u) = u == u_star ? 1.0 : 0.0;
      }
    }
    return p;
  }
};

struct SolverConfig {
  double beta = 1.0;
  int horizon = 1;  // T
  int memory = 0;   // n, action-history length
  int max_iters = 500;
  double tol_objective = 1e-8;
  double tol_policy = 1e-6;
  unsigned seed = 0;
  double init_perturbation = 0.0;

  void check() const {
    if (beta < 0.0) throw Error("beta must be non-negative");
    if (horizon < 1) throw Error("horizon must be at least 1");
    if (memory < 0) throw Error("memory must be non-negative");
  }
};

/// Forward-in-time quantities: joint state-window distribution mu_t and
/// the marginal policy nu_t over free contexts. Zero-mass contexts get
/// uniform nu rows; transfer_entropy skips them via the 0 log 0 rule.
struct ForwardResult {
  std::vector<std::vector<double>> mu;            // [t]: nv * W_t, t = 0..T
  std::vector<std::vector<double>> nu;            // [t]: nf * W_t * nu
  std::vector<std::vector<double>> context_mass;  // [t]: nf * W_t
};

inline ForwardResult forward_pass(const ProductMdp& pm, const PolicyTable& q,
                                  const SolverConfig& cfg) {
  const int T = cfg.horizon;
  const int nv = pm.num_states();
  const int nu_actions = pm.num_actions();
  const int nf = pm.num_free_contexts;
  WindowSpace ws{nu_actions, cfg.memory};

  ForwardResult r;
  r.mu.resize(T + 1);
  r.nu.resize(T);
  r.context_mass.resize(T);
  r.mu[0].assign(static_cast<std::size_t>(nv) * ws.size_at(0), 0.0);
  r.mu[0][pm.initial] = 1.0;

  for (int t = 0; t < T; ++t) {
    const int W = ws.size_at(t);
    const int Wn = ws.size_at(t + 1);
    auto mu_at = [&](int v, int w) -> double {
      return r.mu[t][static_cast<std::size_t>(v) * W + w];
    };
    r.context_mass[t].assign(static_cast<std::size_t>(nf) * W, 0.0);
    for (int v = 0; v < nv; ++v)
      for (int w = 0; w < W; ++w)
        r.context_mass[t][static_cast<std::size_t>(pm.free_of[v]) * W + w] +=
            mu_at(v, w);

    r.nu[t].assign(static_cast<std::size_t>(nf) * W * nu_actions, 0.0);
    for (int v = 0; v < nv; ++v)
      for (int w = 0; w < W; ++w) {
        const double m = mu_at(v, w);
        if (m == 0.0) continue;
        const std::size_t base =
            (static_cast<std::size_t>(pm.free_of[v]) * W + w) * nu_actions;
        for (int u = 0; u < nu_actions; ++u)
          r.nu[t][base + u] += m * q.at(t, v, w, u);
      }
    for (int f = 0; f < nf; ++f)
      for (int w = 0; w < W; ++w) {
        const double m = r.context_mass[t][static_cast<std::size_t>(f) * W + w];
        const std::size_t base =
            (static_cast<std::size_t>(f) * W + w) * nu_actions;
        if (m > 0.0) {
          for (int u = 0; u < nu_actions; ++u) r.nu[t][base + u] /= m;
        } else {
          for (int u = 0; u < nu_actions; ++u)
            r.nu[t][base + u] = 1.0 / nu_actions;
        }
      }

    r.mu[t + 1].assign(static_cast<std::size_t>(nv) * Wn, 0.0);
    for (int v = 0; v < nv; ++v)
      for (int w = 0; w < W; ++w) {
        const double m = mu_at(v, w);
        if (m == 0.0) continue;
        for (int u = 0; u < nu_actions; ++u) {
          const double wgt = m * q.at(t, v, w, u);
          if (wgt == 0.0) continue;
          const int wn = ws.shift(t, w, u);
          for (int vn = 0; vn < nv; ++vn) {
            const double p = pm.delta(v, u, vn);
            if (p != 0.0)
              r.mu[t + 1][static_cast<std::size_t>(vn) * Wn + wn] += wgt * p;
          }
        }
      }
  }
  return r;
}

/// Causally conditioned transfer entropy of the policy, in nats.
inline double transfer_entropy(const ProductMdp& pm, const PolicyTable& q,
                               const ForwardResult& fwd,
                               const SolverConfig& cfg) {
  const int T = cfg.horizon;
  const int nv = pm.num_states();
  const int nu_actions = pm.num_actions();
  WindowSpace ws{nu_actions, cfg.memory};
  double te = 0.0;
  for (int t = 0; t < T; ++t) {
    const int W = ws.size_at(t);
    for (int v = 0; v < nv; ++v)
      for (int w = 0; w < W; ++w) {
        const double m = fwd.mu[t][static_cast<std::size_t>(v) * W + w];
        if (m == 0.0) continue;
        const std::size_t base =
            (static_cast<std::size_t>(pm.free_of[v]) * W + w) * nu_actions;
        for (int u = 0; u < nu_actions; ++u) {
          const double qq = q.at(t, v, w, u);
          if (qq == 0.0) continue;
          te += m * qq * std::log(qq / fwd.nu[t][base + u]);
        }
      }
  }
  return te;
}

/// Expected accumulated reach-once cost; equals minus the probability of
/// reaching the accepting set within T steps under q.
inline double expected_cost(const ProductMdp& pm, const PolicyTable& q,
                            const ForwardResult& fwd,
                            const SolverConfig& cfg) {
  const int T = cfg.horizon;
  const int nv = pm.num_states();
  const int nu_actions = pm.num_actions();
  WindowSpace ws{nu_actions, cfg.memory};
  // Entry probability into the accepting set per (v, u).
  std::vector<double> enter(static_cast<std::size_t>(nv) * nu_actions, 0.0);
  for (int v = 0; v < nv; ++v) {
    if (pm.accepting[v]) continue;
    for (int u = 0; u < nu_actions; ++u) {
      double s = 0.0;
      for (int vn = 0; vn < nv; ++vn)
        if (pm.accepting[vn]) s += pm.delta(v, u, vn);
      enter[static_cast<std::size_t>(v) * nu_actions + u] = s;
    }
  }
  double cost = 0.0;
  for (int t = 0; t < T; ++t) {
    const int W = ws.size_at(t);
    for (int v = 0; v < nv; ++v) {
      if (pm.accepting[v]) continue;
      for (int w = 0; w < W; ++w) {
        const double m = fwd.mu[t][static_cast<std::size_t>(v) * W + w];
        if (m == 0.0) continue;
        for (int u = 0; u < nu_actions; ++u)
          cost -= m * q.at(t, v, w, u) *
                  enter[static_cast<std::size_t>(v) * nu_actions + u];
      }
    }
  }
  return cost;
}

/// Backward-in-time quantities of the optimality system. beta is folded
/// in by dividing the stage cost inside rho; everything is kept in log
/// space, with log-sum-exp for the partition function.
struct BackwardResult {
  PolicyTable q;
  std::vector<std::vector<double>> log_phi;  // [t]: nv * W_t, t = 0..T
  std::vector<std::vector<double>> rho;      // [t]: nv * W_t * nu
};

inline BackwardResult backward_pass(const ProductMdp& pm,
                                    const ForwardResult& fwd,
                                    const SolverConfig& cfg) {
  if (cfg.beta <= 0.0)
    throw Error("backward_pass requires beta > 0 (beta = 0 is the value-iteration path)");
  const int T = cfg.horizon;
  const int nv = pm.num_states();
  const int nu_actions = pm.num_actions();
  const double inv_beta = 1.0 / cfg.beta;
  WindowSpace ws{nu_actions, cfg.memory};

  BackwardResult r;
  r.q = PolicyTable::uniform(pm, T, cfg.memory);
  r.log_phi.resize(T + 1);
  r.rho.resize(T);
  r.log_phi[T].assign(static_cast<std::size_t>(nv) * ws.size_at(T), 0.0);

  for (int t = T - 1; t >= 0; --t) {
    const int W = ws.size_at(t);
    const int Wn = ws.size_at(t + 1);
    r.rho[t].assign(static_cast<std::size_t>(nv) * W * nu_actions, 0.0);
    r.log_phi[t].assign(static_cast<std::size_t>(nv) * W, 0.0);
    for (int v = 0; v < nv; ++v)
      for (int w = 0; w < W; ++w) {
        const std::size_t rho_base =
            (static_cast<std::size_t>(v) * W + w) * nu_actions;
        const std::size_t nu_base =
            (static_cast<std::size_t>(pm.free_of[v]) * W + w) * nu_actions;
        double max_arg = -std::numeric_limits<double>::infinity();
        std::vector<double> args(nu_actions);
        for (int u = 0; u < nu_actions; ++u) {
          const int wn = ws.shift(t, w, u);
          double rho = 0.0;
          for (int vn = 0; vn < nv; ++vn) {
            const double p = pm.delta(v, u, vn);
            if (p == 0.0) continue;
            rho += p * (pm.cost(v, u, vn) * inv_beta -
                        r.log_phi[t + 1][static_cast<std::size_t>(vn) * Wn + wn]);
          }
          r.rho[t][rho_base + u] = rho;
          const double nu_val = fwd.nu[t][nu_base + u];
          args[u] = nu_val > 0.0
                        ? std::log(nu_val) - rho
                        : -std::numeric_limits<double>::infinity();
          max_arg = std::max(max_arg, args[u]);
        }
        // log phi = logsumexp_u(log nu - rho)
        double acc = 0.0;
        for (int u = 0; u < nu_actions; ++u)
          if (std::isfinite(args[u])) acc += std::exp(args[u] - max_arg);
        const double log_phi = max_arg + std::log(acc);
        r.log_phi[t][static_cast<std::size_t>(v) * W + w] = log_phi;
        for (int u = 0; u < nu_actions; ++u)
          r.q.at(t, v, w, u) =
              std::isfinite(args[u]) ? std::exp(args[u] - log_phi) : 0.0;
      }
    // Off-support contexts are unconstrained by the optimality system;
    // keep them uniform.
    for (int v = 0; v < nv; ++v)
      for (int w = 0; w < W; ++w)
        if (fwd.context_mass[t][static_cast<std::size_t>(pm.free_of[v]) * W +
                                w] == 0.0)
          for (int u = 0; u < nu_actions; ++u)
            r.q.at(t, v, w, u) = 1.0 / nu_actions;
  }
  return r;
}

struct SolveReport {
  std::vector<double> objective_trace;
  double objective = 0.0;
  double transfer_entropy_nats = 0.0;
  double transfer_entropy_bits = 0.0;
  double failure_probability = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double sup_diff(const PolicyTable& a, const PolicyTable& b) {
  double d = 0.0;
  for (std::size_t t = 0; t < a.q.size(); ++t)
    for (std::size_t i = 0; i < a.q[t].size(); ++i)
      d = std::max(d, std::abs(a.q[t][i] - b.q[t][i]));
  return d;
}

inline void fill_report(const ProductMdp& pm, const PolicyTable& q,
                        const ForwardResult& fwd, const SolverConfig& cfg,
                        SolveReport& rep) {
  const double cost = expected_cost(pm, q, fwd, cfg);
  const double te = transfer_entropy(pm, q, fwd, cfg);
  rep.objective = cost + cfg.beta * te;
  rep.transfer_entropy_nats = te;
  rep.transfer_entropy_bits = te / std::log(2.0);
  rep.failure_probability = 1.0 + cost;
}

}  // namespace detail

/// Alternating forward-backward minimization of
/// expected_cost + beta * transfer_entropy. beta = 0 short-circuits to
/// the value-iteration optimum with a deterministic policy.
inline std::pair<PolicyTable, SolveReport> solve(
    const ProductMdp& pm, const SolverConfig& cfg,
    const PolicyTable* initial_guess = nullptr) {
  cfg.check();
  SolveReport rep;
  if (cfg.beta == 0.0) {
    ReachResult vi = value_iteration_reach(pm, cfg.horizon);
    PolicyTable q = PolicyTable::from_greedy(pm, cfg.horizon, cfg.memory, vi);
    ForwardResult fwd = forward_pass(pm, q, cfg);
    detail::fill_report(pm, q, fwd, cfg, rep);
    rep.objective = expected_cost(pm, q, fwd, cfg);  // no information term
    rep.objective_trace = {rep.objective};
    rep.converged = true;
    rep.iterations = 0;
    return {std::move(q), rep};
  }

  PolicyTable q =
      initial_guess
          ? *initial_guess
          : (cfg.init_perturbation > 0.0
                 ? PolicyTable::perturbed_uniform(pm, cfg.horizon, cfg.memory,
                                                  cfg.seed,
                                                  cfg.init_perturbation)
                 : PolicyTable::uniform(pm, cfg.horizon, cfg.memory));

  double prev_obj = std::numeric_limits<double>::infinity();
  double best_obj = std::numeric_limits<double>::infinity();
  PolicyTable best_q = q;
  SolveReport best_rep;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    ForwardResult fwd = forward_pass(pm, q, cfg);
    SolveReport cur;
    detail::fill_report(pm, q, fwd, cfg, cur);
    rep.objective_trace.push_back(cur.objective);
    rep.iterations = iter;
    if (cur.objective < best_obj) {
      best_obj = cur.objective;
      best_q = q;
      best_rep = cur;
    }
    BackwardResult bwd = backward_pass(pm, fwd, cfg);
    const double policy_delta = detail::sup_diff(bwd.q, q);
    const bool obj_ok = std::abs(cur.objective - prev_obj) < cfg.tol_objective;
    if (obj_ok && policy_delta < cfg.tol_policy) {
      cur.objective_trace = rep.objective_trace;
      cur.iterations = iter;
      cur.converged = true;
      return {std::move(q), std::move(cur)};
    }
    prev_obj = cur.objective;
    q = std::move(bwd.q);
  }
  best_rep.objective_trace = rep.objective_trace;
  best_rep.iterations = rep.iterations;
  best_rep.converged = false;
  return {std::move(best_q), std::move(best_rep)};
}

/// Sup-norm residual of the coupled optimality system at q, restricted to
/// contexts with positive forward mass: one extra forward+backward pass,
/// measuring how much q moves.
inline double fixed_point_residual(const ProductMdp& pm, const PolicyTable& q,
                                   const SolverConfig& cfg) {
  ForwardResult fwd = forward_pass(pm, q, cfg);
  BackwardResult bwd = backward_pass(pm, fwd, cfg);
  WindowSpace ws{pm.num_actions(), cfg.memory};
  double res = 0.0;
  for (int t = 0; t < cfg.horizon; ++t) {
    const int W = ws.size_at(t);
    for (int v = 0; v < pm.num_states(); ++v)
      for (int w = 0; w < W; ++w) {
        if (fwd.mu[t][static_cast<std::size_t>(v) * W + w] <= 0.0) continue;
        for (int u = 0; u < pm.num_actions(); ++u)
          res = std::max(res,
                         std::abs(bwd.q.at(t, v, w, u) - q.at(t, v, w, u)));
      }
  }
  return res;
}

struct InfeasibleError : Error {
  double h_max;
  InfeasibleError(double hm, double D)
      : Error("satisfaction threshold D = " + std::to_string(D) +
              " is infeasible: best attainable probability is h_max = " +
              std::to_string(hm)),
        h_max(hm) {}
};

struct ConstrainedResult {
  PolicyTable policy;
  double beta_star = 0.0;
  SolveReport report;
};

/// Bisection on log beta for the constrained problem: find the largest
/// beta whose solved policy still satisfies 1 - h <= 1 - D (+slack).
inline ConstrainedResult solve_constrained(const ProductMdp& pm, double D,
                                           SolverConfig base,
                                           double beta_lo = 1e-6,
                                           double beta_hi = 1e6,
                                           int bisect_iters = 25,
                                           double feasibility_slack = 1e-6) {
  if (D < 0.0 || D > 1.0) throw Error("D must lie in [0, 1]");
  base.check();
  ReachResult vi = value_iteration_reach(pm, base.horizon);
  const double h_max = vi.h[base.horizon][pm.initial];
  if (D > h_max + 1e-12) throw InfeasibleError(h_max, D);

  auto feasible = [&](const SolveReport& rep) {
    return rep.failure_probability <= 1.0 - D + feasibility_slack;
  };
  // Each attempt also continues from the previous attempt's policy: at
  // large beta the per-iteration tilt exp(c/beta) is tiny and a cold start
  // would crawl, while a warm near-fixed-point start settles immediately.
  // Feasibility first, then the lower objective, decides which run wins.
  PolicyTable warm;
  bool have_warm = false;
  auto attempt = [&](double beta) {
    SolverConfig cfg = base;
    cfg.beta = beta;
    auto result = solve(pm, cfg);
    if (have_warm) {
      auto continued = solve(pm, cfg, &warm);
      const bool cf = feasible(result.second);
      const bool wf = feasible(continued.second);
      if ((wf && !cf) ||
          (wf == cf && continued.second.objective < result.second.objective))
        result = std::move(continued);
    }
    warm = result.first;
    have_warm = true;
    return result;
  };

  auto [q_hi, rep_hi] = attempt(beta_hi);
  if (feasible(rep_hi)) return {std::move(q_hi), beta_hi, std::move(rep_hi)};

  auto [q_lo, rep_lo] = attempt(beta_lo);
  if (!feasible(rep_lo)) {
    // Even a near-zero information price misses the threshold; fall back
    // to the exact beta = 0 reachability policy.
    SolverConfig cfg = base;
    cfg.beta = 0.0;
    auto [q0, rep0] = solve(pm, cfg);
    return {std::move(q0), 0.0, std::move(rep0)};
  }

  double lo = std::log(beta_lo), hi = std::log(beta_hi);
  PolicyTable best_q = std::move(q_lo);
  SolveReport best_rep = std::move(rep_lo);
  double best_beta = beta_lo;
  for (int i = 0; i < bisect_iters; ++i) {
    const double mid = std::exp(0.5 * (lo + hi));
    auto [qm, repm] = attempt(mid);
    if (feasible(repm)) {
      lo = std::log(mid);
      best_q = std::move(qm);
      best_rep = std::move(repm);
      best_beta = mid;
    } else {
      hi = std::log(mid);
    }
  }
  return {std::move(best_q), best_beta, std::move(best_rep)};
}

/// Single-stage Gibbs minimizer: for fixed state marginal and action
/// prior per free context, the minimizer of E[c] + KL(q || nu) is
/// q(u|x) proportional to nu(u) exp(-c(x,u)).
/// mu: [ne*nf] joint over (expensive, free); nu: [nf][u]; c: [ne*nf][u].
inline std::vector<std::vector<double>> static_gibbs(
    const std::vector<double>& mu, const std::vector<std::vector<double>>& nu,
    const std::vector<std::vector<double>>& c, int num_free) {
  const std::size_t nx = c.size();
  if (mu.size() != nx || nx % num_free != 0)
    throw Error("static_gibbs: inconsistent shapes");
  std::vector<std::vector<double>> q(nx);
  for (std::size_t x = 0; x < nx; ++x) {
    const int f = static_cast<int>(x % num_free);
    const std::size_t na = nu[f].size();
    if (c[x].size() != na) throw Error("static_gibbs: inconsistent shapes");
    q[x].resize(na);
    double max_arg = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < na; ++u) {
      q[x][u] = nu[f][u] > 0.0
                    ? std::log(nu[f][u]) - c[x][u]
                    : -std::numeric_limits<double>::infinity();
      max_arg = std::max(max_arg, q[x][u]);
    }
    double z = 0.0;
    for (std::size_t u = 0; u < na; ++u)
      if (std::isfinite(q[x][u])) z += std::exp(q[x][u] - max_arg);
    const double log_z = max_arg + std::log(z);
    for (std::size_t u = 0; u < na; ++u)
      q[x][u] = std::isfinite(q[x][u]) ? std::exp(q[x][u] - log_z) : 0.0;
  }
  return q;
}

}  // namespace temdp
