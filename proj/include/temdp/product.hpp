#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "temdp/dfa.hpp"
#include "temdp/mdp.hpp"

namespace temdp {

/// Synchronous product of a labeled MDP and a specification DFA, pruned
/// to the states reachable from (x0, s_I). The expensive factor is the
/// MDP's expensive component; the free factor is (free MDP component,
/// automaton state), compacted over the pruned state set.
///
/// The reach-once stage cost is -1 exactly on transitions from outside
/// the accepting set into it, 0 otherwise; accepting absorption of the
/// completed DFA makes first entry well-defined without history flags.
struct ProductMdp {
  struct State {
    int mdp_state;
    int dfa_state;
  };

  std::vector<State> states;
  int initial = 0;
  std::vector<std::string> action_names;
  std::vector<double> kernel;  // [v][u][v'] on the pruned state set
  std::vector<bool> accepting;  // acc_phi label

  std::vector<int> expensive_of;  // per v
  std::vector<int> free_of;       // per v, compact (free component, s) id
  int num_expensive = 0;
  int num_free_contexts = 0;
  std::vector<std::string> state_names;
  std::vector<std::string> free_context_names;

  int num_states() const { return static_cast<int>(states.size()); }
  int num_actions() const { return static_cast<int>(action_names.size()); }

  double delta(int v, int u, int vn) const {
    return kernel[(static_cast<std::size_t>(v) * num_actions() + u) *
                      num_states() +
                  vn];
  }
  double& delta(int v, int u, int vn) {
    return kernel[(static_cast<std::size_t>(v) * num_actions() + u) *
                      num_states() +
                  vn];
  }

  double cost(int v, int /*u*/, int vn) const {
    return (!accepting[v] && accepting[vn]) ? -1.0 : 0.0;
  }
};

/// Builds the pruned product. The DFA starts in s_I and consumes only
/// successor labels: delta applies to L(x_{t+1}), never to L(x0).
inline ProductMdp build_product(const LabeledMdp& mdp, const Dfa& dfa, int x0) {
  if (x0 < 0 || x0 >= mdp.num_states())
    throw Error("initial state index " + std::to_string(x0) +
                " out of range");
  if (dfa.aps != mdp.atomic_props)
    throw Error("atomic proposition sets of MDP and DFA differ");

  const int nu = mdp.num_actions();
  std::map<std::pair<int, int>, int> id;
  std::vector<ProductMdp::State> states;
  auto intern = [&](int x, int s) {
    auto [it, inserted] = id.emplace(std::make_pair(x, s),
                                     static_cast<int>(states.size()));
    if (inserted) states.push_back({x, s});
    return it->second;
  };

  const int v0 = intern(x0, dfa.initial);
  std::queue<int> work;
  work.push(v0);
  std::vector<std::vector<std::vector<std::pair<int, double>>>> rows;  // [v][u]
  while (!work.empty()) {
    const int v = work.front();
    work.pop();
    if (rows.size() < states.size()) rows.resize(states.size());
    if (!rows[v].empty()) continue;
    rows[v].resize(nu);
    const auto [x, s] = states[v];
    for (int u = 0; u < nu; ++u) {
      for (int xn = 0; xn < mdp.num_states(); ++xn) {
        const double p = mdp.p(x, u, xn);
        if (p == 0.0) continue;
        const int sn = dfa.next(s, mdp.label(xn));
        const int vn = intern(xn, sn);
        if (rows.size() < states.size()) rows.resize(states.size());
        rows[v][u].push_back({vn, p});
        if (rows[vn].empty()) work.push(vn);
      }
    }
  }

  ProductMdp pm;
  pm.states = states;
  pm.initial = v0;
  pm.action_names = mdp.actions;
  const int nv = pm.num_states();
  pm.kernel.assign(static_cast<std::size_t>(nv) * nu * nv, 0.0);
  pm.accepting.assign(nv, false);
  pm.expensive_of.resize(nv);
  pm.free_of.resize(nv);
  pm.state_names.resize(nv);

  std::map<std::pair<int, int>, int> free_id;  // (mdp free comp, dfa state)
  for (int v = 0; v < nv; ++v) {
    const auto [x, s] = states[v];
    pm.accepting[v] = dfa.accepting[s];
    const auto [e, f] = mdp.states.decompose(x);
    pm.expensive_of[v] = e;
    auto [it, inserted] = free_id.emplace(std::make_pair(f, s),
                                          static_cast<int>(free_id.size()));
    pm.free_of[v] = it->second;
    if (inserted)
      pm.free_context_names.push_back(mdp.states.free_vars[f] + "@s" +
                                      std::to_string(s));
    pm.state_names[v] = mdp.states.name(x) + "@s" + std::to_string(s);
    for (int u = 0; u < nu; ++u)
      for (const auto& [vn, p] : rows[v][u]) pm.delta(v, u, vn) += p;
  }
  pm.num_expensive = mdp.states.num_expensive();
  pm.num_free_contexts = static_cast<int>(free_id.size());
  return pm;
}

/// Finite-horizon reachability by value iteration.
/// h[k][v] = probability of reaching the accepting set from v within k
/// steps; greedy[k][v] = maximizing action with k steps remaining (k >= 1),
/// ties broken by lowest action index.
struct ReachResult {
  std::vector<std::vector<double>> h;   // [k][v], k = 0..T
  std::vector<std::vector<int>> greedy;  // [k][v], k = 1..T (index k-1)
};

inline ReachResult value_iteration_reach(const ProductMdp& pm, int T) {
  if (T < 0) throw Error("horizon must be non-negative");
  const int nv = pm.num_states();
  const int nu = pm.num_actions();
  ReachResult r;
  r.h.resize(T + 1, std::vector<double>(nv, 0.0));
  r.greedy.resize(T, std::vector<int>(nv, 0));
  for (int v = 0; v < nv; ++v) r.h[0][v] = pm.accepting[v] ? 1.0 : 0.0;
  for (int k = 1; k <= T; ++k) {
    for (int v = 0; v < nv; ++v) {
      if (pm.accepting[v]) {
        r.h[k][v] = 1.0;
        continue;
      }
      double best = -1.0;
      int best_u = 0;
      for (int u = 0; u < nu; ++u) {
        double val = 0.0;
        for (int vn = 0; vn < nv; ++vn) {
          const double p = pm.delta(v, u, vn);
          if (p != 0.0) val += p * r.h[k - 1][vn];
        }
        if (val > best) {
          best = val;
          best_u = u;
        }
      }
      r.h[k][v] = best;
      r.greedy[k - 1][v] = best_u;
    }
  }
  return r;
}

}  // namespace temdp
