#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace temdp {

inline constexpr double kStochasticTol = 1e-12;

/// Base error type for everything in this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Factored state space: full state = (expensive, free) pair.
/// Full indices are expensive-major: x = e * num_free() + f.
struct StateSpace {
  std::vector<std::string> expensive;
  std::vector<std::string> free_vars;

  int num_expensive() const { return static_cast<int>(expensive.size()); }
  int num_free() const { return static_cast<int>(free_vars.size()); }
  int size() const { return num_expensive() * num_free(); }

  int compose(int e, int f) const { return e * num_free() + f; }
  std::pair<int, int> decompose(int x) const {
    return {x / num_free(), x % num_free()};
  }

  std::string name(int x) const {
    auto [e, f] = decompose(x);
    if (num_expensive() == 1) return free_vars[f];
    return "(" + expensive[e] + "," + free_vars[f] + ")";
  }
};

/// Probability distribution over an index set. An all-zero mass vector is
/// the designated null distribution for unreachable contexts.
struct Distribution {
  std::vector<double> mass;

  Distribution() = default;
  explicit Distribution(std::size_t n) : mass(n, 0.0) {}

  static Distribution point(std::size_t n, std::size_t i) {
    Distribution d(n);
    d.mass[i] = 1.0;
    return d;
  }
  static Distribution uniform(std::size_t n) {
    Distribution d(n);
    for (auto& m : d.mass) m = 1.0 / static_cast<double>(n);
    return d;
  }

  std::size_t size() const { return mass.size(); }
  double total() const {
    double s = 0.0;
    for (double m : mass) s += m;
    return s;
  }
  bool is_null() const { return total() == 0.0; }
  bool is_normalized(double tol = kStochasticTol) const {
    for (double m : mass)
      if (m < 0.0) return false;
    return std::abs(total() - 1.0) <= tol;
  }
};

/// Finite labeled MDP with a dense transition kernel indexed (x, u, x')
/// and an atomic-proposition labeling stored as bitsets over AP.
struct LabeledMdp {
  StateSpace states;
  std::vector<std::string> actions;
  std::vector<double> kernel;  // [x][u][x'] row-major
  std::vector<std::string> atomic_props;
  std::vector<std::uint32_t> labels;  // bitset over atomic_props per state

  int num_states() const { return states.size(); }
  int num_actions() const { return static_cast<int>(actions.size()); }

  double p(int x, int u, int xn) const {
    return kernel[(static_cast<std::size_t>(x) * num_actions() + u) *
                      num_states() +
                  xn];
  }
  double& p(int x, int u, int xn) {
    return kernel[(static_cast<std::size_t>(x) * num_actions() + u) *
                      num_states() +
                  xn];
  }

  std::uint32_t label(int x) const { return labels[x]; }

  int ap_index(const std::string& ap) const {
    for (std::size_t i = 0; i < atomic_props.size(); ++i)
      if (atomic_props[i] == ap) return static_cast<int>(i);
    return -1;
  }
};

/// Checks all structural invariants. Returns one message per violation;
/// empty means well-formed. Diagnostic only, never throws.
inline std::vector<std::string> validate(const LabeledMdp& mdp) {
  std::vector<std::string> violations;
  if (mdp.states.expensive.empty())
    violations.push_back("expensive state set is empty");
  if (mdp.states.free_vars.empty())
    violations.push_back("free state set is empty");
  auto check_unique = [&](const std::vector<std::string>& names,
                          const char* what) {
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j)
        if (names[i] == names[j])
          violations.push_back(std::string("duplicate ") + what + " name '" +
                               names[i] + "'");
  };
  check_unique(mdp.states.expensive, "expensive state");
  check_unique(mdp.states.free_vars, "free state");
  check_unique(mdp.actions, "action");

  const int nx = mdp.num_states();
  const int nu = mdp.num_actions();
  if (mdp.kernel.size() !=
      static_cast<std::size_t>(nx) * static_cast<std::size_t>(nu) * nx) {
    violations.push_back("kernel has wrong size");
    return violations;
  }
  if (mdp.labels.size() != static_cast<std::size_t>(nx))
    violations.push_back("labeling is not total over states");

  for (int x = 0; x < nx; ++x) {
    for (int u = 0; u < nu; ++u) {
      double row_sum = 0.0;
      bool negative = false;
      for (int xn = 0; xn < nx; ++xn) {
        const double v = mdp.p(x, u, xn);
        if (v < 0.0) negative = true;
        row_sum += v;
      }
      if (negative)
        violations.push_back("negative entry in row (x=" +
                             mdp.states.name(x) + ", u=" + mdp.actions[u] +
                             ")");
      if (std::abs(row_sum - 1.0) > kStochasticTol)
        violations.push_back("row (x=" + mdp.states.name(x) +
                             ", u=" + mdp.actions[u] + ") sums to " +
                             std::to_string(row_sum));
    }
  }
  return violations;
}

/// Renormalizes kernel rows whose mass error is at most `max_deficit`.
/// Rows further off than that are left alone for validate() to report.
inline void renormalize_rows(LabeledMdp& mdp, double max_deficit = 1e-9) {
  const int nx = mdp.num_states();
  const int nu = mdp.num_actions();
  for (int x = 0; x < nx; ++x)
    for (int u = 0; u < nu; ++u) {
      double s = 0.0;
      for (int xn = 0; xn < nx; ++xn) s += mdp.p(x, u, xn);
      if (s > 0.0 && std::abs(s - 1.0) <= max_deficit)
        for (int xn = 0; xn < nx; ++xn) mdp.p(x, u, xn) /= s;
    }
}

/// One-step pushforward of a state distribution under a policy slice
/// (one action distribution per state).
inline Distribution step_distribution(const LabeledMdp& mdp,
                                      const Distribution& d,
                                      const std::vector<Distribution>& policy_slice) {
  const int nx = mdp.num_states();
  const int nu = mdp.num_actions();
  if (d.size() != static_cast<std::size_t>(nx) ||
      policy_slice.size() != static_cast<std::size_t>(nx))
    throw Error("step_distribution: dimension mismatch");
  Distribution out(nx);
  for (int x = 0; x < nx; ++x) {
    if (d.mass[x] == 0.0) continue;
    if (policy_slice[x].size() != static_cast<std::size_t>(nu))
      throw Error("step_distribution: policy row dimension mismatch");
    for (int u = 0; u < nu; ++u) {
      const double w = d.mass[x] * policy_slice[x].mass[u];
      if (w == 0.0) continue;
      for (int xn = 0; xn < nx; ++xn) out.mass[xn] += w * mdp.p(x, u, xn);
    }
  }
  return out;
}

}  // namespace temdp
