#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "temdp/ltl.hpp"

namespace temdp {

inline constexpr int kMaxAtomicProps = 16;

/// Completed DFA over the alphabet 2^AP. Letters are bitmasks over `aps`.
/// Accepting states are absorbing, so reaching one certifies a good prefix.
struct Dfa {
  int num_states = 0;
  int initial = 0;
  std::vector<std::string> aps;
  std::vector<int> delta;  // [state][letter], letter in [0, 2^|aps|)
  std::vector<bool> accepting;

  int num_letters() const { return 1 << static_cast<int>(aps.size()); }
  int next(int s, std::uint32_t letter) const {
    return delta[static_cast<std::size_t>(s) * num_letters() + letter];
  }
};

/// True iff running `word` from the initial state visits an accepting
/// state at some point (the empty word is accepted iff s_I is accepting).
inline bool accepts_prefix(const Dfa& d, const std::vector<std::uint32_t>& word) {
  int s = d.initial;
  if (d.accepting[s]) return true;
  for (std::uint32_t letter : word) {
    s = d.next(s, letter);
    if (d.accepting[s]) return true;
  }
  return false;
}

namespace detail {

using Obligations = std::vector<int>;  // sorted formula node ids

inline Obligations set_union(const Obligations& a, const Obligations& b) {
  Obligations out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

inline void dedupe(std::vector<Obligations>& sets) {
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
}

// Tableau unfolding of co-safe LTL: next-step obligation choices for one
// formula node under one alphabet letter. Uses the expansion laws
// F p = p | X F p and p U q = q | (p & X (p U q)).
class Unfolder {
 public:
  Unfolder(const LtlFormula& f, const std::vector<int>& atom_bit)
      : f_(f), atom_bit_(atom_bit) {}

  std::vector<Obligations> succs(int node, std::uint32_t letter) const {
    const LtlNode& n = f_.at(node);
    switch (n.op) {
      case LtlOp::True:
        return {{}};
      case LtlOp::False:
        return {};
      case LtlOp::Atom:
        return (letter >> atom_bit_[node]) & 1u ? std::vector<Obligations>{{}}
                                                : std::vector<Obligations>{};
      case LtlOp::NotAtom:
        return (letter >> atom_bit_[node]) & 1u ? std::vector<Obligations>{}
                                                : std::vector<Obligations>{{}};
      case LtlOp::And: {
        auto ls = succs(n.left, letter);
        auto rs = succs(n.right, letter);
        std::vector<Obligations> out;
        for (const auto& a : ls)
          for (const auto& b : rs) out.push_back(set_union(a, b));
        dedupe(out);
        return out;
      }
      case LtlOp::Or: {
        auto out = succs(n.left, letter);
        auto rs = succs(n.right, letter);
        out.insert(out.end(), rs.begin(), rs.end());
        dedupe(out);
        return out;
      }
      case LtlOp::Next:
        return {{n.left}};
      case LtlOp::Eventually: {
        auto out = succs(n.left, letter);
        out.push_back({node});
        dedupe(out);
        return out;
      }
      case LtlOp::Until: {
        auto out = succs(n.right, letter);
        for (auto a : succs(n.left, letter)) {
          a = set_union(a, {node});
          out.push_back(std::move(a));
        }
        dedupe(out);
        return out;
      }
    }
    return {};
  }

  // True iff the node is satisfied by the empty remaining word under the
  // strong finite-trace semantics.
  bool holds_on_empty(int node) const {
    const LtlNode& n = f_.at(node);
    switch (n.op) {
      case LtlOp::True: return true;
      case LtlOp::False:
      case LtlOp::Atom:
      case LtlOp::NotAtom:
      case LtlOp::Next: return false;
      case LtlOp::And: return holds_on_empty(n.left) && holds_on_empty(n.right);
      case LtlOp::Or: return holds_on_empty(n.left) || holds_on_empty(n.right);
      case LtlOp::Eventually: return holds_on_empty(n.left);
      case LtlOp::Until: return holds_on_empty(n.right);
    }
    return false;
  }

 private:
  const LtlFormula& f_;
  const std::vector<int>& atom_bit_;
};

// Moore partition refinement on a complete DFA; returns the block id per
// state.
inline std::vector<int> moore_blocks(int num_states, int num_letters,
                                     const std::vector<int>& delta,
                                     const std::vector<bool>& accepting) {
  std::vector<int> block(num_states);
  for (int s = 0; s < num_states; ++s) block[s] = accepting[s] ? 1 : 0;
  for (;;) {
    std::map<std::vector<int>, int> sig_to_block;
    std::vector<int> next_block(num_states);
    for (int s = 0; s < num_states; ++s) {
      std::vector<int> sig;
      sig.reserve(num_letters + 1);
      sig.push_back(block[s]);
      for (int a = 0; a < num_letters; ++a)
        sig.push_back(block[delta[static_cast<std::size_t>(s) * num_letters + a]]);
      auto [it, inserted] =
          sig_to_block.emplace(std::move(sig), static_cast<int>(sig_to_block.size()));
      next_block[s] = it->second;
    }
    bool changed = false;
    for (int s = 0; s < num_states; ++s) changed = changed || next_block[s] != block[s];
    block.swap(next_block);
    if (!changed) break;
  }
  return block;
}

}  // namespace detail

/// Translates a co-safe LTL formula to a completed, minimized DFA over
/// 2^ap. Route: tableau unfolding to an NFA over obligation sets, subset
/// construction, collapse of accepting states into one absorbing state,
/// then Moore minimization and BFS renumbering from the initial state.
inline Dfa to_dfa(const LtlFormula& f, const std::vector<std::string>& ap) {
  if (ap.size() > static_cast<std::size_t>(kMaxAtomicProps))
    throw Error("too many atomic propositions (cap is " +
                std::to_string(kMaxAtomicProps) + ")");
  // Bind atoms to alphabet bits.
  std::vector<int> atom_bit(f.nodes.size(), -1);
  for (std::size_t i = 0; i < f.nodes.size(); ++i) {
    const LtlNode& n = f.nodes[i];
    if (n.op != LtlOp::Atom && n.op != LtlOp::NotAtom) continue;
    auto it = std::find(ap.begin(), ap.end(), n.atom);
    if (it == ap.end()) throw Error("atom '" + n.atom + "' not in AP");
    atom_bit[i] = static_cast<int>(it - ap.begin());
  }
  const int num_letters = 1 << static_cast<int>(ap.size());
  detail::Unfolder unfolder(f, atom_bit);

  // Intern NFA states (obligation sets).
  std::map<detail::Obligations, int> nfa_id;
  std::vector<detail::Obligations> nfa_states;
  auto intern = [&](const detail::Obligations& o) {
    auto [it, inserted] = nfa_id.emplace(o, static_cast<int>(nfa_states.size()));
    if (inserted) nfa_states.push_back(o);
    return it->second;
  };

  auto nfa_accepting = [&](const detail::Obligations& o) {
    for (int node : o)
      if (!unfolder.holds_on_empty(node)) return false;
    return true;
  };

  // Subset construction, lazily expanding NFA successor sets. The empty
  // subset is the rejecting sink.
  std::map<std::vector<int>, int> dfa_id;
  std::vector<std::vector<int>> dfa_states;
  std::vector<int> delta;
  std::vector<bool> accepting;
  auto intern_subset = [&](std::vector<int> subset) {
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    auto [it, inserted] = dfa_id.emplace(subset, static_cast<int>(dfa_states.size()));
    if (inserted) dfa_states.push_back(it->first);
    return it->second;
  };

  const int init = intern_subset({intern({f.root})});
  std::queue<int> work;
  work.push(init);
  std::vector<bool> expanded;
  while (!work.empty()) {
    const int s = work.front();
    work.pop();
    if (static_cast<std::size_t>(s) < expanded.size() && expanded[s]) continue;
    if (expanded.size() < dfa_states.size()) expanded.resize(dfa_states.size(), false);
    if (expanded[s]) continue;
    expanded[s] = true;
    if (delta.size() < dfa_states.size() * static_cast<std::size_t>(num_letters))
      delta.resize(dfa_states.size() * num_letters, -1);
    const std::vector<int> subset = dfa_states[s];
    for (int letter = 0; letter < num_letters; ++letter) {
      std::vector<int> succ;
      for (int nid : subset) {
        detail::Obligations obls = nfa_states[nid];
        if (obls.empty()) {  // fully discharged: absorbing in the NFA
          succ.push_back(nid);
          continue;
        }
        // All combinations of per-obligation choices, unioned.
        std::vector<detail::Obligations> partial = {{}};
        for (int node : obls) {
          auto choices = unfolder.succs(node, static_cast<std::uint32_t>(letter));
          std::vector<detail::Obligations> merged;
          for (const auto& base : partial)
            for (const auto& c : choices)
              merged.push_back(detail::set_union(base, c));
          detail::dedupe(merged);
          partial = std::move(merged);
          if (partial.empty()) break;
        }
        for (const auto& o : partial) succ.push_back(intern(o));
      }
      const int target = intern_subset(std::move(succ));
      if (delta.size() < dfa_states.size() * static_cast<std::size_t>(num_letters))
        delta.resize(dfa_states.size() * num_letters, -1);
      delta[static_cast<std::size_t>(s) * num_letters + letter] = target;
      if (static_cast<std::size_t>(target) >= expanded.size() || !expanded[target])
        work.push(target);
    }
  }
  const int raw_n = static_cast<int>(dfa_states.size());
  accepting.assign(raw_n, false);
  for (int s = 0; s < raw_n; ++s)
    for (int nid : dfa_states[s])
      if (nfa_accepting(nfa_states[nid])) accepting[s] = true;

  // Collapse all accepting states into a single absorbing accept state.
  std::vector<int> remap(raw_n, -1);
  int acc_state = -1;
  int n2 = 0;
  for (int s = 0; s < raw_n; ++s) {
    if (accepting[s]) {
      if (acc_state < 0) acc_state = n2++;
      remap[s] = acc_state;
    } else {
      remap[s] = n2++;
    }
  }
  std::vector<int> delta2(static_cast<std::size_t>(n2) * num_letters);
  std::vector<bool> acc2(n2, false);
  for (int s = 0; s < raw_n; ++s) {
    const int m = remap[s];
    acc2[m] = accepting[s];
    if (accepting[s]) {
      for (int a = 0; a < num_letters; ++a)
        delta2[static_cast<std::size_t>(m) * num_letters + a] = m;
    } else {
      for (int a = 0; a < num_letters; ++a)
        delta2[static_cast<std::size_t>(m) * num_letters + a] =
            remap[delta[static_cast<std::size_t>(s) * num_letters + a]];
    }
  }
  int init2 = remap[init];

  // Minimize and renumber in BFS order from the initial state.
  std::vector<int> block = detail::moore_blocks(n2, num_letters, delta2, acc2);
  {
    std::map<int, int> assigned;
    std::queue<int> bfs;
    assigned[block[init2]] = 0;
    bfs.push(init2);
    std::vector<int> block_rep;  // representative state per visit order
    block_rep.push_back(init2);
    while (!bfs.empty()) {
      int s = bfs.front();
      bfs.pop();
      for (int a = 0; a < num_letters; ++a) {
        int t = delta2[static_cast<std::size_t>(s) * num_letters + a];
        if (assigned.find(block[t]) == assigned.end()) {
          assigned[block[t]] = static_cast<int>(assigned.size());
          block_rep.push_back(t);
          bfs.push(t);
        }
      }
    }
    // Final numbering convention: the initial state is 0, the accepting
    // state (unique after collapse) is 1 when reachable and distinct from
    // the initial state, and the rest keep their BFS order.
    const int n3 = static_cast<int>(assigned.size());
    std::vector<int> perm(n3, -1);
    int acc_bfs = -1;
    for (std::size_t i = 0; i < block_rep.size(); ++i)
      if (acc2[block_rep[i]]) acc_bfs = static_cast<int>(i);
    perm[0] = 0;
    int next = 1;
    if (acc_bfs > 0) perm[acc_bfs] = next++;
    for (int i = 1; i < n3; ++i)
      if (perm[i] < 0) perm[i] = next++;

    Dfa out;
    out.aps = ap;
    out.num_states = n3;
    out.initial = 0;
    out.delta.assign(static_cast<std::size_t>(out.num_states) * num_letters, 0);
    out.accepting.assign(out.num_states, false);
    for (std::size_t i = 0; i < block_rep.size(); ++i) {
      const int s = block_rep[i];
      const int m = perm[i];
      out.accepting[m] = acc2[s];
      for (int a = 0; a < num_letters; ++a) {
        const int t = delta2[static_cast<std::size_t>(s) * num_letters + a];
        out.delta[static_cast<std::size_t>(m) * num_letters + a] =
            perm[assigned.at(block[t])];
      }
    }
    return out;
  }
}

}  // namespace temdp
