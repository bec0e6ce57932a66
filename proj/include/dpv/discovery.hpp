#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dpv/event_log.hpp"
#include "dpv/petri.hpp"
#include "dpv/util.hpp"

namespace dpv {

struct ProcessTree {
  enum class Op { leaf, silent, sequence, exclusive_choice, parallel, loop };
  Op op = Op::silent;
  std::string activity;                // leaf only
  std::vector<ProcessTree> children;   // operators; loop's do-part comes first

  static ProcessTree make_leaf(std::string a) {
    ProcessTree t;
    t.op = Op::leaf;
    t.activity = std::move(a);
    return t;
  }
  static ProcessTree make(Op op, std::vector<ProcessTree> children) {
    ProcessTree t;
    t.op = op;
    t.children = std::move(children);
    return t;
  }
};

inline std::string to_string(const ProcessTree& t) {
  switch (t.op) {
    case ProcessTree::Op::leaf: return t.activity;
    case ProcessTree::Op::silent: return "tau";
    default: break;
  }
  std::string s;
  switch (t.op) {
    case ProcessTree::Op::sequence: s = "seq("; break;
    case ProcessTree::Op::exclusive_choice: s = "xor("; break;
    case ProcessTree::Op::parallel: s = "and("; break;
    case ProcessTree::Op::loop: s = "loop("; break;
    default: break;
  }
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    if (i) s += ",";
    s += to_string(t.children[i]);
  }
  return s + ")";
}

namespace mine_detail {

using Seq = std::vector<std::string>;

struct Dfg {
  std::set<std::string> alphabet;
  std::map<std::pair<std::string, std::string>, long> edges;
  std::set<std::string> starts, ends;
};

inline Dfg build_dfg(const std::vector<Seq>& traces, double f) {
  Dfg g;
  for (const auto& t : traces) {
    for (const auto& a : t) g.alphabet.insert(a);
    if (t.empty()) continue;
    g.starts.insert(t.front());
    g.ends.insert(t.back());
    for (std::size_t i = 0; i + 1 < t.size(); ++i) ++g.edges[{t[i], t[i + 1]}];
  }
  if (f > 0.0) {
    std::map<std::string, long> strongest;
    for (const auto& [e, w] : g.edges)
      strongest[e.first] = std::max(strongest[e.first], w);
    for (auto it = g.edges.begin(); it != g.edges.end();) {
      if (static_cast<double>(it->second) <
          f * static_cast<double>(strongest[it->first.first]))
        it = g.edges.erase(it);
      else
        ++it;
    }
  }
  return g;
}

using Group = std::set<std::string>;

inline int group_of(const std::vector<Group>& groups, const std::string& a) {
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].count(a)) return static_cast<int>(i);
  return -1;
}

// weakly connected components over the given node set
inline std::vector<Group> weak_components(const Group& nodes, const Dfg& g) {
  std::map<std::string, std::set<std::string>> adj;
  for (const auto& [e, w] : g.edges) {
    if (!nodes.count(e.first) || !nodes.count(e.second)) continue;
    adj[e.first].insert(e.second);
    adj[e.second].insert(e.first);
  }
  std::vector<Group> components;
  std::set<std::string> visited;
  for (const auto& n : nodes) {
    if (visited.count(n)) continue;
    Group comp;
    std::vector<std::string> stack{n};
    visited.insert(n);
    while (!stack.empty()) {
      std::string u = stack.back();
      stack.pop_back();
      comp.insert(u);
      for (const auto& v : adj[u])
        if (visited.insert(v).second) stack.push_back(v);
    }
    components.push_back(std::move(comp));
  }
  return components;
}

// Tarjan-free SCC via double DFS (Kosaraju), deterministic over sorted nodes.
inline std::vector<Group> strong_components(const Dfg& g) {
  std::map<std::string, std::vector<std::string>> fwd, rev;
  for (const auto& [e, w] : g.edges) {
    fwd[e.first].push_back(e.second);
    rev[e.second].push_back(e.first);
  }
  std::vector<std::string> order;
  std::set<std::string> visited;
  auto dfs1 = [&](auto&& self, const std::string& u) -> void {
    visited.insert(u);
    for (const auto& v : fwd[u])
      if (!visited.count(v)) self(self, v);
    order.push_back(u);
  };
  for (const auto& n : g.alphabet)
    if (!visited.count(n)) dfs1(dfs1, n);

  std::vector<Group> components;
  visited.clear();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (visited.count(*it)) continue;
    Group comp;
    std::vector<std::string> stack{*it};
    visited.insert(*it);
    while (!stack.empty()) {
      std::string u = stack.back();
      stack.pop_back();
      comp.insert(u);
      for (const auto& v : rev[u])
        if (visited.insert(v).second) stack.push_back(v);
    }
    components.push_back(std::move(comp));
  }
  return components;
}

struct Cut {
  std::vector<Group> groups;
  std::vector<std::vector<Seq>> sublogs;
};

inline std::optional<Cut> exclusive_choice_cut(const std::vector<Seq>& traces, const Dfg& g) {
  auto components = weak_components(g.alphabet, g);
  if (components.size() < 2) return std::nullopt;
  std::sort(components.begin(), components.end());
  Cut cut;
  cut.groups = components;
  cut.sublogs.resize(components.size());
  for (const auto& t : traces) {
    // assign to the group holding most of the trace's events; project away the rest
    std::vector<std::size_t> overlap(components.size(), 0);
    for (const auto& a : t) {
      int gi = group_of(components, a);
      if (gi >= 0) ++overlap[static_cast<std::size_t>(gi)];
    }
    std::size_t target = static_cast<std::size_t>(
        std::max_element(overlap.begin(), overlap.end()) - overlap.begin());
    Seq projected;
    for (const auto& a : t)
      if (components[target].count(a)) projected.push_back(a);
    cut.sublogs[target].push_back(std::move(projected));
  }
  return cut;
}

inline std::optional<Cut> sequence_cut(const std::vector<Seq>& traces, const Dfg& g) {
  auto sccs = strong_components(g);
  if (sccs.size() < 2) return std::nullopt;

  // pairwise reachability between SCCs
  const std::size_t m = sccs.size();
  auto scc_of = [&](const std::string& a) { return group_of(sccs, a); };
  std::vector<std::vector<bool>> reach(m, std::vector<bool>(m, false));
  for (const auto& [e, w] : g.edges) {
    int u = scc_of(e.first), v = scc_of(e.second);
    if (u != v) reach[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = true;
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;

  // merge mutually unreachable SCCs (they cannot be ordered)
  std::vector<int> group_id(m);
  for (std::size_t i = 0; i < m; ++i) group_id[i] = static_cast<int>(i);
  auto root = [&](int x) {
    while (group_id[static_cast<std::size_t>(x)] != x) x = group_id[static_cast<std::size_t>(x)];
    return x;
  };
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (!reach[i][j] && !reach[j][i])
        group_id[static_cast<std::size_t>(root(static_cast<int>(j)))] =
            root(static_cast<int>(i));

  std::map<int, Group> merged;
  for (std::size_t i = 0; i < m; ++i) {
    auto& grp = merged[root(static_cast<int>(i))];
    grp.insert(sccs[i].begin(), sccs[i].end());
  }
  if (merged.size() < 2) return std::nullopt;

  std::vector<Group> groups;
  for (auto& [id, grp] : merged) groups.push_back(std::move(grp));
  // topological order: A before B iff some member SCC of A reaches one of B
  auto before = [&](const Group& a, const Group& b) {
    const std::size_t sa = static_cast<std::size_t>(scc_of(*a.begin()));
    for (const auto& act : b) {
      const std::size_t sb = static_cast<std::size_t>(scc_of(act));
      if (reach[sa][sb]) return true;
      if (reach[sb][sa]) return false;
    }
    return *a.begin() < *b.begin();  // unreachable pairs were merged; keep deterministic
  };
  std::sort(groups.begin(), groups.end(), before);

  Cut cut;
  cut.groups = groups;
  cut.sublogs.resize(groups.size());
  for (const auto& t : traces) {
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      Seq projected;
      for (const auto& a : t)
        if (groups[gi].count(a)) projected.push_back(a);
      cut.sublogs[gi].push_back(std::move(projected));
    }
  }
  return cut;
}

inline std::optional<Cut> parallel_cut(const std::vector<Seq>& traces, const Dfg& g) {
  // bind a,b together unless the DFG has both a->b and b->a
  Dfg binding;
  binding.alphabet = g.alphabet;
  for (const auto& a : g.alphabet) {
    for (const auto& b : g.alphabet) {
      if (a >= b) continue;
      const bool ab = g.edges.count({a, b}) > 0;
      const bool ba = g.edges.count({b, a}) > 0;
      if (!(ab && ba)) binding.edges[{a, b}] = 1;
    }
  }
  auto components = weak_components(g.alphabet, binding);
  if (components.size() < 2) return std::nullopt;
  for (const auto& comp : components) {
    bool has_start = false, has_end = false;
    for (const auto& a : comp) {
      has_start = has_start || g.starts.count(a);
      has_end = has_end || g.ends.count(a);
    }
    if (!has_start || !has_end) return std::nullopt;
  }
  std::sort(components.begin(), components.end());

  Cut cut;
  cut.groups = components;
  cut.sublogs.resize(components.size());
  for (const auto& t : traces) {
    for (std::size_t gi = 0; gi < components.size(); ++gi) {
      Seq projected;
      for (const auto& a : t)
        if (components[gi].count(a)) projected.push_back(a);
      cut.sublogs[gi].push_back(std::move(projected));
    }
  }
  return cut;
}

inline std::optional<Cut> loop_cut(const std::vector<Seq>& traces, const Dfg& g) {
  Group body;
  for (const auto& a : g.starts) body.insert(a);
  for (const auto& a : g.ends) body.insert(a);
  if (body.size() == g.alphabet.size()) return std::nullopt;

  while (true) {
    Group rest;
    for (const auto& a : g.alphabet)
      if (!body.count(a)) rest.insert(a);
    if (rest.empty()) return std::nullopt;
    auto components = weak_components(rest, g);

    bool changed = false;
    for (const auto& comp : components) {
      bool ok = true;
      for (const auto& [e, w] : g.edges) {
        const bool from_body = body.count(e.first) && comp.count(e.second);
        const bool to_body = comp.count(e.first) && body.count(e.second);
        // exits of the body into a redo part must leave from end activities,
        // re-entries must land on start activities
        if (from_body && !g.ends.count(e.first)) ok = false;
        if (to_body && !g.starts.count(e.second)) ok = false;
      }
      if (!ok) {
        body.insert(comp.begin(), comp.end());
        changed = true;
      }
    }
    if (!changed) {
      if (components.empty()) return std::nullopt;
      std::sort(components.begin(), components.end());
      Cut cut;
      cut.groups.push_back(body);
      for (auto& c : components) cut.groups.push_back(std::move(c));
      cut.sublogs.resize(cut.groups.size());
      for (const auto& t : traces) {
        // split into maximal same-group segments; body segments feed child 0
        std::size_t pos = 0;
        while (pos < t.size()) {
          int gi = group_of(cut.groups, t[pos]);
          std::size_t end = pos;
          while (end < t.size() && group_of(cut.groups, t[end]) == gi) ++end;
          cut.sublogs[static_cast<std::size_t>(gi)].push_back(
              Seq(t.begin() + static_cast<long>(pos), t.begin() + static_cast<long>(end)));
          pos = end;
        }
      }
      return cut;
    }
  }
}

inline ProcessTree mine(std::vector<Seq> traces, double f) {
  bool any_empty = false, all_empty = true;
  for (const auto& t : traces) {
    if (t.empty()) any_empty = true;
    else all_empty = false;
  }
  if (all_empty) return ProcessTree::make(ProcessTree::Op::silent, {});
  if (any_empty) {
    std::vector<Seq> non_empty;
    for (auto& t : traces)
      if (!t.empty()) non_empty.push_back(std::move(t));
    return ProcessTree::make(ProcessTree::Op::exclusive_choice,
                             {ProcessTree::make(ProcessTree::Op::silent, {}),
                              mine(std::move(non_empty), f)});
  }

  Dfg g = build_dfg(traces, f);
  if (g.alphabet.size() == 1) {
    const std::string& a = *g.alphabet.begin();
    bool all_single = true;
    for (const auto& t : traces)
      if (t.size() != 1) all_single = false;
    if (all_single) return ProcessTree::make_leaf(a);
    return ProcessTree::make(ProcessTree::Op::loop,
                             {ProcessTree::make_leaf(a),
                              ProcessTree::make(ProcessTree::Op::silent, {})});
  }

  struct Attempt {
    ProcessTree::Op op;
    std::optional<Cut> cut;
  };
  Attempt attempts[] = {
      {ProcessTree::Op::exclusive_choice, exclusive_choice_cut(traces, g)},
      {ProcessTree::Op::sequence, sequence_cut(traces, g)},
      {ProcessTree::Op::parallel, parallel_cut(traces, g)},
      {ProcessTree::Op::loop, loop_cut(traces, g)},
  };
  for (auto& attempt : attempts) {
    if (!attempt.cut) continue;
    std::vector<ProcessTree> children;
    for (auto& sublog : attempt.cut->sublogs)
      children.push_back(mine(std::move(sublog), f));
    return ProcessTree::make(attempt.op, std::move(children));
  }

  // fall-through: flower model over the remaining alphabet
  std::vector<ProcessTree> children{ProcessTree::make(ProcessTree::Op::silent, {})};
  for (const auto& a : g.alphabet) children.push_back(ProcessTree::make_leaf(a));
  return ProcessTree::make(ProcessTree::Op::loop, std::move(children));
}

}  // namespace mine_detail

// Baseline inductive miner with infrequency filtering: directly-follows
// edges weaker than f times the strongest edge leaving the same node are
// dropped before cut detection. Cuts are tried in the order exclusive
// choice, sequence, parallel, loop; a flower model is the fall-through.
inline ProcessTree discover(const EventLog& log, double f) {
  if (log.empty()) throw InputError("discover: empty log");
  if (f < 0.0 || f > 1.0) throw InputError("discover: frequency threshold must be in [0,1]");
  std::vector<mine_detail::Seq> traces;
  traces.reserve(log.size());
  for (const auto& t : log.traces()) traces.push_back(t.activities);
  return mine_detail::mine(std::move(traces), f);
}

namespace net_detail {

struct Builder {
  PetriNet net;

  int new_place() { return net.num_places++; }

  void add_transition(const std::string& label, std::vector<int> pre, std::vector<int> post) {
    net.transitions.push_back({label, std::move(pre), std::move(post)});
  }

  void build(const ProcessTree& t, int in, int out) {
    switch (t.op) {
      case ProcessTree::Op::leaf:
        add_transition(t.activity, {in}, {out});
        return;
      case ProcessTree::Op::silent:
        add_transition("", {in}, {out});
        return;
      case ProcessTree::Op::sequence: {
        int cur = in;
        for (std::size_t i = 0; i < t.children.size(); ++i) {
          int next = (i + 1 == t.children.size()) ? out : new_place();
          build(t.children[i], cur, next);
          cur = next;
        }
        return;
      }
      case ProcessTree::Op::exclusive_choice:
        for (const auto& c : t.children) build(c, in, out);
        return;
      case ProcessTree::Op::parallel: {
        std::vector<int> ins, outs;
        for (std::size_t i = 0; i < t.children.size(); ++i) {
          ins.push_back(new_place());
          outs.push_back(new_place());
        }
        add_transition("", {in}, ins);
        add_transition("", outs, {out});
        for (std::size_t i = 0; i < t.children.size(); ++i)
          build(t.children[i], ins[i], outs[i]);
        return;
      }
      case ProcessTree::Op::loop: {
        const int entry = new_place();
        const int exit = new_place();
        add_transition("", {in}, {entry});
        add_transition("", {exit}, {out});
        build(t.children[0], entry, exit);
        for (std::size_t i = 1; i < t.children.size(); ++i)
          build(t.children[i], exit, entry);
        return;
      }
    }
  }
};

}  // namespace net_detail

// Compositional translation; the result is a workflow net with one source
// and one sink place, marked initially and finally with a single token.
inline PetriNet to_petri_net(const ProcessTree& tree) {
  net_detail::Builder builder;
  const int source = builder.new_place();
  const int sink = builder.new_place();
  builder.build(tree, source, sink);
  PetriNet net = std::move(builder.net);
  net.initial.assign(static_cast<std::size_t>(net.num_places), 0);
  net.final.assign(static_cast<std::size_t>(net.num_places), 0);
  net.initial[static_cast<std::size_t>(source)] = 1;
  net.final[static_cast<std::size_t>(sink)] = 1;
  return net;
}

}  // namespace dpv
