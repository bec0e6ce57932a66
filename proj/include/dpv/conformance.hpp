#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "dpv/event_log.hpp"
#include "dpv/petri.hpp"
#include "dpv/util.hpp"

namespace dpv {

struct AlignmentMove {
  enum class Kind { sync, log_only, model_visible, model_silent };
  Kind kind;
  std::string activity;  // label for sync/log/visible-model moves
  int transition = -1;   // fired transition, -1 for log moves
};

struct Alignment {
  std::vector<AlignmentMove> moves;
  int cost = 0;
};

// Minimum-cost alignment under the unit cost function (sync and silent 0,
// log and visible model moves 1), found by uniform-cost search over the
// synchronous product. Expansion order is fixed (sync, silent, visible model
// by transition index, then log move) and ties resolve by insertion order,
// so the returned alignment is deterministic.
inline Alignment align(const Trace& trace, const PetriNet& net, std::size_t state_cap = 1000000) {
  using Marking = std::vector<int>;
  using State = std::pair<int, Marking>;  // (events consumed, marking)

  struct Edge {
    State from;
    AlignmentMove move;
  };
  std::map<State, int> best;
  std::map<State, Edge> parent;
  using QueueItem = std::tuple<int, std::size_t, State>;  // cost, insertion seq, state
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> queue;

  const int len = static_cast<int>(trace.activities.size());
  State start{0, net.initial};
  best[start] = 0;
  std::size_t seq = 0;
  queue.push({0, seq++, start});
  std::size_t expanded = 0;

  while (!queue.empty()) {
    auto [cost, ignored, state] = queue.top();
    queue.pop();
    auto it = best.find(state);
    if (it == best.end() || it->second < cost) continue;  // stale entry
    const auto& [pos, marking] = state;

    if (pos == len && marking == net.final) {
      Alignment result;
      result.cost = cost;
      State cur = state;
      while (!(cur == start)) {
        const Edge& e = parent.at(cur);
        result.moves.push_back(e.move);
        cur = e.from;
      }
      std::reverse(result.moves.begin(), result.moves.end());
      return result;
    }

    if (++expanded > state_cap)
      throw StageError("align: state cap of " + std::to_string(state_cap) +
                       " exceeded; the model is too large for alignment search");

    auto relax = [&](State next, int move_cost, AlignmentMove move) {
      const int next_cost = cost + move_cost;
      auto found = best.find(next);
      if (found != best.end() && found->second <= next_cost) return;
      best[next] = next_cost;
      parent[next] = Edge{state, std::move(move)};
      queue.push({next_cost, seq++, std::move(next)});
    };

    for (std::size_t t = 0; t < net.transitions.size(); ++t) {
      if (!net.enabled(marking, t)) continue;
      const auto& label = net.transitions[t].label;
      if (!label.empty() && pos < len && label == trace.activities[static_cast<std::size_t>(pos)]) {
        relax({pos + 1, net.fire(marking, t)}, 0,
              {AlignmentMove::Kind::sync, label, static_cast<int>(t)});
      }
    }
    for (std::size_t t = 0; t < net.transitions.size(); ++t) {
      if (!net.enabled(marking, t) || !net.is_silent(t)) continue;
      relax({pos, net.fire(marking, t)}, 0,
            {AlignmentMove::Kind::model_silent, "", static_cast<int>(t)});
    }
    for (std::size_t t = 0; t < net.transitions.size(); ++t) {
      if (!net.enabled(marking, t) || net.is_silent(t)) continue;
      relax({pos, net.fire(marking, t)}, 1,
            {AlignmentMove::Kind::model_visible, net.transitions[t].label, static_cast<int>(t)});
    }
    if (pos < len) {
      relax({pos + 1, marking}, 1,
            {AlignmentMove::Kind::log_only, trace.activities[static_cast<std::size_t>(pos)], -1});
    }
  }
  throw StageError("align: no alignment found; the net has no path to its final marking");
}

// Cheapest model-only path cost (the alignment of the empty trace).
inline int shortest_model_path_cost(const PetriNet& net, std::size_t state_cap = 1000000) {
  return align(Trace{"", {}}, net, state_cap).cost;
}

// Per trace 1 - cost / (|trace| + cheapest model path), averaged over the
// log with every trace weighted equally.
inline double alignment_fitness(const EventLog& log, const PetriNet& net,
                                std::size_t state_cap = 1000000) {
  if (log.empty()) throw InputError("alignment_fitness: empty log");
  const int spc = shortest_model_path_cost(net, state_cap);
  double sum = 0.0;
  for (const auto& t : log.traces()) {
    const int cost = align(t, net, state_cap).cost;
    const double denom = static_cast<double>(t.activities.size() + static_cast<std::size_t>(spc));
    sum += denom == 0.0 ? 1.0 : 1.0 - static_cast<double>(cost) / denom;
  }
  return sum / static_cast<double>(log.size());
}

// Fraction of traces with alignment cost zero (language membership).
inline double trace_fitness(const EventLog& log, const PetriNet& net,
                            std::size_t state_cap = 1000000) {
  if (log.empty()) throw InputError("trace_fitness: empty log");
  std::size_t fitting = 0;
  for (const auto& t : log.traces())
    if (align(t, net, state_cap).cost == 0) ++fitting;
  return static_cast<double>(fitting) / static_cast<double>(log.size());
}

namespace conf_detail {

using Marking = std::vector<int>;
using MarkingSet = std::set<Marking>;

inline MarkingSet silent_closure(const PetriNet& net, MarkingSet states, std::size_t state_cap) {
  std::vector<Marking> frontier(states.begin(), states.end());
  while (!frontier.empty()) {
    Marking m = std::move(frontier.back());
    frontier.pop_back();
    for (std::size_t t = 0; t < net.transitions.size(); ++t) {
      if (!net.is_silent(t) || !net.enabled(m, t)) continue;
      Marking next = net.fire(m, t);
      if (states.size() > state_cap)
        throw StageError("precision: marking-set cap exceeded");
      if (states.insert(next).second) frontier.push_back(std::move(next));
    }
  }
  return states;
}

inline MarkingSet step_visible(const PetriNet& net, const MarkingSet& states,
                               const std::string& label, std::size_t state_cap) {
  MarkingSet out;
  for (const auto& m : states) {
    for (std::size_t t = 0; t < net.transitions.size(); ++t) {
      if (net.is_silent(t) || net.transitions[t].label != label || !net.enabled(m, t)) continue;
      out.insert(net.fire(m, t));
    }
  }
  return silent_closure(net, std::move(out), state_cap);
}

inline std::set<std::string> enabled_labels(const PetriNet& net, const MarkingSet& states) {
  std::set<std::string> labels;
  for (const auto& m : states)
    for (std::size_t t = 0; t < net.transitions.size(); ++t)
      if (!net.is_silent(t) && net.enabled(m, t)) labels.insert(net.transitions[t].label);
  return labels;
}

struct PrefixNode {
  long weight = 0;  // traces passing through this prefix
  std::map<std::string, PrefixNode> children;
};

}  // namespace conf_detail

// Escaping-edges precision with alignment-projected replay: each trace is
// replaced by the visible model projection of its optimal alignment, the
// projections form a weighted prefix automaton, and at every prefix state the
// model-enabled activities are compared against the observed continuations.
inline double precision(const EventLog& log, const PetriNet& net,
                        std::size_t state_cap = 1000000) {
  if (log.empty()) throw InputError("precision: empty log");
  using namespace conf_detail;

  PrefixNode root;
  for (const auto& trace : log.traces()) {
    Alignment a = align(trace, net, state_cap);
    std::vector<std::string> projected;
    for (const auto& mv : a.moves)
      if (mv.kind == AlignmentMove::Kind::sync || mv.kind == AlignmentMove::Kind::model_visible)
        projected.push_back(mv.activity);
    PrefixNode* node = &root;
    ++node->weight;
    for (const auto& label : projected) {
      node = &node->children[label];
      ++node->weight;
    }
  }

  double enabled_total = 0.0, escaping_total = 0.0;
  auto walk = [&](auto&& self, const PrefixNode& node, const MarkingSet& states) -> void {
    const auto enabled = enabled_labels(net, states);
    std::set<std::string> observed;
    for (const auto& [label, child] : node.children) observed.insert(label);
    std::size_t escaping = 0;
    for (const auto& label : enabled)
      if (!observed.count(label)) ++escaping;
    enabled_total += static_cast<double>(node.weight) * static_cast<double>(enabled.size());
    escaping_total += static_cast<double>(node.weight) * static_cast<double>(escaping);
    for (const auto& [label, child] : node.children)
      self(self, child, step_visible(net, states, label, state_cap));
  };
  walk(walk, root, silent_closure(net, {net.initial}, state_cap));

  if (enabled_total == 0.0) return 1.0;
  return 1.0 - escaping_total / enabled_total;
}

struct MetricsReport {
  double t_fit_desirable = 0.0;
  double t_fit_undesirable = 0.0;
  double a_fit_desirable = 0.0;
  double a_fit_undesirable = 0.0;
  double a_acc = 0.0;
  double t_acc = 0.0;
  double a_f1 = 0.0;
  double t_f1 = 0.0;
};

// The four discriminative metrics from fitness values alone. F1 terms use
// the convention 0 when both numerator factors are 0.
inline MetricsReport metrics_from_fitness(double a_fit_p, double a_fit_m, double t_fit_p,
                                          double t_fit_m) {
  MetricsReport r;
  r.a_fit_desirable = a_fit_p;
  r.a_fit_undesirable = a_fit_m;
  r.t_fit_desirable = t_fit_p;
  r.t_fit_undesirable = t_fit_m;
  r.a_acc = a_fit_p - a_fit_m;
  r.t_acc = t_fit_p - t_fit_m;
  const double a_comp = 1.0 - a_fit_m;
  const double t_comp = 1.0 - t_fit_m;
  r.a_f1 = (a_fit_p + a_comp) == 0.0 ? 0.0 : 2.0 * a_fit_p * a_comp / (a_fit_p + a_comp);
  r.t_f1 = (t_fit_p + t_comp) == 0.0 ? 0.0 : 2.0 * t_fit_p * t_comp / (t_fit_p + t_comp);
  return r;
}

inline MetricsReport discriminative_metrics(const EventLog& desirable, const EventLog& undesirable,
                                            const PetriNet& net, std::size_t state_cap = 1000000) {
  if (desirable.empty() || undesirable.empty())
    throw InputError("discriminative_metrics: both logs must be non-empty");
  return metrics_from_fitness(alignment_fitness(desirable, net, state_cap),
                              alignment_fitness(undesirable, net, state_cap),
                              trace_fitness(desirable, net, state_cap),
                              trace_fitness(undesirable, net, state_cap));
}

}  // namespace dpv
