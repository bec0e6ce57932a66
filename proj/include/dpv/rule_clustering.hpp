#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dpv/encoding.hpp"
#include "dpv/sparse_regression.hpp"
#include "dpv/util.hpp"

namespace dpv {

// Symmetric, zero-diagonal matrix of Jaccard distances between rule
// coverages.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<std::vector<double>> d;

  double at(std::size_t i, std::size_t j) const { return d[i][j]; }
};

inline DistanceMatrix jaccard_matrix(const RuleMatrix& m) {
  DistanceMatrix dm;
  dm.n = m.num_rules;
  dm.d.assign(dm.n, std::vector<double>(dm.n, 0.0));
  for (std::size_t i = 0; i < dm.n; ++i) {
    for (std::size_t j = i + 1; j < dm.n; ++j) {
      std::size_t inter = 0, uni = 0;
      for (const auto& row : m.rows) {
        const bool a = row[i] != 0, b = row[j] != 0;
        inter += (a && b);
        uni += (a || b);
      }
      const double dist = 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
      dm.d[i][j] = dm.d[j][i] = dist;
    }
  }
  return dm;
}

// One merge per step. Cluster ids follow the usual convention: leaves are
// 0..n-1, the cluster created by step k gets id n+k. Average linkage admits
// inversions, so distances need not be non-decreasing.
struct MergeStep {
  std::size_t cluster_a;
  std::size_t cluster_b;
  double distance;
};

struct Dendrogram {
  std::size_t n = 0;
  std::vector<MergeStep> steps;  // exactly n-1
};

// Agglomerative average linkage. Inter-cluster distance is the mean of all
// pairwise distances; pairwise sums are carried across merges so the value
// equals a direct recomputation from the input matrix. Ties pick the pair
// with the lexicographically smallest (min member index, max member index).
inline Dendrogram agglomerate(const DistanceMatrix& dm) {
  const std::size_t n = dm.n;
  Dendrogram out;
  out.n = n;
  if (n <= 1) return out;

  struct Cluster {
    std::size_t id;        // dendrogram id
    std::size_t min_leaf;  // smallest original rule index, for tie-breaking
    std::size_t size;
  };
  std::vector<Cluster> active;
  // pair_sum[a][b]: sum of original distances across the two clusters
  std::vector<std::vector<double>> pair_sum(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    active.push_back({i, i, 1});
    for (std::size_t j = 0; j < n; ++j) pair_sum[i][j] = dm.d[i][j];
  }

  for (std::size_t step = 0; step < n - 1; ++step) {
    std::size_t best_i = 0, best_j = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double avg = pair_sum[i][j] /
                           static_cast<double>(active[i].size * active[j].size);
        std::size_t lo = std::min(active[i].min_leaf, active[j].min_leaf);
        std::size_t hi = std::max(active[i].min_leaf, active[j].min_leaf);
        std::size_t blo = std::min(active[best_i].min_leaf, active[best_j].min_leaf);
        std::size_t bhi = std::max(active[best_i].min_leaf, active[best_j].min_leaf);
        if (avg < best || (avg == best && (lo < blo || (lo == blo && hi < bhi)))) {
          best = avg;
          best_i = i;
          best_j = j;
        }
      }
    }

    out.steps.push_back({active[best_i].id, active[best_j].id, best});
    // merge j into i
    Cluster merged{n + step, std::min(active[best_i].min_leaf, active[best_j].min_leaf),
                   active[best_i].size + active[best_j].size};
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == best_i || k == best_j) continue;
      pair_sum[best_i][k] = pair_sum[k][best_i] = pair_sum[best_i][k] + pair_sum[best_j][k];
    }
    active[best_i] = merged;
    active.erase(active.begin() + static_cast<long>(best_j));
    for (auto& row : pair_sum) row.erase(row.begin() + static_cast<long>(best_j));
    pair_sum.erase(pair_sum.begin() + static_cast<long>(best_j));
  }
  return out;
}

// Undoes the last K-1 merges: clusters are ordered by smallest member index,
// members sorted ascending.
inline std::vector<std::vector<std::size_t>> cut(const Dendrogram& dg, std::size_t k) {
  if (k < 1 || k > dg.n) throw InputError("cut: K must be between 1 and the rule count");
  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < dg.n; ++i) clusters[i] = {i};
  const std::size_t applied = dg.n - k;
  for (std::size_t s = 0; s < applied; ++s) {
    const auto& step = dg.steps[s];
    auto a = clusters.find(step.cluster_a);
    auto b = clusters.find(step.cluster_b);
    std::vector<std::size_t> merged = std::move(a->second);
    merged.insert(merged.end(), b->second.begin(), b->second.end());
    clusters.erase(a);
    clusters.erase(b);
    clusters[dg.n + s] = std::move(merged);
  }
  std::vector<std::vector<std::size_t>> out;
  for (auto& [id, members] : clusters) {
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return out;
}

// Heatmap row order: depth-first leaf order of the full dendrogram.
inline std::vector<std::size_t> leaf_order(const Dendrogram& dg) {
  if (dg.n == 0) return {};
  std::map<std::size_t, std::vector<std::size_t>> expansion;
  for (std::size_t i = 0; i < dg.n; ++i) expansion[i] = {i};
  for (std::size_t s = 0; s < dg.steps.size(); ++s) {
    const auto& step = dg.steps[s];
    std::vector<std::size_t> order = expansion[step.cluster_a];
    const auto& right = expansion[step.cluster_b];
    order.insert(order.end(), right.begin(), right.end());
    expansion[dg.n + s] = std::move(order);
  }
  if (dg.steps.empty()) return expansion[0];
  return expansion[dg.n + dg.steps.size() - 1];
}

struct ClusterEntry {
  std::vector<std::size_t> members;     // rule indices
  std::size_t representative;           // member with max |importance|
  double representative_importance;
  double support_desirable;             // representative coverage share of L+
  double support_undesirable;           // ... and of L-
};

struct ClusterReport {
  std::vector<ClusterEntry> clusters;
};

// Per cluster, the member with the largest |coefficient| (lower rule index on
// ties). Support of the representative is computed on the full log split by
// label.
inline ClusterReport select_representatives(const std::vector<std::vector<std::size_t>>& clusters,
                                            const RegressionModel& model,
                                            const std::vector<Rule>& rules,
                                            const EventLog& full_log, const LabelFunction& labels,
                                            const FeatureSpace& space) {
  ClusterReport report;
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& t : full_log.traces()) (labels(t) ? n_pos : n_neg) += 1;

  for (const auto& members : clusters) {
    if (members.empty()) throw Error("select_representatives: empty cluster");
    std::size_t best = members.front();  // members ascend, so ties keep the lower index
    for (std::size_t j : members)
      if (std::abs(importance(model, j)) > std::abs(importance(model, best))) best = j;
    std::size_t cover_pos = 0, cover_neg = 0;
    for (const auto& t : full_log.traces()) {
      if (rule_holds(encode(t, space), rules[best])) (labels(t) ? cover_pos : cover_neg) += 1;
    }
    ClusterEntry entry;
    entry.members = members;
    entry.representative = best;
    entry.representative_importance = importance(model, best);
    entry.support_desirable = n_pos ? static_cast<double>(cover_pos) / static_cast<double>(n_pos) : 0.0;
    entry.support_undesirable = n_neg ? static_cast<double>(cover_neg) / static_cast<double>(n_neg) : 0.0;
    report.clusters.push_back(std::move(entry));
  }
  return report;
}

// Sub-log of traces satisfying the rule, labels restricted alongside.
inline EventLog filter_log(const EventLog& log, const Rule& rule, const FeatureSpace& space) {
  std::vector<Trace> kept;
  for (const auto& t : log.traces())
    if (rule_holds(encode(t, space), rule)) kept.push_back(t);
  return EventLog(std::move(kept));
}

}  // namespace dpv
