#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "dpv/encoding.hpp"
#include "dpv/util.hpp"

namespace dpv {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  int left = -1;     // child for bit = 0
  int right = -1;    // child for bit = 1
  double value = 0.0;  // leaf payload: class (forest) or regression value (boosting)
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int depth = 0;

  double predict(const FeatureVector& bits) const {
    int i = 0;
    while (nodes[i].feature >= 0)
      i = bits[static_cast<std::size_t>(nodes[i].feature)] ? nodes[i].right : nodes[i].left;
    return nodes[i].value;
  }
};

enum class EnsembleKind { random_forest, gradient_boosting };

inline const char* ensemble_kind_name(EnsembleKind k) {
  return k == EnsembleKind::random_forest ? "random_forest" : "gradient_boosting";
}

struct Hyperparams {
  int n_trees = 50;
  int max_depth = 3;
  int feature_subset_size = 0;  // 0 = auto: sqrt(F) for forests, all features for boosting
  double learning_rate = 0.1;   // boosting only
  std::uint64_t seed = 0;
  bool bootstrap = true;  // forests; disabled only by tests
};

struct Ensemble {
  EnsembleKind kind = EnsembleKind::random_forest;
  Hyperparams params;
  std::vector<DecisionTree> trees;
  double base_score = 0.0;  // boosting initialization (log-odds of base rate)
  double oob_error = -1.0;  // forest out-of-bag error; -1 when unavailable

  double decision_value(const FeatureVector& bits) const {
    if (kind == EnsembleKind::random_forest) {
      double votes = 0;
      for (const auto& t : trees) votes += t.predict(bits);
      return votes - static_cast<double>(trees.size()) / 2.0;  // >= 0 means class 1
    }
    double f = base_score;
    for (const auto& t : trees) f += params.learning_rate * t.predict(bits);
    return f;
  }

  int predict(const FeatureVector& bits) const { return decision_value(bits) >= 0.0 ? 1 : 0; }
};

namespace detail {

inline double gini(std::size_t n, std::size_t pos) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(pos) / static_cast<double>(n);
  return 2.0 * p * (1.0 - p);
}

// Draws `k` distinct values from the front of a partial Fisher-Yates pass
// over `pool`; pool is consumed (reordered in place).
inline std::size_t draw_subset(std::vector<int>& pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  return k;
}

struct TreeBuilder {
  const std::vector<FeatureVector>& X;
  const std::vector<int>& y;           // classification targets (0/1); empty for regression
  const std::vector<double>& grad;     // regression targets; empty for classification
  const std::vector<double>& hess;     // per-sample hessians for Newton leaves
  int max_depth;
  std::size_t subset_size;
  Rng& rng;
  DecisionTree tree;
  std::vector<bool> used;  // features already split on along the current path

  int build(std::vector<std::size_t>& samples, int depth) {
    const bool classification = !y.empty();

    std::size_t pos = 0;
    double gsum = 0.0, hsum = 0.0;
    for (auto s : samples) {
      if (classification) pos += static_cast<std::size_t>(y[s]);
      else {
        gsum += grad[s];
        hsum += hess[s];
      }
    }

    int best_feature = -1;
    if (depth < max_depth && (!classification || (pos > 0 && pos < samples.size()))) {
      best_feature = find_split(samples, pos, gsum, classification);
    }

    if (best_feature < 0) {
      TreeNode leaf;
      if (classification)
        leaf.value = (2 * pos >= samples.size()) ? 1.0 : 0.0;
      else
        leaf.value = gsum / (hsum + 1e-12);  // Newton step for logistic loss
      tree.nodes.push_back(leaf);
      tree.depth = std::max(tree.depth, depth);
      return static_cast<int>(tree.nodes.size()) - 1;
    }

    std::vector<std::size_t> left, right;
    for (auto s : samples)
      (X[s][static_cast<std::size_t>(best_feature)] ? right : left).push_back(s);
    samples.clear();
    samples.shrink_to_fit();

    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{best_feature, -1, -1, 0.0});
    used[static_cast<std::size_t>(best_feature)] = true;
    tree.nodes[static_cast<std::size_t>(node_index)].left = build(left, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_index)].right = build(right, depth + 1);
    used[static_cast<std::size_t>(best_feature)] = false;
    return node_index;
  }

  // Best Gini (classification) or squared-error (regression) reduction over a
  // random feature subset; ties resolved toward the smaller feature index.
  int find_split(const std::vector<std::size_t>& samples, std::size_t pos, double gsum,
                 bool classification) {
    std::vector<int> pool;
    pool.reserve(used.size());
    for (std::size_t f = 0; f < used.size(); ++f)
      if (!used[f]) pool.push_back(static_cast<int>(f));
    const std::size_t k = draw_subset(pool, subset_size, rng);

    std::vector<int> candidates(pool.begin(), pool.begin() + static_cast<long>(k));
    std::sort(candidates.begin(), candidates.end());

    const double n = static_cast<double>(samples.size());
    int best = -1;
    double best_gain = 1e-12;
    for (int f : candidates) {
      std::size_t n1 = 0, pos1 = 0;
      double gsum1 = 0.0;
      for (auto s : samples) {
        if (!X[s][static_cast<std::size_t>(f)]) continue;
        ++n1;
        if (classification) pos1 += static_cast<std::size_t>(y[s]);
        else gsum1 += grad[s];
      }
      const std::size_t n0 = samples.size() - n1;
      if (n0 == 0 || n1 == 0) continue;
      double gain;
      if (classification) {
        const std::size_t pos0 = pos - pos1;
        gain = gini(samples.size(), pos) -
               (static_cast<double>(n0) * gini(n0, pos0) + static_cast<double>(n1) * gini(n1, pos1)) / n;
      } else {
        // variance reduction: sum^2/n improvements of the two halves
        const double gsum0 = gsum - gsum1;
        gain = gsum0 * gsum0 / static_cast<double>(n0) + gsum1 * gsum1 / static_cast<double>(n1) -
               gsum * gsum / n;
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = f;
      }
    }
    return best;
  }
};

inline const std::vector<int> kNoLabels;
inline const std::vector<double> kNoTargets;

}  // namespace detail

// Classification tree: Gini splits over a seeded random subset of features,
// growth stops at max_depth, pure nodes, or when no split reduces impurity.
// No feature repeats along a path. Leaves hold the majority class.
inline DecisionTree train_tree(const std::vector<FeatureVector>& vectors,
                               const std::vector<int>& labels, int max_depth,
                               int feature_subset_size, std::uint64_t seed) {
  if (vectors.empty()) throw InputError("train_tree: empty training set");
  if (max_depth < 1) throw InputError("train_tree: max_depth must be >= 1");
  const std::size_t num_features = vectors[0].size();
  Rng rng(seed);
  detail::TreeBuilder builder{vectors,
                              labels,
                              detail::kNoTargets,
                              detail::kNoTargets,
                              max_depth,
                              feature_subset_size > 0 ? static_cast<std::size_t>(feature_subset_size)
                                                      : num_features,
                              rng,
                              {},
                              std::vector<bool>(num_features, false)};
  std::vector<std::size_t> samples(vectors.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = i;
  builder.build(samples, 0);
  return std::move(builder.tree);
}

// Bagged Gini trees; each tree sees a bootstrap sample of the input (same
// size, with replacement) and an independent seeded RNG stream. Records the
// out-of-bag error when bootstrapping is on.
inline Ensemble train_random_forest(const std::vector<FeatureVector>& vectors,
                                    const std::vector<int>& labels, Hyperparams params) {
  if (vectors.empty()) throw InputError("train_random_forest: empty training set");
  if (params.n_trees < 1) throw InputError("train_random_forest: n_trees must be >= 1");
  const std::size_t n = vectors.size();
  const std::size_t num_features = vectors[0].size();
  if (params.feature_subset_size <= 0)
    params.feature_subset_size =
        std::max(1, static_cast<int>(std::sqrt(static_cast<double>(num_features))));

  Ensemble ensemble;
  ensemble.kind = EnsembleKind::random_forest;
  ensemble.params = params;

  Rng root(params.seed);
  std::vector<std::vector<int>> oob_votes(n);  // votes per sample from trees that missed it
  for (int t = 0; t < params.n_trees; ++t) {
    Rng tree_rng = root.derive(static_cast<std::uint64_t>(t));
    std::vector<std::size_t> sample;
    std::vector<bool> in_bag(n, false);
    if (params.bootstrap) {
      sample.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = static_cast<std::size_t>(tree_rng.below(n));
        sample.push_back(j);
        in_bag[j] = true;
      }
    } else {
      sample.resize(n);
      for (std::size_t i = 0; i < n; ++i) sample[i] = i;
      in_bag.assign(n, true);
    }
    detail::TreeBuilder builder{vectors,
                                labels,
                                detail::kNoTargets,
                                detail::kNoTargets,
                                params.max_depth,
                                static_cast<std::size_t>(params.feature_subset_size),
                                tree_rng,
                                {},
                                std::vector<bool>(num_features, false)};
    builder.build(sample, 0);
    ensemble.trees.push_back(std::move(builder.tree));
    if (params.bootstrap) {
      for (std::size_t i = 0; i < n; ++i)
        if (!in_bag[i])
          oob_votes[i].push_back(static_cast<int>(ensemble.trees.back().predict(vectors[i])));
    }
  }

  if (params.bootstrap) {
    std::size_t covered = 0, wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (oob_votes[i].empty()) continue;
      ++covered;
      int ones = 0;
      for (int v : oob_votes[i]) ones += v;
      const int pred = (2 * ones >= static_cast<int>(oob_votes[i].size())) ? 1 : 0;
      if (pred != labels[i]) ++wrong;
    }
    if (covered > 0)
      ensemble.oob_error = static_cast<double>(wrong) / static_cast<double>(covered);
  }
  return ensemble;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Stagewise regression trees on the negative gradient of logistic loss;
// leaf values are Newton steps, scaled by the learning rate on accumulation.
inline Ensemble train_gradient_boosting(const std::vector<FeatureVector>& vectors,
                                        const std::vector<int>& labels, Hyperparams params) {
  if (vectors.empty()) throw InputError("train_gradient_boosting: empty training set");
  if (params.n_trees < 0) throw InputError("train_gradient_boosting: n_trees must be >= 0");
  const std::size_t n = vectors.size();
  const std::size_t num_features = vectors[0].size();
  if (params.feature_subset_size <= 0)
    params.feature_subset_size = static_cast<int>(num_features);

  Ensemble ensemble;
  ensemble.kind = EnsembleKind::gradient_boosting;
  ensemble.params = params;

  double mean = 0.0;
  for (int l : labels) mean += l;
  mean /= static_cast<double>(n);
  mean = std::min(1.0 - 1e-9, std::max(1e-9, mean));
  ensemble.base_score = std::log(mean / (1.0 - mean));

  std::vector<double> score(n, ensemble.base_score);
  std::vector<double> grad(n), hess(n);
  Rng root(params.seed);
  for (int t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      grad[i] = static_cast<double>(labels[i]) - p;
      hess[i] = std::max(p * (1.0 - p), 1e-12);
    }
    Rng tree_rng = root.derive(static_cast<std::uint64_t>(t));
    detail::TreeBuilder builder{vectors,
                                detail::kNoLabels,
                                grad,
                                hess,
                                params.max_depth,
                                static_cast<std::size_t>(params.feature_subset_size),
                                tree_rng,
                                {},
                                std::vector<bool>(num_features, false)};
    std::vector<std::size_t> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = i;
    builder.build(samples, 0);
    for (std::size_t i = 0; i < n; ++i)
      score[i] += params.learning_rate * builder.tree.predict(vectors[i]);
    ensemble.trees.push_back(std::move(builder.tree));
  }
  return ensemble;
}

inline double boosting_log_loss(const Ensemble& ensemble, const std::vector<FeatureVector>& vectors,
                                const std::vector<int>& labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double z = ensemble.decision_value(vectors[i]);
    const double t = labels[i] ? z : -z;
    loss += t > 0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
  }
  return loss / static_cast<double>(vectors.size());
}

// One rule per root-to-leaf path of every tree; a stump (no split) yields no
// rule. Duplicate literal sets are merged keeping the first provenance, and
// rules covering no training trace are dropped.
inline std::vector<Rule> extract_rules(const Ensemble& ensemble,
                                       const std::vector<FeatureVector>& train_vectors) {
  std::vector<Rule> rules;
  std::set<std::vector<RuleLiteral>> seen;
  for (std::size_t ti = 0; ti < ensemble.trees.size(); ++ti) {
    const auto& tree = ensemble.trees[ti];
    std::vector<RuleLiteral> path;
    auto walk = [&](auto&& self, int node) -> void {
      const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
      if (nd.feature < 0) {
        if (path.empty()) return;  // stump
        Rule r;
        r.literals = path;
        std::sort(r.literals.begin(), r.literals.end());
        r.tree_index = static_cast<int>(ti);
        r.leaf_index = node;
        if (seen.insert(r.literals).second) rules.push_back(std::move(r));
        return;
      }
      path.push_back({static_cast<std::size_t>(nd.feature), 0});
      self(self, nd.left);
      path.back().expected = 1;
      self(self, nd.right);
      path.pop_back();
    };
    walk(walk, 0);
  }

  std::vector<Rule> covered;
  for (auto& r : rules) {
    for (const auto& v : train_vectors) {
      if (rule_holds(v, r)) {
        covered.push_back(std::move(r));
        break;
      }
    }
  }
  return covered;
}

// --- versioned text serialization -------------------------------------------

inline void write_ensemble(std::ostream& out, const Ensemble& e) {
  out.precision(17);
  out << "dpv-ensemble v1\n";
  out << "kind " << ensemble_kind_name(e.kind) << "\n";
  out << "n_trees " << e.params.n_trees << "\n";
  out << "max_depth " << e.params.max_depth << "\n";
  out << "feature_subset_size " << e.params.feature_subset_size << "\n";
  out << "learning_rate " << e.params.learning_rate << "\n";
  out << "seed " << e.params.seed << "\n";
  out << "base_score " << e.base_score << "\n";
  out << "oob_error " << e.oob_error << "\n";
  out << "trees " << e.trees.size() << "\n";
  for (const auto& t : e.trees) {
    out << "tree " << t.nodes.size() << " " << t.depth << "\n";
    for (const auto& nd : t.nodes) {
      if (nd.feature < 0)
        out << "leaf " << nd.value << "\n";
      else
        out << "split " << nd.feature << " " << nd.left << " " << nd.right << "\n";
    }
  }
}

inline Ensemble read_ensemble(std::istream& in) {
  std::string line;
  auto expect_kv = [&](const std::string& key) -> std::string {
    std::string k, v;
    if (!(in >> k)) throw InputError("ensemble file: truncated, expected " + key);
    if (k != key) throw InputError("ensemble file: expected '" + key + "', got '" + k + "'");
    in >> v;
    return v;
  };
  std::string magic, version;
  in >> magic >> version;
  if (magic != "dpv-ensemble" || version != "v1")
    throw InputError("ensemble file: unsupported header '" + magic + " " + version + "'");
  Ensemble e;
  const std::string kind = expect_kv("kind");
  if (kind == "random_forest") e.kind = EnsembleKind::random_forest;
  else if (kind == "gradient_boosting") e.kind = EnsembleKind::gradient_boosting;
  else throw InputError("ensemble file: unknown kind '" + kind + "'");
  e.params.n_trees = std::stoi(expect_kv("n_trees"));
  e.params.max_depth = std::stoi(expect_kv("max_depth"));
  e.params.feature_subset_size = std::stoi(expect_kv("feature_subset_size"));
  e.params.learning_rate = std::stod(expect_kv("learning_rate"));
  e.params.seed = std::stoull(expect_kv("seed"));
  e.base_score = std::stod(expect_kv("base_score"));
  e.oob_error = std::stod(expect_kv("oob_error"));
  const std::size_t n_trees = std::stoull(expect_kv("trees"));
  for (std::size_t t = 0; t < n_trees; ++t) {
    std::string tag;
    std::size_t n_nodes;
    int depth;
    if (!(in >> tag >> n_nodes >> depth) || tag != "tree")
      throw InputError("ensemble file: bad tree header");
    DecisionTree tree;
    tree.depth = depth;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      std::string node_kind;
      in >> node_kind;
      TreeNode nd;
      if (node_kind == "leaf") {
        in >> nd.value;
      } else if (node_kind == "split") {
        in >> nd.feature >> nd.left >> nd.right;
      } else {
        throw InputError("ensemble file: bad node kind '" + node_kind + "'");
      }
      if (!in) throw InputError("ensemble file: truncated node list");
      tree.nodes.push_back(nd);
    }
    e.trees.push_back(std::move(tree));
  }
  return e;
}

}  // namespace dpv
