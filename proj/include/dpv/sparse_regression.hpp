#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dpv/encoding.hpp"
#include "dpv/util.hpp"

namespace dpv {

// Rows are traces, columns are rules: bits[i][j] = rule j holds on trace i.
// Every column has at least one nonzero (zero-coverage rules are dropped at
// extraction).
struct RuleMatrix {
  std::vector<std::vector<std::uint8_t>> rows;
  std::size_t num_rules = 0;

  std::size_t num_rows() const { return rows.size(); }
};

inline RuleMatrix build_rule_matrix(const std::vector<FeatureVector>& encoded,
                                    const std::vector<Rule>& rules) {
  RuleMatrix m;
  m.num_rules = rules.size();
  m.rows.reserve(encoded.size());
  for (const auto& bits : encoded) {
    std::vector<std::uint8_t> row(rules.size());
    for (std::size_t j = 0; j < rules.size(); ++j)
      row[j] = static_cast<std::uint8_t>(rule_holds(bits, rules[j]));
    m.rows.push_back(std::move(row));
  }
  return m;
}

struct RegressionModel {
  std::vector<double> weights;
  double bias = 0.0;
  double lambda = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<double> objective_history;  // objective after each proximal step
};

namespace reg_detail {

inline double softplus(double t) {
  // log(1 + exp(t)), stable for large |t|
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double sigmoid_neg(double t) {
  // sigmoid(-t) = 1 / (1 + exp(t)), stable
  if (t > 0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace reg_detail

// Mean logistic loss over labels mapped 0 -> -1, 1 -> +1 (the L1 term is
// handled by the proximal step, not here).
inline double smooth_loss(const RuleMatrix& m, const std::vector<int>& labels,
                          const std::vector<double>& w, double b) {
  double loss = 0.0;
  for (std::size_t i = 0; i < m.num_rows(); ++i) {
    double z = b;
    const auto& row = m.rows[i];
    for (std::size_t j = 0; j < m.num_rules; ++j)
      if (row[j]) z += w[j];
    const double y = labels[i] ? 1.0 : -1.0;
    loss += reg_detail::softplus(-y * z);
  }
  return loss / static_cast<double>(m.num_rows());
}

// Gradient of smooth_loss in (w, b); gradient of b returned last.
inline void smooth_gradient(const RuleMatrix& m, const std::vector<int>& labels,
                            const std::vector<double>& w, double b, std::vector<double>& grad_w,
                            double& grad_b) {
  grad_w.assign(m.num_rules, 0.0);
  grad_b = 0.0;
  for (std::size_t i = 0; i < m.num_rows(); ++i) {
    double z = b;
    const auto& row = m.rows[i];
    for (std::size_t j = 0; j < m.num_rules; ++j)
      if (row[j]) z += w[j];
    const double y = labels[i] ? 1.0 : -1.0;
    const double coef = -y * reg_detail::sigmoid_neg(y * z);
    for (std::size_t j = 0; j < m.num_rules; ++j)
      if (row[j]) grad_w[j] += coef;
    grad_b += coef;
  }
  const double n = static_cast<double>(m.num_rows());
  for (auto& g : grad_w) g /= n;
  grad_b /= n;
}

inline double l1_objective(const RuleMatrix& m, const std::vector<int>& labels,
                           const std::vector<double>& w, double b, double lambda) {
  double l1 = 0.0;
  for (double v : w) l1 += std::abs(v);
  return smooth_loss(m, labels, w, b) + lambda * l1;
}

// Largest violation of the first-order optimality conditions: for zero
// weights max(|grad| - lambda, 0), for nonzero weights |grad + lambda*sign|.
inline double kkt_residual(const RuleMatrix& m, const std::vector<int>& labels,
                           const RegressionModel& model) {
  std::vector<double> g;
  double gb;
  smooth_gradient(m, labels, model.weights, model.bias, g, gb);
  double worst = std::abs(gb);
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    const double w = model.weights[j];
    const double r = w == 0.0 ? std::max(0.0, std::abs(g[j]) - model.lambda)
                              : std::abs(g[j] + model.lambda * (w > 0 ? 1.0 : -1.0));
    worst = std::max(worst, r);
  }
  return worst;
}

// Proximal gradient (ISTA) with backtracking line search on the
// min (1/n) sum log(1+exp(-y(w.x+b))) + lambda*|w|_1 objective. The bias is
// unpenalized. The accepted step always decreases the objective; convergence
// is declared when the per-iteration decrease drops below `tolerance`.
inline RegressionModel fit(const RuleMatrix& m, const std::vector<int>& labels, double lambda,
                           double tolerance = 1e-8, std::size_t max_iters = 10000) {
  if (m.num_rows() == 0) throw InputError("regression fit: empty matrix");
  if (labels.size() != m.num_rows()) throw InputError("regression fit: label count mismatch");
  if (!(lambda > 0.0)) throw InputError("regression fit: lambda must be positive");
  bool has0 = false, has1 = false;
  for (int l : labels) (l ? has1 : has0) = true;
  if (!has0 || !has1) throw InputError("regression fit: labels contain a single class");

  RegressionModel model;
  model.lambda = lambda;
  model.weights.assign(m.num_rules, 0.0);
  model.bias = 0.0;

  std::vector<double> grad_w, w_next(m.num_rules);
  double grad_b = 0.0;
  double step = 1.0;
  double objective = l1_objective(m, labels, model.weights, model.bias, lambda);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    smooth_gradient(m, labels, model.weights, model.bias, grad_w, grad_b);
    const double smooth_here = smooth_loss(m, labels, model.weights, model.bias);

    double b_next = 0.0;
    while (true) {
      for (std::size_t j = 0; j < m.num_rules; ++j) {
        const double v = model.weights[j] - step * grad_w[j];
        const double thr = step * lambda;
        w_next[j] = v > thr ? v - thr : (v < -thr ? v + thr : 0.0);
      }
      b_next = model.bias - step * grad_b;

      double lin = 0.0, quad = 0.0;
      for (std::size_t j = 0; j < m.num_rules; ++j) {
        const double d = w_next[j] - model.weights[j];
        lin += grad_w[j] * d;
        quad += d * d;
      }
      const double db = b_next - model.bias;
      lin += grad_b * db;
      quad += db * db;
      const double bound = smooth_here + lin + quad / (2.0 * step);
      if (smooth_loss(m, labels, w_next, b_next) <= bound + 1e-15) break;
      step *= 0.5;
      if (step < 1e-18) break;  // numerically stuck; accept the tiny step
    }

    model.weights.swap(w_next);
    model.bias = b_next;
    model.iterations = iter + 1;
    const double next_objective = l1_objective(m, labels, model.weights, model.bias, lambda);
    model.objective_history.push_back(next_objective);
    if (objective - next_objective < tolerance) {
      model.converged = true;
      objective = next_objective;
      break;
    }
    objective = next_objective;
    step *= 1.2;  // optimistic growth; backtracking shrinks it again if needed
  }
  return model;
}

// 1 iff sigmoid(w.x + b) >= 0.5, i.e. the linear score is non-negative.
inline int predict(const RegressionModel& model, const std::vector<std::uint8_t>& rule_bits) {
  if (rule_bits.size() != model.weights.size())
    throw InputError("regression predict: vector length " + std::to_string(rule_bits.size()) +
                     " does not match " + std::to_string(model.weights.size()) + " weights");
  double z = model.bias;
  for (std::size_t j = 0; j < model.weights.size(); ++j)
    if (rule_bits[j]) z += model.weights[j];
  return z >= 0.0 ? 1 : 0;
}

inline double importance(const RegressionModel& model, std::size_t rule_index) {
  if (rule_index >= model.weights.size())
    throw InputError("importance: rule index out of range");
  return model.weights[rule_index];
}

inline double accuracy(const RegressionModel& model, const RuleMatrix& m,
                       const std::vector<int>& labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m.num_rows(); ++i)
    if (predict(model, m.rows[i]) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(m.num_rows());
}

// Stratified k-fold cross-validation over the lambda grid; returns the value
// with the best mean validation accuracy, preferring the larger (sparser)
// lambda on ties.
inline double select_lambda(const RuleMatrix& m, const std::vector<int>& labels,
                            std::vector<double> grid, std::size_t folds, std::uint64_t seed) {
  if (grid.empty()) throw InputError("select_lambda: empty grid");
  if (folds < 2) throw InputError("select_lambda: need at least 2 folds");
  std::sort(grid.begin(), grid.end());

  // stratified fold assignment
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i] ? 1 : 0].push_back(i);
  Rng rng = Rng(seed).derive('c');
  std::vector<std::size_t> fold_of(labels.size(), 0);
  for (int c : {0, 1}) {
    auto idx = by_class[c];
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) fold_of[idx[i]] = i % folds;
  }

  double best_lambda = grid.front();
  double best_acc = -1.0;
  for (double lambda : grid) {
    double acc_sum = 0.0;
    std::size_t used_folds = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      RuleMatrix train, val;
      train.num_rules = val.num_rules = m.num_rules;
      std::vector<int> ytr, yval;
      for (std::size_t i = 0; i < m.num_rows(); ++i) {
        if (fold_of[i] == f) {
          val.rows.push_back(m.rows[i]);
          yval.push_back(labels[i]);
        } else {
          train.rows.push_back(m.rows[i]);
          ytr.push_back(labels[i]);
        }
      }
      if (val.rows.empty()) continue;
      bool has0 = false, has1 = false;
      for (int l : ytr) (l ? has1 : has0) = true;
      if (!has0 || !has1) continue;
      RegressionModel fold_model = fit(train, ytr, lambda);
      acc_sum += accuracy(fold_model, val, yval);
      ++used_folds;
    }
    if (used_folds == 0) throw InputError("select_lambda: no usable folds");
    const double mean_acc = acc_sum / static_cast<double>(used_folds);
    if (mean_acc >= best_acc) {
      best_acc = mean_acc;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

}  // namespace dpv
