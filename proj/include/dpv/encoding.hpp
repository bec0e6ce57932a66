#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dpv/csv.hpp"
#include "dpv/declare.hpp"

namespace dpv {

// Ordered list of (constraint, outcome) features. Order is canonical
// (constraint text, then outcome declaration order), so indices are stable
// no matter how the constraint set was produced.
class FeatureSpace {
 public:
  FeatureSpace() = default;

  explicit FeatureSpace(std::vector<Constraint> constraints) {
    if (constraints.empty()) throw InputError("feature space: empty constraint set");
    std::sort(constraints.begin(), constraints.end(),
              [](const Constraint& x, const Constraint& y) { return to_string(x) < to_string(y); });
    constraints.erase(std::unique(constraints.begin(), constraints.end()), constraints.end());
    constraints_ = std::move(constraints);
  }

  std::size_t num_constraints() const { return constraints_.size(); }
  std::size_t size() const { return constraints_.size() * kOutcomes.size(); }

  const Constraint& constraint_of(std::size_t feature) const {
    return constraints_[feature / kOutcomes.size()];
  }
  Outcome outcome_of(std::size_t feature) const {
    return kOutcomes[feature % kOutcomes.size()];
  }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  std::string label(std::size_t feature) const {
    return to_string(constraint_of(feature)) + "|" + outcome_name(outcome_of(feature));
  }

  // Index of (constraint, outcome); the constraint must be in the space.
  std::size_t index_of(const Constraint& c, Outcome o) const {
    auto it = std::lower_bound(
        constraints_.begin(), constraints_.end(), c,
        [](const Constraint& x, const Constraint& y) { return to_string(x) < to_string(y); });
    if (it == constraints_.end() || !(*it == c))
      throw InputError("feature space: unknown constraint " + to_string(c));
    std::size_t ci = static_cast<std::size_t>(it - constraints_.begin());
    for (std::size_t k = 0; k < kOutcomes.size(); ++k)
      if (kOutcomes[k] == o) return ci * kOutcomes.size() + k;
    throw Error("unreachable outcome");
  }

 private:
  std::vector<Constraint> constraints_;
};

inline FeatureSpace build_feature_space(std::vector<Constraint> constraints) {
  return FeatureSpace(std::move(constraints));
}

using FeatureVector = std::vector<std::uint8_t>;

// One-hot per constraint: exactly one of the three outcome bits set.
inline FeatureVector encode(const Trace& t, const FeatureSpace& space) {
  FeatureVector bits(space.size(), 0);
  for (std::size_t ci = 0; ci < space.num_constraints(); ++ci) {
    const Outcome o = evaluate(t, space.constraints()[ci]);
    for (std::size_t k = 0; k < kOutcomes.size(); ++k)
      if (kOutcomes[k] == o) bits[ci * kOutcomes.size() + k] = 1;
  }
  return bits;
}

inline std::vector<FeatureVector> encode_log(const EventLog& log, const FeatureSpace& space) {
  std::vector<FeatureVector> rows;
  rows.reserve(log.size());
  for (const auto& t : log.traces()) rows.push_back(encode(t, space));
  return rows;
}

// A literal is (feature index, expected bit). Plain Def-style conjunctions
// use expected bit 1; the 0 polarity represents left branches of decision
// trees, which report-level rules need.
struct RuleLiteral {
  std::size_t feature;
  std::uint8_t expected;

  auto operator<=>(const RuleLiteral&) const = default;
};

struct Rule {
  std::vector<RuleLiteral> literals;  // sorted by feature index, indices distinct
  int tree_index = -1;                // provenance
  int leaf_index = -1;

  bool same_literals(const Rule& other) const { return literals == other.literals; }
};

inline int rule_holds(const FeatureVector& bits, const Rule& rule) {
  for (const auto& lit : rule.literals) {
    if (lit.feature >= bits.size())
      throw InputError("rule literal index " + std::to_string(lit.feature) +
                       " out of range for " + std::to_string(bits.size()) + " features");
    if (bits[lit.feature] != lit.expected) return 0;
  }
  return 1;
}

inline std::string rule_text(const Rule& rule, const FeatureSpace& space) {
  if (rule.literals.empty()) return "(true)";
  std::string s;
  for (std::size_t i = 0; i < rule.literals.size(); ++i) {
    if (i) s += " AND ";
    const auto& lit = rule.literals[i];
    s += "(" + to_string(space.constraint_of(lit.feature)) + "," +
         outcome_name(space.outcome_of(lit.feature)) + ")=" + (lit.expected ? "1" : "0");
  }
  return s;
}

// Encoded matrix as CSV: rows are case ids, columns are feature labels.
inline void write_encoded_csv(std::ostream& out, const EventLog& log,
                              const std::vector<FeatureVector>& rows, const FeatureSpace& space) {
  std::vector<std::string> header{"case_id"};
  for (std::size_t f = 0; f < space.size(); ++f) header.push_back(space.label(f));
  csv::write_row(out, header);
  for (std::size_t i = 0; i < log.size(); ++i) {
    std::vector<std::string> row{log[i].case_id};
    for (auto b : rows[i]) row.push_back(b ? "1" : "0");
    csv::write_row(out, row);
  }
}

}  // namespace dpv
