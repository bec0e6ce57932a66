#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dpv/event_log.hpp"
#include "dpv/util.hpp"

namespace dpv {

enum class TemplateKind {
  AtLeast1,
  End,
  RespondedExistence,
  Response,
  AlternateResponse,
  ChainResponse,
  Precedence,
  AlternatePrecedence,
  ChainPrecedence,
  Succession,
  AlternateSuccession,
  ChainSuccession,
  CoExistence,
  NotCoExistence,
  NotSuccession,
  NotChainSuccession,
};

constexpr std::array<TemplateKind, 16> kTemplateCatalog = {
    TemplateKind::AtLeast1,          TemplateKind::End,
    TemplateKind::RespondedExistence, TemplateKind::Response,
    TemplateKind::AlternateResponse, TemplateKind::ChainResponse,
    TemplateKind::Precedence,        TemplateKind::AlternatePrecedence,
    TemplateKind::ChainPrecedence,   TemplateKind::Succession,
    TemplateKind::AlternateSuccession, TemplateKind::ChainSuccession,
    TemplateKind::CoExistence,       TemplateKind::NotCoExistence,
    TemplateKind::NotSuccession,     TemplateKind::NotChainSuccession,
};

inline int template_arity(TemplateKind k) {
  return (k == TemplateKind::AtLeast1 || k == TemplateKind::End) ? 1 : 2;
}

inline const char* template_name(TemplateKind k) {
  switch (k) {
    case TemplateKind::AtLeast1: return "AtLeast1";
    case TemplateKind::End: return "End";
    case TemplateKind::RespondedExistence: return "RespondedExistence";
    case TemplateKind::Response: return "Response";
    case TemplateKind::AlternateResponse: return "AlternateResponse";
    case TemplateKind::ChainResponse: return "ChainResponse";
    case TemplateKind::Precedence: return "Precedence";
    case TemplateKind::AlternatePrecedence: return "AlternatePrecedence";
    case TemplateKind::ChainPrecedence: return "ChainPrecedence";
    case TemplateKind::Succession: return "Succession";
    case TemplateKind::AlternateSuccession: return "AlternateSuccession";
    case TemplateKind::ChainSuccession: return "ChainSuccession";
    case TemplateKind::CoExistence: return "CoExistence";
    case TemplateKind::NotCoExistence: return "NotCoExistence";
    case TemplateKind::NotSuccession: return "NotSuccession";
    case TemplateKind::NotChainSuccession: return "NotChainSuccession";
  }
  return "?";
}

enum class Outcome { satisfied, violated, vac_satisfied };

constexpr std::array<Outcome, 3> kOutcomes = {Outcome::satisfied, Outcome::violated,
                                              Outcome::vac_satisfied};

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::satisfied: return "satisfied";
    case Outcome::violated: return "violated";
    case Outcome::vac_satisfied: return "vac-satisfied";
  }
  return "?";
}

struct Constraint {
  TemplateKind kind;
  std::string a;
  std::string b;  // empty for unary templates

  auto operator<=>(const Constraint&) const = default;
};

// Textual form used in all reports: Template(arg) or Template(arg1,arg2).
inline std::string to_string(const Constraint& c) {
  std::string s = template_name(c.kind);
  s += '(';
  s += c.a;
  if (template_arity(c.kind) == 2) {
    s += ',';
    s += c.b;
  }
  s += ')';
  return s;
}

inline Constraint parse_constraint(const std::string& text) {
  auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')')
    throw InputError("bad constraint text '" + text + "'");
  const std::string name = text.substr(0, open);
  const std::string args = text.substr(open + 1, text.size() - open - 2);
  for (TemplateKind k : kTemplateCatalog) {
    if (name == template_name(k)) {
      Constraint c{k, "", ""};
      auto comma = args.find(',');
      if (template_arity(k) == 1) {
        if (comma != std::string::npos) throw InputError(name + " takes one argument");
        c.a = args;
      } else {
        if (comma == std::string::npos) throw InputError(name + " takes two arguments");
        c.a = args.substr(0, comma);
        c.b = args.substr(comma + 1);
        if (c.a == c.b) throw InputError(name + ": arguments must differ");
      }
      return c;
    }
  }
  throw InputError("unknown template '" + name + "'");
}

namespace detail {

// Occurrence positions of the two argument activities within one trace.
struct Occurrences {
  std::vector<int> a, b;
  int n = 0;
};

inline Occurrences occurrences(const Trace& t, const Constraint& c) {
  Occurrences occ;
  occ.n = static_cast<int>(t.activities.size());
  for (int i = 0; i < occ.n; ++i) {
    if (t.activities[i] == c.a) occ.a.push_back(i);
    if (template_arity(c.kind) == 2 && t.activities[i] == c.b) occ.b.push_back(i);
  }
  return occ;
}

inline bool next_in(const std::vector<int>& v, int after, int before /*exclusive*/) {
  for (int p : v)
    if (p > after && p < before) return true;
  return false;
}

// Response-family target over all activations (occurrences of `act`),
// targets in `tgt`. Returns true when every activation meets the target.
inline bool response_ok(const std::vector<int>& act, const std::vector<int>& tgt) {
  if (act.empty()) return true;
  return !tgt.empty() && tgt.back() > act.back();
}

inline bool alternate_response_ok(const std::vector<int>& act, const std::vector<int>& tgt, int n) {
  for (std::size_t i = 0; i < act.size(); ++i) {
    const int upper = (i + 1 < act.size()) ? act[i + 1] : n;
    if (!next_in(tgt, act[i], upper)) return false;
  }
  return true;
}

inline bool chain_response_ok(const std::vector<int>& act, const Trace& t, const std::string& b) {
  for (int p : act) {
    if (p + 1 >= static_cast<int>(t.activities.size()) || t.activities[p + 1] != b) return false;
  }
  return true;
}

inline bool precedence_ok(const std::vector<int>& act_b, const std::vector<int>& tgt_a) {
  for (int p : act_b)
    if (tgt_a.empty() || tgt_a.front() >= p) return false;
  return true;
}

inline bool alternate_precedence_ok(const std::vector<int>& act_b, const std::vector<int>& tgt_a) {
  for (std::size_t i = 0; i < act_b.size(); ++i) {
    const int lower = (i > 0) ? act_b[i - 1] : -1;
    if (!next_in(tgt_a, lower, act_b[i])) return false;
  }
  return true;
}

inline bool chain_precedence_ok(const std::vector<int>& act_b, const Trace& t, const std::string& a) {
  for (int p : act_b) {
    if (p == 0 || t.activities[p - 1] != a) return false;
  }
  return true;
}

inline bool no_b_after_any_a(const std::vector<int>& occ_a, const std::vector<int>& occ_b) {
  if (occ_a.empty() || occ_b.empty()) return true;
  return occ_b.back() < occ_a.front();
}

inline bool no_immediate_b(const std::vector<int>& occ_a, const Trace& t, const std::string& b) {
  for (int p : occ_a)
    if (p + 1 < static_cast<int>(t.activities.size()) && t.activities[p + 1] == b) return false;
  return true;
}

}  // namespace detail

// Three-valued evaluation. Activation/target per template:
//   AtLeast1(a)        activation: trace non-empty      target: a occurs
//   End(a)             activation: trace non-empty      target: last activity is a
//   RespondedExistence activation: a occurs             target: b occurs anywhere
//   Response           activation: each a               target: some b strictly after
//   AlternateResponse  activation: each a               target: b before the next a
//   ChainResponse      activation: each a               target: immediate successor is b
//   Precedence         activation: each b               target: some a strictly before
//   AlternatePrecedence activation: each b              target: an a after the previous b
//   ChainPrecedence    activation: each b               target: immediate predecessor is a
//   Succession         activation: a or b occurs        target: Response and Precedence parts
//   AlternateSuccession / ChainSuccession: analogous conjunctions
//   CoExistence        activation: a or b occurs        target: the other occurs
//   NotCoExistence     activation: a or b occurs        target: the other does not occur
//   NotSuccession      activation: each a               target: no b after it
//   NotChainSuccession activation: each a               target: immediate successor is not b
inline Outcome evaluate(const Trace& t, const Constraint& c) {
  using namespace detail;
  const int n = static_cast<int>(t.activities.size());

  if (c.kind == TemplateKind::AtLeast1 || c.kind == TemplateKind::End) {
    if (n == 0) return Outcome::vac_satisfied;
    bool ok = c.kind == TemplateKind::AtLeast1
                  ? std::find(t.activities.begin(), t.activities.end(), c.a) != t.activities.end()
                  : t.activities.back() == c.a;
    return ok ? Outcome::satisfied : Outcome::violated;
  }

  const Occurrences occ = occurrences(t, c);
  const bool has_a = !occ.a.empty();
  const bool has_b = !occ.b.empty();

  switch (c.kind) {
    case TemplateKind::RespondedExistence:
      if (!has_a) return Outcome::vac_satisfied;
      return has_b ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::Response:
      if (!has_a) return Outcome::vac_satisfied;
      return response_ok(occ.a, occ.b) ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::AlternateResponse:
      if (!has_a) return Outcome::vac_satisfied;
      return alternate_response_ok(occ.a, occ.b, n) ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::ChainResponse:
      if (!has_a) return Outcome::vac_satisfied;
      return chain_response_ok(occ.a, t, c.b) ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::Precedence:
      if (!has_b) return Outcome::vac_satisfied;
      return precedence_ok(occ.b, occ.a) ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::AlternatePrecedence:
      if (!has_b) return Outcome::vac_satisfied;
      return alternate_precedence_ok(occ.b, occ.a) ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::ChainPrecedence:
      if (!has_b) return Outcome::vac_satisfied;
      return chain_precedence_ok(occ.b, t, c.a) ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::Succession:
      if (!has_a && !has_b) return Outcome::vac_satisfied;
      return response_ok(occ.a, occ.b) && precedence_ok(occ.b, occ.a)
                 ? Outcome::satisfied
                 : Outcome::violated;
    case TemplateKind::AlternateSuccession:
      if (!has_a && !has_b) return Outcome::vac_satisfied;
      return alternate_response_ok(occ.a, occ.b, n) && alternate_precedence_ok(occ.b, occ.a)
                 ? Outcome::satisfied
                 : Outcome::violated;
    case TemplateKind::ChainSuccession:
      if (!has_a && !has_b) return Outcome::vac_satisfied;
      return chain_response_ok(occ.a, t, c.b) && chain_precedence_ok(occ.b, t, c.a)
                 ? Outcome::satisfied
                 : Outcome::violated;
    case TemplateKind::CoExistence:
      if (!has_a && !has_b) return Outcome::vac_satisfied;
      return (has_a && has_b) ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::NotCoExistence:
      if (!has_a && !has_b) return Outcome::vac_satisfied;
      return (has_a && has_b) ? Outcome::violated : Outcome::satisfied;
    case TemplateKind::NotSuccession:
      if (!has_a) return Outcome::vac_satisfied;
      return no_b_after_any_a(occ.a, occ.b) ? Outcome::satisfied : Outcome::violated;
    case TemplateKind::NotChainSuccession:
      if (!has_a) return Outcome::vac_satisfied;
      return no_immediate_b(occ.a, t, c.b) ? Outcome::satisfied : Outcome::violated;
    default:
      throw Error("unreachable template kind");
  }
}

// All catalog instantiations over the log's alphabet that at least one trace
// satisfies (non-vacuously). Quadratic in |alphabet|, hence the cap.
inline std::vector<Constraint> discover_constraints(const EventLog& log,
                                                    std::size_t activity_cap = 100) {
  if (log.empty()) throw InputError("discover_constraints: empty log");
  const auto& alphabet = log.alphabet();
  if (alphabet.size() > activity_cap)
    throw InputError("discover_constraints: alphabet has " + std::to_string(alphabet.size()) +
                     " activities, above the cap of " + std::to_string(activity_cap) +
                     "; filter activities or raise the cap");

  std::vector<Constraint> candidates;
  for (TemplateKind k : kTemplateCatalog) {
    if (template_arity(k) == 1) {
      for (const auto& a : alphabet) candidates.push_back({k, a, ""});
    } else {
      for (const auto& a : alphabet)
        for (const auto& b : alphabet)
          if (a != b) candidates.push_back({k, a, b});
    }
  }
  std::vector<Constraint> kept;
  for (const auto& c : candidates) {
    for (const auto& t : log.traces()) {
      if (evaluate(t, c) == Outcome::satisfied) {
        kept.push_back(c);
        break;
      }
    }
  }
  return kept;
}

namespace detail {

// Subsumption chains, strictest first. Pruning keeps the strictest member of
// each chain among constraints with identical evaluation vectors.
inline const std::vector<std::vector<TemplateKind>>& subsumption_chains() {
  static const std::vector<std::vector<TemplateKind>> chains = {
      {TemplateKind::ChainResponse, TemplateKind::AlternateResponse, TemplateKind::Response,
       TemplateKind::RespondedExistence},
      {TemplateKind::ChainPrecedence, TemplateKind::AlternatePrecedence, TemplateKind::Precedence},
      {TemplateKind::ChainSuccession, TemplateKind::AlternateSuccession, TemplateKind::Succession,
       TemplateKind::CoExistence},
      {TemplateKind::NotSuccession, TemplateKind::NotChainSuccession},
  };
  return chains;
}

}  // namespace detail

inline std::vector<Outcome> evaluation_vector(const Constraint& c, const EventLog& log) {
  std::vector<Outcome> v;
  v.reserve(log.size());
  for (const auto& t : log.traces()) v.push_back(evaluate(t, c));
  return v;
}

// For every subsumption pair (strict, weak) over the same arguments with
// identical evaluation vectors on `log`, the weak constraint is dropped.
inline std::vector<Constraint> prune_subsumption(const std::vector<Constraint>& constraints,
                                                 const EventLog& log) {
  std::map<Constraint, std::size_t> index;
  for (std::size_t i = 0; i < constraints.size(); ++i) index[constraints[i]] = i;

  std::vector<std::vector<Outcome>> vectors(constraints.size());
  auto vec_of = [&](std::size_t i) -> const std::vector<Outcome>& {
    if (vectors[i].empty() && !log.empty()) vectors[i] = evaluation_vector(constraints[i], log);
    return vectors[i];
  };

  std::vector<bool> removed(constraints.size(), false);
  for (const auto& chain : detail::subsumption_chains()) {
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      const auto& strict = constraints[i];
      auto pos = std::find(chain.begin(), chain.end(), strict.kind);
      if (pos == chain.end()) continue;
      for (auto weak_kind = pos + 1; weak_kind != chain.end(); ++weak_kind) {
        Constraint weak{*weak_kind, strict.a, strict.b};
        auto it = index.find(weak);
        if (it == index.end()) continue;
        if (vec_of(i) == vec_of(it->second)) removed[it->second] = true;
      }
    }
  }
  std::vector<Constraint> out;
  for (std::size_t i = 0; i < constraints.size(); ++i)
    if (!removed[i]) out.push_back(constraints[i]);
  return out;
}

}  // namespace dpv
