#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpv/csv.hpp"
#include "dpv/util.hpp"
#include "dpv/xml.hpp"

namespace dpv {

struct Trace {
  std::string case_id;
  std::vector<std::string> activities;

  bool operator==(const Trace&) const = default;
};

// Set of traces with pairwise distinct case ids. Trace order follows first
// appearance in the source; the alphabet is derived on construction.
class EventLog {
 public:
  EventLog() = default;

  explicit EventLog(std::vector<Trace> traces) : traces_(std::move(traces)) {
    std::set<std::string> seen;
    for (const auto& t : traces_) {
      if (!seen.insert(t.case_id).second)
        throw InputError("event log: duplicate case id '" + t.case_id + "'");
      for (const auto& a : t.activities) alphabet_.insert(a);
    }
  }

  const std::vector<Trace>& traces() const { return traces_; }
  const std::set<std::string>& alphabet() const { return alphabet_; }
  std::size_t size() const { return traces_.size(); }
  bool empty() const { return traces_.empty(); }
  const Trace& operator[](std::size_t i) const { return traces_[i]; }

 private:
  std::vector<Trace> traces_;
  std::set<std::string> alphabet_;
};

// Total 0/1 labeling over a log's case ids; 1 = desirable.
class LabelFunction {
 public:
  LabelFunction() = default;
  explicit LabelFunction(std::map<std::string, int> mapping) : map_(std::move(mapping)) {}

  int operator()(const std::string& case_id) const {
    auto it = map_.find(case_id);
    if (it == map_.end()) throw InputError("label function: no label for case '" + case_id + "'");
    return it->second;
  }
  int operator()(const Trace& t) const { return (*this)(t.case_id); }

  void set(const std::string& case_id, int label) { map_[case_id] = label; }
  const std::map<std::string, int>& mapping() const { return map_; }

  void check_total(const EventLog& log) const {
    for (const auto& t : log.traces()) (void)(*this)(t.case_id);
  }

 private:
  std::map<std::string, int> map_;
};

// Per-event timestamps (ms since epoch), aligned with each trace's
// activities. Kept apart from EventLog: only the duration labeler needs time.
using TimeTable = std::map<std::string, std::vector<std::int64_t>>;

struct ParsedLog {
  EventLog log;
  TimeTable times;
};

namespace detail {

// days from civil date (proleptic Gregorian), no timezone database needed
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// ISO-8601 timestamps ("2024-05-01T12:30:00", optional ".fff" and zone), or
// a bare number taken as epoch seconds.
inline std::optional<std::int64_t> parse_timestamp_ms(const std::string& raw) {
  std::string s = raw;
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  s = s.substr(b);
  if (s.empty()) return std::nullopt;

  bool numeric = true;
  for (char c : s)
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.')) numeric = false;
  if (numeric) {
    try {
      return static_cast<std::int64_t>(std::stod(s) * 1000.0);
    } catch (...) {
      return std::nullopt;
    }
  }

  int y, mo, d, h = 0, mi = 0;
  double sec = 0.0;
  char sep;
  std::istringstream in(s);
  in >> y;
  if (in.get() != '-') return std::nullopt;
  in >> mo;
  if (in.get() != '-') return std::nullopt;
  in >> d;
  if (!in) return std::nullopt;
  sep = static_cast<char>(in.get());
  std::int64_t offset_ms = 0;
  if (sep == 'T' || sep == ' ') {
    in >> h;
    if (in.get() != ':') return std::nullopt;
    in >> mi;
    if (in.peek() == ':') {
      in.get();
      in >> sec;
    }
    if (!in) return std::nullopt;
    int z = in.get();
    if (z == 'Z') {
      // UTC
    } else if (z == '+' || z == '-') {
      int zh = 0, zm = 0;
      in >> zh;
      if (in.peek() == ':') {
        in.get();
        in >> zm;
      }
      offset_ms = (z == '+' ? -1 : 1) * (zh * 3600LL + zm * 60LL) * 1000;
    }
  } else if (sep != EOF && sep != '\0') {
    return std::nullopt;
  }
  std::int64_t days = days_from_civil(y, mo, d);
  return days * 86400000LL + h * 3600000LL + mi * 60000LL +
         static_cast<std::int64_t>(sec * 1000.0) + offset_ms;
}

struct RawEvent {
  std::string activity;
  std::int64_t time_ms;
  std::size_t input_order;
};

inline ParsedLog assemble(std::vector<std::string> case_order,
                          std::map<std::string, std::vector<RawEvent>> events) {
  std::vector<Trace> traces;
  TimeTable times;
  for (const auto& cid : case_order) {
    auto& evs = events[cid];
    std::stable_sort(evs.begin(), evs.end(), [](const RawEvent& a, const RawEvent& b) {
      return a.time_ms < b.time_ms;  // ties keep input order (stable)
    });
    Trace t;
    t.case_id = cid;
    auto& tt = times[cid];
    for (const auto& e : evs) {
      t.activities.push_back(e.activity);
      tt.push_back(e.time_ms);
    }
    traces.push_back(std::move(t));
  }
  return ParsedLog{EventLog(std::move(traces)), std::move(times)};
}

}  // namespace detail

struct CsvColumns {
  std::string case_id = "case";
  std::string activity = "activity";
  std::string timestamp = "timestamp";
};

// CSV with a header row, RFC-4180 quoting. Events are ordered per case by
// timestamp, input order breaking ties.
inline ParsedLog parse_csv(const std::string& path, const CsvColumns& cols = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) throw InputError(path + ": empty file");

  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < row.size(); ++i)
      if (row[i] == name) return static_cast<long>(i);
    throw InputError(path + ": missing column '" + name + "'");
  };
  const long ci = find_col(cols.case_id);
  const long ai = find_col(cols.activity);
  const long ti = find_col(cols.timestamp);

  std::vector<std::string> case_order;
  std::map<std::string, std::vector<detail::RawEvent>> events;
  std::size_t order = 0;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    const long need = std::max({ci, ai, ti});
    if (static_cast<long>(row.size()) <= need)
      throw InputError(path + ": line " + std::to_string(reader.line()) + ": too few fields");
    auto ms = detail::parse_timestamp_ms(row[ti]);
    if (!ms)
      throw InputError(path + ": line " + std::to_string(reader.line()) +
                       ": unparseable timestamp '" + row[ti] + "'");
    const std::string& cid = row[ci];
    if (events.find(cid) == events.end()) case_order.push_back(cid);
    events[cid].push_back({row[ai], *ms, order++});
  }
  if (case_order.empty()) throw InputError(path + ": no event rows");
  return detail::assemble(std::move(case_order), std::move(events));
}

// XES subset: <log><trace><string key="concept:name"/><event>...</event></trace></log>
// with concept:name for ids/activities and time:timestamp for ordering.
// Unknown attributes and extensions are ignored.
inline ParsedLog parse_xes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  xml::Node root = xml::parse(buf.str());
  if (root.name != "log") throw InputError(path + ": root element is <" + root.name + ">, expected <log>");

  auto attr_of = [](const xml::Node& n, const std::string& key) -> std::optional<std::string> {
    for (const auto& c : n.children) {
      if ((c.name == "string" || c.name == "date" || c.name == "int" || c.name == "float") &&
          c.attr("key") == key)
        return c.attr("value");
    }
    return std::nullopt;
  };

  std::vector<std::string> case_order;
  std::map<std::string, std::vector<detail::RawEvent>> events;
  std::size_t order = 0;
  std::size_t trace_index = 0;
  for (const auto* tr : root.all("trace")) {
    auto cid = attr_of(*tr, "concept:name");
    if (!cid)
      throw InputError(path + ": trace " + std::to_string(trace_index) + " has no concept:name");
    if (events.find(*cid) != events.end())
      throw InputError(path + ": duplicate case id '" + *cid + "'");
    case_order.push_back(*cid);
    auto& evs = events[*cid];
    for (const auto* ev : tr->all("event")) {
      auto act = attr_of(*ev, "concept:name");
      if (!act)
        throw InputError(path + ": event without concept:name in trace '" + *cid + "'");
      std::int64_t ms = 0;
      if (auto ts = attr_of(*ev, "time:timestamp")) {
        auto parsed = detail::parse_timestamp_ms(*ts);
        if (!parsed)
          throw InputError(path + ": unparseable time:timestamp '" + *ts + "'");
        ms = *parsed;
      } else {
        ms = static_cast<std::int64_t>(order);  // no timestamp: keep document order
      }
      evs.push_back({*act, ms, order++});
    }
    ++trace_index;
  }
  if (case_order.empty()) throw InputError(path + ": log has no traces");
  return detail::assemble(std::move(case_order), std::move(events));
}

// Two-column CSV (case_id, label in {0,1}); header row optional.
inline LabelFunction parse_labels_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  csv::Reader reader(in);
  std::vector<std::string> row;
  LabelFunction labels;
  bool first = true;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() < 2)
      throw InputError(path + ": line " + std::to_string(reader.line()) + ": expected case_id,label");
    if (first && (row[1] != "0" && row[1] != "1")) {
      first = false;
      continue;  // header
    }
    first = false;
    if (row[1] != "0" && row[1] != "1")
      throw InputError(path + ": line " + std::to_string(reader.line()) +
                       ": label must be 0 or 1, got '" + row[1] + "'");
    labels.set(row[0], row[1] == "1" ? 1 : 0);
  }
  return labels;
}

enum class DesirableSide { below, above };

// Case duration = last event time - first event time. A duration strictly on
// the desirable side of the threshold gets label 1; equality goes to the
// complementary class. Single-event traces have duration 0.
inline LabelFunction label_by_duration(const EventLog& log, const TimeTable& times,
                                       std::int64_t threshold_ms, DesirableSide side) {
  LabelFunction labels;
  for (const auto& t : log.traces()) {
    auto it = times.find(t.case_id);
    if (it == times.end() || it->second.empty())
      throw InputError("label_by_duration: no timestamps for case '" + t.case_id + "'");
    const auto& tt = it->second;
    const std::int64_t duration = tt.back() - tt.front();
    const bool desirable =
        side == DesirableSide::below ? duration < threshold_ms : duration > threshold_ms;
    labels.set(t.case_id, desirable ? 1 : 0);
  }
  return labels;
}

struct SplitResult {
  EventLog train;
  EventLog test;
};

// Stratified split: per class, a seeded shuffle and a rounded ratio cut,
// clamped so both folds keep at least one trace of each class.
inline SplitResult split_train_test(const EventLog& log, const LabelFunction& labels,
                                    double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("split: ratio must be in (0,1)");
  labels.check_total(log);

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < log.size(); ++i) by_class[labels(log[i])].push_back(i);
  for (int c : {0, 1})
    if (by_class[c].size() < 2)
      throw InputError("split: class " + std::to_string(c) + " has fewer than 2 traces, cannot stratify");

  Rng rng = Rng(seed).derive('s');
  std::vector<bool> in_train(log.size(), false);
  for (int c : {0, 1}) {
    auto idx = by_class[c];
    rng.shuffle(idx);
    std::size_t k = static_cast<std::size_t>(ratio * static_cast<double>(idx.size()) + 0.5);
    k = std::min(std::max<std::size_t>(k, 1), idx.size() - 1);
    for (std::size_t i = 0; i < k; ++i) in_train[idx[i]] = true;
  }
  std::vector<Trace> train, test;
  for (std::size_t i = 0; i < log.size(); ++i)
    (in_train[i] ? train : test).push_back(log[i]);
  return SplitResult{EventLog(std::move(train)), EventLog(std::move(test))};
}

// Equalizes class counts at the minority count: minority kept whole, majority
// sampled uniformly without replacement. Trace order of the input preserved.
inline EventLog undersample(const EventLog& log, const LabelFunction& labels, std::uint64_t seed) {
  labels.check_total(log);
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < log.size(); ++i) by_class[labels(log[i])].push_back(i);
  if (by_class[0].empty() || by_class[1].empty())
    throw InputError("undersample: both classes must be non-empty");

  const int majority = by_class[1].size() > by_class[0].size() ? 1 : 0;
  const std::size_t target = by_class[1 - majority].size();
  auto& maj = by_class[majority];
  if (maj.size() == target) return log;

  Rng rng = Rng(seed).derive('u');
  rng.shuffle(maj);
  maj.resize(target);
  std::vector<bool> keep(log.size(), false);
  for (auto i : by_class[1 - majority]) keep[i] = true;
  for (auto i : maj) keep[i] = true;
  std::vector<Trace> traces;
  for (std::size_t i = 0; i < log.size(); ++i)
    if (keep[i]) traces.push_back(log[i]);
  return EventLog(std::move(traces));
}

}  // namespace dpv
