#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpv/conformance.hpp"
#include "dpv/discovery.hpp"
#include "dpv/encoding.hpp"
#include "dpv/ensemble.hpp"
#include "dpv/event_log.hpp"
#include "dpv/figures.hpp"
#include "dpv/pnml.hpp"
#include "dpv/rule_clustering.hpp"
#include "dpv/sparse_regression.hpp"
#include "dpv/util.hpp"

namespace dpv {

// Degenerate but completed run (e.g. zero important rules): exit code 3.
struct DegenerateResult : Error {
  using Error::Error;
};

struct PipelineConfig {
  std::string input_path;
  std::string format;  // "csv", "xes", or "" to pick by extension
  CsvColumns columns;

  std::string labels_path;             // 2-column CSV; empty when labeling by duration
  double label_threshold_hours = -1.0;  // used when labels_path is empty
  DesirableSide desirable_side = DesirableSide::below;

  double ratio = 0.7;
  std::uint64_t seed = 0;
  bool seed_set = false;  // a seed is mandatory for stochastic stages

  std::vector<std::string> model_kinds = {"random_forest", "gradient_boosting"};
  std::vector<int> trees_grid = {50, 100};
  std::vector<int> depth_grid = {3, 5};
  std::vector<double> learning_rate_grid = {0.1, 0.3};
  std::vector<double> lambda_grid = {0.001, 0.01, 0.1, 1.0};
  std::size_t cv_folds = 5;
  bool pool_rules = false;  // pool rules from the best setting of each kind

  std::size_t clusters = 2;            // K
  double frequency_threshold = 0.2;    // discovery f
  std::size_t max_activities = 100;
  std::size_t state_cap = 1000000;
  std::string output_dir = "out";
};

namespace config_detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace config_detail

// Versioned key-value config file: one `key = value` per line, `#` comments.
inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  PipelineConfig cfg;
  std::string line;
  long lineno = 0;
  bool version_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
      return s;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    try {
      using config_detail::split_list;
      if (key == "config_version") {
        if (value != "1") throw InputError("unsupported config_version " + value);
        version_seen = true;
      } else if (key == "input") cfg.input_path = value;
      else if (key == "format") cfg.format = value;
      else if (key == "case_column") cfg.columns.case_id = value;
      else if (key == "activity_column") cfg.columns.activity = value;
      else if (key == "timestamp_column") cfg.columns.timestamp = value;
      else if (key == "labels") cfg.labels_path = value;
      else if (key == "label_threshold_hours") cfg.label_threshold_hours = std::stod(value);
      else if (key == "label_desirable_side") {
        if (value == "below") cfg.desirable_side = DesirableSide::below;
        else if (value == "above") cfg.desirable_side = DesirableSide::above;
        else throw InputError("label_desirable_side must be below or above");
      } else if (key == "ratio") cfg.ratio = std::stod(value);
      else if (key == "seed") {
        cfg.seed = std::stoull(value);
        cfg.seed_set = true;
      } else if (key == "model_kinds") cfg.model_kinds = split_list(value);
      else if (key == "trees_grid") {
        cfg.trees_grid.clear();
        for (const auto& v : split_list(value)) cfg.trees_grid.push_back(std::stoi(v));
      } else if (key == "depth_grid") {
        cfg.depth_grid.clear();
        for (const auto& v : split_list(value)) cfg.depth_grid.push_back(std::stoi(v));
      } else if (key == "learning_rate_grid") {
        cfg.learning_rate_grid.clear();
        for (const auto& v : split_list(value)) cfg.learning_rate_grid.push_back(std::stod(v));
      } else if (key == "lambda_grid") {
        cfg.lambda_grid.clear();
        for (const auto& v : split_list(value)) cfg.lambda_grid.push_back(std::stod(v));
      } else if (key == "cv_folds") cfg.cv_folds = std::stoull(value);
      else if (key == "pool_rules") cfg.pool_rules = (value == "true" || value == "1");
      else if (key == "clusters") cfg.clusters = std::stoull(value);
      else if (key == "frequency_threshold") cfg.frequency_threshold = std::stod(value);
      else if (key == "max_activities") cfg.max_activities = std::stoull(value);
      else if (key == "state_cap") cfg.state_cap = std::stoull(value);
      else if (key == "output") cfg.output_dir = value;
      else throw InputError("unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw InputError(path + ":" + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  if (!version_seen) throw InputError(path + ": missing 'config_version = 1'");
  return cfg;
}

inline void save_config(std::ostream& out, const PipelineConfig& cfg) {
  auto list_int = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  auto list_dbl = [](const std::vector<double>& v) {
    std::string s;
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%g", v[i]);
      s += (i ? "," : "") + std::string(buf);
    }
    return s;
  };
  auto list_str = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  };
  char buf[32];
  out << "config_version = 1\n";
  out << "input = " << cfg.input_path << "\n";
  if (!cfg.format.empty()) out << "format = " << cfg.format << "\n";
  out << "case_column = " << cfg.columns.case_id << "\n";
  out << "activity_column = " << cfg.columns.activity << "\n";
  out << "timestamp_column = " << cfg.columns.timestamp << "\n";
  if (!cfg.labels_path.empty()) out << "labels = " << cfg.labels_path << "\n";
  if (cfg.label_threshold_hours >= 0) {
    std::snprintf(buf, sizeof buf, "%g", cfg.label_threshold_hours);
    out << "label_threshold_hours = " << buf << "\n";
    out << "label_desirable_side = "
        << (cfg.desirable_side == DesirableSide::below ? "below" : "above") << "\n";
  }
  std::snprintf(buf, sizeof buf, "%g", cfg.ratio);
  out << "ratio = " << buf << "\n";
  if (cfg.seed_set) out << "seed = " << cfg.seed << "\n";
  out << "model_kinds = " << list_str(cfg.model_kinds) << "\n";
  out << "trees_grid = " << list_int(cfg.trees_grid) << "\n";
  out << "depth_grid = " << list_int(cfg.depth_grid) << "\n";
  out << "learning_rate_grid = " << list_dbl(cfg.learning_rate_grid) << "\n";
  out << "lambda_grid = " << list_dbl(cfg.lambda_grid) << "\n";
  out << "cv_folds = " << cfg.cv_folds << "\n";
  out << "pool_rules = " << (cfg.pool_rules ? "true" : "false") << "\n";
  out << "clusters = " << cfg.clusters << "\n";
  std::snprintf(buf, sizeof buf, "%g", cfg.frequency_threshold);
  out << "frequency_threshold = " << buf << "\n";
  out << "max_activities = " << cfg.max_activities << "\n";
  out << "state_cap = " << cfg.state_cap << "\n";
  out << "output = " << cfg.output_dir << "\n";
}

// ---------------------------------------------------------------------------
// Stage artifacts

struct EncodeArtifacts {
  EventLog full_log;
  LabelFunction labels;
  EventLog train;           // stratified 70% fold
  EventLog test;            // remaining 30%
  EventLog train_balanced;  // undersampled training fold; all learning sees this
  FeatureSpace space;
  std::vector<FeatureVector> train_vectors;  // encoding of train_balanced
};

struct CvChoice {
  std::string kind;
  int n_trees = 0;
  int max_depth = 0;
  double learning_rate = 0.0;
  double lambda = 0.0;
  double cv_accuracy = 0.0;

  std::string describe() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "kind=%s trees=%d depth=%d lr=%g lambda=%g", kind.c_str(),
                  n_trees, max_depth, learning_rate, lambda);
    return buf;
  }
};

struct TrainArtifacts {
  std::vector<Ensemble> ensembles;  // winner, or best setting per kind when pooling
  std::vector<Rule> rules;
  RuleMatrix matrix;  // train_balanced x rules
  RegressionModel model;
  CvChoice choice;
  double ml_acc_test = 0.0;
};

struct ClusterArtifacts {
  std::vector<std::size_t> important;  // original rule indices with nonzero weight, ascending
  std::vector<std::size_t> display_rank;  // display_rank[i]: rank of important[i] by |coef| desc
  DistanceMatrix distances;            // over `important`, in that order
  Dendrogram dendrogram;
  std::vector<std::vector<std::size_t>> clusters;  // members as positions into `important`
  ClusterReport report;                            // representatives over original rule indices
};

struct GroupMetrics {
  std::string name;        // "cluster 1", "baseline L+", "baseline L-"
  std::string model_file;  // relative path, empty when no model
  bool has_model = false;
  MetricsReport metrics;
  double precision_value = 0.0;
};

struct RunReport {
  CvChoice choice;
  double ml_acc_test = 0.0;
  std::size_t total_rules = 0;
  std::size_t important_rules = 0;
  std::vector<GroupMetrics> groups;  // K clusters + 2 baselines
  bool degenerate = false;
};

// ---------------------------------------------------------------------------
// Stages

inline ParsedLog parse_input(const PipelineConfig& cfg) {
  if (cfg.input_path.empty()) throw InputError("no input file configured");
  std::string fmt = cfg.format;
  if (fmt.empty()) {
    const auto dot = cfg.input_path.rfind('.');
    fmt = dot == std::string::npos ? "csv" : cfg.input_path.substr(dot + 1);
  }
  if (fmt == "csv") return parse_csv(cfg.input_path, cfg.columns);
  if (fmt == "xes") return parse_xes(cfg.input_path);
  throw InputError("unknown input format '" + fmt + "'");
}

inline LabelFunction make_labels(const PipelineConfig& cfg, const ParsedLog& parsed) {
  if (!cfg.labels_path.empty()) {
    LabelFunction labels = parse_labels_csv(cfg.labels_path);
    labels.check_total(parsed.log);
    return labels;
  }
  if (cfg.label_threshold_hours < 0)
    throw InputError("configure either a labels file or label_threshold_hours");
  return label_by_duration(parsed.log, parsed.times,
                           static_cast<std::int64_t>(cfg.label_threshold_hours * 3600.0 * 1000.0),
                           cfg.desirable_side);
}

inline EncodeArtifacts run_encode_stage(const PipelineConfig& cfg) {
  if (!cfg.seed_set) throw InputError("a seed is required (set 'seed' in the config or --seed)");
  ParsedLog parsed = parse_input(cfg);
  EncodeArtifacts art;
  art.labels = make_labels(cfg, parsed);
  art.full_log = std::move(parsed.log);

  SplitResult split = split_train_test(art.full_log, art.labels, cfg.ratio, cfg.seed);
  art.train = std::move(split.train);
  art.test = std::move(split.test);
  art.train_balanced = undersample(art.train, art.labels, cfg.seed);

  auto constraints = discover_constraints(art.train_balanced, cfg.max_activities);
  constraints = prune_subsumption(constraints, art.train_balanced);
  art.space = build_feature_space(std::move(constraints));
  art.train_vectors = encode_log(art.train_balanced, art.space);
  return art;
}

namespace train_detail {

struct Setting {
  std::string kind;
  Hyperparams params;
};

inline std::vector<Setting> expand_grid(const PipelineConfig& cfg) {
  std::vector<Setting> settings;
  for (const auto& kind : cfg.model_kinds) {
    if (kind != "random_forest" && kind != "gradient_boosting")
      throw InputError("unknown model kind '" + kind + "'");
    for (int trees : cfg.trees_grid) {
      for (int depth : cfg.depth_grid) {
        if (kind == "gradient_boosting") {
          for (double lr : cfg.learning_rate_grid) {
            Hyperparams hp;
            hp.n_trees = trees;
            hp.max_depth = depth;
            hp.learning_rate = lr;
            settings.push_back({kind, hp});
          }
        } else {
          Hyperparams hp;
          hp.n_trees = trees;
          hp.max_depth = depth;
          settings.push_back({kind, hp});
        }
      }
    }
  }
  return settings;
}

inline Ensemble train_setting(const Setting& s, const std::vector<FeatureVector>& vectors,
                              const std::vector<int>& labels, std::uint64_t seed) {
  Hyperparams hp = s.params;
  hp.seed = seed;
  return s.kind == "random_forest" ? train_random_forest(vectors, labels, hp)
                                   : train_gradient_boosting(vectors, labels, hp);
}

inline std::vector<std::uint8_t> rule_bits(const FeatureVector& encoded,
                                           const std::vector<Rule>& rules) {
  std::vector<std::uint8_t> bits(rules.size());
  for (std::size_t j = 0; j < rules.size(); ++j)
    bits[j] = static_cast<std::uint8_t>(rule_holds(encoded, rules[j]));
  return bits;
}

}  // namespace train_detail

// Joint 5-fold cross-validation over (ensemble setting x lambda), then a
// final fit of the winner on the whole balanced training fold. ML accuracy
// is reported on the held-out test fold.
inline TrainArtifacts run_train_stage(const PipelineConfig& cfg, const EncodeArtifacts& enc) {
  using namespace train_detail;
  const auto settings = expand_grid(cfg);
  if (settings.empty()) throw InputError("empty model grid");
  if (cfg.lambda_grid.empty()) throw InputError("empty lambda grid");
  std::vector<double> lambdas = cfg.lambda_grid;
  std::sort(lambdas.begin(), lambdas.end());

  std::vector<int> labels;
  labels.reserve(enc.train_balanced.size());
  for (const auto& t : enc.train_balanced.traces()) labels.push_back(enc.labels(t));

  // stratified fold assignment, one shared layout for the whole grid
  Rng fold_rng = Rng(cfg.seed).derive('f');
  std::vector<std::size_t> fold_of(labels.size(), 0);
  {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i)
      by_class[labels[i] ? 1 : 0].push_back(i);
    for (int c : {0, 1}) {
      auto idx = by_class[c];
      fold_rng.shuffle(idx);
      for (std::size_t i = 0; i < idx.size(); ++i) fold_of[idx[i]] = i % cfg.cv_folds;
    }
  }

  CvChoice best;
  best.cv_accuracy = -1.0;
  std::vector<double> setting_best_acc(settings.size(), -1.0);
  std::vector<double> setting_best_lambda(settings.size(), lambdas.front());

  for (std::size_t si = 0; si < settings.size(); ++si) {
    std::vector<double> acc_sum(lambdas.size(), 0.0);
    std::size_t usable_folds = 0;
    for (std::size_t f = 0; f < cfg.cv_folds; ++f) {
      std::vector<FeatureVector> fold_train;
      std::vector<int> fold_train_y, fold_val_y;
      std::vector<std::size_t> val_rows;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (fold_of[i] == f) {
          val_rows.push_back(i);
          fold_val_y.push_back(labels[i]);
        } else {
          fold_train.push_back(enc.train_vectors[i]);
          fold_train_y.push_back(labels[i]);
        }
      }
      if (val_rows.empty()) continue;
      bool has0 = false, has1 = false;
      for (int l : fold_train_y) (l ? has1 : has0) = true;
      if (!has0 || !has1) continue;

      const std::uint64_t seed = Rng(cfg.seed).derive('e').derive(si * 131 + f).next_u64();
      Ensemble ensemble = train_setting(settings[si], fold_train, fold_train_y, seed);
      std::vector<Rule> rules = extract_rules(ensemble, fold_train);
      if (rules.empty()) continue;
      RuleMatrix train_m;
      train_m.num_rules = rules.size();
      for (const auto& v : fold_train) train_m.rows.push_back(rule_bits(v, rules));
      RuleMatrix val_m;
      val_m.num_rules = rules.size();
      for (auto i : val_rows) val_m.rows.push_back(rule_bits(enc.train_vectors[i], rules));

      ++usable_folds;
      for (std::size_t li = 0; li < lambdas.size(); ++li) {
        RegressionModel model = fit(train_m, fold_train_y, lambdas[li]);
        acc_sum[li] += accuracy(model, val_m, fold_val_y);
      }
    }
    if (usable_folds == 0) continue;
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      const double mean_acc = acc_sum[li] / static_cast<double>(usable_folds);
      if (mean_acc >= setting_best_acc[si]) {  // ascending lambdas: ties take the sparser model
        setting_best_acc[si] = mean_acc;
        setting_best_lambda[si] = lambdas[li];
      }
      const bool better = mean_acc > best.cv_accuracy;
      if (better) {
        best.kind = settings[si].kind;
        best.n_trees = settings[si].params.n_trees;
        best.max_depth = settings[si].params.max_depth;
        best.learning_rate = settings[si].params.learning_rate;
        best.lambda = lambdas[li];
        best.cv_accuracy = mean_acc;
      } else if (mean_acc == best.cv_accuracy && settings[si].kind == best.kind &&
                 settings[si].params.n_trees == best.n_trees &&
                 settings[si].params.max_depth == best.max_depth &&
                 settings[si].params.learning_rate == best.learning_rate &&
                 lambdas[li] > best.lambda) {
        best.lambda = lambdas[li];  // same setting, tie on accuracy: larger lambda
      }
    }
  }
  if (best.cv_accuracy < 0) throw StageError("train: cross-validation produced no usable fold");

  // final training on the full balanced fold
  TrainArtifacts art;
  art.choice = best;
  std::vector<std::size_t> chosen_settings;
  if (cfg.pool_rules) {
    // best setting of each kind contributes rules
    std::map<std::string, std::pair<double, std::size_t>> best_per_kind;
    for (std::size_t si = 0; si < settings.size(); ++si) {
      if (setting_best_acc[si] < 0) continue;
      auto it = best_per_kind.find(settings[si].kind);
      if (it == best_per_kind.end() || setting_best_acc[si] > it->second.first)
        best_per_kind[settings[si].kind] = {setting_best_acc[si], si};
    }
    for (const auto& [kind, entry] : best_per_kind) chosen_settings.push_back(entry.second);
    std::sort(chosen_settings.begin(), chosen_settings.end());
  } else {
    for (std::size_t si = 0; si < settings.size(); ++si) {
      if (settings[si].kind == best.kind && settings[si].params.n_trees == best.n_trees &&
          settings[si].params.max_depth == best.max_depth &&
          (settings[si].kind == "random_forest" ||
           settings[si].params.learning_rate == best.learning_rate)) {
        chosen_settings.push_back(si);
        break;
      }
    }
  }

  std::set<std::vector<RuleLiteral>> seen;
  for (std::size_t si : chosen_settings) {
    const std::uint64_t seed = Rng(cfg.seed).derive('E').derive(si).next_u64();
    Ensemble ensemble = train_setting(settings[si], enc.train_vectors, labels, seed);
    std::vector<Rule> rules = extract_rules(ensemble, enc.train_vectors);
    for (auto& r : rules)
      if (seen.insert(r.literals).second) art.rules.push_back(std::move(r));
    art.ensembles.push_back(std::move(ensemble));
  }
  if (art.rules.empty())
    throw DegenerateResult("train: the winning ensemble produced no rules with coverage");

  art.matrix.num_rules = art.rules.size();
  for (const auto& v : enc.train_vectors)
    art.matrix.rows.push_back(train_detail::rule_bits(v, art.rules));
  art.model = fit(art.matrix, labels, best.lambda);

  // held-out accuracy on the untouched test fold
  RuleMatrix test_m;
  test_m.num_rules = art.rules.size();
  std::vector<int> test_y;
  for (const auto& t : enc.test.traces()) {
    test_m.rows.push_back(train_detail::rule_bits(encode(t, enc.space), art.rules));
    test_y.push_back(enc.labels(t));
  }
  art.ml_acc_test = accuracy(art.model, test_m, test_y);
  return art;
}

// Clusters the nonzero-weight rules by Jaccard distance of their training
// coverage; K is the configured cluster count, capped at the rule count.
inline ClusterArtifacts run_cluster_stage(const PipelineConfig& cfg, const EncodeArtifacts& enc,
                                          const TrainArtifacts& train) {
  ClusterArtifacts art;
  for (std::size_t j = 0; j < train.rules.size(); ++j)
    if (train.model.weights[j] != 0.0) art.important.push_back(j);
  if (art.important.empty())
    throw DegenerateResult("cluster: the regression model kept no rules (all weights zero)");

  // display numbering: descending |coefficient|, original index breaking ties
  {
    std::vector<std::size_t> by_coef = art.important;
    std::sort(by_coef.begin(), by_coef.end(), [&](std::size_t a, std::size_t b) {
      const double wa = std::abs(train.model.weights[a]), wb = std::abs(train.model.weights[b]);
      return wa > wb || (wa == wb && a < b);
    });
    std::map<std::size_t, std::size_t> rank;
    for (std::size_t r = 0; r < by_coef.size(); ++r) rank[by_coef[r]] = r;
    art.display_rank.reserve(art.important.size());
    for (std::size_t j : art.important) art.display_rank.push_back(rank[j]);
  }

  RuleMatrix sub;
  sub.num_rules = art.important.size();
  for (const auto& row : train.matrix.rows) {
    std::vector<std::uint8_t> r(art.important.size());
    for (std::size_t k = 0; k < art.important.size(); ++k) r[k] = row[art.important[k]];
    sub.rows.push_back(std::move(r));
  }
  art.distances = jaccard_matrix(sub);
  art.dendrogram = agglomerate(art.distances);
  const std::size_t k = std::min(cfg.clusters, art.important.size());
  art.clusters = cut(art.dendrogram, k);

  std::vector<std::vector<std::size_t>> original_clusters;
  for (const auto& members : art.clusters) {
    std::vector<std::size_t> orig;
    for (std::size_t local : members) orig.push_back(art.important[local]);
    original_clusters.push_back(std::move(orig));
  }
  art.report = select_representatives(original_clusters, train.model, train.rules, enc.full_log,
                                      enc.labels, enc.space);
  return art;
}

struct DiscoveredModels {
  std::vector<std::optional<PetriNet>> cluster_nets;  // nullopt when the filtered log is empty
  PetriNet baseline_desirable;
  PetriNet baseline_undesirable;
};

// Discovers one model per cluster from the full log filtered by the
// representative rule, plus the two baseline models from L+ and L-.
inline DiscoveredModels run_discover_stage(const PipelineConfig& cfg, const EncodeArtifacts& enc,
                                           const TrainArtifacts& train,
                                           const ClusterArtifacts& clusters) {
  DiscoveredModels out;
  for (const auto& entry : clusters.report.clusters) {
    EventLog filtered = filter_log(enc.full_log, train.rules[entry.representative], enc.space);
    if (filtered.empty()) {
      out.cluster_nets.push_back(std::nullopt);
      continue;
    }
    out.cluster_nets.push_back(to_petri_net(discover(filtered, cfg.frequency_threshold)));
  }
  std::vector<Trace> pos, neg;
  for (const auto& t : enc.full_log.traces()) (enc.labels(t) ? pos : neg).push_back(t);
  if (pos.empty() || neg.empty())
    throw StageError("discover: both label classes must be present in the log");
  out.baseline_desirable = to_petri_net(discover(EventLog(pos), cfg.frequency_threshold));
  out.baseline_undesirable = to_petri_net(discover(EventLog(neg), cfg.frequency_threshold));
  return out;
}

// Conformance and discriminative metrics for every model, always against the
// untouched test fold.
inline std::vector<GroupMetrics> run_evaluate_stage(const PipelineConfig& cfg,
                                                    const EncodeArtifacts& enc,
                                                    const DiscoveredModels& models) {
  std::vector<Trace> pos, neg;
  for (const auto& t : enc.test.traces()) (enc.labels(t) ? pos : neg).push_back(t);
  if (pos.empty() || neg.empty())
    throw StageError("evaluate: the test fold lost one of the label classes");
  EventLog test_pos(pos), test_neg(neg);
  EventLog test_all(enc.test.traces());

  std::vector<GroupMetrics> groups;
  auto evaluate_model = [&](const std::string& name, const std::string& file,
                            const PetriNet& net) {
    GroupMetrics g;
    g.name = name;
    g.model_file = file;
    g.has_model = true;
    g.metrics = discriminative_metrics(test_pos, test_neg, net, cfg.state_cap);
    g.precision_value = precision(test_all, net, cfg.state_cap);
    groups.push_back(std::move(g));
  };

  for (std::size_t k = 0; k < models.cluster_nets.size(); ++k) {
    const std::string name = "cluster " + std::to_string(k + 1);
    if (!models.cluster_nets[k]) {
      GroupMetrics g;
      g.name = name;
      g.has_model = false;
      groups.push_back(std::move(g));
      continue;
    }
    evaluate_model(name, "models/cluster_" + std::to_string(k + 1) + ".pnml",
                   *models.cluster_nets[k]);
  }
  evaluate_model("baseline L+", "models/baseline_desirable.pnml", models.baseline_desirable);
  evaluate_model("baseline L-", "models/baseline_undesirable.pnml", models.baseline_undesirable);
  return groups;
}

// ---------------------------------------------------------------------------
// Artifact files

namespace artifact_detail {

inline std::string fmt(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fmt_full(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace artifact_detail

inline void write_encode_artifacts(const std::filesystem::path& dir, const EncodeArtifacts& enc,
                                   const std::vector<bool>& in_train_balanced) {
  using artifact_detail::open_out;
  {
    auto out = open_out(dir / "encoded" / "log.csv");
    csv::write_row(out, {"case", "activity", "timestamp"});
    for (const auto& t : enc.full_log.traces())
      for (std::size_t i = 0; i < t.activities.size(); ++i)
        csv::write_row(out, {t.case_id, t.activities[i], std::to_string(i)});
  }
  {
    auto out = open_out(dir / "encoded" / "split.csv");
    csv::write_row(out, {"case_id", "label", "fold", "in_balanced_train"});
    std::set<std::string> train_ids;
    for (const auto& t : enc.train.traces()) train_ids.insert(t.case_id);
    std::set<std::string> balanced_ids;
    for (std::size_t i = 0; i < enc.train_balanced.size(); ++i)
      if (in_train_balanced.empty() || in_train_balanced[i])
        balanced_ids.insert(enc.train_balanced[i].case_id);
    for (const auto& t : enc.full_log.traces()) {
      const bool train = train_ids.count(t.case_id) > 0;
      csv::write_row(out, {t.case_id, enc.labels(t) ? "1" : "0", train ? "train" : "test",
                           balanced_ids.count(t.case_id) ? "1" : "0"});
    }
  }
  {
    auto out = open_out(dir / "encoded" / "feature_space.txt");
    out << "dpv-feature-space v1\n";
    for (const auto& c : enc.space.constraints()) out << to_string(c) << "\n";
  }
  {
    auto out = open_out(dir / "encoded" / "features.csv");
    write_encoded_csv(out, enc.full_log, encode_log(enc.full_log, enc.space), enc.space);
  }
}

inline void write_train_artifacts(const std::filesystem::path& dir, const EncodeArtifacts& enc,
                                  const TrainArtifacts& train) {
  using artifact_detail::fmt_full;
  using artifact_detail::open_out;
  {
    auto out = open_out(dir / "model" / "ensemble.txt");
    out << "dpv-ensembles v1\ncount " << train.ensembles.size() << "\n";
    for (const auto& e : train.ensembles) write_ensemble(out, e);
  }
  {
    auto out = open_out(dir / "model" / "rules.txt");
    out << "dpv-rules v1\n";
    for (std::size_t j = 0; j < train.rules.size(); ++j) {
      const auto& r = train.rules[j];
      out << "rule " << j << " tree " << r.tree_index << " leaf " << r.leaf_index << " :";
      for (const auto& lit : r.literals)
        out << " " << lit.feature << "=" << static_cast<int>(lit.expected);
      out << "\n";
    }
  }
  {
    auto out = open_out(dir / "model" / "regression.txt");
    out << "dpv-regression v1\n";
    out << "winner " << train.choice.describe() << "\n";
    out << "cv_accuracy " << fmt_full(train.choice.cv_accuracy) << "\n";
    out << "ml_acc_test " << fmt_full(train.ml_acc_test) << "\n";
    out << "lambda " << fmt_full(train.model.lambda) << "\n";
    out << "converged " << (train.model.converged ? 1 : 0) << "\n";
    out << "iterations " << train.model.iterations << "\n";
    out << "bias " << fmt_full(train.model.bias) << "\n";
    out << "weights " << train.model.weights.size() << "\n";
    for (double w : train.model.weights) out << fmt_full(w) << "\n";
  }
  {
    // two-column report sorted by |coefficient| descending
    auto out = open_out(dir / "model" / "rule_report.txt");
    std::vector<std::size_t> order(train.rules.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double wa = std::abs(train.model.weights[a]), wb = std::abs(train.model.weights[b]);
      return wa > wb || (wa == wb && a < b);
    });
    for (std::size_t j : order)
      out << artifact_detail::fmt(train.model.weights[j]) << "\t"
          << rule_text(train.rules[j], enc.space) << "\n";
  }
  {
    auto out = open_out(dir / "model" / "rule_matrix.csv");
    std::vector<std::string> header{"case_id"};
    for (std::size_t j = 0; j < train.rules.size(); ++j)
      header.push_back("rule_" + std::to_string(j));
    csv::write_row(out, header);
    for (std::size_t i = 0; i < enc.train_balanced.size(); ++i) {
      std::vector<std::string> row{enc.train_balanced[i].case_id};
      for (auto b : train.matrix.rows[i]) row.push_back(b ? "1" : "0");
      csv::write_row(out, row);
    }
  }
}

inline void write_cluster_artifacts(const std::filesystem::path& dir, const EncodeArtifacts& enc,
                                    const TrainArtifacts& train, const ClusterArtifacts& art) {
  using artifact_detail::fmt;
  using artifact_detail::fmt_full;
  using artifact_detail::open_out;
  {
    auto out = open_out(dir / "clusters" / "merges.txt");
    out << "dpv-merges v1\nleaves " << art.dendrogram.n << "\n";
    for (const auto& s : art.dendrogram.steps)
      out << s.cluster_a << " " << s.cluster_b << " " << fmt_full(s.distance) << "\n";
  }
  {
    auto out = open_out(dir / "clusters" / "clusters.txt");
    out << "dpv-clusters v1\nk " << art.report.clusters.size() << "\n";
    for (std::size_t c = 0; c < art.report.clusters.size(); ++c) {
      const auto& entry = art.report.clusters[c];
      out << "cluster " << c + 1 << " representative rule_index " << entry.representative
          << " importance " << fmt_full(entry.representative_importance) << " sup_pos "
          << fmt(entry.support_desirable) << " sup_neg " << fmt(entry.support_undesirable) << "\n";
      out << "  text " << rule_text(train.rules[entry.representative], enc.space) << "\n";
      out << "  members";
      for (std::size_t local : art.clusters[c])
        out << " " << art.important[local] << "(rule " << art.display_rank[local] << ")";
      out << "\n";
    }
  }

  std::vector<std::string> names(art.important.size());
  std::vector<double> sup_pos(art.important.size()), sup_neg(art.important.size()),
      coefs(art.important.size());
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& t : enc.full_log.traces()) (enc.labels(t) ? n_pos : n_neg) += 1;
  std::vector<FeatureVector> full_vectors = encode_log(enc.full_log, enc.space);
  for (std::size_t k = 0; k < art.important.size(); ++k) {
    names[k] = "rule " + std::to_string(art.display_rank[k]);
    coefs[k] = train.model.weights[art.important[k]];
    std::size_t cp = 0, cn = 0;
    for (std::size_t i = 0; i < enc.full_log.size(); ++i) {
      if (!rule_holds(full_vectors[i], train.rules[art.important[k]])) continue;
      (enc.labels(enc.full_log[i]) ? cp : cn) += 1;
    }
    sup_pos[k] = n_pos ? static_cast<double>(cp) / static_cast<double>(n_pos) : 0.0;
    sup_neg[k] = n_neg ? static_cast<double>(cn) / static_cast<double>(n_neg) : 0.0;
  }
  open_out(dir / "figures" / "heatmap.svg")
      << heatmap_svg(art.distances, art.dendrogram, names, sup_pos, sup_neg, coefs);
  open_out(dir / "figures" / "dendrogram.svg") << dendrogram_svg(art.dendrogram, names);
}

inline void write_models(const std::filesystem::path& dir, const DiscoveredModels& models) {
  using artifact_detail::open_out;
  auto index = open_out(dir / "models" / "index.txt");
  for (std::size_t k = 0; k < models.cluster_nets.size(); ++k) {
    const std::string name = "cluster_" + std::to_string(k + 1);
    if (!models.cluster_nets[k]) {
      index << name << " no_model\n";
      continue;
    }
    const std::string file = "models/" + name + ".pnml";
    index << name << " " << file << "\n";
    auto out = open_out(dir / "models" / (name + ".pnml"));
    write_pnml(out, *models.cluster_nets[k], name);
    auto dot = open_out(dir / "models" / (name + ".dot"));
    write_dot(dot, *models.cluster_nets[k]);
  }
  index << "baseline_desirable models/baseline_desirable.pnml\n";
  index << "baseline_undesirable models/baseline_undesirable.pnml\n";
  write_pnml(open_out(dir / "models" / "baseline_desirable.pnml"), models.baseline_desirable,
             "baseline_desirable");
  write_pnml(open_out(dir / "models" / "baseline_undesirable.pnml"), models.baseline_undesirable,
             "baseline_undesirable");
  write_dot(open_out(dir / "models" / "baseline_desirable.dot"), models.baseline_desirable);
  write_dot(open_out(dir / "models" / "baseline_undesirable.dot"), models.baseline_undesirable);
}

inline void write_report(const std::filesystem::path& dir, const PipelineConfig& cfg,
                         const EncodeArtifacts& enc, const TrainArtifacts& train,
                         const ClusterArtifacts* clusters, const RunReport& report) {
  using artifact_detail::fmt;
  using artifact_detail::open_out;
  auto out = open_out(dir / "report.txt");
  out << "dpv run report v1\n";
  out << "input " << cfg.input_path << "\n";
  out << "seed " << cfg.seed << "\n";
  out << "traces " << enc.full_log.size() << " (train " << enc.train.size() << ", test "
      << enc.test.size() << ", balanced train " << enc.train_balanced.size() << ")\n";
  out << "constraints " << enc.space.num_constraints() << " features " << enc.space.size() << "\n";
  out << "cv winner " << report.choice.describe() << "\n";
  out << "cv_accuracy " << fmt(report.choice.cv_accuracy) << "\n";
  out << "ml_acc_test " << fmt(report.ml_acc_test) << "\n";
  out << "rules " << report.important_rules << " important of " << report.total_rules << "\n";
  if (report.degenerate) out << "DEGENERATE: no important rules; no clusters were formed\n";

  if (clusters) {
    out << "\n== clusters ==\n";
    for (std::size_t c = 0; c < clusters->report.clusters.size(); ++c) {
      const auto& entry = clusters->report.clusters[c];
      std::size_t local = 0;
      for (std::size_t k = 0; k < clusters->important.size(); ++k)
        if (clusters->important[k] == entry.representative) local = k;
      out << "cluster " << c + 1 << " (rule " << clusters->display_rank[local] << ")"
          << "  coef " << fmt(entry.representative_importance) << "  sup(L+) "
          << fmt(entry.support_desirable) << "  sup(L-) " << fmt(entry.support_undesirable)
          << "\n";
      out << "  " << rule_text(train.rules[entry.representative], enc.space) << "\n";
    }
  }

  out << "\n== metrics (test fold) ==\n";
  out << "group\tmodel\tt-fit(L+)\tt-fit(L-)\ta-fit(L+)\ta-fit(L-)\tprc\ta-acc\tt-acc\ta-F1\tt-F1\n";
  for (const auto& g : report.groups) {
    if (!g.has_model) {
      out << g.name << "\tno_model\t-\t-\t-\t-\t-\t-\t-\t-\t-\n";
      continue;
    }
    const auto& m = g.metrics;
    out << g.name << "\t" << g.model_file << "\t" << fmt(m.t_fit_desirable) << "\t"
        << fmt(m.t_fit_undesirable) << "\t" << fmt(m.a_fit_desirable) << "\t"
        << fmt(m.a_fit_undesirable) << "\t" << fmt(g.precision_value) << "\t" << fmt(m.a_acc)
        << "\t" << fmt(m.t_acc) << "\t" << fmt(m.a_f1) << "\t" << fmt(m.t_f1) << "\n";
  }
}

inline void write_report_json(const std::filesystem::path& dir, const PipelineConfig& cfg,
                              const RunReport& report) {
  using artifact_detail::open_out;
  auto out = open_out(dir / "report.json");
  out.precision(17);
  out << "{\n";
  out << "  \"schema\": \"dpv-report-v1\",\n";
  out << "  \"seed\": " << cfg.seed << ",\n";
  out << "  \"cv_winner\": \"" << report.choice.describe() << "\",\n";
  out << "  \"cv_accuracy\": " << report.choice.cv_accuracy << ",\n";
  out << "  \"ml_acc_test\": " << report.ml_acc_test << ",\n";
  out << "  \"total_rules\": " << report.total_rules << ",\n";
  out << "  \"important_rules\": " << report.important_rules << ",\n";
  out << "  \"degenerate\": " << (report.degenerate ? "true" : "false") << ",\n";
  out << "  \"groups\": [\n";
  for (std::size_t i = 0; i < report.groups.size(); ++i) {
    const auto& g = report.groups[i];
    out << "    {\"name\": \"" << g.name << "\", \"has_model\": "
        << (g.has_model ? "true" : "false");
    if (g.has_model) {
      const auto& m = g.metrics;
      out << ", \"model\": \"" << g.model_file << "\""
          << ", \"t_fit_pos\": " << m.t_fit_desirable << ", \"t_fit_neg\": " << m.t_fit_undesirable
          << ", \"a_fit_pos\": " << m.a_fit_desirable << ", \"a_fit_neg\": " << m.a_fit_undesirable
          << ", \"precision\": " << g.precision_value << ", \"a_acc\": " << m.a_acc
          << ", \"t_acc\": " << m.t_acc << ", \"a_f1\": " << m.a_f1 << ", \"t_f1\": " << m.t_f1;
    }
    out << "}" << (i + 1 < report.groups.size() ? "," : "") << "\n";
  }
  out << "  ]\n}\n";
}

inline void write_metrics_figure(const std::filesystem::path& dir, const RunReport& report) {
  using artifact_detail::open_out;
  std::vector<std::string> group_names;
  std::vector<std::vector<double>> values;
  for (const auto& g : report.groups) {
    if (!g.has_model) continue;
    group_names.push_back(g.name);
    values.push_back({g.metrics.a_acc, g.metrics.t_acc, g.metrics.a_f1, g.metrics.t_f1,
                      g.precision_value});
  }
  auto out = open_out(dir / "figures" / "metrics.svg");
  if (group_names.empty())
    out << placeholder_svg("no models were discovered");
  else
    out << metrics_svg(group_names, {"a-acc", "t-acc", "a-F1", "t-F1", "prc"}, values);
}

// Full pipeline: parse, label, split, undersample, constraint discovery,
// encoding, CV model selection, rule extraction, L1 fit, clustering,
// filtering, per-cluster discovery, conformance. Writes every artifact under
// cfg.output_dir. Deterministic for a fixed config and seed.
inline RunReport run(const PipelineConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);

  EncodeArtifacts enc = run_encode_stage(cfg);
  write_encode_artifacts(dir, enc, {});

  TrainArtifacts train = run_train_stage(cfg, enc);
  write_train_artifacts(dir, enc, train);

  RunReport report;
  report.choice = train.choice;
  report.ml_acc_test = train.ml_acc_test;
  report.total_rules = train.rules.size();

  ClusterArtifacts clusters;
  bool degenerate = false;
  try {
    clusters = run_cluster_stage(cfg, enc, train);
  } catch (const DegenerateResult&) {
    degenerate = true;
  }
  report.degenerate = degenerate;

  if (degenerate) {
    using artifact_detail::open_out;
    open_out(dir / "figures" / "heatmap.svg")
        << placeholder_svg("no important rules; nothing to cluster");
    open_out(dir / "figures" / "dendrogram.svg")
        << placeholder_svg("no important rules; nothing to cluster");
    DiscoveredModels models;
    // baselines are still discovered for reference
    std::vector<Trace> pos, neg;
    for (const auto& t : enc.full_log.traces()) (enc.labels(t) ? pos : neg).push_back(t);
    models.baseline_desirable = to_petri_net(discover(EventLog(pos), cfg.frequency_threshold));
    models.baseline_undesirable = to_petri_net(discover(EventLog(neg), cfg.frequency_threshold));
    write_models(dir, models);
    report.groups = run_evaluate_stage(cfg, enc, models);
    write_report(dir, cfg, enc, train, nullptr, report);
    write_report_json(dir, cfg, report);
    write_metrics_figure(dir, report);
    throw DegenerateResult("run completed without important rules; see " +
                           (dir / "report.txt").string());
  }

  report.important_rules = clusters.important.size();
  write_cluster_artifacts(dir, enc, train, clusters);

  DiscoveredModels models = run_discover_stage(cfg, enc, train, clusters);
  write_models(dir, models);

  report.groups = run_evaluate_stage(cfg, enc, models);
  write_report(dir, cfg, enc, train, &clusters, report);
  write_report_json(dir, cfg, report);
  write_metrics_figure(dir, report);
  return report;
}

}  // namespace dpv
