#include "ntp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "ntp/text.hpp"

namespace ntp {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void bad_value(std::string_view section, std::string_view key, std::string_view value,
                            std::string_view expected) {
  throw ConfigError("[" + std::string(section) + "] " + std::string(key) + ": expected " + std::string(expected) +
                    ", got '" + std::string(value) + "'");
}

std::size_t as_size(std::string_view section, std::string_view key, std::string_view value) {
  unsigned long long v = 0;
  if (!parse_unsigned(value, v)) bad_value(section, key, value, "a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::uint64_t as_u64(std::string_view section, std::string_view key, std::string_view value) {
  unsigned long long v = 0;
  if (!parse_unsigned(value, v)) bad_value(section, key, value, "a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

double as_double(std::string_view section, std::string_view key, std::string_view value) {
  double v = 0.0;
  if (!parse_double(value, v) || !std::isfinite(v)) bad_value(section, key, value, "a finite number");
  return v;
}

bool as_bool(std::string_view section, std::string_view key, std::string_view value) {
  const auto v = lower(trim(value));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(section, key, value, "true or false");
}

int as_order(std::string_view section, std::string_view key, std::string_view value) {
  const auto v = lower(trim(value));
  if (v == "unary" || v == "1") return 1;
  if (v == "binary" || v == "2") return 2;
  bad_value(section, key, value, "unary, binary, 1 or 2");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto part : split(text, ',')) {
    const auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string k_max_text(std::size_t k_max) { return k_max == kUnbounded ? "inf" : std::to_string(k_max); }

std::string grouping_text(PathGrouping g) { return g == PathGrouping::kTemplate ? "template" : "instance"; }

PathGrouping parse_grouping(std::string_view section, std::string_view key, std::string_view value) {
  const auto v = lower(value);
  if (v == "template") return PathGrouping::kTemplate;
  if (v == "instance") return PathGrouping::kInstance;
  bad_value(section, key, value, "template or instance");
}

std::string order_text(int order) { return order == 1 ? "unary" : "binary"; }

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

std::string ratio_dir_name(double ratio) { return "ratio_" + format_double(ratio); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  data.validate();
  train.validate();
  if (runs == 0) throw ConfigError("[experiment] runs: must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("[experiment] test_fraction: must lie in (0, 1)");
  if (nudge_ratio && !(*nudge_ratio > 0.0 && *nudge_ratio <= 1.0)) {
    throw ConfigError("[experiment] nudge_ratio: must lie in (0, 1]");
  }
  for (double r : diagnose_ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("[diagnose] ratios: every ratio must lie in (0, 1]");
  }
  if (output.empty()) throw ConfigError("[experiment] output: must not be empty");
}

void set_config_value(ExperimentConfig& cfg, std::string_view section, std::string_view key, std::string_view value) {
  const std::string s(trim(section));
  const std::string k(trim(key));
  const std::string_view v = trim(value);
  if (s == "data") {
    auto& d = cfg.data;
    if (k == "n_constants") d.n_constants = as_size(s, k, v);
    else if (k == "n_predicates") d.n_predicates = as_size(s, k, v);
    else if (k == "base_prob") d.base_prob = as_double(s, k, v);
    else if (k == "rel_prob") d.rel_prob = as_double(s, k, v);
    else if (k == "n_relationships") d.n_relationships = as_size(s, k, v);
    else if (k == "rule_size") d.rule_template.size = static_cast<int>(as_size(s, k, v));
    else if (k == "rule_order") d.rule_template.order = as_order(s, k, v);
    else throw ConfigError("[data] " + k + ": unknown key");
  } else if (s == "train") {
    auto& t = cfg.train;
    if (k == "dim") t.dim = as_size(s, k, v);
    else if (k == "init_scale") t.init_scale = as_double(s, k, v);
    else if (k == "constant_init_scale") t.constant_init_scale = as_double(s, k, v);
    else if (k == "learning_rate") t.learning_rate = as_double(s, k, v);
    else if (k == "clip") t.clip = as_double(s, k, v);
    else if (k == "decay") t.decay = as_double(s, k, v);
    else if (k == "epochs") t.epochs = as_size(s, k, v);
    else if (k == "batch_true_facts") t.batch_true_facts = as_size(s, k, v);
    else if (k == "n_rules") t.n_rules = as_size(s, k, v);
    else if (k == "heuristic") t.heuristic = Heuristic::parse(v);
    else if (k == "proof_paths") t.path_grouping = parse_grouping(s, k, v);
    else if (k == "k_max") {
      const auto lv = lower(v);
      t.k_max = (lv == "inf" || lv == "infinity" || lv == "unbounded") ? kUnbounded : as_size(s, k, v);
    } else if (k == "epsilon") t.epsilon = as_double(s, k, v);
    else throw ConfigError("[train] " + k + ": unknown key");
  } else if (s == "experiment") {
    if (k == "runs") cfg.runs = as_size(s, k, v);
    else if (k == "seed") cfg.seed = as_u64(s, k, v);
    else if (k == "test_fraction") cfg.test_fraction = as_double(s, k, v);
    else if (k == "nudge_ratio") {
      const auto lv = lower(v);
      if (lv == "none" || lv.empty()) cfg.nudge_ratio.reset();
      else cfg.nudge_ratio = as_double(s, k, v);
    } else if (k == "output") cfg.output = std::string(v);
    else if (k == "pr_auc") {
      const auto lv = lower(v);
      if (lv == "pooled") cfg.pr_auc_mode = PrAucMode::kPooled;
      else if (lv == "per_run") cfg.pr_auc_mode = PrAucMode::kPerRun;
      else bad_value(s, k, v, "pooled or per_run");
    } else if (k == "dump_models") cfg.dump_models = as_bool(s, k, v);
    else throw ConfigError("[experiment] " + k + ": unknown key");
  } else if (s == "diagnose") {
    if (k == "ratios") {
      cfg.diagnose_ratios.clear();
      for (const auto& item : split_list(v)) cfg.diagnose_ratios.push_back(as_double(s, k, item));
      if (cfg.diagnose_ratios.empty()) bad_value(s, k, v, "a comma-separated list of ratios");
    } else {
      throw ConfigError("[diagnose] " + k + ": unknown key");
    }
  } else {
    throw ConfigError("[" + s + "]: unknown section");
  }
}

void set_config_value(ExperimentConfig& cfg, std::string_view dotted_key, std::string_view value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string_view::npos) {
    throw ConfigError(std::string(dotted_key) + ": expected section.key");
  }
  set_config_value(cfg, dotted_key.substr(0, dot), dotted_key.substr(dot + 1), value);
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  cfg.source = std::string(text);
  std::string section;
  std::vector<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "data" && section != "train" && section != "experiment" && section != "diagnose" &&
          section != "sweep") {
        throw ConfigError(where + "[" + section + "]: unknown section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + key + ": key outside any section");
    if (key.empty()) throw ConfigError(where + "empty key");
    const std::string full = section + "." + key;
    if (std::find(seen.begin(), seen.end(), full) != seen.end()) {
      throw ConfigError(where + "[" + section + "] " + key + ": duplicate key");
    }
    seen.push_back(full);
    try {
      if (section == "sweep") {
        if (key.rfind("sweep.", 0) == 0 || key.rfind("diagnose.", 0) == 0 || key == "experiment.output") {
          throw ConfigError("[sweep] " + key + ": cannot be swept");
        }
        SweepAxis axis{key, split_list(value)};
        if (axis.values.empty()) throw ConfigError("[sweep] " + key + ": no values");
        for (const auto& v : axis.values) {
          ExperimentConfig probe;
          set_config_value(probe, key, v);
        }
        cfg.sweep.push_back(std::move(axis));
      } else {
        set_config_value(cfg, section, key, value);
      }
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    if (end == text.size()) break;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string describe_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  const auto& d = cfg.data;
  const auto& t = cfg.train;
  out << "data.n_constants = " << d.n_constants << '\n'
      << "data.n_predicates = " << d.n_predicates << '\n'
      << "data.base_prob = " << format_double(d.base_prob) << '\n'
      << "data.rel_prob = " << format_double(d.rel_prob) << '\n'
      << "data.n_relationships = " << d.n_relationships << '\n'
      << "data.rule_size = " << d.rule_template.size << '\n'
      << "data.rule_order = " << order_text(d.rule_template.order) << '\n'
      << "train.dim = " << t.dim << '\n'
      << "train.init_scale = " << format_double(t.init_scale) << '\n'
      << "train.constant_init_scale = " << format_double(t.constant_init_scale) << '\n'
      << "train.learning_rate = " << format_double(t.learning_rate) << '\n'
      << "train.clip = " << format_double(t.clip) << '\n'
      << "train.decay = " << format_double(t.decay) << '\n'
      << "train.epochs = " << t.epochs << '\n'
      << "train.batch_true_facts = " << t.batch_true_facts << '\n'
      << "train.n_rules = " << t.n_rules << '\n'
      << "train.heuristic = " << t.heuristic.name() << '\n'
      << "train.proof_paths = " << grouping_text(t.path_grouping) << '\n'
      << "train.k_max = " << k_max_text(t.k_max) << '\n'
      << "train.epsilon = " << format_double(t.epsilon) << '\n'
      << "experiment.runs = " << cfg.runs << '\n'
      << "experiment.seed = " << cfg.seed << '\n'
      << "experiment.test_fraction = " << format_double(cfg.test_fraction) << '\n'
      << "experiment.nudge_ratio = " << (cfg.nudge_ratio ? format_double(*cfg.nudge_ratio) : "none") << '\n'
      << "experiment.output = " << cfg.output << '\n'
      << "experiment.pr_auc = " << (cfg.pr_auc_mode == PrAucMode::kPooled ? "pooled" : "per_run") << '\n'
      << "experiment.dump_models = " << (cfg.dump_models ? "true" : "false") << '\n';
  if (!cfg.diagnose_ratios.empty()) {
    out << "diagnose.ratios = ";
    for (std::size_t i = 0; i < cfg.diagnose_ratios.size(); ++i) {
      out << (i ? ", " : "") << format_double(cfg.diagnose_ratios[i]);
    }
    out << '\n';
  }
  out << "rng = " << Rng::kAlgorithm << '\n';
  return out.str();
}

std::vector<std::vector<std::pair<std::string, std::string>>> sweep_points(const ExperimentConfig& cfg) {
  std::vector<std::vector<std::pair<std::string, std::string>>> points{{}};
  for (const auto& axis : cfg.sweep) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& base : points) {
      for (const auto& v : axis.values) {
        auto p = base;
        p.emplace_back(axis.key, v);
        next.push_back(std::move(p));
      }
    }
    points = std::move(next);
  }
  return points;
}

// ---------------------------------------------------------------------------
// Execution

RunFailure::RunFailure(std::uint64_t seed, const std::string& what)
    : std::runtime_error("run with seed " + std::to_string(seed) + " failed: " + what), seed_(seed) {}

RunRecord execute_run(const ExperimentConfig& cfg, std::size_t index) {
  RunRecord record;
  record.run_id = index;
  record.seed = cfg.seed + index;

  GenConfig gen = cfg.data;
  gen.seed = record.seed;
  const auto bundle = generate_dataset(gen, cfg.test_fraction);
  TrainConfig train = cfg.train;
  train.seed = record.seed;
  auto result = train_run(bundle, train, cfg.nudge_ratio);

  record.metrics = evaluate_run(bundle, result.rules, result.embeddings, train.k_max);
  record.relationships = bundle.relationships;
  record.trace = std::move(result.trace);
  record.stats = result.stats;
  record.total_facts = bundle.total_count;
  record.active_facts = bundle.active_count;
  record.test_facts = bundle.test_facts.size();
  if (cfg.dump_models) record.model = std::move(result.embeddings);
  record.symbols = std::move(result.symbols);
  return record;
}

std::vector<RunRecord> execute_runs(const ExperimentConfig& cfg, std::size_t jobs) {
  cfg.validate();
  const std::size_t n = cfg.runs;
  std::vector<std::optional<RunRecord>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  const auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i] = execute_run(cfg, i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw RunFailure(cfg.seed + i, e.what());
    }
  }
  std::vector<RunRecord> out;
  out.reserve(n);
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

double mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double population_std(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

Aggregate aggregate(std::span<const RunRecord> records, PrAucMode mode) {
  Aggregate agg;
  agg.runs = records.size();
  std::vector<double> recall, mrr_values, roc, totals, actives;
  std::vector<double> pooled_scores;
  std::vector<int> pooled_gold;
  std::vector<double> per_run_pr;
  for (const auto& r : records) {
    recall.push_back(r.metrics.recall);
    if (!std::isnan(r.metrics.mrr)) mrr_values.push_back(r.metrics.mrr);
    if (!std::isnan(r.metrics.roc_auc)) roc.push_back(r.metrics.roc_auc);
    totals.push_back(static_cast<double>(r.total_facts));
    actives.push_back(static_cast<double>(r.active_facts));
    std::vector<double> scores;
    std::vector<int> gold;
    for (const auto& d : r.metrics.decodings) {
      scores.push_back(d.rule.score);
      gold.push_back(d.gold ? 1 : 0);
    }
    pooled_scores.insert(pooled_scores.end(), scores.begin(), scores.end());
    pooled_gold.insert(pooled_gold.end(), gold.begin(), gold.end());
    if (const auto pr = pr_auc(scores, gold)) per_run_pr.push_back(*pr);
  }
  agg.recall_mean = mean(recall);
  agg.recall_std = population_std(recall);
  agg.mrr_mean = mean(mrr_values);
  agg.mrr_std = population_std(mrr_values);
  agg.roc_auc_mean = mean(roc);
  agg.roc_auc_std = population_std(roc);
  agg.total_facts_mean = mean(totals);
  agg.active_facts_mean = mean(actives);
  if (mode == PrAucMode::kPooled) {
    agg.pr_auc = pr_auc(pooled_scores, pooled_gold);
  } else if (!per_run_pr.empty()) {
    agg.pr_auc = mean(per_run_pr);
  }
  return agg;
}

TraceSplit split_traces(std::span<const RunRecord> records, std::size_t epochs) {
  TraceSplit split;
  for (auto* g : {&split.learned, &split.not_learned}) {
    g->rule_score.assign(epochs, 0.0);
    g->unification_score.assign(epochs, 0.0);
  }
  for (const auto& r : records) {
    if (r.trace.empty()) continue;
    auto& g = r.trace.back().rule_score > 0.5 ? split.learned : split.not_learned;
    ++g.runs;
    for (std::size_t e = 0; e < epochs && e < r.trace.size(); ++e) {
      g.rule_score[e] += r.trace[e].rule_score;
      g.unification_score[e] += r.trace[e].unification_score;
    }
  }
  for (auto* g : {&split.learned, &split.not_learned}) {
    if (g->runs == 0) continue;
    for (std::size_t e = 0; e < epochs; ++e) {
      g->rule_score[e] /= static_cast<double>(g->runs);
      g->unification_score[e] /= static_cast<double>(g->runs);
    }
  }
  return split;
}

double final_score_correlation(std::span<const RunRecord> records) {
  std::vector<double> rule, unification;
  for (const auto& r : records) {
    if (r.trace.empty()) continue;
    rule.push_back(r.trace.back().rule_score);
    unification.push_back(r.trace.back().unification_score);
  }
  return pearson(rule, unification);
}

// ---------------------------------------------------------------------------
// Writers

void write_metrics_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                       std::span<const RunRecord> records) {
  auto out = open_out(file);
  const auto& d = cfg.data;
  const std::string settings = cfg.train.heuristic.name() + "," + std::to_string(d.rule_template.size) + "," +
                               order_text(d.rule_template.order) + "," + std::to_string(d.n_constants) + "," +
                               std::to_string(d.n_predicates) + "," + format_double(d.base_prob) + "," +
                               format_double(d.rel_prob) + "," + std::to_string(d.n_relationships);
  out << "run_id,seed,heuristic,size,order,n_c,n_p,p_b,p_r,n_rel,recall,mrr,roc_auc\n";
  for (const auto& r : records) {
    out << r.run_id << ',' << r.seed << ',' << settings << ',' << format_double(r.metrics.recall) << ','
        << format_double(r.metrics.mrr) << ',' << format_double(r.metrics.roc_auc) << '\n';
  }
  const auto agg = aggregate(records, cfg.pr_auc_mode);
  out << "mean,," << settings << ',' << format_double(agg.recall_mean) << ',' << format_double(agg.mrr_mean) << ','
      << format_double(agg.roc_auc_mean) << '\n';
  out << "std,," << settings << ',' << format_double(agg.recall_std) << ',' << format_double(agg.mrr_std) << ','
      << format_double(agg.roc_auc_std) << '\n';
}

void write_summary_csv(const std::filesystem::path& file, const Aggregate& agg) {
  auto out = open_out(file);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << "metric,value\n"
      << "runs," << agg.runs << '\n'
      << "recall_mean," << format_double(agg.recall_mean) << '\n'
      << "recall_std," << format_double(agg.recall_std) << '\n'
      << "pr_auc," << format_double(agg.pr_auc.value_or(nan)) << '\n'
      << "mrr_mean," << format_double(agg.mrr_mean) << '\n'
      << "mrr_std," << format_double(agg.mrr_std) << '\n'
      << "roc_auc_mean," << format_double(agg.roc_auc_mean) << '\n'
      << "roc_auc_std," << format_double(agg.roc_auc_std) << '\n'
      << "total_facts_mean," << format_double(agg.total_facts_mean) << '\n'
      << "active_facts_mean," << format_double(agg.active_facts_mean) << '\n';
}

void write_traces_csv(const std::filesystem::path& file, std::span<const RunRecord> records) {
  auto out = open_out(file);
  out << "run_id,epoch,rule_score,unification_score,mean_loss\n";
  for (const auto& r : records) {
    for (const auto& t : r.trace) {
      out << r.run_id << ',' << t.epoch << ',' << format_double(t.rule_score) << ','
          << format_double(t.unification_score) << ',' << format_double(t.mean_loss) << '\n';
    }
  }
}

void write_decodings_csv(const std::filesystem::path& file, std::span<const RunRecord> records) {
  auto out = open_out(file);
  out << "run_id,rule_id,head,body,score,gold\n";
  for (const auto& r : records) {
    for (const auto& d : r.metrics.decodings) {
      out << r.run_id << ',' << d.rule.rule_index << ',' << r.symbols.name(d.rule.head) << ',';
      for (std::size_t i = 0; i < d.rule.body.size(); ++i) out << (i ? "&" : "") << r.symbols.name(d.rule.body[i]);
      out << ',' << format_double(d.rule.score) << ',' << (d.gold ? 1 : 0) << '\n';
    }
  }
}

void write_model_csv(const std::filesystem::path& file, const SymbolTable& symbols, const EmbeddingStore& model) {
  auto out = open_out(file);
  out << "symbol_name,kind";
  for (std::size_t i = 1; i <= model.dim(); ++i) out << ",v" << i;
  out << '\n';
  for (std::uint32_t i = 0; i < symbols.size() && i < model.size(); ++i) {
    const SymbolId id{i};
    out << symbols.name(id) << ',' << to_string(symbols.kind(id));
    for (double v : model.row(id)) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                       std::span<const RunRecord> records) {
  ensure_dir(dir);
  write_metrics_csv(dir / "metrics.csv", cfg, records);
  write_summary_csv(dir / "summary.csv", aggregate(records, cfg.pr_auc_mode));
  write_traces_csv(dir / "traces.csv", records);
  write_decodings_csv(dir / "decodings.csv", records);
  open_out(dir / "config.txt") << cfg.source;
  open_out(dir / "resolved_config.txt") << describe_config(cfg);
  if (cfg.dump_models) {
    for (const auto& r : records) {
      if (r.model) write_model_csv(dir / "models" / ("run_" + std::to_string(r.run_id) + ".csv"), r.symbols, *r.model);
    }
  }
}

// ---------------------------------------------------------------------------
// Commands

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, std::size_t jobs) {
  if (!cfg.sweep.empty()) throw ConfigError("[sweep] present: use the sweep command for grids");
  auto records = execute_runs(cfg, jobs);
  write_run_outputs(out, cfg, records);
  return records;
}

std::vector<DiagnoseRow> run_diagnose(const ExperimentConfig& cfg, const std::filesystem::path& out, std::size_t jobs) {
  if (cfg.diagnose_ratios.empty()) throw ConfigError("[diagnose] ratios: required by the diagnose command");
  if (!cfg.sweep.empty()) throw ConfigError("[sweep] present: diagnose does not sweep");
  ensure_dir(out);
  std::vector<DiagnoseRow> rows;
  auto table = open_out(out / "diagnose.csv");
  table << "ratio,runs,recall,recall_std,pr_auc,mrr,roc_auc,learned_runs,correlation\n";
  auto figure = open_out(out / "score_traces.csv");
  figure << "ratio,group,runs,epoch,rule_score,unification_score\n";
  for (double ratio : cfg.diagnose_ratios) {
    ExperimentConfig point = cfg;
    point.nudge_ratio = ratio;
    const auto records = execute_runs(point, jobs);
    write_run_outputs(out / ratio_dir_name(ratio), point, records);

    DiagnoseRow row;
    row.ratio = ratio;
    row.aggregate = aggregate(records, cfg.pr_auc_mode);
    row.correlation = final_score_correlation(records);
    const auto split = split_traces(records, cfg.train.epochs);
    row.learned_runs = split.learned.runs;
    rows.push_back(row);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    table << format_double(ratio) << ',' << row.aggregate.runs << ',' << format_double(row.aggregate.recall_mean) << ','
          << format_double(row.aggregate.recall_std) << ',' << format_double(row.aggregate.pr_auc.value_or(nan)) << ','
          << format_double(row.aggregate.mrr_mean) << ',' << format_double(row.aggregate.roc_auc_mean) << ','
          << row.learned_runs << ',' << format_double(row.correlation) << '\n';
    for (const auto& [name, group] : {std::pair{"learned", &split.learned}, std::pair{"not_learned", &split.not_learned}}) {
      if (group->runs == 0) continue;
      for (std::size_t e = 0; e < cfg.train.epochs; ++e) {
        figure << format_double(ratio) << ',' << name << ',' << group->runs << ',' << e << ','
               << format_double(group->rule_score[e]) << ',' << format_double(group->unification_score[e]) << '\n';
      }
    }
  }
  open_out(out / "config.txt") << cfg.source;
  open_out(out / "resolved_config.txt") << describe_config(cfg);
  return rows;
}

void run_generate(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  cfg.validate();
  GenConfig gen = cfg.data;
  gen.seed = cfg.seed;
  const auto bundle = generate_dataset(gen, cfg.test_fraction);
  ensure_dir(out);
  write_dataset(out, bundle);
}

std::vector<SweepEntry> run_sweep(std::span<const ExperimentConfig> configs, std::span<const std::string> names,
                                  const std::filesystem::path& out, std::size_t jobs) {
  if (configs.size() != names.size()) throw std::invalid_argument("run_sweep: one name per config");
  // Expand and validate every point before running anything.
  struct Pending {
    std::size_t config = 0;
    std::size_t point = 0;
    std::vector<std::pair<std::string, std::string>> overrides;
    ExperimentConfig cfg;
  };
  std::vector<Pending> pending;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const auto points = sweep_points(configs[c]);
    for (std::size_t p = 0; p < points.size(); ++p) {
      ExperimentConfig cfg = configs[c];
      cfg.sweep.clear();
      for (const auto& [key, value] : points[p]) set_config_value(cfg, key, value);
      cfg.validate();
      pending.push_back({c, p, points[p], std::move(cfg)});
    }
  }

  ensure_dir(out);
  std::vector<SweepEntry> entries;
  auto summary = open_out(out / "sweep_summary.csv");
  summary << "config,point,overrides,runs,recall_mean,recall_std,pr_auc,mrr_mean,roc_auc_mean,total_facts_mean,"
             "active_facts_mean\n";
  for (auto& job : pending) {
    const auto dir = out / names[job.config] / ("point_" + std::to_string(job.point));
    const auto records = execute_runs(job.cfg, jobs);
    write_run_outputs(dir, job.cfg, records);
    SweepEntry entry{names[job.config], job.point, job.overrides, aggregate(records, job.cfg.pr_auc_mode)};
    std::string overrides;
    for (std::size_t i = 0; i < entry.overrides.size(); ++i) {
      overrides += (i ? ";" : "") + entry.overrides[i].first + "=" + entry.overrides[i].second;
    }
    const auto& a = entry.aggregate;
    summary << entry.config_name << ',' << entry.point << ',' << overrides << ',' << a.runs << ','
            << format_double(a.recall_mean) << ',' << format_double(a.recall_std) << ','
            << format_double(a.pr_auc.value_or(std::numeric_limits<double>::quiet_NaN())) << ','
            << format_double(a.mrr_mean) << ',' << format_double(a.roc_auc_mean) << ','
            << format_double(a.total_facts_mean) << ',' << format_double(a.active_facts_mean) << '\n';
    summary.flush();
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace ntp
