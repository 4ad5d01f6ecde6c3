// Experiment configs, multi-run execution and the CSV outputs behind the CLI.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ntp/datagen.hpp"
#include "ntp/eval.hpp"
#include "ntp/trainer.hpp"

namespace ntp {

enum class PrAucMode : std::uint8_t { kPooled, kPerRun };

struct SweepAxis {
  std::string key;  // "section.key"
  std::vector<std::string> values;
};

struct ExperimentConfig {
  GenConfig data{};
  TrainConfig train{};
  std::size_t runs = 50;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::optional<double> nudge_ratio;
  std::string output = "out";
  PrAucMode pr_auc_mode = PrAucMode::kPooled;
  bool dump_models = false;
  std::vector<double> diagnose_ratios;
  std::vector<SweepAxis> sweep;
  std::string source;  // config text as read

  void validate() const;
};

// `[section]` headers, `key = value` lines, `#` comments. Unknown sections or
// keys throw ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Sets one "section.key" (or "key" inside `section`); ConfigError if unknown
// or malformed.
void set_config_value(ExperimentConfig& cfg, std::string_view section, std::string_view key, std::string_view value);
void set_config_value(ExperimentConfig& cfg, std::string_view dotted_key, std::string_view value);

// Every key with its effective value, one `section.key = value` per line.
std::string describe_config(const ExperimentConfig& cfg);

// Grid points of cfg.sweep in row-major order (last axis fastest); each point
// lists its (key, value) overrides. A config without axes yields one empty point.
std::vector<std::vector<std::pair<std::string, std::string>>> sweep_points(const ExperimentConfig& cfg);

class RunFailure : public std::runtime_error {
 public:
  RunFailure(std::uint64_t seed, const std::string& what);
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

struct RunRecord {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  std::vector<Relationship> relationships;
  SymbolTable symbols;
  RunMetrics metrics;
  std::vector<EpochTrace> trace;
  TrainStats stats;
  std::size_t total_facts = 0;
  std::size_t active_facts = 0;
  std::size_t test_facts = 0;
  std::optional<EmbeddingStore> model;  // kept when dump_models is set
};

// Generate, train and evaluate run `index` with seed cfg.seed + index.
RunRecord execute_run(const ExperimentConfig& cfg, std::size_t index);

// All cfg.runs runs on up to `jobs` threads; output ordered by run index.
std::vector<RunRecord> execute_runs(const ExperimentConfig& cfg, std::size_t jobs);

struct Aggregate {
  std::size_t runs = 0;
  double recall_mean = 0.0;
  double recall_std = 0.0;  // population std over runs
  std::optional<double> pr_auc;
  double mrr_mean = 0.0;
  double mrr_std = 0.0;
  double roc_auc_mean = 0.0;
  double roc_auc_std = 0.0;
  double total_facts_mean = 0.0;
  double active_facts_mean = 0.0;
};

// NaN run metrics (nothing rankable) are left out of the MRR/ROC means.
Aggregate aggregate(std::span<const RunRecord> records, PrAucMode mode);

double mean(std::span<const double> values);
double population_std(std::span<const double> values);
// NaN when either side has zero variance or fewer than two points.
double pearson(std::span<const double> x, std::span<const double> y);

// Writers. Files land in `dir`, which is created if missing.
void write_metrics_csv(const std::filesystem::path& file, const ExperimentConfig& cfg,
                       std::span<const RunRecord> records);
void write_summary_csv(const std::filesystem::path& file, const Aggregate& agg);
void write_traces_csv(const std::filesystem::path& file, std::span<const RunRecord> records);
void write_decodings_csv(const std::filesystem::path& file, std::span<const RunRecord> records);
void write_model_csv(const std::filesystem::path& file, const SymbolTable& symbols, const EmbeddingStore& model);

// metrics.csv, summary.csv, traces.csv, decodings.csv, config.txt,
// resolved_config.txt and, with dump_models, models/run_<id>.csv.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                       std::span<const RunRecord> records);

struct DiagnoseRow {
  double ratio = 1.0;
  Aggregate aggregate;
  double correlation = 0.0;  // final rule_score vs unification_score
  std::size_t learned_runs = 0;
};

// Per-epoch averages split by final rule_score > 0.5.
struct TraceGroup {
  std::size_t runs = 0;
  std::vector<double> rule_score;
  std::vector<double> unification_score;
};

struct TraceSplit {
  TraceGroup learned;
  TraceGroup not_learned;
};

TraceSplit split_traces(std::span<const RunRecord> records, std::size_t epochs);
double final_score_correlation(std::span<const RunRecord> records);

// Command bodies shared by the CLI and the acceptance checks.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, std::size_t jobs);
std::vector<DiagnoseRow> run_diagnose(const ExperimentConfig& cfg, const std::filesystem::path& out, std::size_t jobs);
void run_generate(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct SweepEntry {
  std::string config_name;
  std::size_t point = 0;
  std::vector<std::pair<std::string, std::string>> overrides;
  Aggregate aggregate;
};

std::vector<SweepEntry> run_sweep(std::span<const ExperimentConfig> configs, std::span<const std::string> names,
                                  const std::filesystem::path& out, std::size_t jobs);

}  // namespace ntp
