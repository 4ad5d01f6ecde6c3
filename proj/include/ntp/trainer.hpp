// Embedding training with closed-form gradients through the min/max proof
// structure, sparse Adam, and the proof-selection heuristics.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ntp/datagen.hpp"
#include "ntp/embedding.hpp"
#include "ntp/logic.hpp"
#include "ntp/prover.hpp"
#include "ntp/rng.hpp"

namespace ntp {

enum class HeuristicKind : std::uint8_t {
  kBestOnly,     // global best proof only (winner takes all)
  kTopK,         // k best proofs overall
  kAllPath,      // best proof of every path
  kTopKAllPath,  // k best proofs of every path
  kCombinedAlt,  // k best overall plus best of every path
};

struct Heuristic {
  HeuristicKind kind = HeuristicKind::kBestOnly;
  std::size_t k = 1;

  static Heuristic best_only() { return {HeuristicKind::kBestOnly, 1}; }
  static Heuristic top_k(std::size_t k) { return {HeuristicKind::kTopK, k}; }
  static Heuristic all_path() { return {HeuristicKind::kAllPath, 1}; }
  static Heuristic top_k_all_path(std::size_t k) { return {HeuristicKind::kTopKAllPath, k}; }
  static Heuristic combined_alt(std::size_t k) { return {HeuristicKind::kCombinedAlt, k}; }

  // How many ranked proofs per path the selection can reach.
  std::size_t depth() const;
  // best_only, top_k(2), all_path, top_k_all_path(2), combined_alt(2).
  std::string name() const;
  static Heuristic parse(std::string_view text);

  friend bool operator==(const Heuristic&, const Heuristic&) = default;
};

// How RULE-path proofs are grouped for the per-path heuristics: one path per
// rule instance, or one per rule template shared by all its instances.
enum class PathGrouping : std::uint8_t { kInstance, kTemplate };

struct TrainConfig {
  std::size_t dim = 50;
  double init_scale = 0.3;           // predicates (data and rule)
  double constant_init_scale = 0.6;  // constants
  double learning_rate = 1e-3;
  double clip = 5.0;
  double decay = 3e-4;
  std::size_t epochs = 50;
  std::size_t batch_true_facts = 10;
  std::size_t n_rules = 3;
  Heuristic heuristic{};
  PathGrouping path_grouping = PathGrouping::kInstance;
  std::size_t k_max = 10;
  double epsilon = 1e-7;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n_symbols, std::size_t dim)
      : first(n_symbols * dim, 0.0), second(n_symbols * dim, 0.0), updates(n_symbols, 0) {}

  std::vector<double> first;
  std::vector<double> second;
  std::vector<std::uint64_t> updates;  // per symbol, drives bias correction
  std::uint64_t step = 0;
};

struct EpochTrace {
  std::size_t epoch = 0;
  double rule_score = 0.0;
  double unification_score = 0.0;
  double mean_loss = 0.0;
};

using SparseGradient = std::map<SymbolId, std::vector<double>>;

// Appends cfg.n_rules fresh rule predicates per slot to `symbols`.
std::vector<RuleInstance> instantiate_rules(SymbolTable& symbols, const RuleTemplate& rule_template,
                                            std::size_t n_rules);

// One row per symbol in id order, i.i.d. normal with std constant_init_scale
// for constants and init_scale for predicates.
EmbeddingStore init_embeddings(const SymbolTable& symbols, const TrainConfig& cfg, Rng& rng);

// Pulls the best-placed matching rule of every relationship toward the
// ground-truth predicates: slot <- truth + ratio * (slot - truth).
void nudge_initialization(EmbeddingStore& embeddings, std::span<const RuleInstance> rules,
                          std::span<const Relationship> relationships, double ratio);

// Selected proofs in rank order. Input is any collection that contains, per
// path, at least the proofs the heuristic can reach (see Heuristic::depth).
template <class P>
std::vector<P> select_proof_set(std::span<const P> proofs, const Heuristic& heuristic);

// Sum of clamped cross-entropy terms over the selected proofs; each proof
// adds its gradient on its own worst unification into `gradient`.
double loss_and_gradient(int label, std::span<const ProofSummary> selected, const EmbeddingStore& embeddings,
                         double epsilon, SparseGradient& gradient);

double effective_learning_rate(const TrainConfig& cfg, std::uint64_t step);

void adam_step(EmbeddingStore& embeddings, AdamState& state, const SparseGradient& gradient, const TrainConfig& cfg);

struct ScoreTrace {
  double rule_score = 0.0;
  double unification_score = 0.0;
};

ScoreTrace track_scores(const EmbeddingStore& embeddings, std::span<const RuleInstance> rules,
                        std::span<const Relationship> relationships, std::span<const SymbolId> data_predicates);

struct TrainStats {
  std::uint64_t steps = 0;
  std::uint64_t skipped_corruptions = 0;
  std::uint64_t empty_proof_sets = 0;
};

struct TrainResult {
  SymbolTable symbols;  // dataset symbols plus the rule predicates
  std::vector<RuleInstance> rules;
  EmbeddingStore embeddings;
  std::vector<EpochTrace> trace;
  TrainStats stats;
};

TrainResult train_run(const DatasetBundle& bundle, const TrainConfig& cfg,
                      std::optional<double> nudge_ratio = std::nullopt);

// ---------------------------------------------------------------------------

template <class P>
std::vector<P> select_proof_set(std::span<const P> proofs, const Heuristic& heuristic) {
  std::vector<std::size_t> ranked(proofs.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i] = i;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return ranks_before(proofs[a], proofs[b]); });

  std::vector<char> chosen(proofs.size(), 0);
  const auto take_global = [&](std::size_t k) {
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) chosen[ranked[i]] = 1;
  };
  const auto take_per_path = [&](std::size_t k) {
    std::map<ProofPath, std::size_t> taken;
    for (auto i : ranked) {
      if (taken[proofs[i].path]++ < k) chosen[i] = 1;
    }
  };
  switch (heuristic.kind) {
    case HeuristicKind::kBestOnly:
      take_global(1);
      break;
    case HeuristicKind::kTopK:
      take_global(heuristic.k);
      break;
    case HeuristicKind::kAllPath:
      take_per_path(1);
      break;
    case HeuristicKind::kTopKAllPath:
      take_per_path(heuristic.k);
      break;
    case HeuristicKind::kCombinedAlt:
      take_global(heuristic.k);
      take_per_path(1);
      break;
  }
  std::vector<P> out;
  for (auto i : ranked) {
    if (chosen[i]) out.push_back(proofs[i]);
  }
  return out;
}

}  // namespace ntp
