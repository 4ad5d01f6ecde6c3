// Rule decoding and the rule-learning / fact-prediction metrics.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ntp/datagen.hpp"
#include "ntp/embedding.hpp"
#include "ntp/logic.hpp"
#include "ntp/prover.hpp"

namespace ntp {

struct DecodedRule {
  std::size_t rule_index = 0;
  SymbolId head;
  std::vector<SymbolId> body;
  double score = 0.0;  // worst slot's exp(-distance) to its nearest predicate
};

// Every slot snaps to its nearest data predicate, lowest position on ties.
DecodedRule decode_rule(const RuleInstance& rule, const EmbeddingStore& embeddings,
                        std::span<const SymbolId> data_predicates, std::size_t rule_index = 0);

bool decoding_matches(const DecodedRule& decoded, std::span<const Relationship> relationships);

struct RunDecodings {
  std::vector<DecodedRule> decodings;
  std::vector<Relationship> relationships;
};

// Fraction of relationships recovered by at least one decoding.
double run_recall(std::span<const DecodedRule> decodings, std::span<const Relationship> relationships);
// Mean of run_recall over runs; throws std::invalid_argument when empty.
double recall(std::span<const RunDecodings> runs);

// Area under the step-wise precision-recall curve: scores sorted descending
// with positives first on ties, precision summed at every positive and
// divided by the positive count. nullopt without positives.
std::optional<double> pr_auc(std::span<const double> scores, std::span<const int> gold);

// P(positive > negative) + P(tie) / 2 via mid-ranks. nullopt unless both
// classes are present.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

// One held-out fact with its scored corruptions.
struct RankedFact {
  double true_score = 0.0;
  std::vector<double> corruption_scores;
};

struct TestRanking {
  std::vector<RankedFact> facts;  // facts with at least one corruption
  std::size_t skipped = 0;        // facts whose corruption list was empty
};

TestRanking rank_test_facts(std::span<const Fact> test_facts, const KnowledgeBase& kb_train,
                            std::span<const RuleInstance> rules, const EmbeddingStore& embeddings,
                            std::size_t k_max);

// 1 / (1 + #greater + #tied / 2).
double reciprocal_rank(double true_score, std::span<const double> corruption_scores);

// Both throw std::invalid_argument when no fact was ranked.
double mrr(const TestRanking& ranking);
double roc_auc_duplicated(const TestRanking& ranking);

double mrr(std::span<const Fact> test_facts, const KnowledgeBase& kb_train, const EmbeddingStore& embeddings,
           std::span<const RuleInstance> rules, std::size_t k_max);
double roc_auc_duplicated(std::span<const Fact> test_facts, const KnowledgeBase& kb_train,
                          const EmbeddingStore& embeddings, std::span<const RuleInstance> rules, std::size_t k_max);

struct ScoredDecoding {
  DecodedRule rule;
  bool gold = false;
};

struct RunMetrics {
  double recall = 0.0;
  std::vector<ScoredDecoding> decodings;
  double mrr = 0.0;      // NaN when no test fact could be ranked
  double roc_auc = 0.0;  // NaN when no test fact could be ranked
  std::size_t skipped_test_facts = 0;
};

RunMetrics evaluate_run(const DatasetBundle& bundle, std::span<const RuleInstance> rules,
                        const EmbeddingStore& embeddings, std::size_t k_max);

}  // namespace ntp
