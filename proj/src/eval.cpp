#include "ntp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ntp {

DecodedRule decode_rule(const RuleInstance& rule, const EmbeddingStore& embeddings,
                        std::span<const SymbolId> data_predicates, std::size_t rule_index) {
  if (data_predicates.empty()) throw std::invalid_argument("decode_rule needs at least one data predicate");
  DecodedRule out{rule_index, {}, {}, 1.0};
  for (std::size_t slot = 0; slot < rule.predicates.size(); ++slot) {
    const auto row = embeddings.row(rule.predicates[slot]);
    std::size_t nearest = 0;
    double nearest_dist = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < data_predicates.size(); ++p) {
      const double d = euclidean_distance(row, embeddings.row(data_predicates[p]));
      if (d < nearest_dist) {
        nearest_dist = d;
        nearest = p;
      }
    }
    out.score = std::min(out.score, std::exp(-nearest_dist));
    if (slot == 0) out.head = data_predicates[nearest];
    else out.body.push_back(data_predicates[nearest]);
  }
  return out;
}

bool decoding_matches(const DecodedRule& decoded, std::span<const Relationship> relationships) {
  return std::any_of(relationships.begin(), relationships.end(),
                     [&](const Relationship& rel) { return matches_relationship(decoded.head, decoded.body, rel); });
}

double run_recall(std::span<const DecodedRule> decodings, std::span<const Relationship> relationships) {
  if (relationships.empty()) return 0.0;
  std::size_t matched = 0;
  for (const auto& rel : relationships) {
    if (std::any_of(decodings.begin(), decodings.end(), [&](const DecodedRule& d) {
          return matches_relationship(d.head, d.body, rel);
        })) {
      ++matched;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(relationships.size());
}

double recall(std::span<const RunDecodings> runs) {
  if (runs.empty()) throw std::invalid_argument("recall over zero runs");
  double sum = 0.0;
  for (const auto& run : runs) sum += run_recall(run.decodings, run.relationships);
  return sum / static_cast<double>(runs.size());
}

std::optional<double> pr_auc(std::span<const double> scores, std::span<const int> gold) {
  if (scores.size() != gold.size()) throw std::invalid_argument("pr_auc: length mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return gold[a] > gold[b];
  });
  std::size_t positives = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (gold[idx[i]] == 1) {
      ++positives;
      sum += static_cast<double>(positives) / static_cast<double>(i + 1);
    }
  }
  if (positives == 0) return std::nullopt;
  return sum / static_cast<double>(positives);
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of positive mid-ranks (1-based) minus its minimum, i.e. Mann-Whitney U.
  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) tied_pos += labels[idx[j++]] == 1 ? 1 : 0;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += mid_rank * static_cast<double>(tied_pos);
    positives += tied_pos;
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double p = static_cast<double>(positives);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

TestRanking rank_test_facts(std::span<const Fact> test_facts, const KnowledgeBase& kb_train,
                            std::span<const RuleInstance> rules, const EmbeddingStore& embeddings,
                            std::size_t k_max) {
  const ProofIndex index(kb_train, std::vector<RuleInstance>(rules.begin(), rules.end()));
  ProofSearch search(index, embeddings, k_max);
  TestRanking ranking;
  for (const auto& fact : test_facts) {
    const auto corruptions = enumerate_test_corruptions(fact, kb_train);
    if (corruptions.empty()) {
      ++ranking.skipped;
      continue;
    }
    RankedFact ranked{search.fact_score(fact), {}};
    ranked.corruption_scores.reserve(corruptions.size());
    for (const auto& c : corruptions) ranked.corruption_scores.push_back(search.fact_score(c));
    ranking.facts.push_back(std::move(ranked));
  }
  return ranking;
}

double reciprocal_rank(double true_score, std::span<const double> corruption_scores) {
  double greater = 0.0;
  double tied = 0.0;
  for (double s : corruption_scores) {
    if (s > true_score) greater += 1.0;
    else if (s == true_score) tied += 1.0;
  }
  return 1.0 / (1.0 + greater + 0.5 * tied);
}

double mrr(const TestRanking& ranking) {
  if (ranking.facts.empty()) throw std::invalid_argument("mrr: no rankable test facts");
  double sum = 0.0;
  for (const auto& f : ranking.facts) sum += reciprocal_rank(f.true_score, f.corruption_scores);
  return sum / static_cast<double>(ranking.facts.size());
}

double roc_auc_duplicated(const TestRanking& ranking) {
  if (ranking.facts.empty()) throw std::invalid_argument("roc_auc: no rankable test facts");
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& f : ranking.facts) {
    const std::size_t m = f.corruption_scores.size();
    scores.insert(scores.end(), m, f.true_score);
    labels.insert(labels.end(), m, 1);
    scores.insert(scores.end(), f.corruption_scores.begin(), f.corruption_scores.end());
    labels.insert(labels.end(), m, 0);
  }
  return *roc_auc(scores, labels);
}

double mrr(std::span<const Fact> test_facts, const KnowledgeBase& kb_train, const EmbeddingStore& embeddings,
           std::span<const RuleInstance> rules, std::size_t k_max) {
  return mrr(rank_test_facts(test_facts, kb_train, rules, embeddings, k_max));
}

double roc_auc_duplicated(std::span<const Fact> test_facts, const KnowledgeBase& kb_train,
                          const EmbeddingStore& embeddings, std::span<const RuleInstance> rules, std::size_t k_max) {
  return roc_auc_duplicated(rank_test_facts(test_facts, kb_train, rules, embeddings, k_max));
}

RunMetrics evaluate_run(const DatasetBundle& bundle, std::span<const RuleInstance> rules,
                        const EmbeddingStore& embeddings, std::size_t k_max) {
  RunMetrics metrics;
  std::vector<DecodedRule> decoded;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    decoded.push_back(decode_rule(rules[r], embeddings, bundle.train.data_predicates(), r));
    metrics.decodings.push_back({decoded.back(), decoding_matches(decoded.back(), bundle.relationships)});
  }
  metrics.recall = run_recall(decoded, bundle.relationships);

  const auto ranking = rank_test_facts(bundle.test_facts, bundle.train, rules, embeddings, k_max);
  metrics.skipped_test_facts = ranking.skipped;
  if (ranking.facts.empty()) {
    metrics.mrr = std::numeric_limits<double>::quiet_NaN();
    metrics.roc_auc = std::numeric_limits<double>::quiet_NaN();
  } else {
    metrics.mrr = mrr(ranking);
    metrics.roc_auc = roc_auc_duplicated(ranking);
  }
  return metrics;
}

}  // namespace ntp
