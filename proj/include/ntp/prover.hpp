// Soft backward chaining: proofs of a goal either unify it directly with a
// training fact, or apply one rule instance whose body atoms are grounded by
// the goal's constants and unified with training facts.
//
// A proof's score is the minimum exp(-distance) over its symbol-pair
// unifications. Pairs of identical symbols are omitted (they score 1). The
// goal fact is never used inside its own proofs.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ntp/embedding.hpp"
#include "ntp/logic.hpp"

namespace ntp {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

struct Unification {
  SymbolId left;
  SymbolId right;

  friend bool operator==(const Unification&, const Unification&) = default;
};

struct ProofPath {
  static constexpr std::int32_t kFact = -1;
  std::int32_t rule = kFact;

  static ProofPath fact() { return {}; }
  static ProofPath via_rule(std::size_t rule_index) { return {static_cast<std::int32_t>(rule_index)}; }
  bool is_fact() const { return rule == kFact; }
  // 0 for FACT, 1 + rule index otherwise.
  std::size_t index() const { return static_cast<std::size_t>(rule + 1); }

  friend auto operator<=>(const ProofPath&, const ProofPath&) = default;
};

// Deterministic enumeration position: {path index, fact index, 0, 0} on the
// FACT path, {path index, slot positions...} on a RULE path, where a slot
// position indexes the slot's pruned candidate list.
using ProofOrder = std::array<std::uint32_t, 4>;

struct Proof {
  ProofPath path;
  ProofOrder order{};
  std::vector<Unification> unifications;
  std::size_t worst_index = 0;
  double score = 0.0;

  const Unification& worst() const { return unifications[worst_index]; }
};

// What training and ranking need from a proof.
struct ProofSummary {
  ProofPath path;
  ProofOrder order{};
  Unification worst;
  double score = 0.0;

  friend bool operator==(const ProofSummary&, const ProofSummary&) = default;
};

ProofSummary summarize(const Proof& proof);

// Rank order: higher score first, ties by enumeration position.
template <class P>
bool ranks_before(const P& a, const P& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.order < b.order;
}

// exp(-||a - b||_2). Throws std::invalid_argument on a dimension mismatch.
double unification_score(std::span<const double> a, std::span<const double> b);

// Full enumeration, FACT path first, then each rule in order; k_max bounds
// the candidate list of every rule body slot.
std::vector<Proof> enumerate_proofs(const Fact& goal, const KnowledgeBase& kb, std::span<const RuleInstance> rules,
                                    const EmbeddingStore& embeddings, std::size_t k_max);

struct FactScore {
  double score = 0.0;
  const Proof* best = nullptr;
};

// Highest proof score, first proof on ties; 0 with no proof when empty.
FactScore fact_score(std::span<const Proof> proofs);

// Read-only layout of a knowledge base and rule set for ProofSearch.
class ProofIndex {
 public:
  ProofIndex(const KnowledgeBase& kb, std::vector<RuleInstance> rules);

  const KnowledgeBase& kb() const { return *kb_; }
  const std::vector<RuleInstance>& rules() const { return rules_; }

 private:
  friend class ProofSearch;
  static constexpr std::uint32_t kMissing = std::numeric_limits<std::uint32_t>::max();

  struct Group {
    std::uint32_t predicate = 0;  // local predicate index
    int arity = 1;
    std::vector<std::uint32_t> fact_index;
    std::vector<std::uint32_t> arg0;
    std::vector<std::uint32_t> arg1;
  };

  std::uint32_t local_predicate(SymbolId id) const;
  std::uint32_t local_constant(SymbolId id) const;

  const KnowledgeBase* kb_;
  std::vector<RuleInstance> rules_;
  std::vector<SymbolId> predicates_;
  std::vector<SymbolId> constants_;
  std::vector<std::uint32_t> predicate_local_;
  std::vector<std::uint32_t> constant_local_;
  std::vector<Group> groups_;
  std::size_t fact_count_ = 0;
};

// Top-ranked proofs per path against one embedding snapshot. Produces
// exactly what enumerate_proofs would rank first, without materializing the
// rule-path cross products.
class ProofSearch {
 public:
  ProofSearch(const ProofIndex& index, const EmbeddingStore& embeddings, std::size_t k_max);

  // The first `depth` proofs of every nonempty path in rank order, paths in
  // path order.
  std::vector<ProofSummary> top_per_path(const Fact& goal, std::size_t depth);

  // Score of the best proof, 0 when the goal has no proof.
  double fact_score(const Fact& goal);

 private:
  struct Candidate {
    double score;
    std::uint32_t fact_index;
    std::uint8_t worst;  // 0 = predicate pair, 1 + i = argument pair i
  };

  const std::vector<double>& constant_scores(std::uint32_t local);
  double predicate_score(std::uint32_t a, std::uint32_t b) const { return predicate_scores_[a * n_predicates_ + b]; }

  const ProofIndex* index_;
  const EmbeddingStore* embeddings_;
  std::size_t k_max_;
  std::size_t n_predicates_;
  std::vector<double> predicate_scores_;
  std::vector<std::vector<double>> constant_scores_;
  std::vector<double> arg_scores_;
  std::vector<std::uint8_t> arg_worst_;
};

}  // namespace ntp
