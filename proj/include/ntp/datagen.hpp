// Synthetic relational datasets with injected ground-truth relationships.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ntp/logic.hpp"
#include "ntp/rng.hpp"

namespace ntp {

struct GenConfig {
  std::size_t n_constants = 200;
  std::size_t n_predicates = 5;
  double base_prob = 0.5;
  double rel_prob = 1.0;
  std::size_t n_relationships = 1;
  RuleTemplate rule_template{};
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct DatasetBundle {
  SymbolTable symbols;
  KnowledgeBase train;
  std::vector<Fact> test_facts;
  std::vector<Relationship> relationships;
  GenConfig config;
  double test_fraction = 0.2;
  std::size_t active_count = 0;
  std::size_t total_count = 0;
};

// Builds the full fact set, then holds out ceil(test_fraction * active) active
// facts. Deterministic in (cfg, test_fraction).
DatasetBundle generate_dataset(const GenConfig& cfg, double test_fraction);

// Head facts whose relationship body holds on the same constant tuple. Output
// is ordered by relationship, then by tuple, without duplicates.
std::vector<Fact> identify_active_facts(const KnowledgeBase& facts, std::span<const Relationship> relationships,
                                        std::span<const SymbolId> constants);

// One negative per argument position, each absent from `kb`. Positions where no
// constant produces an absent fact are skipped and counted in `skipped`.
std::vector<Fact> corrupt_training_fact(const Fact& fact, const KnowledgeBase& kb, Rng& rng,
                                        std::size_t* skipped = nullptr);

// Every single-position substitution of `fact` absent from `kb`, deduplicated,
// ordered by position then by constant registration order.
std::vector<Fact> enumerate_test_corruptions(const Fact& fact, const KnowledgeBase& kb);

// train.facts, test.facts, relations.txt and gen_meta.
void write_dataset(const std::filesystem::path& dir, const DatasetBundle& bundle);
DatasetBundle load_dataset(const std::filesystem::path& dir);

}  // namespace ntp
