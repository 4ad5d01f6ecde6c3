#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "ntp/prover.hpp"
#include "ntp/rng.hpp"
#include "support.hpp"

using namespace ntp;
using namespace ntp::testing;

namespace {

double best_rule_score(std::span<const Proof> proofs) {
  double best = 0.0;
  for (const auto& p : proofs) {
    if (!p.path.is_fact()) best = std::max(best, p.score);
  }
  return best;
}

}  // namespace

TEST_SUITE("prover") {
  TEST_CASE("unification score") {
    const std::vector<double> a = {0.3, -1.0, 2.0};
    CHECK(unification_score(a, a) == 1.0);
    const std::vector<double> b = {0.3, 0.0, 2.0};
    CHECK(unification_score(a, b) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK_THROWS(unification_score(a, std::vector<double>{1.0}));

    Rng rng(12);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> x(3), y(3);
      for (auto& v : x) v = rng.normal();
      for (auto& v : y) v = rng.normal();
      const double norm = std::hypot(x[0] - y[0], x[1] - y[1], x[2] - y[2]);
      CHECK(std::abs(unification_score(x, y) - std::exp(-norm)) < 1e-12);
    }
  }

  TEST_CASE("sibling example has one fact proof and one rule proof") {
    SymbolTable symbols;
    KnowledgeBase kb;
    const auto has_sibling = symbols.intern("HasSibling", SymbolKind::kDataPredicate);
    const auto has_brother = symbols.intern("HasBrother", SymbolKind::kDataPredicate);
    const auto emily = symbols.intern("Emily", SymbolKind::kConstant);
    const auto b = symbols.intern("B", SymbolKind::kRulePredicate);
    const auto a = symbols.intern("A", SymbolKind::kRulePredicate);
    kb.add_predicate(has_sibling, 1);
    kb.add_predicate(has_brother, 1);
    kb.add_constant(emily);
    kb.insert(Fact::unary(has_brother, emily));
    const std::vector<RuleInstance> rules = {{{1, 1}, {b, a}}};
    EmbeddingStore e(symbols.size(), 2);
    const double coords[][2] = {{0.0, 0.0}, {0.6, 0.8}, {3.0, 3.0}, {0.1, 0.0}, {0.6, 0.85}};
    for (std::uint32_t i = 0; i < 5; ++i) {
      e.row(SymbolId{i})[0] = coords[i][0];
      e.row(SymbolId{i})[1] = coords[i][1];
    }

    const auto proofs = enumerate_proofs(Fact::unary(has_sibling, emily), kb, rules, e, kUnbounded);
    REQUIRE(proofs.size() == 2);
    CHECK(proofs[0].path.is_fact());
    CHECK(proofs[0].unifications == std::vector<Unification>{{has_sibling, has_brother}});
    CHECK(proofs[0].score == doctest::Approx(std::exp(-1.0)));
    CHECK(proofs[1].path == ProofPath::via_rule(0));
    CHECK(proofs[1].unifications == std::vector<Unification>{{has_sibling, b}, {a, has_brother}});
    CHECK(proofs[1].score == doctest::Approx(std::exp(-0.1)));
    CHECK(proofs[1].worst() == Unification{has_sibling, b});

    const auto best = fact_score(proofs);
    CHECK(best.best == &proofs[1]);
  }

  TEST_CASE("no same-arity facts and no rules gives no proofs") {
    SymbolTable symbols;
    KnowledgeBase kb;
    const auto p = symbols.intern("P0", SymbolKind::kDataPredicate);
    const auto q = symbols.intern("P1", SymbolKind::kDataPredicate);
    const auto c = symbols.intern("c0", SymbolKind::kConstant);
    kb.add_predicate(p, 1);
    kb.add_predicate(q, 2);
    kb.add_constant(c);
    kb.insert(Fact::binary(q, c, c));
    const EmbeddingStore e(symbols.size(), 3);
    CHECK(enumerate_proofs(Fact::unary(p, c), kb, {}, e, kUnbounded).empty());
    CHECK(fact_score(std::span<const Proof>{}).best == nullptr);
    CHECK(fact_score(std::span<const Proof>{}).score == 0.0);
  }

  TEST_CASE("fact score takes the first of tied maxima") {
    std::vector<Proof> proofs(3);
    proofs[0].score = 0.2;
    proofs[1].score = 0.9;
    proofs[2].score = 0.9;
    const auto best = fact_score(proofs);
    CHECK(best.score == 0.9);
    CHECK(best.best == &proofs[1]);
    const auto single = fact_score(std::span(proofs).first(1));
    CHECK(single.best == &proofs[0]);
  }

  TEST_CASE("the goal never proves itself") {
    Rng rng(3);
    auto w = random_world(rng, 1, 1, 1, 8, 0.5);
    const auto& goal = w.kb.facts().front();
    for (const auto& proof : enumerate_proofs(goal, w.kb, w.rules, w.embeddings, kUnbounded)) {
      CHECK(proof.score < 1.0);
      if (proof.path.is_fact()) CHECK(proof.order[1] != 0);
    }
  }

  TEST_CASE("k_max pruning on a size-2 rule") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      World w;
      for (int i = 0; i < 4; ++i) {
        w.predicates.push_back(w.symbols.intern("P" + std::to_string(i), SymbolKind::kDataPredicate));
        w.kb.add_predicate(w.predicates.back(), 1);
      }
      for (int i = 0; i < 10; ++i) {
        w.constants.push_back(w.symbols.intern("c" + std::to_string(i), SymbolKind::kConstant));
        w.kb.add_constant(w.constants.back());
      }
      while (w.kb.size() < 7) {
        w.kb.insert(Fact::unary(w.predicates[1 + rng.below(3)], w.constants[rng.below(10)]));
      }
      const auto r0 = w.symbols.intern("R0", SymbolKind::kRulePredicate);
      const auto r1 = w.symbols.intern("R1", SymbolKind::kRulePredicate);
      const auto r2 = w.symbols.intern("R2", SymbolKind::kRulePredicate);
      w.rules = {{{1, 2}, {r0, r1, r2}}};
      w.embeddings = EmbeddingStore(w.symbols.size(), 4);
      for (std::uint32_t id = 0; id < w.symbols.size(); ++id) {
        for (auto& v : w.embeddings.row(SymbolId{id})) v = 0.5 * rng.normal();
      }
      const auto goal = Fact::unary(w.predicates[0], w.constants[rng.below(10)]);

      const auto full = enumerate_proofs(goal, w.kb, w.rules, w.embeddings, kUnbounded);
      const auto seven = enumerate_proofs(goal, w.kb, w.rules, w.embeddings, 7);
      REQUIRE(full.size() == seven.size());
      for (std::size_t i = 0; i < full.size(); ++i) {
        CHECK(full[i].unifications == seven[i].unifications);
        CHECK(full[i].score == seven[i].score);
      }
      const auto three = enumerate_proofs(goal, w.kb, w.rules, w.embeddings, 3);
      const auto rule_count = std::count_if(three.begin(), three.end(), [](const Proof& p) { return !p.path.is_fact(); });
      CHECK(rule_count == 9);
      CHECK(best_rule_score(three) <= best_rule_score(full));

      // The best full-enumeration proof survives when its body candidates are
      // each within their slot's top 3.
      const Proof* full_best = nullptr;
      for (const auto& p : full) {
        if (!p.path.is_fact() && (full_best == nullptr || p.score > full_best->score)) full_best = &p;
      }
      REQUIRE(full_best != nullptr);
      if (full_best->order[1] < 3 && full_best->order[2] < 3) CHECK(best_rule_score(three) == best_rule_score(full));

      double previous = 0.0;
      for (std::size_t k = 1; k <= 8; ++k) {
        const double s = best_rule_score(enumerate_proofs(goal, w.kb, w.rules, w.embeddings, k));
        CHECK(s >= previous);
        previous = s;
      }
      CHECK(previous == best_rule_score(full));
    }
  }

  TEST_CASE("exhaustive enumeration matches an independent enumerator") {
    Rng rng(99);
    for (int trial = 0; trial < 60; ++trial) {
      const int order = 1 + static_cast<int>(rng.below(2));
      const int size = 1 + static_cast<int>(rng.below(order == 1 ? 3 : 2));
      const std::size_t n_c = order == 1 ? 6 + rng.below(7) : 3 + rng.below(3);
      auto w = random_world(rng, order, size, 1 + rng.below(3), n_c, order == 1 ? 0.4 : 0.2);
      for (int g = 0; g < 5; ++g) {
        const auto goal = g == 0 && w.kb.size() > 0 ? w.kb.facts()[rng.below(w.kb.size())] : random_goal(rng, w, order);
        const auto proofs = enumerate_proofs(goal, w.kb, w.rules, w.embeddings, kUnbounded);
        std::vector<double> scores;
        for (const auto& p : proofs) {
          scores.push_back(p.score);
          CHECK(p.score == pair_score(w.embeddings, p.worst().left, p.worst().right));
        }
        std::sort(scores.begin(), scores.end());
        const auto expected = oracle_scores(w, goal);
        REQUIRE(scores.size() == expected.size());
        CHECK(scores == expected);
        const double best = expected.empty() ? 0.0 : expected.back();
        CHECK(fact_score(proofs).score == best);

        const ProofIndex index(w.kb, w.rules);
        ProofSearch search(index, w.embeddings, kUnbounded);
        CHECK(search.fact_score(goal) == best);
      }
    }
  }

  TEST_CASE("ProofSearch returns the top of every path") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
      const int order = 1 + static_cast<int>(rng.below(2));
      const int size = 1 + static_cast<int>(rng.below(order == 1 ? 3 : 2));
      auto w = random_world(rng, order, size, 1 + rng.below(3), order == 1 ? 12 : 5, order == 1 ? 0.5 : 0.25);
      const ProofIndex index(w.kb, w.rules);
      for (std::size_t k_max : {std::size_t{1}, std::size_t{3}, kUnbounded}) {
        ProofSearch search(index, w.embeddings, k_max);
        for (int g = 0; g < 4; ++g) {
          const auto goal = g == 0 ? w.kb.facts()[rng.below(w.kb.size())] : random_goal(rng, w, order);
          auto proofs = enumerate_proofs(goal, w.kb, w.rules, w.embeddings, k_max);
          std::stable_sort(proofs.begin(), proofs.end(),
                           [](const Proof& a, const Proof& b) { return a.path < b.path || (a.path == b.path && ranks_before(a, b)); });
          for (std::size_t depth : {1, 2, 3}) {
            std::vector<ProofSummary> expected;
            std::map<ProofPath, std::size_t> taken;
            for (const auto& p : proofs) {
              if (taken[p.path]++ < depth) expected.push_back(summarize(p));
            }
            const auto got = search.top_per_path(goal, depth);
            REQUIRE(got.size() == expected.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
              CHECK(got[i].path == expected[i].path);
              CHECK(got[i].score == expected[i].score);
              CHECK(got[i].worst == expected[i].worst);
            }
          }
        }
      }
    }
  }
}
