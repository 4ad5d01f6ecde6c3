// Random worlds and brute-force reference implementations shared by the unit
// tests and the acceptance checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntp/embedding.hpp"
#include "ntp/eval.hpp"
#include "ntp/logic.hpp"
#include "ntp/prover.hpp"
#include "ntp/rng.hpp"
#include "ntp/trainer.hpp"

namespace ntp::testing {

struct World {
  SymbolTable symbols;
  KnowledgeBase kb;
  std::vector<SymbolId> predicates;
  std::vector<SymbolId> constants;
  std::vector<RuleInstance> rules;
  EmbeddingStore embeddings;
};

inline World random_world(Rng& rng, int order, int rule_size, std::size_t n_rules, std::size_t n_c, double density,
                          std::size_t dim = 5, double scale = 0.5) {
  World w;
  for (int i = 0; i < 4; ++i) {
    w.predicates.push_back(w.symbols.intern("P" + std::to_string(i), SymbolKind::kDataPredicate));
    w.kb.add_predicate(w.predicates.back(), order);
  }
  for (std::size_t i = 0; i < n_c; ++i) {
    w.constants.push_back(w.symbols.intern("c" + std::to_string(i), SymbolKind::kConstant));
    w.kb.add_constant(w.constants.back());
  }
  for (auto p : w.predicates) {
    for (auto a : w.constants) {
      if (order == 1) {
        if (rng.bernoulli(density)) w.kb.insert(Fact::unary(p, a));
        continue;
      }
      for (auto b : w.constants) {
        if (rng.bernoulli(density)) w.kb.insert(Fact::binary(p, a, b));
      }
    }
  }
  for (std::size_t r = 0; r < n_rules; ++r) {
    RuleInstance rule{{order, rule_size}, {}};
    for (int s = 0; s <= rule_size; ++s) {
      rule.predicates.push_back(
          w.symbols.intern("R" + std::to_string(r) + "_" + std::to_string(s), SymbolKind::kRulePredicate));
    }
    w.rules.push_back(rule);
  }
  w.embeddings = EmbeddingStore(w.symbols.size(), dim);
  for (std::uint32_t id = 0; id < w.symbols.size(); ++id) {
    for (auto& v : w.embeddings.row(SymbolId{id})) v = scale * rng.normal();
  }
  return w;
}

inline Fact random_goal(Rng& rng, const World& w, int order) {
  const auto p = w.predicates[rng.below(w.predicates.size())];
  const auto a = w.constants[rng.below(w.constants.size())];
  if (order == 1) return Fact::unary(p, a);
  return Fact::binary(p, a, w.constants[rng.below(w.constants.size())]);
}

// Written independently of the prover: explicit pair lists, full cross
// products, no pruning.
inline double pair_score(const EmbeddingStore& e, SymbolId a, SymbolId b) {
  const auto x = e.row(a);
  const auto y = e.row(b);
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
  return std::exp(-std::sqrt(sq));
}

inline double atom_score(const EmbeddingStore& e, SymbolId pred, const Fact& goal, const Fact& f) {
  double s = pred == f.predicate ? 1.0 : pair_score(e, pred, f.predicate);
  for (std::size_t i = 0; i < goal.arity; ++i) {
    if (goal.args[i] != f.args[i]) s = std::min(s, pair_score(e, goal.args[i], f.args[i]));
  }
  return s;
}

// Every proof score of `goal`, ascending.
inline std::vector<double> oracle_scores(const World& w, const Fact& goal) {
  std::vector<Fact> usable;
  for (const auto& f : w.kb.facts()) {
    if (f.arity == goal.arity && !(f == goal)) usable.push_back(f);
  }
  std::vector<double> scores;
  for (const auto& f : usable) scores.push_back(atom_score(w.embeddings, goal.predicate, goal, f));
  for (const auto& rule : w.rules) {
    if (usable.empty()) continue;
    const double head = pair_score(w.embeddings, goal.predicate, rule.head());
    const auto body = rule.body();
    std::vector<std::size_t> idx(body.size(), 0);
    while (true) {
      double s = head;
      for (std::size_t j = 0; j < body.size(); ++j) {
        s = std::min(s, atom_score(w.embeddings, body[j], goal, usable[idx[j]]));
      }
      scores.push_back(s);
      std::size_t j = 0;
      while (j < idx.size() && ++idx[j] == usable.size()) idx[j++] = 0;
      if (j == idx.size()) break;
    }
  }
  std::sort(scores.begin(), scores.end());
  return scores;
}

// Precision at every positive, positives ahead of negatives on ties.
inline std::optional<double> pr_auc_reference(std::span<const double> scores, std::span<const int> gold) {
  double sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (gold[i] != 1) continue;
    ++positives;
    std::size_t tp = 0, seen = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const bool before = scores[j] > scores[i] || (scores[j] == scores[i] && gold[j] == 1 && j <= i);
      if (!before) continue;
      ++seen;
      if (gold[j] == 1) ++tp;
    }
    sum += static_cast<double>(tp) / static_cast<double>(seen);
  }
  if (positives == 0) return std::nullopt;
  return sum / static_cast<double>(positives);
}

inline std::optional<double> roc_auc_reference(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) return std::nullopt;
  return wins / static_cast<double>(pairs);
}

// Expands every ranked fact into m positive copies and m negatives, then
// counts pairs.
inline double roc_auc_duplicated_reference(const TestRanking& ranking) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& f : ranking.facts) {
    for (double c : f.corruption_scores) {
      scores.push_back(f.true_score);
      labels.push_back(1);
      scores.push_back(c);
      labels.push_back(0);
    }
  }
  return *roc_auc_reference(scores, labels);
}

struct GradientCheck {
  bool stable = false;          // selection and worst pairs unchanged under every probe
  std::size_t coordinates = 0;  // coordinates compared
  double max_relative_error = 0.0;
};

// Central differences of the summed loss against loss_and_gradient for one
// goal. Coordinates whose probes change the selected proofs, their worst
// pairs or the clamping regime are reported as unstable.
inline GradientCheck check_gradient(const World& w, const Fact& goal, int label, const Heuristic& heuristic,
                                    double epsilon = 1e-7, double step = 1e-5) {
  const auto select = [&](const EmbeddingStore& e) {
    const auto proofs = enumerate_proofs(goal, w.kb, w.rules, e, kUnbounded);
    std::vector<ProofSummary> summaries;
    for (const auto& p : proofs) summaries.push_back(summarize(p));
    return select_proof_set(std::span<const ProofSummary>(summaries), heuristic);
  };
  const auto same = [](const std::vector<ProofSummary>& a, const std::vector<ProofSummary>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].path != b[i].path || a[i].order != b[i].order || !(a[i].worst == b[i].worst)) return false;
    }
    return true;
  };
  const auto unclamped = [&](const std::vector<ProofSummary>& s) {
    return std::all_of(s.begin(), s.end(), [&](const ProofSummary& p) {
      return p.score > 10 * epsilon && p.score < 1.0 - 10 * epsilon;
    });
  };

  GradientCheck out;
  const auto base = select(w.embeddings);
  if (base.empty() || !unclamped(base)) return out;
  SparseGradient gradient;
  loss_and_gradient(label, base, w.embeddings, epsilon, gradient);

  EmbeddingStore probe = w.embeddings;
  out.stable = true;
  for (std::uint32_t id = 0; id < w.symbols.size(); ++id) {
    const SymbolId sym{id};
    for (std::size_t k = 0; k < probe.dim(); ++k) {
      const double original = probe.row(sym)[k];
      probe.row(sym)[k] = original + step;
      const auto plus_sel = select(probe);
      SparseGradient scratch;
      const double plus = loss_and_gradient(label, plus_sel, probe, epsilon, scratch);
      probe.row(sym)[k] = original - step;
      const auto minus_sel = select(probe);
      const double minus = loss_and_gradient(label, minus_sel, probe, epsilon, scratch);
      probe.row(sym)[k] = original;
      if (!same(plus_sel, base) || !same(minus_sel, base)) {
        out.stable = false;
        return out;
      }
      const double numeric = (plus - minus) / (2 * step);
      const auto it = gradient.find(sym);
      const double analytic = it == gradient.end() ? 0.0 : it->second[k];
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic - numeric) / scale);
      ++out.coordinates;
    }
  }
  return out;
}

}  // namespace ntp::testing
