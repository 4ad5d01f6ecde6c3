#include "ntp/prover.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ntp {
namespace {

// Marks a pair of identical symbols; exceeds every real unification score.
constexpr double kOmitted = 2.0;

void check_rule_orders(const Fact& goal, std::span<const RuleInstance> rules) {
  for (const auto& rule : rules) {
    if (rule.rule_template.order != goal.arity) {
      throw std::invalid_argument("rule template order differs from goal arity");
    }
  }
}

void finish(Proof& proof, const EmbeddingStore& embeddings) {
  proof.score = 1.0;
  proof.worst_index = 0;
  for (std::size_t i = 0; i < proof.unifications.size(); ++i) {
    const auto& u = proof.unifications[i];
    const double s = unification_score(embeddings.row(u.left), embeddings.row(u.right));
    if (i == 0 || s < proof.score) {
      proof.score = s;
      proof.worst_index = i;
    }
  }
}

void add_pair(std::vector<Unification>& out, SymbolId left, SymbolId right) {
  if (left != right) out.push_back({left, right});
}

}  // namespace

bool EmbeddingStore::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("embedding dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double unification_score(std::span<const double> a, std::span<const double> b) {
  return std::exp(-euclidean_distance(a, b));
}

ProofSummary summarize(const Proof& proof) { return {proof.path, proof.order, proof.worst(), proof.score}; }

std::vector<Proof> enumerate_proofs(const Fact& goal, const KnowledgeBase& kb, std::span<const RuleInstance> rules,
                                    const EmbeddingStore& embeddings, std::size_t k_max) {
  if (k_max == 0) throw std::invalid_argument("k_max must be positive");
  check_rule_orders(goal, rules);
  const auto goal_index = kb.index_of(goal);
  const auto& facts = kb.facts();
  const auto usable = [&](std::size_t i) { return facts[i].arity == goal.arity && goal_index != i; };

  std::vector<Proof> proofs;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (!usable(i)) continue;
    Proof proof{ProofPath::fact(), {0, static_cast<std::uint32_t>(i), 0, 0}, {}, 0, 0.0};
    add_pair(proof.unifications, goal.predicate, facts[i].predicate);
    for (std::size_t a = 0; a < goal.arity; ++a) add_pair(proof.unifications, goal.args[a], facts[i].args[a]);
    finish(proof, embeddings);
    proofs.push_back(std::move(proof));
  }

  struct Candidate {
    std::size_t fact;
    double score;
    std::vector<Unification> pairs;
  };
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const auto& rule = rules[r];
    std::vector<std::vector<Candidate>> slots;
    for (auto body_pred : rule.body()) {
      std::vector<Candidate> candidates;
      for (std::size_t i = 0; i < facts.size(); ++i) {
        if (!usable(i)) continue;
        Candidate c{i, 1.0, {}};
        add_pair(c.pairs, body_pred, facts[i].predicate);
        for (std::size_t a = 0; a < goal.arity; ++a) add_pair(c.pairs, goal.args[a], facts[i].args[a]);
        for (const auto& u : c.pairs) {
          c.score = std::min(c.score, unification_score(embeddings.row(u.left), embeddings.row(u.right)));
        }
        candidates.push_back(std::move(c));
      }
      std::stable_sort(candidates.begin(), candidates.end(),
                       [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
      if (candidates.size() > k_max) candidates.resize(k_max);
      slots.push_back(std::move(candidates));
    }
    if (std::any_of(slots.begin(), slots.end(), [](const auto& s) { return s.empty(); })) continue;

    std::vector<std::size_t> pos(slots.size(), 0);
    while (true) {
      Proof proof{ProofPath::via_rule(r), {static_cast<std::uint32_t>(r + 1), 0, 0, 0}, {}, 0, 0.0};
      proof.unifications.push_back({goal.predicate, rule.head()});
      for (std::size_t j = 0; j < slots.size(); ++j) {
        proof.order[j + 1] = static_cast<std::uint32_t>(pos[j]);
        const auto& pairs = slots[j][pos[j]].pairs;
        proof.unifications.insert(proof.unifications.end(), pairs.begin(), pairs.end());
      }
      finish(proof, embeddings);
      proofs.push_back(std::move(proof));

      std::size_t j = slots.size();
      while (j > 0 && ++pos[j - 1] == slots[j - 1].size()) pos[--j] = 0;
      if (j == 0) break;
    }
  }
  return proofs;
}

FactScore fact_score(std::span<const Proof> proofs) {
  FactScore best;
  for (const auto& proof : proofs) {
    if (best.best == nullptr || proof.score > best.score) best = {proof.score, &proof};
  }
  return best;
}

ProofIndex::ProofIndex(const KnowledgeBase& kb, std::vector<RuleInstance> rules) : kb_(&kb), rules_(std::move(rules)) {
  const auto register_predicate = [&](SymbolId id) {
    if (id.value >= predicate_local_.size()) predicate_local_.resize(id.value + 1, kMissing);
    if (predicate_local_[id.value] != kMissing) return;
    predicate_local_[id.value] = static_cast<std::uint32_t>(predicates_.size());
    predicates_.push_back(id);
  };
  for (auto p : kb.data_predicates()) register_predicate(p);
  for (const auto& rule : rules_) {
    for (auto p : rule.predicates) register_predicate(p);
  }
  for (auto c : kb.constants()) {
    if (c.value >= constant_local_.size()) constant_local_.resize(c.value + 1, kMissing);
    constant_local_[c.value] = static_cast<std::uint32_t>(constants_.size());
    constants_.push_back(c);
  }

  groups_.resize(kb.data_predicates().size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    groups_[g].predicate = static_cast<std::uint32_t>(g);
    groups_[g].arity = kb.order_of(kb.data_predicates()[g]);
  }
  const auto& facts = kb.facts();
  for (std::size_t i = 0; i < facts.size(); ++i) {
    auto& group = groups_[local_predicate(facts[i].predicate)];
    group.fact_index.push_back(static_cast<std::uint32_t>(i));
    group.arg0.push_back(local_constant(facts[i].args[0]));
    group.arg1.push_back(facts[i].arity == 2 ? local_constant(facts[i].args[1]) : 0);
  }
  fact_count_ = facts.size();
}

std::uint32_t ProofIndex::local_predicate(SymbolId id) const {
  if (id.value >= predicate_local_.size() || predicate_local_[id.value] == kMissing) {
    throw std::invalid_argument("predicate not known to the proof index");
  }
  return predicate_local_[id.value];
}

std::uint32_t ProofIndex::local_constant(SymbolId id) const {
  if (id.value >= constant_local_.size() || constant_local_[id.value] == kMissing) {
    throw std::invalid_argument("constant not known to the proof index");
  }
  return constant_local_[id.value];
}

ProofSearch::ProofSearch(const ProofIndex& index, const EmbeddingStore& embeddings, std::size_t k_max)
    : index_(&index),
      embeddings_(&embeddings),
      k_max_(k_max),
      n_predicates_(index.predicates_.size()),
      predicate_scores_(n_predicates_ * n_predicates_, 1.0),
      constant_scores_(index.constants_.size()),
      arg_scores_(index.fact_count_),
      arg_worst_(index.fact_count_) {
  if (k_max == 0) throw std::invalid_argument("k_max must be positive");
  for (std::size_t a = 0; a < n_predicates_; ++a) {
    for (std::size_t b = a + 1; b < n_predicates_; ++b) {
      const double s =
          unification_score(embeddings.row(index.predicates_[a]), embeddings.row(index.predicates_[b]));
      predicate_scores_[a * n_predicates_ + b] = s;
      predicate_scores_[b * n_predicates_ + a] = s;
    }
  }
}

const std::vector<double>& ProofSearch::constant_scores(std::uint32_t local) {
  auto& scores = constant_scores_[local];
  if (scores.empty()) {
    const auto& constants = index_->constants_;
    const auto anchor = embeddings_->row(constants[local]);
    scores.resize(constants.size());
    for (std::size_t j = 0; j < constants.size(); ++j) {
      scores[j] = j == local ? kOmitted : unification_score(anchor, embeddings_->row(constants[j]));
    }
  }
  return scores;
}

std::vector<ProofSummary> ProofSearch::top_per_path(const Fact& goal, std::size_t depth) {
  std::vector<ProofSummary> out;
  if (depth == 0) return out;
  const auto& index = *index_;
  const auto& rules = index.rules_;
  check_rule_orders(goal, rules);

  const std::uint32_t goal_pred = index.local_predicate(goal.predicate);
  std::array<std::uint32_t, 2> goal_args{index.local_constant(goal.args[0]), 0};
  if (goal.arity == 2) goal_args[1] = index.local_constant(goal.args[1]);
  const auto kb_goal = index.kb_->index_of(goal);
  const std::uint32_t goal_index = kb_goal ? static_cast<std::uint32_t>(*kb_goal) : ProofIndex::kMissing;

  // Argument-pair part of every fact unification; shared by all rows because
  // body atoms are grounded with the goal's own constants.
  const auto& cs0 = constant_scores(goal_args[0]);
  const std::vector<double>* cs1 = goal.arity == 2 ? &constant_scores(goal_args[1]) : nullptr;
  std::vector<std::size_t> groups;
  std::vector<std::size_t> offsets;
  std::vector<double> group_max;
  std::size_t offset = 0;
  for (std::size_t g = 0; g < index.groups_.size(); ++g) {
    const auto& group = index.groups_[g];
    const std::size_t n = group.fact_index.size();
    if (group.arity != goal.arity || n == 0) continue;
    double best = -1.0;
    for (std::size_t t = 0; t < n; ++t) {
      double c = cs0[group.arg0[t]];
      std::uint8_t worst = 1;
      if (cs1 != nullptr) {
        const double c1 = (*cs1)[group.arg1[t]];
        if (c1 < c) {
          c = c1;
          worst = 2;
        }
      }
      arg_scores_[offset + t] = c;
      arg_worst_[offset + t] = worst;
      if (group.fact_index[t] != goal_index) best = std::max(best, c);
    }
    groups.push_back(g);
    offsets.push_back(offset);
    group_max.push_back(best);
    offset += n;
  }

  const auto better = [](double s, std::uint32_t fact, const Candidate& c) {
    return s > c.score || (s == c.score && fact < c.fact_index);
  };
  std::vector<std::pair<double, std::size_t>> order(groups.size());
  const auto scan_row = [&](std::uint32_t row_pred, std::size_t capacity) {
    std::vector<Candidate> top;
    if (capacity == 0) return top;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const auto pred = index.groups_[groups[k]].predicate;
      const double ps = pred == row_pred ? kOmitted : predicate_score(row_pred, pred);
      order[k] = {ps, k};
    }
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      const double ba = std::min(a.first, group_max[a.second]);
      const double bb = std::min(b.first, group_max[b.second]);
      return ba > bb || (ba == bb && a.second < b.second);
    });
    for (const auto& [ps, k] : order) {
      if (top.size() == capacity && std::min(ps, group_max[k]) < top.back().score) break;
      const auto& group = index.groups_[groups[k]];
      const std::size_t base = offsets[k];
      for (std::size_t t = 0; t < group.fact_index.size(); ++t) {
        const std::uint32_t fact = group.fact_index[t];
        if (fact == goal_index) continue;
        const double c = arg_scores_[base + t];
        const double s = std::min(ps, c);
        if (top.size() == capacity && !better(s, fact, top.back())) continue;
        Candidate cand{s, fact, static_cast<std::uint8_t>(ps <= c ? 0 : arg_worst_[base + t])};
        if (top.size() < capacity) top.push_back(cand);
        else top.back() = cand;
        for (std::size_t i = top.size() - 1; i > 0 && better(top[i].score, top[i].fact_index, top[i - 1]); --i) {
          std::swap(top[i], top[i - 1]);
        }
      }
    }
    return top;
  };

  const auto& facts = index.kb_->facts();
  const auto fact_pair = [&](SymbolId left_pred, const Candidate& c) -> Unification {
    const auto& f = facts[c.fact_index];
    if (c.worst == 0) return {left_pred, f.predicate};
    return {goal.args[c.worst - 1], f.args[c.worst - 1]};
  };

  for (const auto& c : scan_row(goal_pred, depth)) {
    out.push_back({ProofPath::fact(), {0, c.fact_index, 0, 0}, fact_pair(goal.predicate, c), c.score});
  }

  const std::size_t slot_depth = std::min(depth, k_max_);
  std::vector<ProofSummary> path;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const auto& rule = rules[r];
    std::vector<std::vector<Candidate>> slots;
    for (auto body_pred : rule.body()) slots.push_back(scan_row(index.local_predicate(body_pred), slot_depth));
    if (std::any_of(slots.begin(), slots.end(), [](const auto& s) { return s.empty(); })) continue;

    const double head = predicate_score(goal_pred, index.local_predicate(rule.head()));
    const Unification head_pair{goal.predicate, rule.head()};
    path.clear();
    std::array<std::size_t, 3> pos{};
    while (true) {
      ProofSummary proof{ProofPath::via_rule(r), {static_cast<std::uint32_t>(r + 1), 0, 0, 0}, head_pair, head};
      for (std::size_t j = 0; j < slots.size(); ++j) {
        const auto& c = slots[j][pos[j]];
        proof.order[j + 1] = static_cast<std::uint32_t>(pos[j]);
        if (c.score < proof.score) {
          proof.score = c.score;
          proof.worst = fact_pair(rule.body()[j], c);
        }
      }
      path.push_back(proof);

      std::size_t j = slots.size();
      while (j > 0 && ++pos[j - 1] == slots[j - 1].size()) pos[--j] = 0;
      if (j == 0) break;
    }
    const std::size_t keep = std::min(depth, path.size());
    std::partial_sort(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(keep), path.end(),
                      ranks_before<ProofSummary>);
    out.insert(out.end(), path.begin(), path.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  return out;
}

double ProofSearch::fact_score(const Fact& goal) {
  double best = 0.0;
  for (const auto& proof : top_per_path(goal, 1)) best = std::max(best, proof.score);
  return best;
}

}  // namespace ntp
