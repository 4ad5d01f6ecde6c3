#include "ntp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ntp/eval.hpp"
#include "ntp/text.hpp"

namespace ntp {
namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kTrainStream = 0x747261696eULL;

double slot_distance(const EmbeddingStore& e, SymbolId a, SymbolId b) { return euclidean_distance(e.row(a), e.row(b)); }

// Body slot -> relationship body position with the least total distance.
std::pair<double, std::vector<std::size_t>> best_assignment(const EmbeddingStore& e, const RuleInstance& rule,
                                                            const Relationship& rel) {
  std::vector<std::size_t> perm(rel.body.size());
  std::iota(perm.begin(), perm.end(), 0);
  const auto body = rule.body();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_perm = perm;
  do {
    double cost = 0.0;
    for (std::size_t j = 0; j < perm.size(); ++j) cost += slot_distance(e, body[j], rel.body[perm[j]]);
    if (cost < best) {
      best = cost;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best + slot_distance(e, rule.head(), rel.head), best_perm};
}

}  // namespace

std::size_t Heuristic::depth() const {
  switch (kind) {
    case HeuristicKind::kBestOnly:
    case HeuristicKind::kAllPath:
      return 1;
    case HeuristicKind::kTopK:
    case HeuristicKind::kTopKAllPath:
    case HeuristicKind::kCombinedAlt:
      return k;
  }
  return 1;
}

std::string Heuristic::name() const {
  switch (kind) {
    case HeuristicKind::kBestOnly:
      return "best_only";
    case HeuristicKind::kTopK:
      return "top_k(" + std::to_string(k) + ")";
    case HeuristicKind::kAllPath:
      return "all_path";
    case HeuristicKind::kTopKAllPath:
      return "top_k_all_path(" + std::to_string(k) + ")";
    case HeuristicKind::kCombinedAlt:
      return "combined_alt(" + std::to_string(k) + ")";
  }
  return "unknown";
}

Heuristic Heuristic::parse(std::string_view text) {
  text = trim(text);
  if (text == "best_only") return best_only();
  if (text == "all_path") return all_path();
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    throw ConfigError("heuristic: unknown value '" + std::string(text) + "'");
  }
  const auto family = text.substr(0, open);
  unsigned long long k = 0;
  if (!parse_unsigned(text.substr(open + 1, text.size() - open - 2), k) || k == 0) {
    throw ConfigError("heuristic: k must be a positive integer in '" + std::string(text) + "'");
  }
  if (family == "top_k") return top_k(k);
  if (family == "top_k_all_path") return top_k_all_path(k);
  if (family == "combined_alt") return combined_alt(k);
  throw ConfigError("heuristic: unknown value '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (dim == 0) throw ConfigError("dim: must be positive");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale: must be positive");
  if (!(constant_init_scale > 0.0)) throw ConfigError("constant_init_scale: must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate: must be positive");
  if (!(clip > 0.0)) throw ConfigError("clip: must be positive");
  if (!(decay >= 0.0)) throw ConfigError("decay: must be non-negative");
  if (batch_true_facts == 0) throw ConfigError("batch_true_facts: must be positive");
  if (n_rules == 0) throw ConfigError("n_rules: must be positive");
  if (k_max == 0) throw ConfigError("k_max: must be positive");
  if (heuristic.k == 0) throw ConfigError("heuristic: k must be positive");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon: must lie in (0, 0.5)");
}

std::vector<RuleInstance> instantiate_rules(SymbolTable& symbols, const RuleTemplate& rule_template,
                                            std::size_t n_rules) {
  std::vector<RuleInstance> rules;
  for (std::size_t r = 0; r < n_rules; ++r) {
    RuleInstance rule{rule_template, {}};
    for (std::size_t slot = 0; slot < rule_template.slot_count(); ++slot) {
      const auto name = "R" + std::to_string(r) + "_" + std::to_string(slot);
      if (symbols.find(name, SymbolKind::kRulePredicate)) {
        throw std::logic_error("rule predicate '" + name + "' already interned");
      }
      rule.predicates.push_back(symbols.intern(name, SymbolKind::kRulePredicate));
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

EmbeddingStore init_embeddings(const SymbolTable& symbols, const TrainConfig& cfg, Rng& rng) {
  EmbeddingStore store(symbols.size(), cfg.dim);
  for (std::uint32_t i = 0; i < symbols.size(); ++i) {
    const SymbolId id{i};
    const double scale = symbols.kind(id) == SymbolKind::kConstant ? cfg.constant_init_scale : cfg.init_scale;
    for (auto& v : store.row(id)) v = scale * rng.normal();
  }
  return store;
}

void nudge_initialization(EmbeddingStore& embeddings, std::span<const RuleInstance> rules,
                          std::span<const Relationship> relationships, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("nudge ratio must lie in (0, 1]");
  if (ratio == 1.0) return;
  for (const auto& rel : relationships) {
    const RuleInstance* best_rule = nullptr;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_perm;
    for (const auto& rule : rules) {
      if (!(rule.rule_template == rel.rule_template)) continue;
      auto [cost, perm] = best_assignment(embeddings, rule, rel);
      if (cost < best_cost) {
        best_cost = cost;
        best_rule = &rule;
        best_perm = std::move(perm);
      }
    }
    if (best_rule == nullptr) throw std::invalid_argument("no rule instance matches the relationship template");

    const auto move = [&](SymbolId slot, SymbolId truth) {
      auto row = embeddings.row(slot);
      const auto target = embeddings.row(truth);
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = target[i] + ratio * (row[i] - target[i]);
    };
    move(best_rule->head(), rel.head);
    for (std::size_t j = 0; j < best_perm.size(); ++j) move(best_rule->body()[j], rel.body[best_perm[j]]);
  }
}

double loss_and_gradient(int label, std::span<const ProofSummary> selected, const EmbeddingStore& embeddings,
                         double epsilon, SparseGradient& gradient) {
  const std::size_t dim = embeddings.dim();
  double loss = 0.0;
  std::vector<double> diff(dim);
  for (const auto& proof : selected) {
    const double rho = std::clamp(proof.score, epsilon, 1.0 - epsilon);
    loss += label == 1 ? -std::log(rho) : -std::log(1.0 - rho);

    const auto a = embeddings.row(proof.worst.left);
    const auto b = embeddings.row(proof.worst.right);
    double dist = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      diff[i] = a[i] - b[i];
      dist += diff[i] * diff[i];
    }
    dist = std::sqrt(dist);
    if (dist == 0.0) continue;
    // dL/d(dist) is 1 for a true fact and -rho / (1 - rho) for a false one.
    const double coef = (label == 1 ? 1.0 : -rho / (1.0 - rho)) / dist;
    auto& ga = gradient[proof.worst.left];
    auto& gb = gradient[proof.worst.right];
    ga.resize(dim, 0.0);
    gb.resize(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      ga[i] += coef * diff[i];
      gb[i] -= coef * diff[i];
    }
  }
  return loss;
}

double effective_learning_rate(const TrainConfig& cfg, std::uint64_t step) {
  return cfg.learning_rate * std::exp(-cfg.decay * static_cast<double>(step));
}

void adam_step(EmbeddingStore& embeddings, AdamState& state, const SparseGradient& gradient, const TrainConfig& cfg) {
  const double lr = effective_learning_rate(cfg, state.step);
  const std::size_t dim = embeddings.dim();
  for (const auto& [id, grad] : gradient) {
    const auto n = ++state.updates.at(id.value);
    const double correction1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(n));
    const double correction2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(n));
    auto row = embeddings.row(id);
    double* m = state.first.data() + id.value * dim;
    double* v = state.second.data() + id.value * dim;
    for (std::size_t i = 0; i < dim; ++i) {
      const double g = std::clamp(grad[i], -cfg.clip, cfg.clip);
      m[i] = AdamState::kBeta1 * m[i] + (1.0 - AdamState::kBeta1) * g;
      v[i] = AdamState::kBeta2 * v[i] + (1.0 - AdamState::kBeta2) * g * g;
      row[i] -= lr * (m[i] / correction1) / (std::sqrt(v[i] / correction2) + AdamState::kEpsilon);
    }
  }
  ++state.step;
}

ScoreTrace track_scores(const EmbeddingStore& embeddings, std::span<const RuleInstance> rules,
                        std::span<const Relationship> relationships, std::span<const SymbolId> data_predicates) {
  ScoreTrace out;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const auto decoded = decode_rule(rules[r], embeddings, data_predicates, r);
    if (decoding_matches(decoded, relationships)) out.rule_score = std::max(out.rule_score, decoded.score);
  }
  for (const auto& rel : relationships) {
    for (auto body : rel.body) {
      out.unification_score =
          std::max(out.unification_score, unification_score(embeddings.row(rel.head), embeddings.row(body)));
    }
  }
  return out;
}

TrainResult train_run(const DatasetBundle& bundle, const TrainConfig& cfg, std::optional<double> nudge_ratio) {
  cfg.validate();
  TrainResult result;
  result.symbols = bundle.symbols;
  result.rules = instantiate_rules(result.symbols, bundle.config.rule_template, cfg.n_rules);

  Rng init_rng(derive_seed(cfg.seed, kInitStream));
  result.embeddings = init_embeddings(result.symbols, cfg, init_rng);
  if (nudge_ratio && *nudge_ratio != 1.0) {
    nudge_initialization(result.embeddings, result.rules, bundle.relationships, *nudge_ratio);
  }

  auto& embeddings = result.embeddings;
  AdamState adam(embeddings.size(), embeddings.dim());
  Rng rng(derive_seed(cfg.seed, kTrainStream));
  const ProofIndex index(bundle.train, result.rules);
  const auto& facts = bundle.train.facts();
  const std::size_t depth = cfg.heuristic.depth();

  std::vector<std::size_t> order(facts.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::pair<Fact, int>> goals;
  std::vector<ProofSummary> selected;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_true_facts) {
      goals.clear();
      const std::size_t stop = std::min(order.size(), start + cfg.batch_true_facts);
      for (std::size_t i = start; i < stop; ++i) {
        const Fact& fact = facts[order[i]];
        goals.emplace_back(fact, 1);
        std::size_t skipped = 0;
        for (const auto& neg : corrupt_training_fact(fact, bundle.train, rng, &skipped)) goals.emplace_back(neg, 0);
        result.stats.skipped_corruptions += skipped;
      }

      ProofSearch search(index, embeddings, cfg.k_max);
      SparseGradient gradient;
      double batch_loss = 0.0;
      for (const auto& [goal, label] : goals) {
        auto ranked = search.top_per_path(goal, depth);
        if (cfg.path_grouping == PathGrouping::kTemplate) {
          // Every instance shares the one template, so all rule proofs share a path.
          for (auto& proof : ranked) {
            if (!proof.path.is_fact()) proof.path = ProofPath::via_rule(0);
          }
        }
        selected = select_proof_set(std::span<const ProofSummary>(ranked), cfg.heuristic);
        if (selected.empty()) ++result.stats.empty_proof_sets;
        batch_loss += loss_and_gradient(label, selected, embeddings, cfg.epsilon, gradient);
      }
      adam_step(embeddings, adam, gradient, cfg);
      epoch_loss += batch_loss;
      ++batches;
    }
    const auto scores = track_scores(embeddings, result.rules, bundle.relationships, bundle.train.data_predicates());
    result.trace.push_back(
        {epoch, scores.rule_score, scores.unification_score, batches == 0 ? 0.0 : epoch_loss / batches});
  }
  result.stats.steps = adam.step;
  return result;
}

}  // namespace ntp
