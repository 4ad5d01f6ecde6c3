#include "ntp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include "ntp/text.hpp"

namespace ntp {
namespace {

constexpr std::uint64_t kGenerationStream = 0x6461746167656eULL;
constexpr int kCorruptionAttempts = 32;
constexpr int kRelationshipAttempts = 10000;

std::size_t tuple_count(std::size_t n_constants, int order) {
  return order == 1 ? n_constants : n_constants * n_constants;
}

Fact make_fact(SymbolId predicate, std::span<const SymbolId> constants, std::size_t tuple, int order) {
  if (order == 1) return Fact::unary(predicate, constants[tuple]);
  const std::size_t n = constants.size();
  return Fact::binary(predicate, constants[tuple / n], constants[tuple % n]);
}

bool contains_id(std::span<const SymbolId> ids, SymbolId id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// Relationships over distinct predicates; heads are never shared and never
// appear in another relationship's body.
std::vector<Relationship> sample_relationships(const GenConfig& cfg, std::span<const SymbolId> predicates, Rng& rng) {
  std::vector<Relationship> out;
  std::vector<SymbolId> pool(predicates.begin(), predicates.end());
  const auto slots = cfg.rule_template.slot_count();
  while (out.size() < cfg.n_relationships) {
    bool accepted = false;
    for (int attempt = 0; attempt < kRelationshipAttempts && !accepted; ++attempt) {
      // Partial Fisher-Yates draws an ordered tuple of distinct predicates.
      for (std::size_t i = 0; i < slots; ++i) {
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      }
      Relationship rel{pool[0], std::vector<SymbolId>(pool.begin() + 1, pool.begin() + slots), cfg.rule_template};
      std::sort(rel.body.begin(), rel.body.end());
      accepted = std::none_of(out.begin(), out.end(), [&](const Relationship& other) {
        return other.head == rel.head || contains_id(other.body, rel.head) || contains_id(rel.body, other.head);
      });
      if (accepted) out.push_back(std::move(rel));
    }
    if (!accepted) {
      throw ConfigError("n_rel: cannot place " + std::to_string(cfg.n_relationships) +
                        " relationships with distinct, unchained heads over " + std::to_string(cfg.n_predicates) +
                        " predicates");
    }
  }
  return out;
}

std::map<std::string, std::string, std::less<>> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::map<std::string, std::string, std::less<>> values;
  std::string line;
  while (std::getline(in, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw FormatError(path.string() + ": expected key = value");
    values.emplace(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
  }
  return values;
}

}  // namespace

void GenConfig::validate() const {
  rule_template.validate();
  if (n_constants < 1) throw ConfigError("n_c: need at least one constant");
  if (n_predicates < rule_template.slot_count()) {
    throw ConfigError("n_p: " + std::to_string(n_predicates) + " predicates cannot fill a size-" +
                      std::to_string(rule_template.size) + " relationship (need n_p >= R + 1)");
  }
  if (!(base_prob >= 0.0 && base_prob <= 1.0)) throw ConfigError("p_b: must lie in [0, 1]");
  if (!(rel_prob >= 0.0 && rel_prob <= 1.0)) throw ConfigError("p_r: must lie in [0, 1]");
  if (!(rel_prob > base_prob)) throw ConfigError("p_r: must exceed p_b");
  if (n_relationships < 1) throw ConfigError("n_rel: need at least one relationship");
}

DatasetBundle generate_dataset(const GenConfig& cfg, double test_fraction) {
  cfg.validate();
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction: must lie in [0, 1)");

  DatasetBundle bundle;
  bundle.config = cfg;
  bundle.test_fraction = test_fraction;
  Rng rng(derive_seed(cfg.seed, kGenerationStream));

  const int order = cfg.rule_template.order;
  std::vector<SymbolId> predicates;
  std::vector<SymbolId> constants;
  for (std::size_t i = 0; i < cfg.n_predicates; ++i) {
    predicates.push_back(bundle.symbols.intern("P" + std::to_string(i), SymbolKind::kDataPredicate));
  }
  for (std::size_t i = 0; i < cfg.n_constants; ++i) {
    constants.push_back(bundle.symbols.intern("c" + std::to_string(i), SymbolKind::kConstant));
  }

  bundle.relationships = sample_relationships(cfg, predicates, rng);

  const std::size_t tuples = tuple_count(cfg.n_constants, order);
  // truth[p][x], indexed by position in `predicates`.
  std::vector<std::vector<char>> truth(predicates.size(), std::vector<char>(tuples, 0));
  for (auto& row : truth) {
    for (auto& cell : row) cell = rng.bernoulli(cfg.base_prob) ? 1 : 0;
  }
  const auto position = [&](SymbolId p) { return static_cast<std::size_t>(p.value - predicates.front().value); };
  for (const auto& rel : bundle.relationships) {
    for (std::size_t x = 0; x < tuples; ++x) {
      const bool body_holds =
          std::all_of(rel.body.begin(), rel.body.end(), [&](SymbolId b) { return truth[position(b)][x] != 0; });
      if (body_holds && rng.bernoulli(cfg.rel_prob)) truth[position(rel.head)][x] = 1;
    }
  }

  KnowledgeBase full;
  for (auto p : predicates) full.add_predicate(p, order);
  for (auto c : constants) full.add_constant(c);
  for (std::size_t p = 0; p < predicates.size(); ++p) {
    for (std::size_t x = 0; x < tuples; ++x) {
      if (truth[p][x]) full.insert(make_fact(predicates[p], constants, x, order));
    }
  }
  bundle.total_count = full.size();

  auto active = identify_active_facts(full, bundle.relationships, constants);
  bundle.active_count = active.size();
  const auto n_test = static_cast<std::size_t>(
      std::ceil(test_fraction * static_cast<double>(active.size()) - 1e-9));
  for (std::size_t i = 0; i < n_test; ++i) {
    std::swap(active[i], active[i + rng.below(active.size() - i)]);
  }
  std::unordered_set<Fact, FactHash> held_out(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(n_test));

  for (auto p : predicates) bundle.train.add_predicate(p, order);
  for (auto c : constants) bundle.train.add_constant(c);
  for (const auto& fact : full.facts()) {
    if (held_out.contains(fact)) {
      bundle.test_facts.push_back(fact);
    } else {
      bundle.train.insert(fact);
    }
  }
  return bundle;
}

std::vector<Fact> identify_active_facts(const KnowledgeBase& facts, std::span<const Relationship> relationships,
                                        std::span<const SymbolId> constants) {
  std::vector<Fact> active;
  std::unordered_set<Fact, FactHash> seen;
  for (const auto& rel : relationships) {
    const int order = rel.rule_template.order;
    const std::size_t tuples = tuple_count(constants.size(), order);
    for (std::size_t x = 0; x < tuples; ++x) {
      const Fact head = make_fact(rel.head, constants, x, order);
      if (!facts.contains(head)) continue;
      const bool body_holds = std::all_of(rel.body.begin(), rel.body.end(), [&](SymbolId b) {
        return facts.contains(make_fact(b, constants, x, order));
      });
      if (body_holds && seen.insert(head).second) active.push_back(head);
    }
  }
  return active;
}

std::vector<Fact> corrupt_training_fact(const Fact& fact, const KnowledgeBase& kb, Rng& rng, std::size_t* skipped) {
  const auto& constants = kb.constants();
  std::vector<Fact> out;
  for (std::size_t pos = 0; pos < fact.arity; ++pos) {
    Fact candidate = fact;
    bool found = false;
    for (int attempt = 0; attempt < kCorruptionAttempts && !found; ++attempt) {
      candidate.args[pos] = constants[rng.below(constants.size())];
      found = !kb.contains(candidate);
    }
    if (!found) {
      std::vector<SymbolId> valid;
      for (auto c : constants) {
        candidate.args[pos] = c;
        if (!kb.contains(candidate)) valid.push_back(c);
      }
      if (valid.empty()) {
        if (skipped != nullptr) ++*skipped;
        continue;
      }
      candidate.args[pos] = valid[rng.below(valid.size())];
    }
    out.push_back(candidate);
  }
  return out;
}

std::vector<Fact> enumerate_test_corruptions(const Fact& fact, const KnowledgeBase& kb) {
  std::vector<Fact> out;
  std::unordered_set<Fact, FactHash> seen;
  for (std::size_t pos = 0; pos < fact.arity; ++pos) {
    for (auto c : kb.constants()) {
      if (c == fact.args[pos]) continue;
      Fact candidate = fact;
      candidate.args[pos] = c;
      if (!kb.contains(candidate) && seen.insert(candidate).second) out.push_back(candidate);
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const DatasetBundle& bundle) {
  std::filesystem::create_directories(dir);
  const auto& cfg = bundle.config;
  {
    std::ofstream out(dir / "train.facts");
    out << "# training facts\n";
    write_facts(out, bundle.train.facts(), bundle.symbols);
  }
  {
    std::ofstream out(dir / "test.facts");
    out << "# held-out active facts\n";
    write_facts(out, bundle.test_facts, bundle.symbols);
  }
  {
    std::ofstream out(dir / "relations.txt");
    for (const auto& rel : bundle.relationships) out << format_relationship(rel, bundle.symbols) << '\n';
  }
  std::ofstream meta(dir / "gen_meta");
  meta << "rng = " << Rng::kAlgorithm << '\n'
       << "seed = " << cfg.seed << '\n'
       << "n_c = " << cfg.n_constants << '\n'
       << "n_p = " << cfg.n_predicates << '\n'
       << "p_b = " << format_double(cfg.base_prob) << '\n'
       << "p_r = " << format_double(cfg.rel_prob) << '\n'
       << "n_rel = " << cfg.n_relationships << '\n'
       << "rule_size = " << cfg.rule_template.size << '\n'
       << "rule_order = " << cfg.rule_template.order << '\n'
       << "test_fraction = " << format_double(bundle.test_fraction) << '\n'
       << "train_count = " << bundle.train.size() << '\n'
       << "test_count = " << bundle.test_facts.size() << '\n'
       << "active_count = " << bundle.active_count << '\n'
       << "total_count = " << bundle.total_count << '\n';
}

DatasetBundle load_dataset(const std::filesystem::path& dir) {
  const auto meta = read_key_values(dir / "gen_meta");
  const auto get = [&](std::string_view key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("gen_meta: missing key '" + std::string(key) + "'");
    return it->second;
  };
  const auto get_unsigned = [&](std::string_view key) {
    unsigned long long v = 0;
    if (!parse_unsigned(get(key), v)) throw FormatError("gen_meta: bad integer for '" + std::string(key) + "'");
    return static_cast<std::size_t>(v);
  };
  const auto get_double = [&](std::string_view key) {
    double v = 0;
    if (!parse_double(get(key), v)) throw FormatError("gen_meta: bad number for '" + std::string(key) + "'");
    return v;
  };

  DatasetBundle bundle;
  auto& cfg = bundle.config;
  cfg.seed = get_unsigned("seed");
  cfg.n_constants = get_unsigned("n_c");
  cfg.n_predicates = get_unsigned("n_p");
  cfg.base_prob = get_double("p_b");
  cfg.rel_prob = get_double("p_r");
  cfg.n_relationships = get_unsigned("n_rel");
  cfg.rule_template = RuleTemplate{static_cast<int>(get_unsigned("rule_order")),
                                   static_cast<int>(get_unsigned("rule_size"))};
  bundle.test_fraction = get_double("test_fraction");
  bundle.active_count = get_unsigned("active_count");
  const int order = cfg.rule_template.order;

  // Same interning order as generate_dataset, so symbol ids agree.
  for (std::size_t i = 0; i < cfg.n_predicates; ++i) {
    bundle.train.add_predicate(bundle.symbols.intern("P" + std::to_string(i), SymbolKind::kDataPredicate), order);
  }
  for (std::size_t i = 0; i < cfg.n_constants; ++i) {
    bundle.train.add_constant(bundle.symbols.intern("c" + std::to_string(i), SymbolKind::kConstant));
  }
  const auto read_file = [&](const char* name) {
    std::ifstream in(dir / name);
    if (!in) throw FormatError("cannot open " + (dir / name).string());
    auto facts = read_facts(in, bundle.symbols);
    for (const auto& f : facts) {
      if (f.arity != order) throw FormatError(std::string(name) + ": fact arity differs from rule_order");
      if (!bundle.train.is_predicate(f.predicate)) bundle.train.add_predicate(f.predicate, order);
      for (auto a : f.arguments()) bundle.train.add_constant(a);
    }
    return facts;
  };
  for (const auto& f : read_file("train.facts")) bundle.train.insert(f);
  bundle.test_facts = read_file("test.facts");

  std::ifstream rel_in(dir / "relations.txt");
  if (!rel_in) throw FormatError("cannot open " + (dir / "relations.txt").string());
  std::string line;
  while (std::getline(rel_in, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    bundle.relationships.push_back(parse_relationship(body, order, bundle.symbols));
  }
  bundle.total_count = bundle.train.size() + bundle.test_facts.size();
  return bundle;
}

}  // namespace ntp
