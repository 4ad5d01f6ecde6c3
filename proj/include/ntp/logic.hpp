// Ground-logic vocabulary: interned symbols, facts, rule templates and
// instances, and the fact-set knowledge base.
#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ntp {

enum class SymbolKind : std::uint8_t { kConstant = 0, kDataPredicate = 1, kRulePredicate = 2 };

std::string_view to_string(SymbolKind kind);
std::optional<SymbolKind> parse_symbol_kind(std::string_view text);

struct SymbolId {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(SymbolId, SymbolId) = default;
};

// Raised for malformed configs; the CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a fact file, relation file or metadata file cannot be parsed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense interning of (name, kind) pairs. Names live in per-kind namespaces, so
// "c0" as a constant and "c0" as a predicate are different symbols.
class SymbolTable {
 public:
  SymbolId intern(std::string_view name, SymbolKind kind);
  std::optional<SymbolId> find(std::string_view name, SymbolKind kind) const;

  const std::string& name(SymbolId id) const;
  SymbolKind kind(SymbolId id) const;
  std::size_t size() const { return entries_.size(); }
  std::vector<SymbolId> of_kind(SymbolKind kind) const;

 private:
  struct Entry {
    std::string name;
    SymbolKind kind;
  };
  std::vector<Entry> entries_;
  std::array<std::unordered_map<std::string, std::uint32_t>, 3> index_;
};

struct Fact {
  SymbolId predicate;
  std::array<SymbolId, 2> args{};
  std::uint8_t arity = 1;

  static Fact unary(SymbolId predicate, SymbolId arg);
  static Fact binary(SymbolId predicate, SymbolId first, SymbolId second);

  std::span<const SymbolId> arguments() const { return {args.data(), arity}; }

  friend bool operator==(const Fact&, const Fact&) = default;
};

struct FactHash {
  std::size_t operator()(const Fact& fact) const noexcept;
};

// Schematic rule P0(v) <- P1(v) & ... & PR(v) where every atom shares the
// same variable tuple of length `order`.
struct RuleTemplate {
  int order = 1;
  int size = 1;

  std::size_t slot_count() const { return static_cast<std::size_t>(size) + 1; }
  void validate() const;
  std::string to_string() const;

  friend bool operator==(const RuleTemplate&, const RuleTemplate&) = default;
};

// A template with one fresh rule-predicate per slot; predicates[0] is the head.
struct RuleInstance {
  RuleTemplate rule_template;
  std::vector<SymbolId> predicates;

  SymbolId head() const { return predicates.front(); }
  std::span<const SymbolId> body() const { return std::span(predicates).subspan(1); }
};

// Ground-truth relationship injected by the generator.
struct Relationship {
  SymbolId head;
  std::vector<SymbolId> body;
  RuleTemplate rule_template;
};

// Head must be equal and the bodies equal as multisets.
bool matches_relationship(SymbolId decoded_head, std::span<const SymbolId> decoded_body,
                          const Relationship& relationship);

class KnowledgeBase {
 public:
  void add_constant(SymbolId id);
  void add_predicate(SymbolId id, int order);

  // Returns false when the fact was already present.
  bool insert(const Fact& fact);
  bool contains(const Fact& fact) const;
  std::optional<std::size_t> index_of(const Fact& fact) const;

  const std::vector<Fact>& facts() const { return facts_; }
  const std::vector<SymbolId>& constants() const { return constants_; }
  const std::vector<SymbolId>& data_predicates() const { return predicates_; }
  int order_of(SymbolId predicate) const;
  bool is_constant(SymbolId id) const;
  bool is_predicate(SymbolId id) const;
  std::size_t size() const { return facts_.size(); }

 private:
  enum class Role : std::uint8_t { kNone, kConstant, kPredicate };
  void check_registered(const Fact& fact) const;
  Role role(SymbolId id) const;

  std::vector<Fact> facts_;
  std::unordered_map<Fact, std::size_t, FactHash> index_;
  std::vector<SymbolId> constants_;
  std::vector<SymbolId> predicates_;
  std::vector<Role> roles_;
  std::vector<std::int8_t> orders_;
};

bool kb_contains(const KnowledgeBase& kb, const Fact& fact);

// Fact-file format: one `P3(c17)` or `P1(c4,c60)` per line, `#` comments.
std::string format_fact(const Fact& fact, const SymbolTable& symbols);
Fact parse_fact(std::string_view text, SymbolTable& symbols);
void write_facts(std::ostream& out, std::span<const Fact> facts, const SymbolTable& symbols);
std::vector<Fact> read_facts(std::istream& in, SymbolTable& symbols);

// Relationship lines: `P0 <- P1 & P2`.
std::string format_relationship(const Relationship& relationship, const SymbolTable& symbols);
Relationship parse_relationship(std::string_view text, int order, SymbolTable& symbols);

}  // namespace ntp
