#include "ntp/logic.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <sstream>

#include "ntp/text.hpp"

namespace ntp {
namespace {

bool is_identifier(std::string_view name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
  });
}

}  // namespace

std::string_view to_string(SymbolKind kind) {
  switch (kind) {
    case SymbolKind::kConstant:
      return "constant";
    case SymbolKind::kDataPredicate:
      return "data_predicate";
    case SymbolKind::kRulePredicate:
      return "rule_predicate";
  }
  return "unknown";
}

std::optional<SymbolKind> parse_symbol_kind(std::string_view text) {
  for (auto kind : {SymbolKind::kConstant, SymbolKind::kDataPredicate, SymbolKind::kRulePredicate}) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

SymbolId SymbolTable::intern(std::string_view name, SymbolKind kind) {
  auto& index = index_[static_cast<std::size_t>(kind)];
  std::string key(name);
  if (auto it = index.find(key); it != index.end()) return SymbolId{it->second};
  const auto id = static_cast<std::uint32_t>(entries_.size());
  entries_.push_back({key, kind});
  index.emplace(std::move(key), id);
  return SymbolId{id};
}

std::optional<SymbolId> SymbolTable::find(std::string_view name, SymbolKind kind) const {
  const auto& index = index_[static_cast<std::size_t>(kind)];
  if (auto it = index.find(std::string(name)); it != index.end()) return SymbolId{it->second};
  return std::nullopt;
}

const std::string& SymbolTable::name(SymbolId id) const { return entries_.at(id.value).name; }

SymbolKind SymbolTable::kind(SymbolId id) const { return entries_.at(id.value).kind; }

std::vector<SymbolId> SymbolTable::of_kind(SymbolKind kind) const {
  std::vector<SymbolId> out;
  for (std::uint32_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].kind == kind) out.push_back(SymbolId{i});
  }
  return out;
}

Fact Fact::unary(SymbolId predicate, SymbolId arg) { return Fact{predicate, {arg, SymbolId{}}, 1}; }

Fact Fact::binary(SymbolId predicate, SymbolId first, SymbolId second) {
  return Fact{predicate, {first, second}, 2};
}

std::size_t FactHash::operator()(const Fact& fact) const noexcept {
  std::uint64_t h = fact.predicate.value;
  h = h * 0x9E3779B97F4A7C15ULL + fact.args[0].value;
  h = h * 0x9E3779B97F4A7C15ULL + fact.args[1].value;
  h = h * 0x9E3779B97F4A7C15ULL + fact.arity;
  return static_cast<std::size_t>(h ^ (h >> 29));
}

void RuleTemplate::validate() const {
  if (order < 1 || order > 2) throw ConfigError("rule order must be 1 or 2, got " + std::to_string(order));
  if (size < 1 || size > 3) throw ConfigError("rule size must be 1, 2 or 3, got " + std::to_string(size));
}

std::string RuleTemplate::to_string() const {
  const std::string vars = order == 1 ? "(x)" : "(x,y)";
  std::string out = "#0" + vars + " <-";
  for (int i = 1; i <= size; ++i) {
    out += (i == 1 ? " #" : " & #") + std::to_string(i) + vars;
  }
  return out;
}

bool matches_relationship(SymbolId decoded_head, std::span<const SymbolId> decoded_body,
                          const Relationship& relationship) {
  if (decoded_head != relationship.head) return false;
  if (decoded_body.size() != relationship.body.size()) return false;
  std::vector<SymbolId> lhs(decoded_body.begin(), decoded_body.end());
  std::vector<SymbolId> rhs = relationship.body;
  std::sort(lhs.begin(), lhs.end());
  std::sort(rhs.begin(), rhs.end());
  return lhs == rhs;
}

KnowledgeBase::Role KnowledgeBase::role(SymbolId id) const {
  return id.value < roles_.size() ? roles_[id.value] : Role::kNone;
}

void KnowledgeBase::add_constant(SymbolId id) {
  if (id.value >= roles_.size()) {
    roles_.resize(id.value + 1, Role::kNone);
    orders_.resize(id.value + 1, 0);
  }
  if (roles_[id.value] == Role::kConstant) return;
  if (roles_[id.value] != Role::kNone) throw std::logic_error("symbol registered as predicate and constant");
  roles_[id.value] = Role::kConstant;
  constants_.push_back(id);
}

void KnowledgeBase::add_predicate(SymbolId id, int order) {
  if (order < 1 || order > 2) throw std::invalid_argument("predicate order must be 1 or 2");
  if (id.value >= roles_.size()) {
    roles_.resize(id.value + 1, Role::kNone);
    orders_.resize(id.value + 1, 0);
  }
  if (roles_[id.value] == Role::kPredicate) {
    if (orders_[id.value] != order) throw std::logic_error("predicate registered with two orders");
    return;
  }
  if (roles_[id.value] != Role::kNone) throw std::logic_error("symbol registered as constant and predicate");
  roles_[id.value] = Role::kPredicate;
  orders_[id.value] = static_cast<std::int8_t>(order);
  predicates_.push_back(id);
}

void KnowledgeBase::check_registered(const Fact& fact) const {
  if (role(fact.predicate) != Role::kPredicate) {
    throw std::logic_error("fact uses unregistered predicate id " + std::to_string(fact.predicate.value));
  }
  if (orders_[fact.predicate.value] != fact.arity) {
    throw std::logic_error("fact arity does not match predicate order");
  }
  for (auto arg : fact.arguments()) {
    if (role(arg) != Role::kConstant) {
      throw std::logic_error("fact uses unregistered constant id " + std::to_string(arg.value));
    }
  }
}

bool KnowledgeBase::insert(const Fact& fact) {
  check_registered(fact);
  auto [it, inserted] = index_.emplace(fact, facts_.size());
  if (inserted) facts_.push_back(fact);
  return inserted;
}

bool KnowledgeBase::contains(const Fact& fact) const {
  check_registered(fact);
  return index_.contains(fact);
}

std::optional<std::size_t> KnowledgeBase::index_of(const Fact& fact) const {
  if (auto it = index_.find(fact); it != index_.end()) return it->second;
  return std::nullopt;
}

int KnowledgeBase::order_of(SymbolId predicate) const {
  if (role(predicate) != Role::kPredicate) throw std::out_of_range("not a registered predicate");
  return orders_[predicate.value];
}

bool KnowledgeBase::is_constant(SymbolId id) const { return role(id) == Role::kConstant; }

bool KnowledgeBase::is_predicate(SymbolId id) const { return role(id) == Role::kPredicate; }

bool kb_contains(const KnowledgeBase& kb, const Fact& fact) { return kb.contains(fact); }

std::string format_fact(const Fact& fact, const SymbolTable& symbols) {
  std::string out = symbols.name(fact.predicate);
  out += '(';
  for (std::size_t i = 0; i < fact.arity; ++i) {
    if (i > 0) out += ',';
    out += symbols.name(fact.args[i]);
  }
  out += ')';
  return out;
}

Fact parse_fact(std::string_view text, SymbolTable& symbols) {
  text = trim(text);
  const auto open = text.find('(');
  if (text.empty() || open == std::string_view::npos || text.back() != ')') {
    throw FormatError("malformed fact '" + std::string(text) + "'");
  }
  const auto predicate = trim(text.substr(0, open));
  auto inner = text.substr(open + 1, text.size() - open - 2);
  std::vector<std::string_view> args;
  while (true) {
    const auto comma = inner.find(',');
    args.push_back(trim(inner.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  if (!is_identifier(predicate) || args.size() > 2 ||
      std::any_of(args.begin(), args.end(), [](auto a) { return !is_identifier(a); })) {
    throw FormatError("malformed fact '" + std::string(text) + "'");
  }
  const auto pred = symbols.intern(predicate, SymbolKind::kDataPredicate);
  const auto first = symbols.intern(args[0], SymbolKind::kConstant);
  if (args.size() == 1) return Fact::unary(pred, first);
  return Fact::binary(pred, first, symbols.intern(args[1], SymbolKind::kConstant));
}

void write_facts(std::ostream& out, std::span<const Fact> facts, const SymbolTable& symbols) {
  for (const auto& fact : facts) out << format_fact(fact, symbols) << '\n';
}

std::vector<Fact> read_facts(std::istream& in, SymbolTable& symbols) {
  std::vector<Fact> facts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    try {
      facts.push_back(parse_fact(body, symbols));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return facts;
}

std::string format_relationship(const Relationship& relationship, const SymbolTable& symbols) {
  std::string out = symbols.name(relationship.head) + " <-";
  for (std::size_t i = 0; i < relationship.body.size(); ++i) {
    out += (i == 0 ? " " : " & ") + symbols.name(relationship.body[i]);
  }
  return out;
}

Relationship parse_relationship(std::string_view text, int order, SymbolTable& symbols) {
  text = trim(text);
  const auto arrow = text.find("<-");
  if (arrow == std::string_view::npos) throw FormatError("missing '<-' in relationship '" + std::string(text) + "'");
  Relationship rel;
  const auto head = trim(text.substr(0, arrow));
  if (!is_identifier(head)) throw FormatError("bad relationship head in '" + std::string(text) + "'");
  rel.head = symbols.intern(head, SymbolKind::kDataPredicate);
  auto rest = text.substr(arrow + 2);
  while (true) {
    const auto amp = rest.find('&');
    const auto name = trim(rest.substr(0, amp));
    if (!is_identifier(name)) throw FormatError("bad relationship body in '" + std::string(text) + "'");
    rel.body.push_back(symbols.intern(name, SymbolKind::kDataPredicate));
    if (amp == std::string_view::npos) break;
    rest.remove_prefix(amp + 1);
  }
  rel.rule_template = RuleTemplate{order, static_cast<int>(rel.body.size())};
  rel.rule_template.validate();
  return rel;
}

}  // namespace ntp
