#pragma once

// Transition system over ground-fact states: interned entities, compiled
// rules, condition matching, and grounded action enumeration/application.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "loophole/rulelang.hpp"
#include "loophole/scenario.hpp"
#include "loophole/vocabulary.hpp"

namespace loophole::kernel {

using EntityId = std::uint16_t;
inline constexpr EntityId kUnbound = 0xFFFF;
inline constexpr EntityId kMarket = 0xFFFE;

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct CompileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Entity names sorted lexicographically, so id order is name order.
class SymbolTable {
 public:
  SymbolTable() = default;
  explicit SymbolTable(std::vector<std::string> names);

  std::optional<EntityId> find(std::string_view name) const;
  EntityId id(std::string_view name) const;
  const std::string& name(EntityId id) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
};

struct Fact {
  Predicate predicate = Predicate::exists;
  std::uint8_t arity = 0;
  std::array<EntityId, 3> args{0, 0, 0};

  auto operator<=>(const Fact&) const = default;
};

Fact make_fact(Predicate p, std::initializer_list<EntityId> args);
std::string to_string(const Fact& f, const SymbolTable& symbols);
rulelang::GroundAtom to_ground(const Fact& f, const SymbolTable& symbols);

class State {
 public:
  State() = default;
  explicit State(std::vector<Fact> facts, int step_count = 0, bool transfer_used = false);

  const std::vector<Fact>& facts() const { return facts_; }
  bool contains(const Fact& f) const;
  int step_count() const { return step_count_; }
  bool transfer_used() const { return transfer_used_; }
  std::uint64_t hash() const { return hash_; }

  // Identity used for duplicate detection: fact set plus the transfer flag.
  bool same_as(const State& o) const { return transfer_used_ == o.transfer_used_ && facts_ == o.facts_; }

 private:
  std::vector<Fact> facts_;
  int step_count_ = 0;
  bool transfer_used_ = false;
  std::uint64_t hash_ = 0;
};

// Returns a description of the first violated state invariant, if any.
std::optional<std::string> check_invariants(const State& s, const SymbolTable& symbols);

// Sorted, deduplicated set of ground atoms with per-predicate ranges.
class FactBase {
 public:
  FactBase() = default;
  explicit FactBase(std::vector<Fact> facts);

  std::span<const Fact> with_predicate(Predicate p) const {
    const auto i = static_cast<std::size_t>(p);
    return {facts_.data() + offsets_[i], facts_.data() + offsets_[i + 1]};
  }
  bool contains(const Fact& f) const;
  const std::vector<Fact>& facts() const { return facts_; }

 private:
  std::vector<Fact> facts_;
  std::array<std::uint32_t, kPredicateCount + 1> offsets_{};
};

struct Term {
  enum class Kind : std::uint8_t { variable, constant, anonymous };
  Kind kind = Kind::anonymous;
  EntityId value = 0;  // variable index or constant id
};

struct CompiledLiteral {
  rulelang::Literal::Kind kind = rulelang::Literal::Kind::positive;
  Predicate predicate = Predicate::exists;
  std::uint8_t arity = 0;
  std::array<Term, 3> args{};
  Term lhs;
  Term rhs;
};

struct CompiledCondition {
  std::vector<CompiledLiteral> literals;
  std::vector<std::string> var_names;

  std::optional<std::size_t> var_index(std::string_view name) const;
};

using Binding = std::vector<EntityId>;

// Compiles a condition against a symbol table. Variables listed in
// `leading_vars` get indices 0..k-1 in that order; the rest follow in order of
// first appearance. Constants missing from the table raise CompileError.
CompiledCondition compile_condition(const rulelang::Condition& c, const SymbolTable& symbols,
                                    std::span<const std::string> leading_vars = {});

// All complete bindings extending `seed` under which every positive literal
// is in `db`, no negated literal is, and comparisons hold. Sorted
// lexicographically by variable index, without duplicates.
std::vector<Binding> match(const FactBase& db, const CompiledCondition& c, const Binding& seed);
std::vector<Binding> match(const FactBase& db, const CompiledCondition& c);

// First binding in search order, or nothing.
std::optional<Binding> match_any(const FactBase& db, const CompiledCondition& c, const Binding& seed);

struct CompiledActionRule {
  ActionName name = ActionName::addChild;
  std::string legal_ref;
  std::vector<std::string> params;  // variables 0..k-1
  CompiledCondition pre;
  std::vector<CompiledLiteral> add;
  std::vector<CompiledLiteral> del;
};

struct CompiledReduction {
  std::string legal_ref;
  ReductionKind kind = ReductionKind::deductible;
  CompiledCondition when;  // variable 0 is Self
  rulelang::LinearExpr new_base;
  rulelang::LinearExpr new_rate;
};

inline constexpr std::size_t kMaxParams = 6;

struct GroundedAction {
  std::uint16_t rule = 0;  // index into Domain::actions
  std::uint8_t arity = 0;
  std::array<EntityId, kMaxParams> args{};

  auto operator<=>(const GroundedAction&) const = default;
};

// Everything a run needs, compiled once and shared read-only.
struct Domain {
  SymbolTable symbols;
  std::vector<CompiledActionRule> actions;       // sorted by (name, legal_ref)
  std::vector<CompiledReduction> reductions;     // sorted by (legal_ref, kind)
  std::vector<double> rate;                      // by entity id, -1 if none
  std::vector<std::pair<EntityId, EntityId>> regions;  // (country, region)
  std::vector<EntityId> countries;               // scenario order
  std::vector<economy::Money> revenue;           // by entity id
  std::vector<bool> haven;                       // by entity id
  std::vector<EntityId> pool;
  economy::ScenarioConfig config;
  State initial;

  const CompiledActionRule& rule(const GroundedAction& a) const { return actions[a.rule]; }
};

Domain compile(const rulelang::RuleSetDoc& rules, const rulelang::StateSpec& state,
               const economy::ScenarioConfig& config);
Domain compile(const rulelang::RuleSetDoc& rules, const rulelang::StateSpec& state);

// State facts plus the derived views usable in action preconditions:
// access, fresh, country, haven, inRegion.
FactBase action_facts(const State& s, const Domain& d);

std::vector<GroundedAction> applicable_actions(const State& s, const Domain& d);
std::vector<GroundedAction> applicable_actions(const State& s, const FactBase& db, const Domain& d);

// Throws ContractViolation if `a` is not applicable in `s`.
State apply_action(const State& s, const GroundedAction& a, const Domain& d);

std::string describe(const GroundedAction& a, const Domain& d);
std::vector<std::string> action_args(const GroundedAction& a, const Domain& d);

// The residency country: managed seat if present, else the based country.
std::optional<EntityId> residency(const State& s, EntityId company);

std::vector<EntityId> companies(const State& s);

}  // namespace loophole::kernel
