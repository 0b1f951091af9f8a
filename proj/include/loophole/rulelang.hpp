#pragma once

// Rule language: documents, parsing, validation and canonical rendering.
//
// Source files (`.lhl`) hold two kinds of documents. A rule set declares
// regions, statutory rates, action rules and tax-reduction rules. A state
// spec declares companies, IPs, initial facts and (optionally) the scenario
// constants of the economy. Identifiers starting with an uppercase letter are
// variables, `_` is the anonymous variable, everything else is a constant.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loophole/vocabulary.hpp"

namespace loophole::rulelang {

struct Span {
  int line = 0;
  int column = 0;
  bool operator==(const Span&) const = default;
};

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity = Severity::error;
  std::string message;
  Span span;
};

struct Term {
  enum class Kind : std::uint8_t { variable, constant, anonymous };
  Kind kind = Kind::constant;
  std::string name;

  static Term variable(std::string n) { return {Kind::variable, std::move(n)}; }
  static Term constant(std::string n) { return {Kind::constant, std::move(n)}; }
  static Term anonymous() { return {Kind::anonymous, "_"}; }

  bool operator==(const Term&) const = default;
};

struct Atom {
  std::string predicate;
  std::vector<Term> args;
  bool operator==(const Atom&) const = default;
};

struct Literal {
  enum class Kind : std::uint8_t { positive, negative, equal, not_equal };
  Kind kind = Kind::positive;
  Atom atom;    // positive / negative
  Term lhs;     // equal / not_equal
  Term rhs;

  bool operator==(const Literal&) const = default;
};

using Condition = std::vector<Literal>;

// c0 + sum(coeff * var). Terms are kept sorted by variable with no zero
// coefficients, so structural equality is semantic equality.
struct LinearExpr {
  double constant = 0.0;
  std::vector<std::pair<ExprVar, double>> terms;

  void add(ExprVar v, double coeff);
  double evaluate(const std::array<double, kExprVarCount>& values) const;
  bool operator==(const LinearExpr&) const = default;
};

struct ActionRuleDoc {
  std::string name;
  std::string legal_ref;
  std::vector<std::string> params;
  Condition pre;
  // positive literals are added, negative literals are deleted
  std::vector<Literal> effects;
  bool operator==(const ActionRuleDoc&) const = default;
};

struct ReductionRuleDoc {
  std::string legal_ref;
  ReductionKind kind = ReductionKind::deductible;
  Condition when;
  LinearExpr new_base;
  LinearExpr new_rate;
  bool operator==(const ReductionRuleDoc&) const = default;
};

struct Region {
  std::string name;
  std::vector<std::string> members;
  bool operator==(const Region&) const = default;
};

struct RuleSetDoc {
  std::vector<Region> regions;
  std::map<std::string, double> rate_table;
  std::vector<ActionRuleDoc> action_rules;
  std::vector<ReductionRuleDoc> reduction_rules;
  // rule id -> position of its declaration; not part of equality
  std::map<std::string, Span> source_spans;

  bool operator==(const RuleSetDoc& o) const {
    return regions == o.regions && rate_table == o.rate_table && action_rules == o.action_rules &&
           reduction_rules == o.reduction_rules;
  }
};

struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;
  auto operator<=>(const GroundAtom&) const = default;
};

struct ScenarioDecl {
  std::vector<std::pair<std::string, double>> countries;  // with commercial revenue
  std::vector<std::string> havens;
  std::vector<std::string> pool;
  std::optional<double> royalty_rate;
  std::optional<double> transfer_price;
  std::optional<double> cost;
  bool operator==(const ScenarioDecl&) const = default;
};

struct StateSpec {
  std::vector<GroundAtom> facts;
  std::vector<std::string> declared_companies;
  std::vector<std::string> declared_ips;
  std::optional<ScenarioDecl> scenario;
  bool operator==(const StateSpec&) const = default;
};

template <class Doc>
struct ParseResult {
  std::optional<Doc> document;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return document.has_value(); }
  std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& d : diagnostics) n += d.severity == Severity::error;
    return n;
  }
};

ParseResult<RuleSetDoc> parse_ruleset(std::string_view text);
ParseResult<StateSpec> parse_state_spec(std::string_view text);

// Parses a bare condition (comma separated literals, no terminator). Used for
// learned clauses and tests.
ParseResult<Condition> parse_condition(std::string_view text, LiteralContext ctx);

std::string render(const RuleSetDoc& doc);
std::string render(const StateSpec& spec);

std::string render_term(const Term& t);
std::string render_atom(const Atom& a);
std::string render_literal(const Literal& l);
std::string render_condition(const Condition& c);
std::string render_expr(const LinearExpr& e);
std::string render_ground(const GroundAtom& a);
std::string format_number(double v);

// Parses `pred(a, b)` as produced by render_ground.
std::optional<GroundAtom> parse_ground(std::string_view text);

std::string rule_id(const ActionRuleDoc& r);
std::string rule_id(const ReductionRuleDoc& r);

std::string format_diagnostic(const Diagnostic& d, std::string_view source_name = {});

}  // namespace loophole::rulelang
