#include "loophole/vocabulary.hpp"

namespace loophole {

namespace {

constexpr std::array<PredicateInfo, kPredicateCount> kPredicates{{
    {Predicate::based, "based", 2, PredicateScope::state},
    {Predicate::managed, "managed", 2, PredicateScope::state},
    {Predicate::isChildOf, "isChildOf", 2, PredicateScope::state},
    {Predicate::ownsIP, "ownsIP", 2, PredicateScope::state},
    {Predicate::rentsIP, "rentsIP", 3, PredicateScope::state},
    {Predicate::exists, "exists", 1, PredicateScope::state},
    {Predicate::access, "access", 2, PredicateScope::action},
    {Predicate::fresh, "fresh", 1, PredicateScope::action},
    {Predicate::country, "country", 1, PredicateScope::action},
    {Predicate::haven, "haven", 1, PredicateScope::action},
    {Predicate::inRegion, "inRegion", 2, PredicateScope::action},
    {Predicate::resident, "resident", 2, PredicateScope::tax},
    {Predicate::royalty, "royalty", 2, PredicateScope::tax},
    {Predicate::commercial, "commercial", 1, PredicateScope::tax},
    {Predicate::transfer, "transfer", 2, PredicateScope::tax},
}};

constexpr std::array<std::string_view, kExprVarCount> kExprVars{
    "Base", "Rate", "RoyaltyIn", "RoyaltyOut", "CommercialIn", "TransferIn", "TransferOut", "Inflow", "Outflow",
    "MatchedIn", "MatchedOut"};

constexpr std::array<std::string_view, 3> kActionNames{"addChild", "rentIP", "transferIP"};

}  // namespace

const std::array<PredicateInfo, kPredicateCount>& predicate_table() { return kPredicates; }

std::optional<Predicate> predicate_from_name(std::string_view name) {
  for (const auto& info : kPredicates) {
    if (info.name == name) return info.predicate;
  }
  return std::nullopt;
}

std::string_view predicate_name(Predicate p) { return kPredicates[static_cast<std::size_t>(p)].name; }

std::uint8_t predicate_arity(Predicate p) { return kPredicates[static_cast<std::size_t>(p)].arity; }

bool is_state_predicate(Predicate p) {
  return kPredicates[static_cast<std::size_t>(p)].scope == PredicateScope::state;
}

bool predicate_allowed(Predicate p, LiteralContext ctx) {
  const auto scope = kPredicates[static_cast<std::size_t>(p)].scope;
  switch (ctx) {
    case LiteralContext::state_fact:
    case LiteralContext::action_eff:
      return scope == PredicateScope::state;
    case LiteralContext::action_pre:
      return scope != PredicateScope::tax;
    case LiteralContext::reduction_when:
      return p != Predicate::fresh;
  }
  return false;
}

std::optional<ExprVar> expr_var_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kExprVars.size(); ++i) {
    if (kExprVars[i] == name) return static_cast<ExprVar>(i);
  }
  return std::nullopt;
}

std::string_view expr_var_name(ExprVar v) { return kExprVars[static_cast<std::size_t>(v)]; }

std::optional<ActionName> action_name_from(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == name) return static_cast<ActionName>(i);
  }
  return std::nullopt;
}

std::string_view action_name(ActionName a) { return kActionNames[static_cast<std::size_t>(a)]; }

std::optional<ReductionKind> reduction_kind_from(std::string_view name) {
  if (name == "deductible") return ReductionKind::deductible;
  if (name == "exemption") return ReductionKind::exemption;
  return std::nullopt;
}

std::string_view reduction_kind_name(ReductionKind k) {
  return k == ReductionKind::deductible ? "deductible" : "exemption";
}

}  // namespace loophole
