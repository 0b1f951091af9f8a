#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace loophole {

// Closed predicate set. The first six are state facts; the rest are derived
// views computed from a state (and, for taxation, from its transactions).
enum class Predicate : std::uint8_t {
  based,
  managed,
  isChildOf,
  ownsIP,
  rentsIP,
  exists,
  // derived, usable in action preconditions and reduction conditions
  access,
  fresh,
  country,
  haven,
  inRegion,
  // derived, usable in reduction conditions only
  resident,
  royalty,
  commercial,
  transfer,
};

inline constexpr std::size_t kPredicateCount = 15;

enum class PredicateScope : std::uint8_t { state, action, tax };

struct PredicateInfo {
  Predicate predicate;
  std::string_view name;
  std::uint8_t arity;
  PredicateScope scope;
};

const std::array<PredicateInfo, kPredicateCount>& predicate_table();

std::optional<Predicate> predicate_from_name(std::string_view name);
std::string_view predicate_name(Predicate p);
std::uint8_t predicate_arity(Predicate p);
bool is_state_predicate(Predicate p);

// Where a literal is written decides which predicates it may use.
enum class LiteralContext : std::uint8_t { state_fact, action_pre, action_eff, reduction_when };

bool predicate_allowed(Predicate p, LiteralContext ctx);

// Flow aggregates available in reduction expressions next to Base and Rate.
enum class ExprVar : std::uint8_t {
  Base,
  Rate,
  RoyaltyIn,
  RoyaltyOut,
  CommercialIn,
  TransferIn,
  TransferOut,
  Inflow,
  Outflow,
  // royalties exchanged with the counterparties bound by the condition's
  // royalty literals, over all matching bindings
  MatchedIn,
  MatchedOut,
};

inline constexpr std::size_t kExprVarCount = 11;

std::optional<ExprVar> expr_var_from_name(std::string_view name);
std::string_view expr_var_name(ExprVar v);

enum class ActionName : std::uint8_t { addChild, rentIP, transferIP };

std::optional<ActionName> action_name_from(std::string_view name);
std::string_view action_name(ActionName a);

enum class ReductionKind : std::uint8_t { deductible, exemption };

std::optional<ReductionKind> reduction_kind_from(std::string_view name);
std::string_view reduction_kind_name(ReductionKind k);

}  // namespace loophole
