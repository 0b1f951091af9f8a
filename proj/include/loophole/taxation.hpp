#pragma once

// Per-company tax returns: statutory base and rate at the residency country,
// then the cheapest admissible reduction.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loophole/economy.hpp"
#include "loophole/kernel.hpp"

namespace loophole::taxation {

using economy::Money;
using economy::Transaction;
using kernel::Domain;
using kernel::EntityId;
using kernel::State;

struct TaxAssessment {
  EntityId company = 0;
  EntityId country = 0;
  Money base = 0.0;      // statutory
  double rate = 0.0;     // statutory
  std::optional<std::size_t> applied_reduction;  // index into Domain::reductions
  Money reduced_base = 0.0;
  double reduced_rate = 0.0;
  Money tax_due = 0.0;
};

struct ReductionCandidate {
  std::size_t rule = 0;
  Money new_base = 0.0;
  double new_rate = 0.0;
  Money tax = 0.0;
};

using FlowValues = std::array<double, kExprVarCount>;

// State facts plus every derived view except fresh: access, country, haven,
// inRegion, resident, royalty, commercial, transfer.
kernel::FactBase tax_facts(const State& s, std::span<const Transaction> txs, const Domain& d);

// Base, Rate and the company's flow aggregates. Base is max(0, inflows).
FlowValues flow_values(EntityId company, std::span<const Transaction> txs, double rate);

// Reductions whose condition holds with Self = company, in Domain order.
// MatchedIn/MatchedOut are filled per rule from the royalty literals of its
// condition. Candidates with a negative base or a rate outside [0,1] are
// dropped with a warning.
std::vector<ReductionCandidate> applicable_reductions(EntityId company, const kernel::FactBase& db,
                                                      std::span<const Transaction> txs, const FlowValues& flows,
                                                      const Domain& d);

// Lowest tax; ties go to the lexicographically smaller legal reference.
std::optional<ReductionCandidate> choose_reduction(std::span<const ReductionCandidate> candidates, const Domain& d);

// Throws ContractViolation if the company has no residency or the country no rate.
TaxAssessment assess(EntityId company, const State& s, std::span<const Transaction> txs,
                     const kernel::FactBase& db, const Domain& d);

// One assessment per existing company, in id order.
std::vector<TaxAssessment> assess_all(const State& s, std::span<const Transaction> txs, const Domain& d);

// Market inflows minus total tax. Both sums run over sorted values so the
// result does not depend on list order.
Money net_profit(std::span<const Transaction> txs, std::span<const TaxAssessment> assessments);

struct Evaluation {
  std::vector<Transaction> transactions;
  std::vector<TaxAssessment> assessments;
  Money p = 0.0;
  bool complete = false;
};

Evaluation evaluate(const State& s, const Domain& d, std::span<const economy::TransferEvent> events);

}  // namespace loophole::taxation
