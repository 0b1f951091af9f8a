#include "loophole/taxation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace loophole::taxation {

using economy::TransactionKind;
using kernel::ContractViolation;
using kernel::Fact;
using kernel::make_fact;

kernel::FactBase tax_facts(const State& s, std::span<const Transaction> txs, const Domain& d) {
  std::vector<Fact> facts;
  const auto base = kernel::action_facts(s, d);
  for (const Fact& f : base.facts()) {
    if (f.predicate != Predicate::fresh) facts.push_back(f);
  }
  for (EntityId c : kernel::companies(s)) {
    if (auto x = kernel::residency(s, c)) facts.push_back(make_fact(Predicate::resident, {c, *x}));
  }
  for (const auto& t : txs) {
    switch (t.kind) {
      case TransactionKind::commercial: facts.push_back(make_fact(Predicate::commercial, {t.receiver})); break;
      case TransactionKind::royalty: facts.push_back(make_fact(Predicate::royalty, {t.sender, t.receiver})); break;
      case TransactionKind::transfer: facts.push_back(make_fact(Predicate::transfer, {t.sender, t.receiver})); break;
    }
  }
  return kernel::FactBase(std::move(facts));
}

FlowValues flow_values(EntityId company, std::span<const Transaction> txs, double rate) {
  FlowValues v{};
  auto at = [&](ExprVar x) -> double& { return v[static_cast<std::size_t>(x)]; };
  for (const auto& t : txs) {
    if (t.receiver == company) {
      at(ExprVar::Inflow) += t.amount;
      if (t.kind == TransactionKind::commercial) at(ExprVar::CommercialIn) += t.amount;
      if (t.kind == TransactionKind::royalty) at(ExprVar::RoyaltyIn) += t.amount;
      if (t.kind == TransactionKind::transfer) at(ExprVar::TransferIn) += t.amount;
    }
    if (t.sender == company) {
      at(ExprVar::Outflow) += t.amount;
      if (t.kind == TransactionKind::royalty) at(ExprVar::RoyaltyOut) += t.amount;
      if (t.kind == TransactionKind::transfer) at(ExprVar::TransferOut) += t.amount;
    }
  }
  at(ExprVar::Base) = std::max(0.0, at(ExprVar::Inflow));
  at(ExprVar::Rate) = rate;
  return v;
}

namespace {

bool uses_matched(const rulelang::LinearExpr& e) {
  return std::any_of(e.terms.begin(), e.terms.end(), [](const auto& t) {
    return t.first == ExprVar::MatchedIn || t.first == ExprVar::MatchedOut;
  });
}

// Royalties between `company` and the counterparties that the condition's
// royalty literals bind in any of `bindings`.
void fill_matched(EntityId company, const kernel::CompiledReduction& rule, const std::vector<kernel::Binding>& bindings,
                  std::span<const Transaction> txs, FlowValues& flows) {
  std::vector<EntityId> payers;
  std::vector<EntityId> payees;
  auto value = [](const kernel::Term& t, const kernel::Binding& b) {
    return t.kind == kernel::Term::Kind::constant ? t.value : b[t.value];
  };
  for (const auto& l : rule.when.literals) {
    if (l.kind != rulelang::Literal::Kind::positive || l.predicate != Predicate::royalty) continue;
    for (const auto& b : bindings) {
      if (l.args[0].kind == kernel::Term::Kind::anonymous || l.args[1].kind == kernel::Term::Kind::anonymous) continue;
      const EntityId from = value(l.args[0], b);
      const EntityId to = value(l.args[1], b);
      if (from == company) payees.push_back(to);
      if (to == company) payers.push_back(from);
    }
  }
  auto contains = [](std::vector<EntityId>& v, EntityId x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  double in = 0.0;
  double out = 0.0;
  for (const auto& t : txs) {
    if (t.kind != TransactionKind::royalty) continue;
    if (t.receiver == company && contains(payers, t.sender)) in += t.amount;
    if (t.sender == company && contains(payees, t.receiver)) out += t.amount;
  }
  flows[static_cast<std::size_t>(ExprVar::MatchedIn)] = in;
  flows[static_cast<std::size_t>(ExprVar::MatchedOut)] = out;
}

}  // namespace

std::vector<ReductionCandidate> applicable_reductions(EntityId company, const kernel::FactBase& db,
                                                      std::span<const Transaction> txs, const FlowValues& flows,
                                                      const Domain& d) {
  std::vector<ReductionCandidate> out;
  for (std::size_t r = 0; r < d.reductions.size(); ++r) {
    const auto& rule = d.reductions[r];
    kernel::Binding seed(rule.when.var_names.size(), kernel::kUnbound);
    seed[0] = company;
    FlowValues values = flows;
    if (uses_matched(rule.new_base) || uses_matched(rule.new_rate)) {
      const auto bindings = kernel::match(db, rule.when, seed);
      if (bindings.empty()) continue;
      fill_matched(company, rule, bindings, txs, values);
    } else if (!kernel::match_any(db, rule.when, seed)) {
      continue;
    }
    const double base = rule.new_base.evaluate(values);
    const double rate = rule.new_rate.evaluate(values);
    if (!(base >= 0.0) || !(rate >= 0.0 && rate <= 1.0)) {
      spdlog::warn("reduction \"{}\" rejected for '{}': base {} rate {}", rule.legal_ref, d.symbols.name(company),
                   base, rate);
      continue;
    }
    out.push_back({r, base, rate, base * rate});
  }
  return out;
}

std::optional<ReductionCandidate> choose_reduction(std::span<const ReductionCandidate> candidates, const Domain& d) {
  std::optional<ReductionCandidate> best;
  for (const auto& c : candidates) {
    if (!best || c.tax < best->tax ||
        (c.tax == best->tax && d.reductions[c.rule].legal_ref < d.reductions[best->rule].legal_ref)) {
      best = c;
    }
  }
  return best;
}

TaxAssessment assess(EntityId company, const State& s, std::span<const Transaction> txs, const kernel::FactBase& db,
                     const Domain& d) {
  const auto country = kernel::residency(s, company);
  if (!country) throw ContractViolation("company '" + d.symbols.name(company) + "' is resident nowhere");
  const double rate = d.rate[*country];
  if (rate < 0.0) throw ContractViolation("no tax rate for '" + d.symbols.name(*country) + "'");

  const FlowValues flows = flow_values(company, txs, rate);
  TaxAssessment a;
  a.company = company;
  a.country = *country;
  a.base = flows[static_cast<std::size_t>(ExprVar::Base)];
  a.rate = rate;
  a.reduced_base = a.base;
  a.reduced_rate = rate;
  a.tax_due = a.base * rate;

  const auto candidates = applicable_reductions(company, db, txs, flows, d);
  if (auto best = choose_reduction(candidates, d); best && best->tax < a.tax_due) {
    a.applied_reduction = best->rule;
    a.reduced_base = best->new_base;
    a.reduced_rate = best->new_rate;
    a.tax_due = best->tax;
  }
  return a;
}

std::vector<TaxAssessment> assess_all(const State& s, std::span<const Transaction> txs, const Domain& d) {
  const auto db = tax_facts(s, txs, d);
  std::vector<TaxAssessment> out;
  for (EntityId c : kernel::companies(s)) out.push_back(assess(c, s, txs, db, d));
  return out;
}

Money net_profit(std::span<const Transaction> txs, std::span<const TaxAssessment> assessments) {
  std::vector<Money> in;
  for (const auto& t : txs) {
    if (t.sender == kernel::kMarket) in.push_back(t.amount);
  }
  std::vector<Money> tax;
  for (const auto& a : assessments) tax.push_back(a.tax_due);
  std::sort(in.begin(), in.end());
  std::sort(tax.begin(), tax.end());
  Money total_in = 0.0;
  for (Money m : in) total_in += m;
  Money total_tax = 0.0;
  for (Money m : tax) total_tax += m;
  return total_in - total_tax;
}

Evaluation evaluate(const State& s, const Domain& d, std::span<const economy::TransferEvent> events) {
  Evaluation e;
  e.transactions = economy::transactions(s, d, events);
  e.assessments = assess_all(s, e.transactions, d);
  e.p = net_profit(e.transactions, e.assessments);
  e.complete = economy::is_multinationally_complete(s, d);
  return e;
}

}  // namespace loophole::taxation
