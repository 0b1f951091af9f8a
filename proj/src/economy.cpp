#include "loophole/economy.hpp"

#include <algorithm>
#include <map>

namespace loophole::economy {

using kernel::ContractViolation;
using kernel::Fact;

std::string_view transaction_kind_name(TransactionKind k) {
  switch (k) {
    case TransactionKind::commercial: return "commercial";
    case TransactionKind::royalty: return "royalty";
    case TransactionKind::transfer: return "transfer";
  }
  return "";
}

std::optional<TransactionKind> transaction_kind_from(std::string_view name) {
  for (auto k : {TransactionKind::commercial, TransactionKind::royalty, TransactionKind::transfer}) {
    if (transaction_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

ScenarioConfig scenario_from(const rulelang::StateSpec& spec) {
  ScenarioConfig c;
  if (!spec.scenario) return c;
  const auto& sc = *spec.scenario;
  if (!sc.countries.empty()) {
    c.revenue_table = sc.countries;
    c.tax_havens = sc.havens;
  } else if (!sc.havens.empty()) {
    c.tax_havens = sc.havens;
  }
  c.company_pool = sc.pool;
  if (sc.royalty_rate) c.royalty_rate = *sc.royalty_rate;
  if (sc.transfer_price) c.transfer_price = *sc.transfer_price;
  if (sc.cost) c.cost_coefficient = *sc.cost;
  return c;
}

std::optional<TransferEvent> transfer_event(const State& before, const State& after, int step) {
  std::map<EntityId, EntityId> owner;
  for (const Fact& f : before.facts()) {
    if (f.predicate == Predicate::ownsIP) owner[f.args[1]] = f.args[0];
  }
  for (const Fact& f : after.facts()) {
    if (f.predicate != Predicate::ownsIP) continue;
    auto it = owner.find(f.args[1]);
    if (it != owner.end() && it->second != f.args[0]) return TransferEvent{step, it->second, f.args[0]};
  }
  return std::nullopt;
}

namespace {

// company -> number of IPs it owns or rents
std::map<EntityId, int> ip_access_counts(const State& s) {
  std::map<EntityId, int> n;
  for (const Fact& f : s.facts()) {
    if (f.predicate == Predicate::ownsIP) ++n[f.args[0]];
    if (f.predicate == Predicate::rentsIP) ++n[f.args[1]];
  }
  return n;
}

}  // namespace

std::vector<Transaction> commercial_transactions(const State& s, const Domain& d, int first_id) {
  const auto access = ip_access_counts(s);
  std::vector<Transaction> out;
  for (const Fact& f : s.facts()) {
    if (f.predicate != Predicate::based) continue;
    const EntityId company = f.args[0];
    const EntityId country = f.args[1];
    if (d.haven[country] || !access.count(company)) continue;
    if (std::find(d.countries.begin(), d.countries.end(), country) == d.countries.end()) continue;
    out.push_back({first_id++, 0, kernel::kMarket, company, d.revenue[country], TransactionKind::commercial});
  }
  return out;
}

std::vector<Transaction> royalty_transactions(const State& s, std::span<const Transaction> commercial,
                                              const Domain& d, int first_id) {
  const auto access = ip_access_counts(s);
  std::map<EntityId, Money> revenue;
  for (const auto& t : commercial) revenue[t.receiver] += t.amount;

  std::vector<const Fact*> edges;
  for (const Fact& f : s.facts()) {
    if (f.predicate == Predicate::rentsIP) edges.push_back(&f);
  }

  // royalty paid on edge i; evaluated depth-first from each edge
  std::vector<std::optional<Money>> paid(edges.size());
  std::vector<bool> active(edges.size(), false);
  const double rate = d.config.royalty_rate;
  auto evaluate = [&](auto&& self, std::size_t i) -> Money {
    if (paid[i]) return *paid[i];
    if (active[i]) throw ContractViolation("rentsIP cycle in royalty cascade");
    active[i] = true;
    const EntityId renter = edges[i]->args[1];
    const EntityId ip = edges[i]->args[2];
    Money base = 0.0;
    if (auto it = revenue.find(renter); it != revenue.end()) base = it->second / access.at(renter);
    for (std::size_t j = 0; j < edges.size(); ++j) {
      if (edges[j]->args[0] == renter && edges[j]->args[2] == ip) base += self(self, j);
    }
    active[i] = false;
    paid[i] = rate * base;
    return *paid[i];
  };

  std::vector<Transaction> out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    out.push_back({first_id++, 0, edges[i]->args[1], edges[i]->args[0], evaluate(evaluate, i), TransactionKind::royalty});
  }
  return out;
}

std::optional<Transaction> transfer_transaction(std::span<const TransferEvent> events, const Domain& d, int id) {
  if (events.empty()) return std::nullopt;
  if (events.size() > 1) throw ContractViolation("more than one IP transfer in a trajectory");
  const auto& e = events.front();
  return Transaction{id, e.step, e.to, e.from, d.config.transfer_price, TransactionKind::transfer};
}

std::vector<Transaction> transactions(const State& s, const Domain& d, std::span<const TransferEvent> events) {
  auto out = commercial_transactions(s, d, 0);
  auto royalties = royalty_transactions(s, out, d, static_cast<int>(out.size()));
  out.insert(out.end(), royalties.begin(), royalties.end());
  if (auto t = transfer_transaction(events, d, static_cast<int>(out.size()))) out.push_back(*t);
  return out;
}

bool is_multinationally_complete(const State& s, const Domain& d) {
  const auto commercial = commercial_transactions(s, d);
  std::vector<bool> covered(d.symbols.size(), false);
  for (const auto& t : commercial) {
    for (const Fact& f : s.facts()) {
      if (f.predicate == Predicate::based && f.args[0] == t.receiver) covered[f.args[1]] = true;
    }
  }
  bool any = false;
  for (EntityId c : d.countries) {
    if (d.haven[c]) continue;
    any = true;
    if (!covered[c]) return false;
  }
  return any;
}

}  // namespace loophole::economy
