#pragma once
// Independent reference computations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "loophole/economy.hpp"
#include "loophole/kernel.hpp"
#include "loophole/taxation.hpp"
#include "support.hpp"

namespace oracle {

using namespace loophole;

inline double quantile_sorted(const std::vector<double>& x, double q) {
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const double lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo);
  if (i + 1 >= x.size()) return x.back();
  return x[i] + (h - lo) * (x[i + 1] - x[i]);
}

// Node selection probabilities evaluated directly, without log space.
inline std::vector<double> naive_distribution(const std::vector<int>& depths, const std::vector<double>& utils, int t,
                                              double beta, double tau0) {
  const double a = 1.0 / (1.0 + beta * t);
  std::vector<double> sorted = utils;
  std::sort(sorted.begin(), sorted.end());
  const double sigma =
      std::max(1.0, sorted.size() < 2 ? 0.0 : quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25));
  const double umax = sorted.back();
  double zd = 0, zu = 0;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    zd += std::exp(-depths[i] / tau0);
    zu += std::exp((utils[i] - umax) / sigma);
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    out.push_back(a * std::exp(-depths[i] / tau0) / zd + (1 - a) * std::exp((utils[i] - umax) / sigma) / zu);
  }
  return out;
}

using FinalState = std::vector<rulelang::GroundAtom>;

inline FinalState final_state(const kernel::State& s, const kernel::Domain& d) {
  FinalState out;
  for (const auto& f : s.facts()) out.push_back(kernel::to_ground(f, d.symbols));
  std::sort(out.begin(), out.end());
  return out;
}

struct BfsResult {
  std::size_t states = 0;  // including the initial state
  std::set<std::pair<FinalState, std::size_t>> recorded;  // (final state, shortest depth)
};

// Breadth-first enumeration to max_steps; records every complete or terminal
// state at its shortest depth.
inline BfsResult bfs(const kernel::Domain& d, int max_steps) {
  std::vector<kernel::State> layer{d.initial};
  std::vector<std::pair<kernel::State, int>> seen{{d.initial, 0}};
  auto known = [&](const kernel::State& s) {
    return std::any_of(seen.begin(), seen.end(), [&](const auto& x) { return x.first.same_as(s); });
  };
  for (int depth = 1; depth <= max_steps; ++depth) {
    std::vector<kernel::State> next;
    for (const auto& s : layer) {
      for (const auto& a : kernel::applicable_actions(s, d)) {
        auto n = kernel::apply_action(s, a, d);
        if (known(n)) continue;
        seen.emplace_back(n, depth);
        next.push_back(std::move(n));
      }
    }
    layer = std::move(next);
  }
  BfsResult r;
  r.states = seen.size();
  for (const auto& [s, depth] : seen) {
    if (depth == 0) continue;
    const auto e = economy::transfer_event(d.initial, s, depth);
    std::vector<economy::TransferEvent> events;
    if (e) events.push_back(*e);
    const bool complete = taxation::evaluate(s, d, events).complete;
    const bool terminal = depth >= max_steps || kernel::applicable_actions(s, d).empty();
    if (complete || terminal) r.recorded.emplace(final_state(s, d), static_cast<std::size_t>(depth));
  }
  return r;
}

// Four countries (h a haven), two IPs, up to five companies.
inline const std::string kEconomyState = R"(
company p.
ip ip1.
ip ip2.
fact based(p, a).
fact ownsIP(p, ip1).
country a revenue 100.
country b revenue 30.
country e revenue 7.
country h revenue 0.
haven h.
pool c1, c2, c3, c4.
royalty_rate 0.9.
transfer_price 10.
cost 1.
)";

inline const std::string kEconomyRules = R"(
rate a 0.3.
rate b 0.2.
rate e 0.1.
rate h 0.
)";

struct Builder {
  const kernel::Domain& d;
  std::vector<kernel::Fact> facts;

  kernel::EntityId id(const std::string& n) const { return d.symbols.id(n); }
  Builder& company(const std::string& c, const std::string& country) {
    facts.push_back(kernel::make_fact(Predicate::exists, {id(c)}));
    facts.push_back(kernel::make_fact(Predicate::based, {id(c), id(country)}));
    return *this;
  }
  Builder& owns(const std::string& c, const std::string& ip) {
    facts.push_back(kernel::make_fact(Predicate::ownsIP, {id(c), id(ip)}));
    return *this;
  }
  Builder& rents(const std::string& owner, const std::string& renter, const std::string& ip) {
    facts.push_back(kernel::make_fact(Predicate::rentsIP, {id(owner), id(renter), id(ip)}));
    return *this;
  }
  kernel::State state() const { return kernel::State(facts); }
};

// Random licensing graph over 2..5 companies of the economy fixture. Edges
// only run forward in a random order, so the graph is acyclic.
inline kernel::State random_acyclic(const kernel::Domain& d, std::mt19937& rng) {
  const std::vector<std::string> names{"p", "c1", "c2", "c3", "c4"};
  const std::vector<std::string> countries{"a", "b", "e", "h"};
  const int n = std::uniform_int_distribution<int>(2, 5)(rng);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Builder b{d, {}};
  for (int i = 0; i < n; ++i) b.company(names[i], countries[std::uniform_int_distribution<std::size_t>(0, 3)(rng)]);
  b.owns(names[order[0]], "ip1");
  if (n > 2 && std::bernoulli_distribution(0.5)(rng)) b.owns(names[order[1]], "ip2");
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (const char* ip : {"ip1", "ip2"}) {
        if (std::bernoulli_distribution(0.3)(rng)) b.rents(names[order[i]], names[order[j]], ip);
      }
    }
  }
  return b.state();
}

// Royalties by Jacobi iteration to the fixed point. Sums follow the same
// order as the cascade (own revenue first, then downstream edges in fact
// order), so on an acyclic graph the result is exact.
inline std::vector<double> jacobi_royalties(const kernel::State& s, const std::map<kernel::EntityId, double>& revenue,
                                            double rate) {
  std::vector<kernel::Fact> edges;
  std::map<kernel::EntityId, int> access;
  for (const kernel::Fact& f : s.facts()) {
    if (f.predicate == Predicate::rentsIP) {
      edges.push_back(f);
      ++access[f.args[1]];
    }
    if (f.predicate == Predicate::ownsIP) ++access[f.args[0]];
  }
  std::vector<double> r(edges.size(), 0.0);
  for (std::size_t round = 0; round <= edges.size() + 1; ++round) {
    std::vector<double> next(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const kernel::EntityId renter = edges[i].args[1];
      double base = 0.0;
      if (auto it = revenue.find(renter); it != revenue.end()) base = it->second / access.at(renter);
      for (std::size_t j = 0; j < edges.size(); ++j) {
        if (edges[j].args[0] == renter && edges[j].args[2] == edges[i].args[2]) base += r[j];
      }
      next[i] = rate * base;
    }
    r = std::move(next);
  }
  return r;
}

// Number of cascade amounts that differ from the fixed point.
inline std::size_t royalty_mismatches(const kernel::State& s, const kernel::Domain& d, std::size_t* edges = nullptr) {
  const auto commercial = economy::commercial_transactions(s, d);
  std::map<kernel::EntityId, double> revenue;
  for (const auto& t : commercial) revenue[t.receiver] += t.amount;
  const auto got = economy::royalty_transactions(s, commercial, d);
  const auto want = jacobi_royalties(s, revenue, d.config.royalty_rate);
  if (edges) *edges += got.size();
  if (got.size() != want.size()) return std::max(got.size(), want.size());
  std::size_t bad = 0;
  for (std::size_t i = 0; i < got.size(); ++i) bad += got[i].amount != want[i];
  return bad;
}

}  // namespace oracle
