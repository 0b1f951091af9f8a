#include "loophole/explorer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "loophole/economy.hpp"
#include "loophole/hashing.hpp"
#include "loophole/taxation.hpp"

namespace loophole::explorer {

using kernel::Domain;
using kernel::GroundedAction;
using kernel::State;

double alpha(int t, double beta) { return 1.0 / (1.0 + beta * static_cast<double>(t)); }

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double interquartile_range(std::vector<double> values) {
  if (values.size() < 2) return 0.0;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return quantile(0.75) - quantile(0.25);
}

std::vector<double> selection_log_distribution(std::span<const int> depths, std::span<const double> utilities,
                                               int t, const SearchParams& params) {
  if (depths.size() != utilities.size()) throw std::invalid_argument("depth/utility size mismatch");
  const std::size_t n = depths.size();
  if (n == 0) return {};

  std::vector<double> ld(n);
  for (std::size_t i = 0; i < n; ++i) ld[i] = -static_cast<double>(depths[i]) / params.tau0;
  const double zd = log_sum_exp(ld);
  for (double& x : ld) x -= zd;

  const double a = alpha(t, params.beta);
  if (a >= 1.0) return ld;

  const double umax = *std::max_element(utilities.begin(), utilities.end());
  const double scale = std::max(1.0, interquartile_range({utilities.begin(), utilities.end()}));
  std::vector<double> lu(n);
  for (std::size_t i = 0; i < n; ++i) lu[i] = (utilities[i] - umax) / scale;
  const double zu = log_sum_exp(lu);
  for (double& x : lu) x -= zu;

  const double la = std::log(a);
  const double lb = std::log1p(-a);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = log_add(la + ld[i], lb + lu[i]);
  return out;
}

std::vector<double> selection_distribution(std::span<const int> depths, std::span<const double> utilities, int t,
                                           const SearchParams& params) {
  auto out = selection_log_distribution(depths, utilities, t, params);
  for (double& x : out) x = std::exp(x);
  return out;
}

double trajectory_utility(double p, std::size_t length, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("cost coefficient must be positive");
  return p - c * static_cast<double>(length);
}

namespace {

std::vector<TransactionRecord> to_records(const std::vector<economy::Transaction>& txs, const Domain& d) {
  std::vector<TransactionRecord> out;
  for (const auto& t : txs) {
    out.push_back({t.id, t.time, d.symbols.name(t.sender), d.symbols.name(t.receiver), t.amount,
                   std::string(economy::transaction_kind_name(t.kind))});
  }
  return out;
}

std::vector<AssessmentRecord> to_records(const std::vector<taxation::TaxAssessment>& as, const Domain& d) {
  std::vector<AssessmentRecord> out;
  for (const auto& a : as) {
    AssessmentRecord r;
    r.company = d.symbols.name(a.company);
    r.country = d.symbols.name(a.country);
    r.base = a.base;
    r.rate = a.rate;
    if (a.applied_reduction) {
      const auto& rule = d.reductions[*a.applied_reduction];
      r.applied_reduction = rule.legal_ref;
      r.reduction_kind = std::string(reduction_kind_name(rule.kind));
    }
    r.tax_due = a.tax_due;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

Trajectory make_trajectory(int id, std::span<const GroundedAction> path, const Domain& d, double cost) {
  Trajectory tr;
  tr.id = id;
  State s = d.initial;
  std::vector<economy::TransferEvent> events;
  for (const auto& a : path) {
    State next = kernel::apply_action(s, a, d);
    if (auto e = economy::transfer_event(s, next, next.step_count())) events.push_back(*e);
    s = std::move(next);
    const auto& rule = d.rule(a);
    tr.actions.push_back({std::string(action_name(rule.name)), rule.legal_ref, kernel::action_args(a, d)});
  }
  for (const auto& f : s.facts()) tr.final_state.push_back(kernel::to_ground(f, d.symbols));
  std::sort(tr.final_state.begin(), tr.final_state.end());
  const auto ev = taxation::evaluate(s, d, events);
  tr.transactions = to_records(ev.transactions, d);
  tr.assessments = to_records(ev.assessments, d);
  tr.p = ev.p;
  tr.phi = cost * static_cast<double>(path.size());
  tr.utility = tr.p - tr.phi;
  tr.complete = ev.complete;
  return tr;
}

namespace {

struct Node {
  State state;
  int parent = -1;
  GroundedAction action{};
  int depth = 0;
  double p = 0.0;
  bool complete = false;
  std::int8_t has_actions = -1;  // unknown until needed
  bool expanded = false;
  std::vector<std::uint32_t> children;
};

struct Child {
  GroundedAction action;
  State state;
  double p = 0.0;
  bool complete = false;
  std::int8_t has_actions = -1;
  bool known = false;  // state already in the tree when expanded
};

class Search {
 public:
  Search(const Domain& d, const SearchParams& params) : d_(d), params_(params) {}

  TrajectorySet run(ExploreStats* stats) {
    TrajectorySet out;
    out.params = params_;
    Node root;
    root.state = d_.initial;
    evaluate_into(root.state, 0, root.p, root.complete);
    root.has_actions = kernel::applicable_actions(root.state, d_).empty() ? 0 : 1;
    if (!root.has_actions) {
      spdlog::warn("no applicable action in the initial state; nothing to explore");
      return out;
    }
    add_node(std::move(root));

    for (int t = 0; t < params_.iterations; ++t) {
      const auto frontier = current_frontier();
      if (frontier.empty()) break;
      const auto sample = sample_frontier(frontier, t);
      auto results = expand(sample);
      for (std::size_t i = 0; i < sample.size(); ++i) merge(sample[i], results[i]);
    }

    for (std::uint32_t i = 1; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      const bool terminal = n.depth >= params_.max_steps || !has_actions(i);
      if (!(terminal || n.complete)) continue;
      out.trajectories.push_back(
          make_trajectory(static_cast<int>(out.trajectories.size()), path_to(i), d_, params_.cost));
    }
    if (stats) {
      stats->nodes = nodes_.size();
      stats->expanded = expanded_;
      stats->reparented = reparented_;
    }
    return out;
  }

 private:
  void evaluate_into(const State& s, int step, double& p, bool& complete) const {
    const auto e = economy::transfer_event(d_.initial, s, step);
    std::vector<economy::TransferEvent> events;
    if (e) events.push_back(*e);
    const auto ev = taxation::evaluate(s, d_, events);
    p = ev.p;
    complete = ev.complete;
  }

  std::optional<std::uint32_t> lookup(const State& s) const {
    auto [lo, hi] = closed_.equal_range(s.hash());
    for (auto it = lo; it != hi; ++it) {
      if (nodes_[it->second].state.same_as(s)) return it->second;
    }
    return std::nullopt;
  }

  std::uint32_t add_node(Node n) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    closed_.emplace(n.state.hash(), id);
    nodes_.push_back(std::move(n));
    return id;
  }

  bool has_actions(std::uint32_t i) {
    Node& n = nodes_[i];
    if (n.has_actions < 0) n.has_actions = kernel::applicable_actions(n.state, d_).empty() ? 0 : 1;
    return n.has_actions == 1;
  }

  std::vector<std::uint32_t> current_frontier() {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].expanded || nodes_[i].depth >= params_.max_steps) continue;
      if (has_actions(i)) out.push_back(i);
    }
    return out;
  }

  std::vector<std::uint32_t> sample_frontier(const std::vector<std::uint32_t>& frontier, int t) const {
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(params_.expansions), frontier.size());
    std::vector<int> depths;
    std::vector<double> utils;
    for (auto i : frontier) {
      depths.push_back(nodes_[i].depth);
      utils.push_back(nodes_[i].p - params_.cost * nodes_[i].depth);
    }
    const auto logp = selection_log_distribution(depths, utils, t, params_);

    // Gumbel top-k: sampling without replacement proportional to P.
    std::vector<std::pair<double, std::uint32_t>> keys;
    keys.reserve(frontier.size());
    const std::uint64_t round = mix64(params_.seed ^ mix64(static_cast<std::uint64_t>(t) + 1));
    for (std::size_t j = 0; j < frontier.size(); ++j) {
      const std::uint64_t r = mix64(round ^ nodes_[frontier[j]].state.hash());
      const double u = (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
      keys.emplace_back(logp[j] - std::log(-std::log(u)), frontier[j]);
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<std::uint32_t> out;
    for (std::size_t j = 0; j < k; ++j) out.push_back(keys[j].second);
    return out;
  }

  std::vector<Child> expand_one(std::uint32_t i) const {
    const Node& n = nodes_[i];
    std::vector<Child> out;
    const auto db = kernel::action_facts(n.state, d_);
    for (const auto& a : kernel::applicable_actions(n.state, db, d_)) {
      Child c;
      c.action = a;
      c.state = kernel::apply_action(n.state, a, d_);
      if (lookup(c.state)) {
        c.known = true;
      } else {
        evaluate_into(c.state, n.depth + 1, c.p, c.complete);
        if (n.depth + 1 < params_.max_steps)
          c.has_actions = kernel::applicable_actions(c.state, d_).empty() ? 0 : 1;
      }
      out.push_back(std::move(c));
    }
    return out;
  }

  std::vector<std::vector<Child>> expand(const std::vector<std::uint32_t>& sample) const {
    std::vector<std::vector<Child>> results(sample.size());
    const auto workers = static_cast<std::size_t>(std::max(1, params_.threads));
    if (workers <= 1 || sample.size() <= 1) {
      for (std::size_t i = 0; i < sample.size(); ++i) results[i] = expand_one(sample[i]);
      return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto work = [&] {
      for (std::size_t i = next++; i < sample.size(); i = next++) {
        try {
          results[i] = expand_one(sample[i]);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, sample.size()); ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return results;
  }

  void merge(std::uint32_t parent, std::vector<Child>& children) {
    nodes_[parent].expanded = true;
    ++expanded_;
    for (auto& c : children) {
      const int depth = nodes_[parent].depth + 1;
      if (auto existing = lookup(c.state)) {
        if (depth < nodes_[*existing].depth) reparent(*existing, parent, c.action);
        continue;
      }
      // a sibling expansion in this round may have evaluated nothing
      if (c.known) evaluate_into(c.state, depth, c.p, c.complete);
      Node n;
      n.state = std::move(c.state);
      n.parent = static_cast<int>(parent);
      n.action = c.action;
      n.depth = depth;
      n.p = c.p;
      n.complete = c.complete;
      n.has_actions = c.has_actions;
      const auto id = add_node(std::move(n));
      nodes_[parent].children.push_back(id);
    }
  }

  void reparent(std::uint32_t node, std::uint32_t parent, const GroundedAction& action) {
    ++reparented_;
    Node& n = nodes_[node];
    auto& siblings = nodes_[static_cast<std::size_t>(n.parent)].children;
    siblings.erase(std::find(siblings.begin(), siblings.end(), node));
    n.parent = static_cast<int>(parent);
    n.action = action;
    nodes_[parent].children.push_back(node);
    std::vector<std::uint32_t> stack{node};
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      nodes_[i].depth = nodes_[static_cast<std::size_t>(nodes_[i].parent)].depth + 1;
      for (auto c : nodes_[i].children) stack.push_back(c);
    }
  }

  std::vector<GroundedAction> path_to(std::uint32_t i) const {
    std::vector<GroundedAction> path;
    for (int j = static_cast<int>(i); nodes_[static_cast<std::size_t>(j)].parent >= 0;
         j = nodes_[static_cast<std::size_t>(j)].parent) {
      path.push_back(nodes_[static_cast<std::size_t>(j)].action);
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  const Domain& d_;
  const SearchParams& params_;
  std::vector<Node> nodes_;
  std::unordered_multimap<std::uint64_t, std::uint32_t> closed_;
  std::size_t expanded_ = 0;
  std::size_t reparented_ = 0;
};

}  // namespace

TrajectorySet explore(const Domain& d, const SearchParams& params, ExploreStats* stats) {
  if (auto bad = params.validate()) throw std::invalid_argument(*bad);
  return Search(d, params).run(stats);
}

}  // namespace loophole::explorer
