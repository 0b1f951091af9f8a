#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "loophole/economy.hpp"
#include "loophole/induction.hpp"
#include "loophole/kernel.hpp"
#include "loophole/taxation.hpp"
#include "loophole/rulelang.hpp"

namespace test {

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string source_path(const std::string& rel) { return std::string(LOOPHOLE_SOURCE_DIR) + "/" + rel; }

inline loophole::rulelang::RuleSetDoc ruleset(const std::string& text) {
  auto r = loophole::rulelang::parse_ruleset(text);
  if (!r.ok()) {
    std::string msg;
    for (const auto& d : r.diagnostics) msg += loophole::rulelang::format_diagnostic(d) + "\n";
    throw std::runtime_error("ruleset: " + msg);
  }
  return *r.document;
}

inline loophole::rulelang::StateSpec state(const std::string& text) {
  auto r = loophole::rulelang::parse_state_spec(text);
  if (!r.ok()) {
    std::string msg;
    for (const auto& d : r.diagnostics) msg += loophole::rulelang::format_diagnostic(d) + "\n";
    throw std::runtime_error("state: " + msg);
  }
  return *r.document;
}

inline loophole::kernel::Domain domain(const std::string& rules, const std::string& st) {
  return loophole::kernel::compile(ruleset(rules), state(st));
}

inline loophole::kernel::Domain corpus_domain() {
  return domain(slurp(source_path("corpus/table1.lhl")), slurp(source_path("corpus/scenario.lhl")));
}

// Two countries, any number of companies per country, one IP.
inline const std::string kToyRules = R"(
rate a 0.2.
rate b 0.1.

action addChild(Parent, Child, Country) ref "incorp" {
  pre: exists(Parent), fresh(Child), country(Country);
  eff: exists(Child), based(Child, Country), isChildOf(Child, Parent);
}

action rentIP(Licensor, Licensee, IP) ref "license" {
  pre: access(Licensor, IP), exists(Licensee), not access(Licensee, IP);
  eff: rentsIP(Licensor, Licensee, IP);
}

action transferIP(From, To, IP) ref "transfer" {
  pre: ownsIP(From, IP), exists(To), not access(To, IP), not rentsIP(From, _, IP);
  eff: not ownsIP(From, IP), ownsIP(To, IP);
}

reduction "toy-exempt" kind exemption {
  when: resident(Self, b), royalty(P, Self);
  new_base: Base - MatchedIn;
  new_rate: Rate;
}
)";

inline const std::string kToyState = R"(
company p.
ip ip1.
fact based(p, a).
fact ownsIP(p, ip1).
country a revenue 100.
country b revenue 50.
pool c1, c2.
royalty_rate 0.9.
transfer_price 10.
cost 1.
)";

// Same economy with a third company id; about 13k paths up to depth 6.
inline const std::string kToyState3 = R"(
company p.
ip ip1.
fact based(p, a).
fact ownsIP(p, ip1).
country a revenue 100.
country b revenue 50.
pool c1, c2, c3.
royalty_rate 0.9.
transfer_price 10.
cost 1.
)";

struct PathVisit {
  const std::vector<loophole::kernel::GroundedAction>& path;
  const loophole::kernel::State& state;
  const std::vector<loophole::economy::TransferEvent>& events;
};

// Depth-first over every action sequence of length 1..max_depth.
inline void enumerate_paths(const loophole::kernel::Domain& d, int max_depth,
                            const std::function<void(const PathVisit&)>& visit) {
  using namespace loophole;
  std::vector<kernel::GroundedAction> path;
  std::vector<economy::TransferEvent> events;
  std::function<void(const kernel::State&)> rec = [&](const kernel::State& s) {
    if (!path.empty()) visit({path, s, events});
    if (static_cast<int>(path.size()) == max_depth) return;
    for (const auto& a : kernel::applicable_actions(s, d)) {
      const auto next = kernel::apply_action(s, a, d);
      const auto e = economy::transfer_event(s, next, next.step_count());
      if (e) events.push_back(*e);
      path.push_back(a);
      rec(next);
      path.pop_back();
      if (e) events.pop_back();
    }
  };
  rec(d.initial);
}

struct CanonicalityReport {
  std::size_t paths = 0;
  std::size_t complete_paths = 0;
  std::size_t groups = 0;
  std::size_t violations = 0;
};

// Groups every complete path up to max_depth by final state and counts the
// groups whose shortest member does not attain the group's best utility.
inline CanonicalityReport canonicality_check(const loophole::kernel::Domain& d, int max_depth, double cost) {
  using namespace loophole;
  struct Group {
    std::size_t min_length = SIZE_MAX;
    double utility_at_min = 0.0;
    double max_utility = -1e300;
  };
  std::map<std::vector<rulelang::GroundAtom>, Group> groups;
  CanonicalityReport r;
  enumerate_paths(d, max_depth, [&](const PathVisit& v) {
    ++r.paths;
    const auto e = taxation::evaluate(v.state, d, v.events);
    if (!e.complete) return;
    ++r.complete_paths;
    std::vector<rulelang::GroundAtom> key;
    for (const auto& f : v.state.facts()) key.push_back(kernel::to_ground(f, d.symbols));
    const double u = e.p - cost * static_cast<double>(v.path.size());
    auto& g = groups[key];
    if (v.path.size() < g.min_length) {
      g.min_length = v.path.size();
      g.utility_at_min = u;
    }
    g.max_utility = std::max(g.max_utility, u);
  });
  r.groups = groups.size();
  for (const auto& [_, g] : groups) r.violations += g.utility_at_min < g.max_utility;
  return r;
}

// Examples whose only distinguishing fact is managed(role A, bermuda); the
// clause managed(A, bermuda) then covers exactly the `covered` ones.
struct SyntheticExamples {
  loophole::TrajectorySet set;
  loophole::induction::LabeledExamples labels;
  loophole::induction::Background background;
  loophole::induction::Hypothesis hypothesis;
};

// taxes[i] is the single assessment of example i; positives get utility 10,
// negatives 0.
inline SyntheticExamples synthetic_examples(const std::vector<bool>& positive, const std::vector<bool>& covered,
                                            const std::vector<double>& taxes) {
  using namespace loophole;
  SyntheticExamples out;
  out.labels.u_plus = 5.0;
  out.background.head_vars = {"A"};
  for (std::size_t i = 0; i < positive.size(); ++i) {
    Trajectory t;
    t.id = static_cast<int>(i);
    t.complete = true;
    t.utility = positive[i] ? 10.0 : 0.0;
    t.final_state = {{"based", {"x", "ireland"}}};
    if (covered[i]) t.final_state.push_back({"managed", {"x", "bermuda"}});
    t.assessments.push_back({"x", "ireland", 100.0, 0.1, std::nullopt, std::nullopt, taxes[i]});
    out.set.trajectories.push_back(t);
    (positive[i] ? out.labels.positives : out.labels.negatives).push_back(t.id);
    induction::ExampleBackground ex;
    ex.trajectory_id = t.id;
    ex.role_entities = {"x"};
    if (covered[i]) ex.facts.push_back({"managed", {"x", "bermuda"}});
    out.background.examples.push_back(ex);
  }
  auto body = rulelang::parse_condition("managed(A, bermuda)", LiteralContext::state_fact);
  out.hypothesis.head_vars = {"A"};
  out.hypothesis.clauses.push_back({*body.document, {}});
  return out;
}

}  // namespace test
