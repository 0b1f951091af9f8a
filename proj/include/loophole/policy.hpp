#pragma once

// Welfare accounting over sampled trajectory sets.
//
// The economy Omega is the set of multinationally complete trajectories of a
// run. delta(E) = W(Omega \ E) - W(Omega) is the welfare gain of removing E;
// a restriction H is scored by delta on the positives it covers minus delta
// on the negatives it covers.

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "loophole/induction.hpp"
#include "loophole/trajectory.hpp"

namespace loophole::policy {

enum class WelfareKind { mean_tax_collected, total_tax_collected, mean_utilitarian };

std::string_view welfare_name(WelfareKind k);
std::optional<WelfareKind> welfare_from_name(std::string_view name);  // also accepts mean_tax, total_tax

struct WelfareConfig {
  WelfareKind kind = WelfareKind::mean_tax_collected;
  std::string description;
};

using Money = double;
using TrajectoryFilter = std::function<bool(const Trajectory&)>;

// W over the complete trajectories accepted by `filter` (all when empty).
// nullopt for a mean evaluator over an empty set.
std::optional<Money> welfare(const TrajectorySet& set, const TrajectoryFilter& filter, const WelfareConfig& config);

// W(Omega \ E) - W(Omega). Throws std::invalid_argument if E names an id
// outside Omega.
std::optional<Money> delta_set(const TrajectorySet& set, const std::set<int>& e, const WelfareConfig& config);

enum class Verdict { operationally_inefficient, operationally_efficient, undefined };

std::string_view verdict_name(Verdict v);

struct RestrictionReport {
  std::string evaluator;
  std::string description;
  std::optional<Money> delta_E;      // delta(E+)
  std::optional<Money> delta_H_pos;  // delta(H & E+)
  std::optional<Money> delta_H_neg;  // delta(H & (Omega \ E+))
  std::optional<Money> Delta_H;      // delta_H_pos - delta_H_neg
  Verdict verdict = Verdict::undefined;
  std::size_t omega = 0;
  std::size_t positives = 0;
  std::size_t covered_positives = 0;
  std::size_t covered_negatives = 0;
};

// Positives are E+ restricted to Omega; coverage is evaluated on `background`.
RestrictionReport delta_restriction(const TrajectorySet& set, const induction::Hypothesis& h,
                                    const induction::LabeledExamples& examples,
                                    const induction::Background& background, const WelfareConfig& config);

// Same, for an already computed covered-id set.
RestrictionReport delta_restriction(const TrajectorySet& set, const std::set<int>& covered,
                                    const induction::LabeledExamples& examples, const WelfareConfig& config);

std::string report_json(const RestrictionReport& r);

}  // namespace loophole::policy
