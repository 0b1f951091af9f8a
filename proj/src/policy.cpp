#include "loophole/policy.hpp"

#include <algorithm>
#include <json.hpp>
#include <stdexcept>
#include <vector>

namespace loophole::policy {

std::string_view welfare_name(WelfareKind k) {
  switch (k) {
    case WelfareKind::mean_tax_collected: return "mean_tax_collected";
    case WelfareKind::total_tax_collected: return "total_tax_collected";
    case WelfareKind::mean_utilitarian: return "mean_utilitarian";
  }
  return "mean_tax_collected";
}

std::optional<WelfareKind> welfare_from_name(std::string_view name) {
  if (name == "mean_tax_collected" || name == "mean_tax") return WelfareKind::mean_tax_collected;
  if (name == "total_tax_collected" || name == "total_tax") return WelfareKind::total_tax_collected;
  if (name == "mean_utilitarian") return WelfareKind::mean_utilitarian;
  return std::nullopt;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::operationally_inefficient: return "operationally_inefficient";
    case Verdict::operationally_efficient: return "operationally_efficient";
    case Verdict::undefined: return "undefined";
  }
  return "undefined";
}

std::optional<Money> welfare(const TrajectorySet& set, const TrajectoryFilter& filter, const WelfareConfig& config) {
  std::vector<Money> values;
  for (const auto& t : set.trajectories) {
    if (!t.complete || (filter && !filter(t))) continue;
    // utilitarian: firm net profit plus government revenue
    values.push_back(config.kind == WelfareKind::mean_utilitarian ? t.p + t.total_tax() : t.total_tax());
  }
  // sorted so the result does not depend on trajectory order
  std::sort(values.begin(), values.end());
  Money sum = 0.0;
  for (Money v : values) sum += v;
  if (config.kind == WelfareKind::total_tax_collected) return sum;
  if (values.empty()) return std::nullopt;
  return sum / static_cast<double>(values.size());
}

std::optional<Money> delta_set(const TrajectorySet& set, const std::set<int>& e, const WelfareConfig& config) {
  if (e.empty()) return 0.0;
  std::set<int> omega;
  for (const auto& t : set.trajectories) {
    if (t.complete) omega.insert(t.id);
  }
  for (int id : e) {
    if (!omega.count(id)) throw std::invalid_argument("trajectory " + std::to_string(id) + " is not in the economy");
  }
  const auto rest = welfare(set, [&](const Trajectory& t) { return !e.count(t.id); }, config);
  const auto all = welfare(set, {}, config);
  if (!rest || !all) return std::nullopt;
  return *rest - *all;
}

RestrictionReport delta_restriction(const TrajectorySet& set, const std::set<int>& covered,
                                    const induction::LabeledExamples& examples, const WelfareConfig& config) {
  RestrictionReport r;
  r.evaluator = std::string(welfare_name(config.kind));
  r.description = config.description;

  std::set<int> omega;
  for (const auto& t : set.trajectories) {
    if (t.complete) omega.insert(t.id);
  }
  std::set<int> e_plus;
  for (int id : examples.positives) {
    if (omega.count(id)) e_plus.insert(id);
  }
  std::set<int> h_pos;
  std::set<int> h_neg;
  for (int id : covered) {
    if (!omega.count(id)) continue;
    (e_plus.count(id) ? h_pos : h_neg).insert(id);
  }
  r.omega = omega.size();
  r.positives = e_plus.size();
  r.covered_positives = h_pos.size();
  r.covered_negatives = h_neg.size();

  r.delta_E = delta_set(set, e_plus, config);
  r.delta_H_pos = delta_set(set, h_pos, config);
  r.delta_H_neg = delta_set(set, h_neg, config);
  if (r.delta_H_pos && r.delta_H_neg) r.Delta_H = *r.delta_H_pos - *r.delta_H_neg;
  if (r.delta_E) r.verdict = *r.delta_E > 0.0 ? Verdict::operationally_inefficient : Verdict::operationally_efficient;
  return r;
}

RestrictionReport delta_restriction(const TrajectorySet& set, const induction::Hypothesis& h,
                                    const induction::LabeledExamples& examples,
                                    const induction::Background& background, const WelfareConfig& config) {
  const auto ids = induction::covered_ids(h, background);
  return delta_restriction(set, std::set<int>(ids.begin(), ids.end()), examples, config);
}

std::string report_json(const RestrictionReport& r) {
  auto opt = [](const std::optional<Money>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["evaluator"] = r.evaluator;
  j["description"] = r.description;
  j["omega"] = "sampled multinationally complete trajectories";
  j["delta_E"] = opt(r.delta_E);
  j["delta_H_pos"] = opt(r.delta_H_pos);
  j["delta_H_neg"] = opt(r.delta_H_neg);
  j["Delta_H"] = opt(r.Delta_H);
  j["verdict"] = verdict_name(r.verdict);
  j["counts"] = {{"omega", r.omega},
                 {"positives", r.positives},
                 {"covered_positives", r.covered_positives},
                 {"covered_negatives", r.covered_negatives}};
  return j.dump(2) + "\n";
}

}  // namespace loophole::policy
