#include "loophole/analytics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace loophole::analytics {

UtilityProfile utility_profile(const TrajectorySet& set) {
  std::vector<const Trajectory*> complete;
  for (const auto& t : set.trajectories) {
    if (t.complete) complete.push_back(&t);
  }
  std::sort(complete.begin(), complete.end(), [](const Trajectory* a, const Trajectory* b) {
    return a->utility > b->utility || (a->utility == b->utility && a->id < b->id);
  });
  UtilityProfile p;
  for (const auto* t : complete) {
    p.values.push_back(t->utility);
    p.index_map.push_back(t->id);
  }
  return p;
}

double auto_peak_height(double cost_coefficient) { return 3.85 * cost_coefficient; }

std::vector<double> slopes(std::span<const double> profile) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < profile.size(); ++i) out.push_back(profile[i] - profile[i + 1]);
  return out;
}

std::vector<std::size_t> find_peaks(std::span<const double> signal, double height, std::size_t min_distance) {
  const std::size_t n = signal.size();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && signal[j + 1] == signal[i]) ++j;
    const bool left_ok = i == 0 || signal[i - 1] < signal[i];
    const bool right_ok = j + 1 == n || signal[j + 1] < signal[i];
    if (left_ok && right_ok && signal[i] >= height) candidates.push_back(i + (j - i) / 2);
    i = j + 1;
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return signal[a] > signal[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t c : candidates) {
    const bool far = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return (c > k ? c - k : k - c) >= min_distance;
    });
    if (far) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<Segment> detect_segments(std::span<const double> profile, double peak_height, std::size_t min_distance) {
  std::vector<Segment> out;
  if (profile.empty()) return out;
  const auto s = slopes(profile);
  const auto peaks = profile.size() < 2 ? std::vector<std::size_t>{} : find_peaks(s, peak_height, min_distance);
  std::size_t begin = 0;
  std::optional<double> opened_by;
  for (std::size_t p : peaks) {
    Segment seg{static_cast<int>(out.size()), begin, p + 1, {}};
    if (opened_by) seg.boundary_slopes.push_back(*opened_by);
    out.push_back(seg);
    begin = p + 1;
    opened_by = s[p];
  }
  Segment last{static_cast<int>(out.size()), begin, profile.size(), {}};
  if (opened_by) last.boundary_slopes.push_back(*opened_by);
  out.push_back(last);
  return out;
}

std::vector<int> segment_ids(const std::vector<Segment>& segments, std::size_t profile_size) {
  std::vector<int> ids(profile_size, -1);
  for (const auto& s : segments) {
    for (std::size_t i = s.begin; i < s.end && i < profile_size; ++i) ids[i] = s.id;
  }
  return ids;
}

const FrequencyRow* FrequencyTable::find(std::string_view ref, std::string_view type) const {
  for (const auto& r : rows) {
    if (r.legal_ref == ref && r.type == type) return &r;
  }
  return nullptr;
}

FrequencyTable frequency_table(const TrajectorySet& set, const UtilityProfile& profile,
                               const std::vector<Segment>& segments, const rulelang::RuleSetDoc* ruleset) {
  std::unordered_map<int, const Trajectory*> by_id;
  for (const auto& t : set.trajectories) by_id.emplace(t.id, &t);

  const std::vector<std::string> type_order{"deductible", "exemption", "action"};
  // (type rank, ref) -> per-segment sums
  std::map<std::pair<int, std::string>, std::vector<double>> sums;
  auto row = [&](int rank, const std::string& ref) -> std::vector<double>& {
    auto& v = sums[{rank, ref}];
    v.resize(segments.size(), 0.0);
    return v;
  };
  if (ruleset) {
    for (const auto& r : ruleset->reduction_rules) row(r.kind == ReductionKind::deductible ? 0 : 1, r.legal_ref);
    for (const auto& r : ruleset->action_rules) row(2, r.legal_ref);
  }

  for (const auto& seg : segments) {
    for (std::size_t i = seg.begin; i < seg.end; ++i) {
      const Trajectory& t = *by_id.at(profile.index_map[i]);
      for (const auto& a : t.assessments) {
        if (!a.applied_reduction) continue;
        const int rank = a.reduction_kind.value_or("deductible") == "exemption" ? 1 : 0;
        row(rank, *a.applied_reduction)[static_cast<std::size_t>(seg.id)] += 1.0;
      }
      if (t.actions.empty()) continue;
      std::map<std::string, int> counts;
      for (const auto& a : t.actions) ++counts[a.legal_ref];
      for (const auto& [ref, c] : counts) {
        row(2, ref)[static_cast<std::size_t>(seg.id)] += static_cast<double>(c) / static_cast<double>(t.actions.size());
      }
    }
  }

  FrequencyTable table;
  table.segment_count = segments.size();
  for (auto& [key, v] : sums) {
    for (const auto& seg : segments) {
      if (seg.size()) v[static_cast<std::size_t>(seg.id)] /= static_cast<double>(seg.size());
    }
    table.rows.push_back({key.second, type_order[static_cast<std::size_t>(key.first)], v});
  }
  return table;
}

std::vector<CanonicalPlan> canonicalize(const TrajectorySet& set) {
  // hash -> groups sharing it (collisions resolved by comparing states)
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;
  std::vector<std::vector<const Trajectory*>> groups;
  for (const auto& t : set.trajectories) {
    if (!t.complete) continue;
    const auto h = t.state_hash();
    auto& candidates = by_hash[h];
    bool placed = false;
    for (std::size_t g : candidates) {
      if (groups[g].front()->final_state == t.final_state) {
        groups[g].push_back(&t);
        placed = true;
        break;
      }
    }
    if (!placed) {
      candidates.push_back(groups.size());
      groups.push_back({&t});
    }
  }
  std::vector<CanonicalPlan> out;
  for (const auto& g : groups) {
    const Trajectory* best = g.front();
    for (const auto* t : g) {
      if (t->length() < best->length() || (t->length() == best->length() && t->id < best->id)) best = t;
    }
    out.push_back({best->state_hash(), best->id, best->length(), g.size(), best->utility});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.trajectory_id < b.trajectory_id; });
  return out;
}

namespace {

std::string num(double v) { return rulelang::format_number(v); }

}  // namespace

std::string profile_csv(const UtilityProfile& profile, const std::vector<Segment>& segments) {
  const auto ids = segment_ids(segments, profile.values.size());
  std::string out = "index,utility,trajectory_id,segment_id\n";
  for (std::size_t i = 0; i < profile.values.size(); ++i) {
    out += std::to_string(i) + "," + num(profile.values[i]) + "," + std::to_string(profile.index_map[i]) + "," +
           std::to_string(ids[i]) + "\n";
  }
  return out;
}

std::string stats_csv(const FrequencyTable& table) {
  std::string out = "ref,type";
  for (std::size_t s = 0; s < table.segment_count; ++s) out += ",segment_" + std::to_string(s);
  out += "\n";
  for (const auto& r : table.rows) {
    const bool quote = r.legal_ref.find_first_of(",\"") != std::string::npos;
    out += quote ? "\"" + r.legal_ref + "\"" : r.legal_ref;
    out += "," + r.type;
    for (double v : r.values) out += "," + num(v);
    out += "\n";
  }
  return out;
}

}  // namespace loophole::analytics
