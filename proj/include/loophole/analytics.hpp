#pragma once

// Utility profiles, slope-peak segmentation, per-segment legal-reference
// frequencies and canonical plans.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loophole/rulelang.hpp"
#include "loophole/trajectory.hpp"

namespace loophole::analytics {

struct UtilityProfile {
  std::vector<double> values;  // descending
  std::vector<int> index_map;  // position -> trajectory id
};

// Complete trajectories by utility, descending; ties by trajectory id.
UtilityProfile utility_profile(const TrajectorySet& set);

struct Segment {
  int id = 0;  // 0 is the most profitable
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  // Slope magnitude of the peak that opened this segment; empty for the first.
  std::vector<double> boundary_slopes;

  std::size_t size() const { return end - begin; }
};

// Default peak height: 3.85 per unit of action cost.
double auto_peak_height(double cost_coefficient);

// Indices of local maxima of `signal` with value >= height, pairwise at least
// `min_distance` apart. A plateau counts once, at its left-middle index, and
// the ends of the signal may be maxima. Selection is greedy by height (ties
// to the lower index).
std::vector<std::size_t> find_peaks(std::span<const double> signal, double height, std::size_t min_distance);

// Forward-difference slope magnitudes v[i] - v[i+1] of a descending profile.
std::vector<double> slopes(std::span<const double> profile);

// Splits after every peak of the slope series. Profiles shorter than 2 give
// one segment (none when empty).
std::vector<Segment> detect_segments(std::span<const double> profile, double peak_height, std::size_t min_distance);

// Segment id for each profile position.
std::vector<int> segment_ids(const std::vector<Segment>& segments, std::size_t profile_size);

struct FrequencyRow {
  std::string legal_ref;
  std::string type;  // deductible | exemption | action
  std::vector<double> values;  // one per segment
};

struct FrequencyTable {
  std::vector<FrequencyRow> rows;  // deductible, exemption, then action rows; by ref within a type
  std::size_t segment_count = 0;

  const FrequencyRow* find(std::string_view ref, std::string_view type) const;
};

// Reduction rows: mean number of assessments per trajectory applying the
// reference. Action rows: share of the trajectory's actions citing the
// reference, averaged. References of `ruleset` that never occur get zero rows.
FrequencyTable frequency_table(const TrajectorySet& set, const UtilityProfile& profile,
                               const std::vector<Segment>& segments, const rulelang::RuleSetDoc* ruleset = nullptr);

struct CanonicalPlan {
  std::uint64_t state_hash = 0;
  int trajectory_id = 0;
  std::size_t length = 0;
  std::size_t group_size = 0;
  double utility = 0.0;
};

// One plan per distinct final state among complete trajectories: the
// shortest member, ties to the lowest id. Ordered by that id.
std::vector<CanonicalPlan> canonicalize(const TrajectorySet& set);

std::string profile_csv(const UtilityProfile& profile, const std::vector<Segment>& segments);
std::string stats_csv(const FrequencyTable& table);

}  // namespace loophole::analytics
