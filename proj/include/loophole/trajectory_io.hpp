#pragma once

// JSON Lines serialization of trajectory sets (format 1).

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "loophole/trajectory.hpp"

namespace loophole {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kTrajectoryFormat = 1;

void write_jsonl(std::ostream& out, const TrajectorySet& set);
std::string to_jsonl(const TrajectorySet& set);

// Throws FormatError on malformed input, an unknown format version, or a
// trajectory with more than one transferIP action.
TrajectorySet read_jsonl(std::istream& in);
TrajectorySet parse_jsonl(std::string_view text);

}  // namespace loophole
