#pragma once

// Name-based trajectory records. Everything downstream of the explorer works
// on these, so a run can be analysed from its JSONL file alone.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loophole/rulelang.hpp"

namespace loophole {

struct SearchParams {
  double beta = 0.01;
  double tau0 = 5.0;
  int iterations = 50;
  int expansions = 1000;
  int max_steps = 12;
  std::uint64_t seed = 0;
  double cost = 1.0;
  int threads = 1;  // not part of the result

  // Empty if valid, else the first problem found.
  std::optional<std::string> validate() const;
};

struct ActionStep {
  std::string name;
  std::string legal_ref;
  std::vector<std::string> args;
  bool operator==(const ActionStep&) const = default;
};

struct TransactionRecord {
  int id = 0;
  int time = 0;
  std::string sender;  // "market" for commercial revenue
  std::string receiver;
  double amount = 0.0;
  std::string kind;  // commercial | royalty | transfer
  bool operator==(const TransactionRecord&) const = default;
};

struct AssessmentRecord {
  std::string company;
  std::string country;
  double base = 0.0;
  double rate = 0.0;
  std::optional<std::string> applied_reduction;
  std::optional<std::string> reduction_kind;  // deductible | exemption
  double tax_due = 0.0;
  bool operator==(const AssessmentRecord&) const = default;
};

struct Trajectory {
  int id = 0;
  std::vector<ActionStep> actions;
  std::vector<rulelang::GroundAtom> final_state;  // sorted
  std::vector<TransactionRecord> transactions;
  std::vector<AssessmentRecord> assessments;
  double p = 0.0;
  double phi = 0.0;
  double utility = 0.0;
  bool complete = false;

  std::size_t length() const { return actions.size(); }
  double total_tax() const;
  // Hash of the final fact set; equal states hash equal.
  std::uint64_t state_hash() const;
  bool operator==(const Trajectory&) const = default;
};

struct TrajectorySet {
  SearchParams params;
  std::string ruleset_hash;
  std::string scenario_hash;
  std::vector<Trajectory> trajectories;

  const Trajectory* find(int id) const;
};

}  // namespace loophole
