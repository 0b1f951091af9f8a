#pragma once

// Clause-set learning over per-trajectory backgrounds: label by a utility
// threshold, learn linked clauses for taxScheme(A, B, C, D) by beam search and
// greedy covering, score them, and export the F1-weighted scheme graph.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "loophole/rulelang.hpp"
#include "loophole/trajectory.hpp"

namespace loophole::induction {

struct InductionConfig {
  std::optional<double> u_plus;
  int max_literals = 7;
  std::vector<std::string> vocabulary{"ownsIP", "managed", "rentsIP"};
  int beam_width = 64;
  int max_clauses = 8;
  int top_k_edges = 10;
  // head variable -> country of the company bound to it
  std::vector<std::pair<std::string, std::string>> roles{
      {"A", "ireland"}, {"B", "netherlands"}, {"C", "usa"}, {"D", "germany"}};

  std::optional<std::string> validate() const;
};

struct LabeledExamples {
  double u_plus = 0.0;
  std::vector<int> positives;  // ids, ascending
  std::vector<int> negatives;
};

// Complete trajectories with utility > u_plus are positive, the remaining
// complete ones negative.
LabeledExamples label(const TrajectorySet& set, double u_plus);

struct ExampleBackground {
  int trajectory_id = 0;
  std::vector<rulelang::GroundAtom> facts;  // vocabulary facts, sorted
  std::vector<std::string> role_entities;   // one per head variable
};

struct Background {
  std::vector<std::string> head_vars;
  std::vector<ExampleBackground> examples;  // by trajectory id
  std::vector<int> excluded;                // trajectories lacking a role company

  const ExampleBackground* find(int trajectory_id) const;
};

Background build_background(const TrajectorySet& set, const InductionConfig& config);

struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  // undefined when the denominator is zero
  std::optional<double> accuracy, precision, specificity, sensitivity, f1;
};

Metrics metrics_from(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

struct Clause {
  rulelang::Condition body;
  Metrics metrics;  // of this clause alone over all labeled examples
};

struct Hypothesis {
  std::vector<std::string> head_vars;
  std::vector<Clause> clauses;
};

// Throws std::invalid_argument on an invalid config or a vocabulary entry
// that is not a state predicate.
Hypothesis induce(const LabeledExamples& examples, const Background& background, const InductionConfig& config);

// True if some clause body matches the example's background with the head
// variables bound to its role companies.
bool covers(const Hypothesis& h, const ExampleBackground& example);
bool covers(const rulelang::Condition& body, const std::vector<std::string>& head_vars,
            const ExampleBackground& example);

// Trajectory ids of `background` covered by the hypothesis, ascending.
std::vector<int> covered_ids(const Hypothesis& h, const Background& background);

Metrics evaluate(const Hypothesis& h, const LabeledExamples& examples, const Background& background);

struct SchemeEdge {
  std::string from;
  std::string to;
  std::string label;  // rents | managed | owns
  double weight = 0.0;
};

// Body literals as edges weighted by their clause F1, deduplicated by max
// weight, strongest first, at most top_k.
std::vector<SchemeEdge> scheme_graph(const Hypothesis& h, std::size_t top_k);

std::string render_clause(const std::vector<std::string>& head_vars, const rulelang::Condition& body);
std::string render_hypothesis(const Hypothesis& h);
std::string scheme_dot(const std::vector<SchemeEdge>& edges);
std::string scheme_csv(const std::vector<SchemeEdge>& edges);

}  // namespace loophole::induction
