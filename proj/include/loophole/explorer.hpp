#pragma once

// Randomized best-first exploration of the incorporation transition system.
//
// Each iteration samples frontier nodes without replacement from a mixture of
// a depth prior and a utility softmax, expands them, and merges the children
// into a search tree keyed on state identity. Sampling noise is a pure
// function of (seed, iteration, state), and expansion results are merged in
// sample order, so output does not depend on the worker count.

#include <span>
#include <vector>

#include "loophole/kernel.hpp"
#include "loophole/trajectory.hpp"

namespace loophole::explorer {

// 1 / (1 + beta t)
double alpha(int t, double beta);

// log P(s; t) for each frontier node given its depth and path utility.
// Utilities are shifted by their maximum and divided by max(1, IQR) before the
// softmax; everything is done with log-sum-exp.
std::vector<double> selection_log_distribution(std::span<const int> depths, std::span<const double> utilities,
                                               int t, const SearchParams& params);
std::vector<double> selection_distribution(std::span<const int> depths, std::span<const double> utilities, int t,
                                           const SearchParams& params);

// p - c * length. Throws std::invalid_argument if c <= 0.
double trajectory_utility(double p, std::size_t length, double c);

// Linear-interpolated interquartile range; 0 for fewer than two values.
double interquartile_range(std::vector<double> values);

// Full record of the path from the initial state through `path`.
Trajectory make_trajectory(int id, std::span<const kernel::GroundedAction> path, const kernel::Domain& d,
                           double cost);

struct ExploreStats {
  std::size_t nodes = 0;
  std::size_t expanded = 0;
  std::size_t reparented = 0;
};

// Hashes in the result are left empty; callers fill them in.
TrajectorySet explore(const kernel::Domain& d, const SearchParams& params, ExploreStats* stats = nullptr);

}  // namespace loophole::explorer
