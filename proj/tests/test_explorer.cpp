#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "loophole/explorer.hpp"
#include "loophole/taxation.hpp"
#include "loophole/trajectory_io.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace loophole;

using oracle::FinalState;
using oracle::naive_distribution;

TEST_SUITE("explorer") {
  TEST_CASE("mixture weight") {
    CHECK(explorer::alpha(0, 0.01) == 1.0);
    CHECK(explorer::alpha(100, 0.01) == 0.5);
    CHECK(explorer::alpha(49, 0.01) == 1.0 / 1.49);
    CHECK(explorer::alpha(7, 0.0) == 1.0);
  }

  TEST_CASE("selection distribution matches a direct softmax") {
    std::mt19937 rng(5);
    SearchParams params;
    for (int round = 0; round < 200; ++round) {
      const auto n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
      std::vector<int> depths(n);
      std::vector<double> utils(n);
      for (std::size_t i = 0; i < n; ++i) {
        depths[i] = std::uniform_int_distribution<int>(0, 12)(rng);
        utils[i] = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
      }
      const int t = std::uniform_int_distribution<int>(0, 60)(rng);
      params.beta = std::uniform_real_distribution<double>(0.0, 0.2)(rng);
      params.tau0 = std::uniform_real_distribution<double>(0.5, 8.0)(rng);
      const auto got = explorer::selection_distribution(depths, utils, t, params);
      const auto want = naive_distribution(depths, utils, t, params.beta, params.tau0);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-10);
    }
  }

  TEST_CASE("probabilities stay finite for huge utilities") {
    SearchParams params;
    const std::vector<int> depths{1, 2, 3, 4};
    const std::vector<double> utils{1e12, -1e12, 3.0, 5e11};
    const auto p = explorer::selection_distribution(depths, utils, 30, params);
    double sum = 0;
    for (double x : p) {
      CHECK(std::isfinite(x));
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }

  TEST_CASE("with beta zero only depth matters") {
    SearchParams params;
    params.beta = 0.0;
    const std::vector<int> depths{0, 1, 3};
    const auto a = explorer::selection_distribution(depths, std::vector<double>{1, 2, 3}, 40, params);
    const auto b = explorer::selection_distribution(depths, std::vector<double>{9, -4, 0}, 40, params);
    CHECK(a == b);
  }

  TEST_CASE("interquartile range interpolates") {
    CHECK(explorer::interquartile_range({1, 2, 3, 4}) == 1.5);
    CHECK(explorer::interquartile_range({7}) == 0.0);
    CHECK(explorer::interquartile_range({5, 5, 5}) == 0.0);
  }

  TEST_CASE("utility is profit minus path cost") {
    CHECK(explorer::trajectory_utility(100.0, 4, 1.0) == 96.0);
    CHECK(explorer::trajectory_utility(100.0, 4, 1.0) - explorer::trajectory_utility(100.0, 6, 1.0) == 2.0);
    CHECK_THROWS_AS(explorer::trajectory_utility(1.0, 1, 0.0), std::invalid_argument);
  }

  TEST_CASE("parameters are validated") {
    SearchParams p;
    p.iterations = 0;
    CHECK(p.validate().has_value());
    const auto d = test::domain(test::kToyRules, test::kToyState);
    CHECK_THROWS_AS(explorer::explore(d, p), std::invalid_argument);
    CHECK_FALSE(SearchParams{}.validate().has_value());
  }

  TEST_CASE("no action rules give an empty set") {
    const auto d = test::domain("rate a 0.2.\nrate b 0.1.\n", test::kToyState);
    CHECK(explorer::explore(d, SearchParams{}).trajectories.empty());
  }

  TEST_CASE("full budget reproduces breadth-first enumeration") {
    for (const int max_steps : {3, 4}) {
      const auto d = test::domain(test::kToyRules, test::kToyState3);
      const auto expected = oracle::bfs(d, max_steps);
      SearchParams params;
      params.max_steps = max_steps;
      params.iterations = max_steps + 2;
      params.expansions = 1 << 20;
      params.seed = 3;
      explorer::ExploreStats stats;
      const auto set = explorer::explore(d, params, &stats);
      CHECK(stats.nodes == expected.states);
      std::set<std::pair<FinalState, std::size_t>> got;
      for (const auto& t : set.trajectories) got.emplace(t.final_state, t.length());
      CHECK(got.size() == set.trajectories.size());
      CHECK(got == expected.recorded);
    }
  }

  TEST_CASE("recorded trajectories are consistent") {
    const auto d = test::domain(test::kToyRules, test::kToyState3);
    SearchParams params;
    params.iterations = 6;
    params.expansions = 20;
    params.max_steps = 5;
    params.cost = 0.5;
    const auto set = explorer::explore(d, params);
    REQUIRE_FALSE(set.trajectories.empty());
    for (const auto& t : set.trajectories) {
      CHECK(t.phi == 0.5 * static_cast<double>(t.length()));
      CHECK(t.phi > 0);
      CHECK(t.utility == t.p - t.phi);
      CHECK(std::is_sorted(t.final_state.begin(), t.final_state.end()));
      CHECK(t.length() <= 5);
    }
  }

  TEST_CASE("results do not depend on the worker count") {
    const auto d = test::corpus_domain();
    SearchParams params;
    params.iterations = 10;
    params.expansions = 40;
    params.seed = 11;
    const auto one = explorer::explore(d, params);
    REQUIRE_FALSE(one.trajectories.empty());
    params.threads = 3;
    const auto three = explorer::explore(d, params);
    CHECK(one.trajectories == three.trajectories);
    params.threads = 1;
    params.seed = 12;
    const auto other = explorer::explore(d, params);
    CHECK_FALSE(other.trajectories == one.trajectories);
  }
}
