#include <doctest.h>

#include <json.hpp>
#include <random>

#include "loophole/policy.hpp"
#include "support.hpp"

using namespace loophole;
using policy::WelfareConfig;
using policy::WelfareKind;

namespace {

TrajectorySet with_taxes(const std::vector<double>& taxes) {
  std::vector<bool> none(taxes.size(), false);
  return test::synthetic_examples(none, none, taxes).set;
}

const WelfareConfig kMean{WelfareKind::mean_tax_collected, ""};

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("welfare evaluators") {
    const auto set = with_taxes({10, 2});
    CHECK(*policy::welfare(set, {}, kMean) == 6.0);
    CHECK(*policy::welfare(set, {}, {WelfareKind::total_tax_collected, ""}) == 12.0);
    auto with_p = set;
    with_p.trajectories[0].p = 100;
    with_p.trajectories[1].p = 50;
    CHECK(*policy::welfare(with_p, {}, {WelfareKind::mean_utilitarian, ""}) == 81.0);
    CHECK(*policy::welfare(set, [](const Trajectory& t) { return t.id == 1; }, kMean) == 2.0);
    CHECK_FALSE(policy::welfare(set, [](const Trajectory&) { return false; }, kMean).has_value());
    CHECK(*policy::welfare(set, [](const Trajectory&) { return false; }, {WelfareKind::total_tax_collected, ""}) == 0.0);
  }

  TEST_CASE("incomplete trajectories are outside omega") {
    auto set = with_taxes({10, 2, 1000});
    set.trajectories[2].complete = false;
    CHECK(*policy::welfare(set, {}, kMean) == 6.0);
    CHECK_THROWS_AS(policy::delta_set(set, {2}, kMean), std::invalid_argument);
  }

  TEST_CASE("operational inefficiency of a set") {
    const auto set = with_taxes({10, 2});
    CHECK(*policy::delta_set(set, {}, kMean) == 0.0);
    CHECK(*policy::delta_set(set, {1}, kMean) == 4.0);
    CHECK(*policy::delta_set(set, {0}, kMean) == -4.0);
    CHECK_FALSE(policy::delta_set(set, {0, 1}, kMean).has_value());
    CHECK_THROWS_AS(policy::delta_set(set, {7}, kMean), std::invalid_argument);
    for (auto k : {WelfareKind::total_tax_collected, WelfareKind::mean_utilitarian}) {
      CHECK(*policy::delta_set(set, {}, {k, ""}) == 0.0);
    }
  }

  TEST_CASE("mean welfare ignores trajectory order") {
    std::mt19937 rng(1);
    std::vector<double> taxes(200);
    for (auto& t : taxes) t = std::uniform_real_distribution<double>(0, 1000)(rng);
    auto set = with_taxes(taxes);
    const auto a = *policy::welfare(set, {}, kMean);
    std::shuffle(set.trajectories.begin(), set.trajectories.end(), rng);
    CHECK(*policy::welfare(set, {}, kMean) == a);
  }

  TEST_CASE("restriction effects") {
    // 0, 1 positive and paying little; 2, 3 negative
    const std::vector<bool> positive{true, true, false, false};
    const auto ex = test::synthetic_examples(positive, positive, {1, 2, 20, 30});
    const auto perfect = policy::delta_restriction(ex.set, std::set<int>{0, 1}, ex.labels, kMean);
    CHECK(*perfect.delta_E == 25.0 - 13.25);
    CHECK(*perfect.Delta_H == *perfect.delta_E);
    CHECK(*perfect.delta_H_neg == 0.0);
    CHECK(perfect.verdict == policy::Verdict::operationally_inefficient);
    CHECK(perfect.covered_positives == 2);
    CHECK(perfect.omega == 4);

    const auto nothing = policy::delta_restriction(ex.set, std::set<int>{}, ex.labels, kMean);
    CHECK(*nothing.Delta_H == 0.0);

    const auto one_negative = policy::delta_restriction(ex.set, std::set<int>{2}, ex.labels, kMean);
    CHECK(*one_negative.Delta_H == -*policy::delta_set(ex.set, {2}, kMean));
    CHECK(*one_negative.Delta_H == -(11.0 - 13.25));
    CHECK(one_negative.covered_negatives == 1);

    const auto via_h = policy::delta_restriction(ex.set, ex.hypothesis, ex.labels, ex.background, kMean);
    CHECK(*via_h.Delta_H == *perfect.Delta_H);

    auto efficient = test::synthetic_examples(positive, positive, {50, 60, 20, 30});
    CHECK(policy::delta_restriction(efficient.set, std::set<int>{0, 1}, efficient.labels, kMean).verdict ==
          policy::Verdict::operationally_efficient);
  }

  TEST_CASE("a perfect hypothesis on an inefficient system helps") {
    std::mt19937 rng(77);
    int runs = 0;
    for (int round = 0; round < 30; ++round) {
      const int n = std::uniform_int_distribution<int>(4, 40)(rng);
      std::vector<bool> positive(n);
      std::vector<double> taxes(n);
      bool any_pos = false, any_neg = false;
      for (int i = 0; i < n; ++i) {
        positive[i] = std::bernoulli_distribution(0.3)(rng);
        any_pos |= positive[i];
        any_neg |= !positive[i];
        taxes[i] = positive[i] ? std::uniform_real_distribution<double>(0, 20)(rng)
                               : std::uniform_real_distribution<double>(10, 100)(rng);
      }
      if (!any_pos || !any_neg) continue;
      auto ex = test::synthetic_examples(positive, positive, taxes);
      induction::InductionConfig config;
      config.roles = {{"A", "ireland"}};
      ex.hypothesis = induction::induce(ex.labels, ex.background, config);
      const auto m = induction::evaluate(ex.hypothesis, ex.labels, ex.background);
      REQUIRE(*m.sensitivity == 1.0);
      REQUIRE(*m.specificity == 1.0);
      for (auto kind : {WelfareKind::mean_tax_collected, WelfareKind::total_tax_collected}) {
        const WelfareConfig config_w{kind, ""};
        const auto r = policy::delta_restriction(ex.set, ex.hypothesis, ex.labels, ex.background, config_w);
        REQUIRE(r.Delta_H.has_value());
        CHECK(*r.Delta_H == *r.delta_H_pos - *r.delta_H_neg);
        if (*r.delta_E > 0) {
          ++runs;
          CHECK(*r.Delta_H > 0);
          CHECK(*r.Delta_H == *r.delta_E);
        }
      }
    }
    CHECK(runs > 10);
  }

  TEST_CASE("report json") {
    const std::vector<bool> positive{true, false};
    const auto ex = test::synthetic_examples(positive, positive, {1, 2});
    auto r = policy::delta_restriction(ex.set, std::set<int>{0}, ex.labels, {WelfareKind::mean_tax_collected, "per run"});
    const auto j = nlohmann::json::parse(policy::report_json(r));
    CHECK(j.at("evaluator") == "mean_tax_collected");
    CHECK(j.at("description") == "per run");
    CHECK(j.at("verdict") == "operationally_inefficient");
    CHECK(j.at("Delta_H").get<double>() == 0.5);
    r.Delta_H.reset();
    CHECK(nlohmann::json::parse(policy::report_json(r)).at("Delta_H").is_null());
  }

  TEST_CASE("welfare names") {
    CHECK(policy::welfare_from_name("mean_tax") == WelfareKind::mean_tax_collected);
    CHECK(policy::welfare_from_name("mean_utilitarian") == WelfareKind::mean_utilitarian);
    CHECK_FALSE(policy::welfare_from_name("gdp").has_value());
    CHECK(policy::welfare_name(WelfareKind::total_tax_collected) == "total_tax_collected");
  }
}
