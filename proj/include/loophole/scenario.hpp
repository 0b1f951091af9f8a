#pragma once

#include <string>
#include <utility>
#include <vector>

#include "loophole/rulelang.hpp"

namespace loophole::economy {

using Money = double;  // currency units ($mil in the bundled scenario)

// Economic constants of a run. Defaults reproduce the four-country revenue
// table with Bermuda as the only haven.
struct ScenarioConfig {
  std::vector<std::pair<std::string, Money>> revenue_table{
      {"usa", 700.0}, {"germany", 300.0}, {"netherlands", 100.0}, {"ireland", 30.0}, {"bermuda", 0.0}};
  std::vector<std::string> tax_havens{"bermuda"};
  std::vector<std::string> company_pool;
  double royalty_rate = 0.9;
  Money transfer_price = 50.0;
  Money cost_coefficient = 1.0;

  std::vector<std::string> countries() const {
    std::vector<std::string> out;
    for (const auto& [c, _] : revenue_table) out.push_back(c);
    return out;
  }
};

// Scenario statements of a state spec override the defaults field by field.
ScenarioConfig scenario_from(const rulelang::StateSpec& spec);

}  // namespace loophole::economy
