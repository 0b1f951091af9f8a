#include "loophole/trajectory_io.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "loophole/hashing.hpp"

namespace loophole {

using json = nlohmann::ordered_json;

std::optional<std::string> SearchParams::validate() const {
  if (!(beta >= 0.0)) return "beta must be >= 0";
  if (!(tau0 > 0.0)) return "tau0 must be > 0";
  if (iterations < 1) return "iterations must be >= 1";
  if (expansions < 1) return "expansions must be >= 1";
  if (max_steps < 1) return "max-steps must be >= 1";
  if (!(cost > 0.0)) return "cost must be > 0";
  if (threads < 1) return "threads must be >= 1";
  return std::nullopt;
}

double Trajectory::total_tax() const {
  double s = 0.0;
  for (const auto& a : assessments) s += a.tax_due;
  return s;
}

std::uint64_t Trajectory::state_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& f : final_state) h = fnv1a(rulelang::render_ground(f) + "\n", h);
  return h;
}

const Trajectory* TrajectorySet::find(int id) const {
  auto it = std::lower_bound(trajectories.begin(), trajectories.end(), id,
                             [](const Trajectory& t, int v) { return t.id < v; });
  if (it != trajectories.end() && it->id == id) return &*it;
  for (const auto& t : trajectories) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

namespace {

json params_json(const SearchParams& p) {
  return json{{"beta", p.beta},       {"tau0", p.tau0},         {"iterations", p.iterations},
              {"expansions", p.expansions}, {"max_steps", p.max_steps}, {"cost", p.cost}};
}

json trajectory_json(const Trajectory& t) {
  json actions = json::array();
  for (const auto& a : t.actions) actions.push_back({{"name", a.name}, {"legal_ref", a.legal_ref}, {"args", a.args}});
  json facts = json::array();
  for (const auto& f : t.final_state) facts.push_back(rulelang::render_ground(f));
  json txs = json::array();
  for (const auto& x : t.transactions) {
    txs.push_back({{"id", x.id},
                   {"time", x.time},
                   {"sender", x.sender},
                   {"receiver", x.receiver},
                   {"amount", x.amount},
                   {"kind", x.kind}});
  }
  json as = json::array();
  for (const auto& a : t.assessments) {
    as.push_back({{"company", a.company},
                  {"country", a.country},
                  {"base", a.base},
                  {"rate", a.rate},
                  {"applied_reduction", a.applied_reduction ? json(*a.applied_reduction) : json(nullptr)},
                  {"reduction_kind", a.reduction_kind ? json(*a.reduction_kind) : json(nullptr)},
                  {"tax_due", a.tax_due}});
  }
  return json{{"id", t.id},           {"actions", actions}, {"final_state", facts}, {"transactions", txs},
              {"assessments", as},    {"p", t.p},           {"phi", t.phi},         {"utility", t.utility},
              {"complete", t.complete}};
}

std::optional<std::string> opt_string(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::string>();
}

Trajectory trajectory_from(const json& j) {
  Trajectory t;
  t.id = j.at("id").get<int>();
  for (const auto& a : j.at("actions")) {
    t.actions.push_back({a.at("name").get<std::string>(), a.at("legal_ref").get<std::string>(),
                         a.at("args").get<std::vector<std::string>>()});
  }
  for (const auto& f : j.at("final_state")) {
    auto g = rulelang::parse_ground(f.get<std::string>());
    if (!g) throw FormatError("malformed fact '" + f.get<std::string>() + "'");
    t.final_state.push_back(std::move(*g));
  }
  for (const auto& x : j.at("transactions")) {
    t.transactions.push_back({x.at("id").get<int>(), x.at("time").get<int>(), x.at("sender").get<std::string>(),
                              x.at("receiver").get<std::string>(), x.at("amount").get<double>(),
                              x.at("kind").get<std::string>()});
  }
  for (const auto& a : j.at("assessments")) {
    AssessmentRecord r;
    r.company = a.at("company").get<std::string>();
    r.country = a.at("country").get<std::string>();
    r.base = a.at("base").get<double>();
    r.rate = a.at("rate").get<double>();
    r.applied_reduction = opt_string(a.at("applied_reduction"));
    r.reduction_kind = opt_string(a.at("reduction_kind"));
    r.tax_due = a.at("tax_due").get<double>();
    t.assessments.push_back(std::move(r));
  }
  t.p = j.at("p").get<double>();
  t.phi = j.at("phi").get<double>();
  t.utility = j.at("utility").get<double>();
  t.complete = j.at("complete").get<bool>();

  const auto transfers = std::count_if(t.actions.begin(), t.actions.end(),
                                       [](const ActionStep& a) { return a.name == "transferIP"; });
  if (transfers > 1) throw FormatError("trajectory " + std::to_string(t.id) + " transfers IP more than once");
  return t;
}

}  // namespace

void write_jsonl(std::ostream& out, const TrajectorySet& set) {
  json header{{"format", kTrajectoryFormat},
              {"params", params_json(set.params)},
              {"ruleset_hash", set.ruleset_hash},
              {"scenario_hash", set.scenario_hash},
              {"seed", set.params.seed}};
  out << header.dump() << '\n';
  for (const auto& t : set.trajectories) out << trajectory_json(t).dump() << '\n';
}

std::string to_jsonl(const TrajectorySet& set) {
  std::ostringstream out;
  write_jsonl(out, set);
  return out.str();
}

TrajectorySet read_jsonl(std::istream& in) {
  TrajectorySet set;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("format", 0) != kTrajectoryFormat)
          throw FormatError("unsupported trajectory format (expected " + std::to_string(kTrajectoryFormat) + ")");
        const auto& p = j.at("params");
        set.params.beta = p.at("beta").get<double>();
        set.params.tau0 = p.at("tau0").get<double>();
        set.params.iterations = p.at("iterations").get<int>();
        set.params.expansions = p.at("expansions").get<int>();
        set.params.max_steps = p.at("max_steps").get<int>();
        set.params.cost = p.at("cost").get<double>();
        set.params.seed = j.at("seed").get<std::uint64_t>();
        set.ruleset_hash = j.at("ruleset_hash").get<std::string>();
        set.scenario_hash = j.at("scenario_hash").get<std::string>();
        have_header = true;
        continue;
      }
      set.trajectories.push_back(trajectory_from(j));
    } catch (const json::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError("missing header line");
  return set;
}

TrajectorySet parse_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_jsonl(in);
}

}  // namespace loophole
