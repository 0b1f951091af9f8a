// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "loophole/analytics.hpp"
#include "loophole/explorer.hpp"
#include "loophole/induction.hpp"
#include "loophole/policy.hpp"
#include "loophole/trajectory_io.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace loophole;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << (detail.tellp() > 0 ? "; " : "") << "failed: " << what;
    }
  }
  template <class T>
  void note(const std::string& key, const T& value) {
    detail << (detail.tellp() > 0 ? ", " : "") << key << "=" << value;
  }
};

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LOOPHOLE_CLI) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string corpus(const std::string& name) { return test::source_path("corpus/" + name); }

json read_json(const fs::path& p) { return json::parse(test::slurp(p.string())); }

// Shared output directory of the full-budget pipeline run.
struct FullRun {
  fs::path dir;
  fs::path log;
  bool explored = false;
  double explore_seconds = 0.0;
  double pipeline_seconds = 0.0;
  int profile_status = -1;
  int stats_status = -1;
  int induce_status = -1;
  int graph_status = -1;
};

FullRun full_run() {
  FullRun r;
  r.dir = fs::temp_directory_path() / ("loophole-acceptance-" + std::to_string(std::random_device{}()));
  fs::create_directories(r.dir);
  r.log = r.dir / "cli.log";
  const auto out = " --out " + r.dir.string();
  const auto t0 = std::chrono::steady_clock::now();
  r.explored = run_cli("explore " + corpus("table1.lhl") + " " + corpus("scenario.lhl") +
                           " --beta 0.01 --iterations 50 --expansions 1000 --seed 7" + out,
                       r.log) == 0;
  const auto t1 = std::chrono::steady_clock::now();
  if (r.explored) {
    r.profile_status = run_cli("profile" + out, r.log);
    r.stats_status = run_cli("stats" + out, r.log);
  }
  const auto t2 = std::chrono::steady_clock::now();
  if (r.explored) {
    r.induce_status = run_cli("induce --max-literals 7" + out, r.log);
    r.graph_status = run_cli("graph --top-k 10" + out, r.log);
  }
  r.explore_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.pipeline_seconds = std::chrono::duration<double>(t2 - t0).count();
  return r;
}

void criterion_1(const FullRun& run, Outcome& o) {
  o.require(run.explored, "explore exited nonzero");
  o.require(run.profile_status == 0, "profile exited nonzero");
  if (!run.explored || run.profile_status != 0) return;
  const auto set = parse_jsonl(test::slurp((run.dir / "trajectories.jsonl").string()));
  std::size_t complete = 0;
  for (const auto& t : set.trajectories) complete += t.complete;
  const auto profile = analytics::utility_profile(set);
  const bool varies = !profile.values.empty() && profile.values.front() != profile.values.back();
  const auto segments = read_json(run.dir / "segments.json").at("segments").size();
  o.note("complete", complete);
  o.note("segments", segments);
  o.note("seconds", std::round(run.pipeline_seconds * 10) / 10);
  o.require(complete >= 50, "fewer than 50 complete trajectories");
  o.require(varies, "constant utility profile");
  o.require(segments >= 2, "fewer than 2 segments");
  o.require(run.pipeline_seconds <= 300.0, "slower than 5 minutes");
}

void criterion_2(const FullRun& run, Outcome& o) {
  o.require(run.stats_status == 0, "stats exited nonzero");
  if (run.stats_status != 0) return;
  std::istringstream in(test::slurp((run.dir / "stats.csv").string()));
  std::string line;
  std::getline(in, line);
  std::vector<double> dutch;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
    if (cells.size() < 3 || (cells[0] != "DCITA1969" && cells[0] != "A8cNLctl1969")) continue;
    dutch.resize(cells.size() - 2, 0.0);
    for (std::size_t i = 2; i < cells.size(); ++i) dutch[i - 2] += std::stod(cells[i]);
  }
  o.require(dutch.size() >= 2, "no Dutch rows over two segments");
  if (dutch.size() < 2) return;
  o.note("top", dutch.front());
  o.note("bottom", dutch.back());
  o.require(dutch.front() > dutch.back(), "top segment does not use the Dutch provisions more often");
}

void criterion_3(const FullRun& run, Outcome& o) {
  o.require(run.induce_status == 0, "induce exited nonzero");
  o.require(run.graph_status == 0, "graph exited nonzero");
  if (run.induce_status != 0 || run.graph_status != 0) return;
  const auto ind = read_json(run.dir / "induction.json");
  const auto& m = ind.at("metrics");
  const double acc = m.at("accuracy").is_null() ? 0.0 : m.at("accuracy").get<double>();
  const double f1 = m.at("f1").is_null() ? 0.0 : m.at("f1").get<double>();
  o.note("u_plus", ind.at("u_plus").get<double>());
  o.note("accuracy", acc);
  o.note("f1", f1);
  o.require(acc >= 0.95, "accuracy below 0.95");
  o.require(f1 >= 0.70, "F1 below 0.70");
  std::istringstream in(test::slurp((run.dir / "scheme.csv").string()));
  std::string line;
  bool managed = false, rents = false;
  while (std::getline(in, line)) {
    managed |= line.rfind("A,bermuda,managed,", 0) == 0;
    rents |= line.rfind("A,B,rents,", 0) == 0;
  }
  o.require(managed, "no edge A -> bermuda (managed)");
  o.require(rents, "no edge A -> B (rents)");
}

void criterion_4(Outcome& o) {
  const auto d = test::domain(test::kToyRules, test::kToyState3);
  const auto r = test::canonicality_check(d, 6, d.config.cost_coefficient);
  o.note("paths", r.paths);
  o.note("groups", r.groups);
  o.note("violations", r.violations);
  o.require(r.complete_paths > 0, "no complete path");
  o.require(r.violations == 0, "a shortest path is not the most profitable");
}

void criterion_5(Outcome& o) {
  std::mt19937 rng(77);
  int runs = 0, identity_checks = 0;
  for (int round = 0; round < 40; ++round) {
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
    if (!(m.sensitivity == 1.0 && m.specificity == 1.0)) {
      o.require(false, "learned hypothesis is not perfect");
      continue;
    }
    for (auto kind : {policy::WelfareKind::mean_tax_collected, policy::WelfareKind::total_tax_collected}) {
      const auto r = policy::delta_restriction(ex.set, ex.hypothesis, ex.labels, ex.background, {kind, ""});
      if (!r.Delta_H || !r.delta_H_pos || !r.delta_H_neg || !r.delta_E) {
        o.require(false, "undefined inefficiency");
        continue;
      }
      ++identity_checks;
      o.require(*r.Delta_H == *r.delta_H_pos - *r.delta_H_neg, "identity does not hold exactly");
      if (*r.delta_E > 0) {
        ++runs;
        o.require(*r.Delta_H > 0, "restriction does not help");
      }
    }
  }
  o.note("identity_checks", identity_checks);
  o.note("positive_delta_runs", runs);
  o.require(runs >= 10, "too few runs with positive inefficiency");
}

void criterion_6(Outcome& o) {
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
    std::set<std::pair<oracle::FinalState, std::size_t>> got;
    for (const auto& t : set.trajectories) got.emplace(t.final_state, t.length());
    o.require(stats.nodes == expected.states, "reachable state count differs from BFS");
    o.require(got == expected.recorded, "recorded states differ from BFS");
    o.note("bfs_states_" + std::to_string(max_steps), expected.states);
  }
  std::mt19937 rng(5);
  SearchParams params;
  double worst = 0.0;
  for (int round = 0; round < 500; ++round) {
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
    const auto want = oracle::naive_distribution(depths, utils, t, params.beta, params.tau0);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  o.note("max_softmax_error", worst);
  o.require(worst <= 1e-10, "selection distribution differs from direct softmax");
  for (int t = 0; t <= 200; ++t) {
    o.require(explorer::alpha(t, 0.01) == 1.0 / (1.0 + 0.01 * t), "alpha_" + std::to_string(t));
  }
  o.require(explorer::alpha(100, 0.01) == 0.5, "alpha_100 != 0.5");
}

void criterion_7(Outcome& o) {
  const auto d = test::domain(oracle::kEconomyRules, oracle::kEconomyState);
  std::mt19937 rng(99);
  std::size_t edges = 0, mismatches = 0;
  for (int round = 0; round < 2000; ++round) mismatches += oracle::royalty_mismatches(oracle::random_acyclic(d, rng), d, &edges);
  o.note("graphs", 2000);
  o.note("edges", edges);
  o.require(mismatches == 0, std::to_string(mismatches) + " royalties differ from the fixed point");

  oracle::Builder b{d, {}};
  b.company("p", "a").owns("p", "ip1").company("c1", "a").company("c2", "b");
  b.rents("p", "c1", "ip1").rents("c1", "c2", "ip1");
  const auto s = b.state();
  const auto royalties = economy::royalty_transactions(s, economy::commercial_transactions(s, d), d);
  double first = -1, second = -1;
  for (const auto& t : royalties) {
    if (t.sender == b.id("c2") && t.receiver == b.id("c1")) first = t.amount;
    if (t.sender == b.id("c1") && t.receiver == b.id("p")) second = t.amount;
  }
  o.note("chain", std::to_string(first) + "/" + std::to_string(second));
  o.require(std::abs(first - 27.0) < 1e-9, "first link is not 27");
  o.require(std::abs(second - 114.3) < 1e-9, "second link is not 114.3");
}

void criterion_8(Outcome& o) {
  const auto root = fs::temp_directory_path() / ("loophole-determinism-" + std::to_string(std::random_device{}()));
  const auto log = root / "cli.log";
  fs::create_directories(root);
  const std::string base = "explore " + corpus("table1.lhl") + " " + corpus("scenario.lhl") +
                           " --iterations 15 --expansions 80 --seed 7";
  std::vector<std::string> outputs;
  for (int threads : {1, 2, 4}) {
    const auto dir = root / ("t" + std::to_string(threads));
    const int rc = run_cli(base + " --threads " + std::to_string(threads) + " --out " + dir.string(), log);
    o.require(rc == 0, "explore with " + std::to_string(threads) + " threads exited nonzero");
    if (rc == 0) outputs.push_back(test::slurp((dir / "trajectories.jsonl").string()));
  }
  fs::remove_all(root);
  bool identical = outputs.size() == 3 && outputs[0] == outputs[1] && outputs[0] == outputs[2];
  o.note("bytes", outputs.empty() ? 0 : outputs[0].size());
  o.require(identical, "trajectories.jsonl differs across thread counts");
  o.require(!outputs.empty() && std::count(outputs[0].begin(), outputs[0].end(), '\n') > 5, "run is trivially small");

  const auto rules_text = test::slurp(corpus("table1.lhl"));
  const auto rules = test::ruleset(rules_text);
  const auto rendered = rulelang::render(rules);
  const auto again = rulelang::parse_ruleset(rendered);
  o.require(again.ok() && *again.document == rules, "ruleset does not survive render and parse");
  o.require(again.ok() && rulelang::render(*again.document) == rendered, "ruleset rendering is not a fixed point");
  const auto spec = test::state(test::slurp(corpus("scenario.lhl")));
  const auto spec_text = rulelang::render(spec);
  const auto spec_again = rulelang::parse_state_spec(spec_text);
  o.require(spec_again.ok() && rulelang::render(*spec_again.document) == spec_text,
            "scenario does not survive render and parse");
  if (!outputs.empty()) {
    const auto set = parse_jsonl(outputs[0]);
    o.require(to_jsonl(set) == outputs[0], "trajectory file does not survive parse and write");
  }
}

void criterion_9(Outcome& o) {
  std::mt19937 rng(2024);
  for (int round = 0; round < 20; ++round) {
    std::uniform_int_distribution<int> count(0, 12);
    const std::size_t tp = count(rng), fp = count(rng), tn = count(rng), fn = count(rng) + 1;
    std::vector<std::pair<bool, bool>> rows;  // (positive, covered)
    rows.insert(rows.end(), tp, {true, true});
    rows.insert(rows.end(), fp, {false, true});
    rows.insert(rows.end(), tn, {false, false});
    rows.insert(rows.end(), fn, {true, false});
    std::shuffle(rows.begin(), rows.end(), rng);
    std::vector<bool> positive, covered;
    for (const auto& [p, c] : rows) {
      positive.push_back(p);
      covered.push_back(c);
    }
    const auto ex = test::synthetic_examples(positive, covered, std::vector<double>(rows.size(), 1.0));
    const auto m = induction::evaluate(ex.hypothesis, ex.labels, ex.background);
    const auto tag = "config " + std::to_string(round);
    o.require(m.tp == tp && m.fp == fp && m.tn == tn && m.fn == fn, tag + " counts");
    const double n = static_cast<double>(rows.size());
    auto ratio = [](std::size_t a, std::size_t b) { return static_cast<double>(a) / static_cast<double>(b); };
    o.require(m.accuracy == static_cast<double>(tp + tn) / n, tag + " accuracy");
    o.require(m.sensitivity == ratio(tp, tp + fn), tag + " sensitivity");
    o.require(tp + fp ? m.precision == ratio(tp, tp + fp) : !m.precision, tag + " precision");
    o.require(tn + fp ? m.specificity == ratio(tn, tn + fp) : !m.specificity, tag + " specificity");
    o.require(m.f1 == ratio(2 * tp, 2 * tp + fp + fn), tag + " f1");
  }
  o.note("configs", 20);
}

}  // namespace

int main() {
  bool all = true;
  auto report = [&](int id, const std::string& name, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all &= o.pass;
    std::printf("%s %d %s (%s) [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.str().c_str(), secs);
    std::fflush(stdout);
  };

  const auto run = full_run();
  report(1, "end-to-end discovery", [&](Outcome& o) { criterion_1(run, o); });
  report(2, "Dutch conduit signal", [&](Outcome& o) { criterion_2(run, o); });
  report(3, "clause recovery and scheme graph", [&](Outcome& o) { criterion_3(run, o); });
  report(4, "canonical plans on the toy", criterion_4);
  report(5, "restriction by a perfect hypothesis", criterion_5);
  report(6, "search against breadth-first enumeration", criterion_6);
  report(7, "royalty cascade fixed point", criterion_7);
  report(8, "determinism and round trips", criterion_8);
  report(9, "confusion arithmetic", criterion_9);
  if (all) {
    std::error_code ec;
    fs::remove_all(run.dir, ec);
  } else {
    std::printf("pipeline output kept in %s\n", run.dir.string().c_str());
  }
  return all ? 0 : 1;
}
