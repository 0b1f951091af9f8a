// loophole: command-line pipeline check -> explore -> profile -> stats ->
// induce -> policy -> graph, plus formalize. Each stage reads and writes files
// in a run directory and records itself in <dir>/manifest.json.

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>

#include "loophole/analytics.hpp"
#include "loophole/explorer.hpp"
#include "loophole/formalizer.hpp"
#include "loophole/hashing.hpp"
#include "loophole/induction.hpp"
#include "loophole/kernel.hpp"
#include "loophole/policy.hpp"
#include "loophole/rulelang.hpp"
#include "loophole/trajectory_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace loophole;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kValidation = 1, kIo = 2, kStageOrder = 3 };

struct Failure : std::runtime_error {
  Failure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Failure(kIo, "cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << content)) throw Failure(kIo, "cannot write " + p.string());
}

// A stage input produced by an earlier stage.
std::string require_stage_input(const fs::path& dir, const std::string& name, const std::string& producer) {
  const auto p = dir / name;
  if (!fs::exists(p)) throw Failure(kStageOrder, p.string() + " is missing; run `loophole " + producer + "` first");
  return read_file(p);
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(fs::path dir, std::string stage) : dir_(std::move(dir)), stage_(std::move(stage)), started_(utc_now()) {}

  json& entry() { return entry_; }

  void save() {
    const auto path = dir_ / "manifest.json";
    json m;
    if (fs::exists(path)) {
      m = json::parse(read_file(path), nullptr, false);
      if (m.is_discarded() || !m.is_object()) m = json::object();
    }
    m["tool"] = "loophole";
    m["version"] = kVersion;
    if (!m.contains("stages")) m["stages"] = json::object();
    entry_["started"] = started_;
    entry_["finished"] = utc_now();
    m["stages"][stage_] = entry_;
    write_file(path, m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::string stage_;
  std::string started_;
  json entry_ = json::object();
};

template <class Doc>
Doc parse_or_fail(const rulelang::ParseResult<Doc>& r, const std::string& source) {
  for (const auto& d : r.diagnostics) std::cerr << rulelang::format_diagnostic(d, source) << "\n";
  if (!r.ok()) throw Failure(kValidation, source + ": " + std::to_string(r.error_count()) + " error(s)");
  return *r.document;
}

struct Inputs {
  rulelang::RuleSetDoc rules;
  rulelang::StateSpec state;
  kernel::Domain domain;
};

Inputs load_inputs(const std::string& rules_path, const std::string& state_path) {
  Inputs in;
  in.rules = parse_or_fail(rulelang::parse_ruleset(read_file(rules_path)), rules_path);
  in.state = parse_or_fail(rulelang::parse_state_spec(read_file(state_path)), state_path);
  try {
    in.domain = kernel::compile(in.rules, in.state);
  } catch (const kernel::CompileError& e) {
    throw Failure(kValidation, e.what());
  } catch (const kernel::ContractViolation& e) {
    throw Failure(kValidation, e.what());
  }
  return in;
}

TrajectorySet load_trajectories(const fs::path& dir) {
  const auto text = require_stage_input(dir, "trajectories.jsonl", "explore");
  try {
    return parse_jsonl(text);
  } catch (const FormatError& e) {
    throw Failure(kValidation, std::string("trajectories.jsonl: ") + e.what());
  }
}

json load_json(const fs::path& dir, const std::string& name, const std::string& producer) {
  auto j = json::parse(require_stage_input(dir, name, producer), nullptr, false);
  if (j.is_discarded()) throw Failure(kValidation, name + " is not valid JSON");
  return j;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure(kIo, "cannot create " + dir.string() + ": " + ec.message());
}

// --- stages ---------------------------------------------------------------

int cmd_check(const std::string& rules_path, const std::string& state_path) {
  const auto in = load_inputs(rules_path, state_path);
  std::cout << "ok: " << in.rules.action_rules.size() << " action rules, " << in.rules.reduction_rules.size()
            << " reduction rules, " << kernel::applicable_actions(in.domain.initial, in.domain).size()
            << " actions applicable initially\n";
  return kOk;
}

int cmd_explore(const std::string& rules_path, const std::string& state_path, const fs::path& out,
                SearchParams params) {
  if (auto bad = params.validate()) throw Failure(kValidation, *bad);
  const auto in = load_inputs(rules_path, state_path);
  ensure_dir(out);
  const auto rules_text = rulelang::render(in.rules);
  const auto state_text = rulelang::render(in.state);

  explorer::ExploreStats stats;
  auto set = explorer::explore(in.domain, params, &stats);
  set.ruleset_hash = sha256_hex(rules_text);
  set.scenario_hash = sha256_hex(state_text);

  Manifest manifest(out, "explore");
  write_file(out / "ruleset.lhl", rules_text);
  write_file(out / "scenario.lhl", state_text);
  write_file(out / "trajectories.jsonl", to_jsonl(set));

  std::size_t complete = 0;
  for (const auto& t : set.trajectories) complete += t.complete;
  auto& e = manifest.entry();
  e["inputs"] = {{"ruleset", rules_path}, {"scenario", state_path}};
  e["seed"] = params.seed;
  e["threads"] = params.threads;
  e["ruleset_hash"] = set.ruleset_hash;
  e["scenario_hash"] = set.scenario_hash;
  e["nodes"] = stats.nodes;
  e["trajectories"] = set.trajectories.size();
  e["complete"] = complete;
  manifest.save();
  std::cout << set.trajectories.size() << " trajectories (" << complete << " complete) from " << stats.nodes
            << " nodes\n";
  return kOk;
}

json segments_json(const std::vector<analytics::Segment>& segs, const analytics::UtilityProfile& prof,
                   double height, std::size_t distance) {
  json j;
  j["peak_height"] = height;
  j["min_distance"] = distance;
  j["profile_size"] = prof.values.size();
  json arr = json::array();
  for (const auto& s : segs) {
    arr.push_back({{"id", s.id},
                   {"begin", s.begin},
                   {"end", s.end},
                   {"size", s.size()},
                   {"utility_max", prof.values[s.begin]},
                   {"utility_min", prof.values[s.end - 1]},
                   {"boundary_slopes", s.boundary_slopes}});
  }
  j["segments"] = arr;
  return j;
}

std::vector<analytics::Segment> segments_from(const json& j) {
  std::vector<analytics::Segment> out;
  for (const auto& s : j.at("segments")) {
    out.push_back({s.at("id").get<int>(), s.at("begin").get<std::size_t>(), s.at("end").get<std::size_t>(),
                   s.at("boundary_slopes").get<std::vector<double>>()});
  }
  return out;
}

int cmd_profile(const fs::path& dir, std::optional<double> peak_height, std::size_t min_distance) {
  const auto set = load_trajectories(dir);
  const auto prof = analytics::utility_profile(set);
  const double h = peak_height.value_or(analytics::auto_peak_height(set.params.cost));
  const auto segs = analytics::detect_segments(prof.values, h, min_distance);
  Manifest manifest(dir, "profile");
  write_file(dir / "profile.csv", analytics::profile_csv(prof, segs));
  write_file(dir / "segments.json", segments_json(segs, prof, h, min_distance).dump(2) + "\n");
  manifest.entry()["peak_height"] = h;
  manifest.entry()["min_distance"] = min_distance;
  manifest.entry()["segments"] = segs.size();
  manifest.save();
  std::cout << prof.values.size() << " complete trajectories in " << segs.size() << " segments\n";
  return kOk;
}

int cmd_stats(const fs::path& dir) {
  const auto set = load_trajectories(dir);
  const auto segs = segments_from(load_json(dir, "segments.json", "profile"));
  const auto prof = analytics::utility_profile(set);
  std::optional<rulelang::RuleSetDoc> rules;
  if (fs::exists(dir / "ruleset.lhl")) {
    rules = parse_or_fail(rulelang::parse_ruleset(read_file(dir / "ruleset.lhl")), "ruleset.lhl");
  }
  const auto table = analytics::frequency_table(set, prof, segs, rules ? &*rules : nullptr);
  Manifest manifest(dir, "stats");
  write_file(dir / "stats.csv", analytics::stats_csv(table));
  manifest.entry()["rows"] = table.rows.size();
  manifest.entry()["segments"] = table.segment_count;
  manifest.save();
  std::cout << table.rows.size() << " references over " << table.segment_count << " segments\n";
  return kOk;
}

json metrics_json(const induction::Metrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn},
          {"accuracy", opt(m.accuracy)},
          {"precision", opt(m.precision)},
          {"specificity", opt(m.specificity)},
          {"sensitivity", opt(m.sensitivity)},
          {"f1", opt(m.f1)}};
}

induction::Metrics metrics_from_json(const json& j) {
  return induction::metrics_from(j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                                 j.at("tn").get<std::size_t>(), j.at("fn").get<std::size_t>());
}

int cmd_induce(const fs::path& dir, std::optional<double> u_plus, int max_literals) {
  const auto set = load_trajectories(dir);
  induction::InductionConfig config;
  config.max_literals = max_literals;
  if (auto bad = config.validate()) throw Failure(kValidation, *bad);
  if (!u_plus) {
    const auto segs = segments_from(load_json(dir, "segments.json", "profile"));
    if (segs.size() < 2) throw Failure(kValidation, "a single segment gives no threshold; pass --u-plus");
    const auto prof = analytics::utility_profile(set);
    u_plus = prof.values[segs[1].begin];
  }
  config.u_plus = u_plus;
  const auto labels = induction::label(set, *u_plus);
  const auto bg = induction::build_background(set, config);
  const auto h = induction::induce(labels, bg, config);
  const auto m = induction::evaluate(h, labels, bg);

  Manifest manifest(dir, "induce");
  write_file(dir / "hypothesis.lhl", induction::render_hypothesis(h));
  json j;
  j["u_plus"] = *u_plus;
  j["max_literals"] = max_literals;
  j["roles"] = json::array();
  for (const auto& [var, country] : config.roles) j["roles"].push_back({var, country});
  j["positives"] = labels.positives.size();
  j["negatives"] = labels.negatives.size();
  j["excluded"] = bg.excluded;
  j["metrics"] = metrics_json(m);
  j["clauses"] = json::array();
  for (const auto& c : h.clauses) {
    j["clauses"].push_back({{"body", rulelang::render_condition(c.body)}, {"metrics", metrics_json(c.metrics)}});
  }
  write_file(dir / "induction.json", j.dump(2) + "\n");
  manifest.entry()["u_plus"] = *u_plus;
  manifest.entry()["clauses"] = h.clauses.size();
  manifest.save();
  std::cout << h.clauses.size() << " clauses, accuracy " << m.accuracy.value_or(0.0) << ", F1 "
            << m.f1.value_or(0.0) << "\n";
  return kOk;
}

struct LoadedHypothesis {
  induction::InductionConfig config;
  induction::Hypothesis h;
  double u_plus = 0.0;
};

LoadedHypothesis load_hypothesis(const fs::path& dir) {
  const auto j = load_json(dir, "induction.json", "induce");
  LoadedHypothesis out;
  out.u_plus = j.at("u_plus").get<double>();
  out.config.roles.clear();
  for (const auto& r : j.at("roles")) out.config.roles.emplace_back(r.at(0).get<std::string>(), r.at(1).get<std::string>());
  for (const auto& [var, _] : out.config.roles) out.h.head_vars.push_back(var);
  for (const auto& c : j.at("clauses")) {
    const auto body = c.at("body").get<std::string>();
    auto parsed = rulelang::parse_condition(body, LiteralContext::state_fact);
    if (!parsed.ok()) throw Failure(kValidation, "induction.json: cannot parse clause body: " + body);
    out.h.clauses.push_back({*parsed.document, metrics_from_json(c.at("metrics"))});
  }
  return out;
}

int cmd_policy(const fs::path& dir, const std::string& welfare) {
  const auto kind = policy::welfare_from_name(welfare);
  if (!kind) throw Failure(kValidation, "unknown welfare evaluator: " + welfare);
  const auto set = load_trajectories(dir);
  const auto loaded = load_hypothesis(dir);
  const auto labels = induction::label(set, loaded.u_plus);
  const auto bg = induction::build_background(set, loaded.config);
  policy::WelfareConfig config{*kind, "welfare over the sampled run in " + dir.filename().string()};
  const auto report = policy::delta_restriction(set, loaded.h, labels, bg, config);
  Manifest manifest(dir, "policy");
  write_file(dir / "policy_report.json", policy::report_json(report));
  manifest.entry()["welfare"] = report.evaluator;
  manifest.entry()["verdict"] = policy::verdict_name(report.verdict);
  manifest.save();
  std::cout << "verdict: " << policy::verdict_name(report.verdict) << ", Delta(H) = "
            << (report.Delta_H ? rulelang::format_number(*report.Delta_H) : std::string("undefined")) << "\n";
  return kOk;
}

int cmd_graph(const fs::path& dir, int top_k) {
  if (top_k < 0) throw Failure(kValidation, "--top-k must be >= 0");
  const auto loaded = load_hypothesis(dir);
  const auto edges = induction::scheme_graph(loaded.h, static_cast<std::size_t>(top_k));
  Manifest manifest(dir, "graph");
  write_file(dir / "scheme.dot", induction::scheme_dot(edges));
  write_file(dir / "scheme.csv", induction::scheme_csv(edges));
  manifest.entry()["top_k"] = top_k;
  manifest.entry()["edges"] = edges.size();
  manifest.save();
  std::cout << edges.size() << " edges\n";
  return kOk;
}

int cmd_formalize(const std::string& kind_text, const std::string& text, const std::string& rules_path,
                  const std::string& backend_name, int max_attempts) {
  const auto kind = formalizer::kind_from_name(kind_text);
  if (!kind) throw Failure(kValidation, "unknown kind: " + kind_text);
  if (max_attempts < 1) throw Failure(kValidation, "--max-attempts must be >= 1");
  rulelang::RuleSetDoc rules;
  if (!rules_path.empty()) rules = parse_or_fail(rulelang::parse_ruleset(read_file(rules_path)), rules_path);

  std::unique_ptr<formalizer::Backend> backend;
  if (backend_name == "template") {
    backend = std::make_unique<formalizer::TemplateBackend>();
  } else if (backend_name == "remote") {
    auto config = formalizer::RemoteConfig::from_environment();
    if (!config) throw Failure(kValidation, "LOOPHOLE_FORMALIZER_URL is not set");
    backend = std::make_unique<formalizer::RemoteBackend>(*config);
  } else {
    throw Failure(kValidation, "unknown backend: " + backend_name);
  }

  formalizer::FormalizationRequest req{*kind, text, formalizer::context_summary(rules)};
  formalizer::FormalizationResult result;
  try {
    result = formalizer::formalize(req, *backend, max_attempts, rules);
  } catch (const formalizer::TransportError& e) {
    throw Failure(kIo, e.what());
  }
  std::cout << result.dsl_text;
  for (const auto& d : result.diagnostics) std::cerr << rulelang::format_diagnostic(d, "candidate") << "\n";
  std::cerr << (result.valid ? "valid" : "invalid") << " after " << result.attempts << " attempt(s)\n";
  return result.valid ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_pattern("%l: %v");
  CLI::App app{"Rule-based exploration of corporate tax planning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string rules_path;
  std::string state_path;
  std::string out_dir = "run";

  auto* check = app.add_subcommand("check", "Parse and validate a rule set and a scenario");
  check->add_option("ruleset", rules_path, "Rule set (.lhl)")->required();
  check->add_option("scenario", state_path, "Scenario (.lhl)")->required();

  SearchParams params;
  auto* explore = app.add_subcommand("explore", "Sample incorporation trajectories");
  explore->add_option("ruleset", rules_path, "Rule set (.lhl)")->required();
  explore->add_option("scenario", state_path, "Scenario (.lhl)")->required();
  explore->add_option("--out", out_dir, "Run directory")->capture_default_str();
  explore->add_option("--seed", params.seed, "Random seed")->capture_default_str();
  explore->add_option("--iterations", params.iterations, "Search iterations")->capture_default_str()->check(CLI::PositiveNumber);
  explore->add_option("--expansions", params.expansions, "Expansions per iteration")->capture_default_str()->check(CLI::PositiveNumber);
  explore->add_option("--beta", params.beta, "Exploration decay")->capture_default_str();
  explore->add_option("--tau0", params.tau0, "Initial temperature")->capture_default_str();
  explore->add_option("--max-steps", params.max_steps, "Maximum trajectory length")->capture_default_str();
  explore->add_option("--cost", params.cost, "Cost per action")->capture_default_str();
  explore->add_option("--threads", params.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  std::optional<double> peak_height;
  std::size_t min_distance = 100;
  auto* profile = app.add_subcommand("profile", "Utility profile and segments");
  profile->add_option("--out", out_dir, "Run directory")->capture_default_str();
  profile->add_option("--peak-height", peak_height, "Minimum slope peak (default 3.85 x cost)");
  profile->add_option("--min-distance", min_distance, "Minimum peak distance")->capture_default_str();

  auto* stats = app.add_subcommand("stats", "Legal reference frequencies per segment");
  stats->add_option("--out", out_dir, "Run directory")->capture_default_str();

  std::optional<double> u_plus;
  int max_literals = 7;
  auto* induce = app.add_subcommand("induce", "Learn a tax-scheme hypothesis");
  induce->add_option("--out", out_dir, "Run directory")->capture_default_str();
  induce->add_option("--u-plus", u_plus, "Utility threshold for positives (default: top segment boundary)");
  induce->add_option("--max-literals", max_literals, "Maximum clause length")->capture_default_str();

  std::string welfare = "mean_tax_collected";
  auto* policy_cmd = app.add_subcommand("policy", "Welfare effect of restricting the hypothesis");
  policy_cmd->add_option("--out", out_dir, "Run directory")->capture_default_str();
  policy_cmd->add_option("--welfare", welfare, "mean_tax | total_tax | mean_utilitarian")->capture_default_str();

  int top_k = 10;
  auto* graph = app.add_subcommand("graph", "Weighted scheme graph");
  graph->add_option("--out", out_dir, "Run directory")->capture_default_str();
  graph->add_option("--top-k", top_k, "Edges to keep")->capture_default_str();

  std::string kind = "initial_state";
  std::string text;
  std::string backend = "template";
  int max_attempts = 3;
  std::string context_rules;
  auto* formalize = app.add_subcommand("formalize", "Turn prose into DSL");
  formalize->add_option("--kind", kind, "initial_state | reduction_rule | action_rule")->capture_default_str();
  formalize->add_option("--text", text, "Natural-language input")->required();
  formalize->add_option("--ruleset", context_rules, "Active rule set to merge into");
  formalize->add_option("--backend", backend, "template | remote")->capture_default_str();
  formalize->add_option("--max-attempts", max_attempts, "Attempts before giving up")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    const fs::path dir(out_dir);
    if (*check) return cmd_check(rules_path, state_path);
    if (*explore) return cmd_explore(rules_path, state_path, dir, params);
    if (*profile) return cmd_profile(dir, peak_height, min_distance);
    if (*stats) return cmd_stats(dir);
    if (*induce) return cmd_induce(dir, u_plus, max_literals);
    if (*policy_cmd) return cmd_policy(dir, welfare);
    if (*graph) return cmd_graph(dir, top_k);
    if (*formalize) return cmd_formalize(kind, text, context_rules, backend, max_attempts);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.what() << "\n";
    return f.code;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed stage file: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
