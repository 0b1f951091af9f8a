#include "loophole/formalizer.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <json.hpp>
#include <regex>
#include <set>

namespace loophole::formalizer {

using rulelang::Diagnostic;
using rulelang::Severity;

std::string_view kind_name(RequestKind k) {
  switch (k) {
    case RequestKind::initial_state: return "initial_state";
    case RequestKind::reduction_rule: return "reduction_rule";
    case RequestKind::action_rule: return "action_rule";
  }
  return "initial_state";
}

std::optional<RequestKind> kind_from_name(std::string_view name) {
  for (auto k : {RequestKind::initial_state, RequestKind::reduction_rule, RequestKind::action_rule}) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

// Sentences end at '.' or ';' followed by whitespace or the end, or at a newline.
std::vector<std::string> sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool end = c == '\n' || ((c == '.' || c == ';') && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))));
    if (end) {
      if (auto t = trim(cur); !t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (auto t = trim(cur); !t.empty()) out.push_back(t);
  return out;
}

const auto kIcase = std::regex::icase;

std::optional<std::string> find(const std::string& s, const std::string& pattern) {
  std::smatch m;
  if (std::regex_search(s, m, std::regex(pattern, kIcase))) return m[1].str();
  return std::nullopt;
}

std::string ref_or(const std::string& sentence, const std::string& fallback) {
  if (auto r = find(sentence, R"re(\bunder\s+"?([\w/\-]+)"?)re")) return *r;
  return fallback;
}

std::string unrecognized(const std::string& sentence) { return "unrecognized \"" + sentence + "\".\n"; }

std::string state_sentence(const std::string& s) {
  std::smatch m;
  if (std::regex_search(s, m, std::regex(R"(^company\s+(\w+)\s+in\s+(\w+)(.*)$)", kIcase))) {
    const std::string c = lower(m[1]);
    const std::string country = lower(m[2]);
    const std::string tail = m[3];
    std::string out = "company " + c + ".\n";
    std::string facts = "fact based(" + c + ", " + country + ").\n";
    if (auto ip = find(tail, R"(\bowning\s+(\w+))")) {
      out += "ip " + *ip + ".\n";
      facts += "fact ownsIP(" + c + ", " + *ip + ").\n";
    }
    if (auto seat = find(tail, R"(\bmanaged\s+from\s+(\w+))")) facts += "fact managed(" + c + ", " + lower(*seat) + ").\n";
    if (auto parent = find(tail, R"(\b(?:subsidiary|child)\s+of\s+(\w+))")) {
      facts += "fact isChildOf(" + c + ", " + lower(*parent) + ").\n";
    }
    return out + facts;
  }
  if (std::regex_search(s, m, std::regex(R"(^(\w+)\s+(?:owns|holds)\s+(\w+)$)", kIcase))) {
    return "ip " + m[2].str() + ".\nfact ownsIP(" + lower(m[1]) + ", " + m[2].str() + ").\n";
  }
  return unrecognized(s);
}

std::string reduction_sentence(const std::string& s) {
  std::smatch m;
  const std::string ref_pat = R"((?:\s+under\s+\S+)?$)";
  if (std::regex_search(s, m, std::regex(R"(^rate\s+([0-9]*\.?[0-9]+)\s+for\s+royalties\s+from\s+(\w+)\s+to\s+(\w+))" + ref_pat, kIcase))) {
    const std::string from = lower(m[2]), to = lower(m[3]);
    return "reduction \"" + ref_or(s, "user-rate-" + from + "-" + to) + "\" kind exemption {\n" +
           "  when: resident(Self, " + to + "), royalty(P, Self), resident(P, " + from + ");\n" +
           "  new_base: MatchedIn;\n  new_rate: " + m[1].str() + ";\n}\n";
  }
  if (std::regex_search(s, m, std::regex(R"(^deduct\s+royalties\s+paid\s+from\s+(\w+)\s+to\s+(\w+))" + ref_pat, kIcase))) {
    const std::string from = lower(m[1]), to = lower(m[2]);
    return "reduction \"" + ref_or(s, "user-deduct-" + from + "-" + to) + "\" kind deductible {\n" +
           "  when: resident(Self, " + from + "), royalty(Self, R), resident(R, " + to + ");\n" +
           "  new_base: Base - MatchedOut;\n  new_rate: Rate;\n}\n";
  }
  if (std::regex_search(s, m, std::regex(R"(^exempt\s+royalties\s+received\s+(?:in|by)\s+(\w+)\s+from\s+(\w+))" + ref_pat, kIcase))) {
    const std::string to = lower(m[1]), from = lower(m[2]);
    return "reduction \"" + ref_or(s, "user-exempt-" + to + "-" + from) + "\" kind exemption {\n" +
           "  when: resident(Self, " + to + "), royalty(P, Self), resident(P, " + from + ");\n" +
           "  new_base: Base - MatchedIn;\n  new_rate: Rate;\n}\n";
  }
  return unrecognized(s);
}

std::string action_sentence(const std::string& s) {
  std::smatch m;
  const std::string ref_pat = R"((?:\s+under\s+\S+)?$)";
  if (std::regex_search(s, m, std::regex(R"(^allow\s+incorporation\s+in\s+(\w+))" + ref_pat, kIcase))) {
    const std::string c = lower(m[1]);
    return "action addChild(Parent, Child, Country) ref \"" + ref_or(s, "user-incorp-" + c) + "\" {\n" +
           "  pre: exists(Parent), fresh(Child), Country = " + c + ", not based(_, Country);\n" +
           "  eff: exists(Child), based(Child, Country), isChildOf(Child, Parent);\n}\n";
  }
  if (std::regex_search(s, m, std::regex(R"(^allow\s+licensing)" + ref_pat, kIcase))) {
    return "action rentIP(Licensor, Licensee, IP) ref \"" + ref_or(s, "user-license") + "\" {\n" +
           "  pre: access(Licensor, IP), exists(Licensee), not access(Licensee, IP);\n" +
           "  eff: rentsIP(Licensor, Licensee, IP);\n}\n";
  }
  return unrecognized(s);
}

Diagnostic error(std::string message) { return {Severity::error, std::move(message), {}}; }

std::set<std::string> refs_of(const rulelang::RuleSetDoc& doc) {
  std::set<std::string> refs;
  for (const auto& r : doc.action_rules) refs.insert(r.legal_ref);
  for (const auto& r : doc.reduction_rules) refs.insert(r.legal_ref);
  return refs;
}

}  // namespace

std::string TemplateBackend::propose(const FormalizationRequest& request, const std::vector<std::string>&) {
  std::string out;
  for (const auto& s : sentences(request.natural_text)) {
    switch (request.kind) {
      case RequestKind::initial_state: out += state_sentence(s); break;
      case RequestKind::reduction_rule: out += reduction_sentence(s); break;
      case RequestKind::action_rule: out += action_sentence(s); break;
    }
  }
  return out;
}

std::optional<RemoteConfig> RemoteConfig::from_environment() {
  const char* url = std::getenv("LOOPHOLE_FORMALIZER_URL");
  if (!url || !*url) return std::nullopt;
  RemoteConfig c;
  c.url = url;
  if (const char* token = std::getenv("LOOPHOLE_FORMALIZER_TOKEN")) c.token = token;
  if (const char* timeout = std::getenv("LOOPHOLE_FORMALIZER_TIMEOUT")) {
    const int t = std::atoi(timeout);
    if (t > 0) c.timeout_seconds = t;
  }
  return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  std::smatch m;
  if (!std::regex_match(config_.url, m, std::regex(R"(^(https?://[^/]+)(/.*)?$)"))) {
    throw std::invalid_argument("formalizer URL must look like http(s)://host[:port]/path: " + config_.url);
  }
  origin_ = m[1];
  path_ = m[2].matched ? m[2].str() : "/";
}

std::string RemoteBackend::propose(const FormalizationRequest& request,
                                   const std::vector<std::string>& prior_diagnostics) {
  nlohmann::ordered_json body;
  body["version"] = kProtocolVersion;
  body["kind"] = kind_name(request.kind);
  body["natural_text"] = request.natural_text;
  body["context"] = request.context;
  body["prior_diagnostics"] = prior_diagnostics;

  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("formalizer endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("formalizer endpoint returned HTTP " + std::to_string(res->status));
  }
  const auto reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("dsl_text") || !reply["dsl_text"].is_string()) {
    throw TransportError("formalizer reply lacks a dsl_text string");
  }
  return reply["dsl_text"].get<std::string>();
}

std::string context_summary(const rulelang::RuleSetDoc& ruleset) {
  std::string out = "regions:";
  for (const auto& r : ruleset.regions) {
    out += " " + r.name + "(";
    for (std::size_t i = 0; i < r.members.size(); ++i) out += (i ? ", " : "") + r.members[i];
    out += ")";
  }
  out += "\nrates:";
  for (const auto& [country, rate] : ruleset.rate_table) out += " " + country + "=" + rulelang::format_number(rate);
  out += "\nrefs:";
  for (const auto& ref : refs_of(ruleset)) out += " " + ref;
  return out + "\n";
}

rulelang::RuleSetDoc merge(const rulelang::RuleSetDoc& ruleset, const rulelang::RuleSetDoc& addition) {
  auto out = ruleset;
  out.action_rules.insert(out.action_rules.end(), addition.action_rules.begin(), addition.action_rules.end());
  out.reduction_rules.insert(out.reduction_rules.end(), addition.reduction_rules.begin(),
                             addition.reduction_rules.end());
  return out;
}

std::vector<Diagnostic> validate_candidate(std::string_view text, RequestKind kind,
                                           const rulelang::RuleSetDoc& ruleset) {
  std::vector<Diagnostic> out;
  if (kind == RequestKind::initial_state) {
    auto state = rulelang::parse_state_spec(text);
    if (!state.ok()) {
      if (auto rules = rulelang::parse_ruleset(text); rules.ok()) {
        return {error("kind mismatch: expected an initial state, got rule declarations")};
      }
      return state.diagnostics;
    }
    if (state.document->facts.empty() && state.document->declared_companies.empty()) {
      return {error("candidate declares nothing")};
    }
    if (!ruleset.rate_table.empty()) {
      for (const auto& f : state.document->facts) {
        if ((f.predicate == "based" || f.predicate == "managed") && f.args.size() == 2 &&
            !ruleset.rate_table.count(f.args[1])) {
          out.push_back(error("no tax rate for country '" + f.args[1] + "' in " + rulelang::render_ground(f)));
        }
      }
    }
    return out;
  }

  auto rules = rulelang::parse_ruleset(text);
  if (!rules.ok()) {
    if (auto state = rulelang::parse_state_spec(text); state.ok() && !trim(std::string(text)).empty()) {
      return {error("kind mismatch: expected " + std::string(kind_name(kind)) + ", got state declarations")};
    }
    return rules.diagnostics;
  }
  const auto& doc = *rules.document;
  const bool want_reduction = kind == RequestKind::reduction_rule;
  if (!doc.regions.empty() || !doc.rate_table.empty() || (want_reduction && !doc.action_rules.empty()) ||
      (!want_reduction && !doc.reduction_rules.empty())) {
    out.push_back(error("kind mismatch: only " + std::string(want_reduction ? "reduction" : "action") +
                        " rules are accepted"));
  }
  if ((want_reduction ? doc.reduction_rules.size() : doc.action_rules.size()) == 0) {
    out.push_back(error("kind mismatch: candidate contains no " + std::string(want_reduction ? "reduction" : "action") +
                        " rule"));
  }
  const auto existing = refs_of(ruleset);
  for (const auto& ref : refs_of(doc)) {
    if (existing.count(ref)) out.push_back(error("conflict: legal reference \"" + ref + "\" is already in the rule set"));
  }
  if (!out.empty()) return out;

  const auto merged = merge(ruleset, doc);
  auto reparsed = rulelang::parse_ruleset(rulelang::render(merged));
  if (!reparsed.ok() || !(*reparsed.document == merged)) {
    out.push_back(error("merged rule set does not round-trip through the parser"));
    for (auto& d : reparsed.diagnostics) out.push_back(d);
  }
  return out;
}

FormalizationResult formalize(const FormalizationRequest& request, Backend& backend, int max_attempts,
                              const rulelang::RuleSetDoc& ruleset) {
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  FormalizationResult result;
  std::vector<std::string> prior;
  while (result.attempts < max_attempts) {
    ++result.attempts;
    result.dsl_text = backend.propose(request, prior);
    result.diagnostics = validate_candidate(result.dsl_text, request.kind, ruleset);
    result.valid = result.diagnostics.empty();
    if (result.valid) break;
    for (const auto& d : result.diagnostics) prior.push_back(rulelang::format_diagnostic(d, "candidate"));
  }
  return result;
}

}  // namespace loophole::formalizer
