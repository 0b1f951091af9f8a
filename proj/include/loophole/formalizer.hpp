#pragma once

// Natural-language to DSL ingestion. A backend proposes candidate source
// text; every candidate is validated against the active rule set and the
// request is retried with the diagnostics until it passes or attempts run out.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "loophole/rulelang.hpp"

namespace loophole::formalizer {

enum class RequestKind { initial_state, reduction_rule, action_rule };

std::string_view kind_name(RequestKind k);
std::optional<RequestKind> kind_from_name(std::string_view name);

struct FormalizationRequest {
  RequestKind kind = RequestKind::initial_state;
  std::string natural_text;
  std::string context;  // see context_summary
};

struct FormalizationResult {
  std::string dsl_text;
  bool valid = false;
  std::vector<rulelang::Diagnostic> diagnostics;
  int attempts = 0;
};

// The backend could not be reached or answered outside the protocol.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  // prior_diagnostics: rendered diagnostics of earlier attempts, oldest first.
  virtual std::string propose(const FormalizationRequest& request,
                              const std::vector<std::string>& prior_diagnostics) = 0;
};

// Deterministic pattern backend; the vocabulary is listed in docs/formalizer.md.
// Sentences it cannot read come back as `unrecognized` lines, which never parse.
class TemplateBackend final : public Backend {
 public:
  std::string name() const override { return "template"; }
  std::string propose(const FormalizationRequest& request, const std::vector<std::string>& prior_diagnostics) override;
};

struct RemoteConfig {
  std::string url;  // http(s)://host[:port]/path
  std::string token;
  int timeout_seconds = 30;

  // LOOPHOLE_FORMALIZER_URL, LOOPHOLE_FORMALIZER_TOKEN and
  // LOOPHOLE_FORMALIZER_TIMEOUT; nullopt when the URL is unset.
  static std::optional<RemoteConfig> from_environment();
};

inline constexpr int kProtocolVersion = 1;

// POSTs {version, kind, natural_text, context, prior_diagnostics} as JSON and
// expects {dsl_text}. Throws TransportError on connection failures, non-2xx
// statuses and malformed replies.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  std::string name() const override { return "remote"; }
  std::string propose(const FormalizationRequest& request, const std::vector<std::string>& prior_diagnostics) override;

 private:
  RemoteConfig config_;
  std::string origin_;
  std::string path_;
};

// Regions, rates and the legal references in use, one line each.
std::string context_summary(const rulelang::RuleSetDoc& ruleset);

// Empty iff `text` parses as `kind` and merges into `ruleset`: new rules must
// use legal references not yet present, and state facts must name countries
// with a tax rate.
std::vector<rulelang::Diagnostic> validate_candidate(std::string_view text, RequestKind kind,
                                                     const rulelang::RuleSetDoc& ruleset);

// Throws std::invalid_argument if max_attempts < 1; TransportError passes through.
FormalizationResult formalize(const FormalizationRequest& request, Backend& backend, int max_attempts,
                              const rulelang::RuleSetDoc& ruleset);

// The rule set with the rules of a valid candidate appended.
rulelang::RuleSetDoc merge(const rulelang::RuleSetDoc& ruleset, const rulelang::RuleSetDoc& addition);

}  // namespace loophole::formalizer
