#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "personaopt/backend.hpp"

namespace personaopt {

// A deterministic offline backend driven by an ordered list of rules.
//
// Script JSON:
//
//   {
//     "seed": 7,
//     "rules": [
//       {"contains": "curious", "respond": "A"},
//       {"regex": "([A-D])\\. [^\\n]*\\(bold\\)", "field": "user", "respond": "{{1}}"},
//       {"model": "mockB", "contains": "assistant with", "error": "transport"},
//       {"always": true, "respond_one_of": ["A", "B", "C", "D"]}
//     ],
//     "default": "A"
//   }
//
// Matchers: "contains", "equals", "regex", "always". "field" selects the text
// matched against: "user", "system" or "any" (system + "\n" + user; default).
// "model" restricts a rule to one model id. "requires" holds counter values
// that must match the current state; "increment" names counters bumped when
// the rule fires.
//
// Response templates expand {{user}}, {{system}}, {{model}}, {{hash}} (eight
// hex digits of the request hash), {{state.NAME}}, regex captures {{1}}..{{9}}
// and {{choice:X|Y|Z}}. Random picks are seeded by (script seed, request
// hash, rule index), so they do not depend on call order. Counter state does
// depend on call order; scripts that use it are reproducible only when
// requests are issued sequentially.
struct MockRule {
  enum class Matcher { contains, equals, regex, always };
  enum class Field { user, system, any };

  Matcher matcher = Matcher::always;
  std::string pattern;
  Field field = Field::any;
  std::optional<std::string> model;
  std::map<std::string, std::int64_t> requires_state;
  std::vector<std::string> increment;

  std::string respond;
  std::vector<std::string> respond_one_of;
  std::optional<ErrorKind> error;
};

struct MockScript {
  std::vector<MockRule> rules;
  std::string default_response;
  std::optional<ErrorKind> default_error;
  std::uint64_t seed = 0;

  static MockScript from_json(const json& j);
  static MockScript load(const std::string& path);
};

class ScriptedBackend final : public ChatBackend {
 public:
  ScriptedBackend(std::string name, MockScript script);

  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return name_; }

  std::map<std::string, std::int64_t> state() const;

 private:
  std::string name_;
  MockScript script_;
  std::vector<std::optional<std::regex>> compiled_;
  mutable std::mutex mutex_;
  std::map<std::string, std::int64_t> state_;
};

// Wraps a callable; used for programmatic scripted responders in tests and
// fixtures. The callable may throw personaopt::Error to simulate failures.
class FunctionBackend final : public ChatBackend {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  FunctionBackend(std::string name, Responder responder);

  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return name_; }

 private:
  std::string name_;
  Responder responder_;
};

// Deterministic pseudo-random value in [0, 1) for a request, for responders
// that need per-request randomness independent of call order.
double request_uniform(const ChatRequest& request, std::uint64_t salt = 0);

}  // namespace personaopt
