#include "personaopt/mock_backend.hpp"

#include "personaopt/rng.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace {

ErrorKind parse_error_kind(const std::string& text) {
  static const std::map<std::string, ErrorKind> kinds = {
      {"transport", ErrorKind::transport}, {"config", ErrorKind::config},
      {"integrity", ErrorKind::integrity}, {"data", ErrorKind::data},
      {"format", ErrorKind::format},
  };
  const auto it = kinds.find(text);
  if (it == kinds.end()) fail(ErrorKind::config, "unknown mock error kind '" + text + "'");
  return it->second;
}

MockRule parse_rule(const json& j) {
  MockRule rule;
  if (j.contains("contains")) {
    rule.matcher = MockRule::Matcher::contains;
    rule.pattern = j.at("contains").get<std::string>();
  } else if (j.contains("equals")) {
    rule.matcher = MockRule::Matcher::equals;
    rule.pattern = j.at("equals").get<std::string>();
  } else if (j.contains("regex")) {
    rule.matcher = MockRule::Matcher::regex;
    rule.pattern = j.at("regex").get<std::string>();
  } else if (j.value("always", false)) {
    rule.matcher = MockRule::Matcher::always;
  } else {
    fail(ErrorKind::config, "mock rule needs one of contains/equals/regex/always");
  }
  const auto field = j.value("field", std::string("any"));
  if (field == "user") {
    rule.field = MockRule::Field::user;
  } else if (field == "system") {
    rule.field = MockRule::Field::system;
  } else if (field == "any") {
    rule.field = MockRule::Field::any;
  } else {
    fail(ErrorKind::config, "unknown mock rule field '" + field + "'");
  }
  if (j.contains("model")) rule.model = j.at("model").get<std::string>();
  if (j.contains("requires")) {
    rule.requires_state = j.at("requires").get<std::map<std::string, std::int64_t>>();
  }
  if (j.contains("increment")) {
    const auto& inc = j.at("increment");
    if (inc.is_string()) {
      rule.increment.push_back(inc.get<std::string>());
    } else {
      rule.increment = inc.get<std::vector<std::string>>();
    }
  }
  rule.respond = j.value("respond", std::string{});
  if (j.contains("respond_one_of")) {
    rule.respond_one_of = j.at("respond_one_of").get<std::vector<std::string>>();
  }
  if (j.contains("error")) rule.error = parse_error_kind(j.at("error").get<std::string>());
  return rule;
}

std::string match_text(const MockRule& rule, const ChatRequest& request) {
  switch (rule.field) {
    case MockRule::Field::user: return request.user;
    case MockRule::Field::system: return request.system.value_or("");
    case MockRule::Field::any: return request.system.value_or("") + "\n" + request.user;
  }
  return request.user;
}

struct Expansion {
  const ChatRequest& request;
  const std::smatch* captures;
  const std::map<std::string, std::int64_t>& state;
  std::string hash;
  Rng& rng;
};

std::string expand(const std::string& tmpl, Expansion& ctx) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    const std::string slot = tmpl.substr(open + 2, close - open - 2);
    if (slot == "user") {
      out += ctx.request.user;
    } else if (slot == "system") {
      out += ctx.request.system.value_or("");
    } else if (slot == "model") {
      out += ctx.request.model_id;
    } else if (slot == "hash") {
      out += ctx.hash;
    } else if (slot.rfind("state.", 0) == 0) {
      const auto it = ctx.state.find(slot.substr(6));
      out += std::to_string(it == ctx.state.end() ? 0 : it->second);
    } else if (slot.rfind("choice:", 0) == 0) {
      const auto options = split(slot.substr(7), '|');
      out += options[static_cast<std::size_t>(ctx.rng.uniform(options.size()))];
    } else if (slot.size() == 1 && slot[0] >= '0' && slot[0] <= '9') {
      const auto index = static_cast<std::size_t>(slot[0] - '0');
      if (ctx.captures != nullptr && index < ctx.captures->size()) {
        out += (*ctx.captures)[index].str();
      }
    } else {
      fail(ErrorKind::config, "unknown mock template slot '" + slot + "'");
    }
    pos = close + 2;
  }
  return out;
}

}  // namespace

MockScript MockScript::from_json(const json& j) {
  MockScript script;
  script.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("rules")) {
    for (const auto& rule : j.at("rules")) script.rules.push_back(parse_rule(rule));
  }
  script.default_response = j.value("default", std::string{});
  if (j.contains("default_error")) {
    script.default_error = parse_error_kind(j.at("default_error").get<std::string>());
  }
  return script;
}

MockScript MockScript::load(const std::string& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "mock script '" + path + "': " + e.what());
  }
}

ScriptedBackend::ScriptedBackend(std::string name, MockScript script)
    : name_(std::move(name)), script_(std::move(script)) {
  compiled_.reserve(script_.rules.size());
  for (const auto& rule : script_.rules) {
    if (rule.matcher == MockRule::Matcher::regex) {
      try {
        compiled_.emplace_back(std::regex(rule.pattern, std::regex::ECMAScript));
      } catch (const std::regex_error& e) {
        fail(ErrorKind::config, "bad mock regex '" + rule.pattern + "': " + e.what());
      }
    } else {
      compiled_.emplace_back(std::nullopt);
    }
  }
}

std::map<std::string, std::int64_t> ScriptedBackend::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
  const std::string key = request.cache_key();
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    const auto& rule = script_.rules[i];
    if (rule.model && *rule.model != request.model_id) continue;
    bool state_ok = true;
    for (const auto& [counter, value] : rule.requires_state) {
      const auto it = state_.find(counter);
      if ((it == state_.end() ? 0 : it->second) != value) state_ok = false;
    }
    if (!state_ok) continue;

    const std::string text = match_text(rule, request);
    std::smatch captures;
    bool matched = false;
    switch (rule.matcher) {
      case MockRule::Matcher::contains: matched = contains(text, rule.pattern); break;
      case MockRule::Matcher::equals: matched = text == rule.pattern; break;
      case MockRule::Matcher::regex: matched = std::regex_search(text, captures, *compiled_[i]); break;
      case MockRule::Matcher::always: matched = true; break;
    }
    if (!matched) continue;

    for (const auto& counter : rule.increment) ++state_[counter];
    if (rule.error) {
      fail(*rule.error, "mock '" + name_ + "' rule " + std::to_string(i) + " failed deliberately");
    }
    Rng rng(derive_seed(script_.seed, "mock", {fnv1a64(key), i}));
    Expansion ctx{request, rule.matcher == MockRule::Matcher::regex ? &captures : nullptr,
                  state_, key.substr(0, 8), rng};
    std::string response;
    if (!rule.respond_one_of.empty()) {
      response = expand(rule.respond_one_of[rng.uniform(rule.respond_one_of.size())], ctx);
    } else {
      response = expand(rule.respond, ctx);
    }
    return ChatResponse{response, FinishReason::stop, {}, false};
  }
  if (script_.default_error) {
    fail(*script_.default_error, "mock '" + name_ + "' has no matching rule");
  }
  Rng rng(derive_seed(script_.seed, "mock-default", key));
  Expansion ctx{request, nullptr, state_, key.substr(0, 8), rng};
  return ChatResponse{expand(script_.default_response, ctx), FinishReason::stop, {}, false};
}

FunctionBackend::FunctionBackend(std::string name, Responder responder)
    : name_(std::move(name)), responder_(std::move(responder)) {}

ChatResponse FunctionBackend::complete(const ChatRequest& request) {
  return ChatResponse{responder_(request), FinishReason::stop, {}, false};
}

double request_uniform(const ChatRequest& request, std::uint64_t salt) {
  Rng rng(derive_seed(salt, "request-uniform", request.cache_key()));
  return rng.uniform_real();
}

}  // namespace personaopt
