#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "personaopt/http_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

namespace personaopt {

namespace {

bool retryable_status(int status) {
  return status == 408 || status == 409 || status == 429 || status >= 500;
}

std::optional<std::chrono::milliseconds> retry_after(const httplib::Result& result) {
  if (!result) return std::nullopt;
  if (result->has_header("retry-after-ms")) {
    const double ms = std::strtod(result->get_header_value("retry-after-ms").c_str(), nullptr);
    if (ms >= 0) return std::chrono::milliseconds(static_cast<long>(ms));
  }
  if (result->has_header("Retry-After")) {
    const auto value = result->get_header_value("Retry-After");
    char* end = nullptr;
    const double seconds = std::strtod(value.c_str(), &end);
    if (end != value.c_str() && seconds >= 0) {
      return std::chrono::milliseconds(static_cast<long>(seconds * 1000.0));
    }
  }
  return std::nullopt;
}

const char* env_or_null(const char* primary, const char* fallback) {
  if (const char* v = std::getenv(primary); v != nullptr && *v != '\0') return v;
  if (const char* v = std::getenv(fallback); v != nullptr && *v != '\0') return v;
  return nullptr;
}

}  // namespace

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
  const double scaled =
      static_cast<double>(initial_delay.count()) * std::pow(backoff_factor, attempt - 1);
  const double capped = std::min(scaled, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<long>(capped));
}

RateLimiter::RateLimiter(double requests_per_second)
    : interval_(requests_per_second > 0
                    ? std::chrono::nanoseconds(static_cast<long long>(1e9 / requests_per_second))
                    : std::chrono::nanoseconds(0)),
      next_slot_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig config;
  if (const char* url = env_or_null("PERSONAOPT_BASE_URL", "OPENAI_BASE_URL")) config.base_url = url;
  if (const char* key = env_or_null("PERSONAOPT_API_KEY", "OPENAI_API_KEY")) config.api_key = key;
  return config;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      limiter_(config_.requests_per_second) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorKind::config, "base URL '" + config_.base_url + "' lacks a scheme");
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  origin_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json HttpChatBackend::request_body(const ChatRequest& request, const std::string& model_override) {
  json messages = json::array();
  if (request.system && !request.system->empty()) {
    messages.push_back({{"role", "system"}, {"content", *request.system}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user}});
  json body = {{"model", model_override.empty() ? request.model_id : model_override},
               {"messages", messages},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  if (request.seed_hint) body["seed"] = *request.seed_hint;
  return body;
}

ChatResponse HttpChatBackend::parse_response_body(const std::string& body) {
  try {
    const auto j = json::parse(body);
    const auto& choice = j.at("choices").at(0);
    ChatResponse response;
    const auto& content = choice.at("message").at("content");
    response.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (choice.contains("finish_reason") && choice.at("finish_reason").is_string()) {
      response.finish_reason = parse_finish_reason(choice.at("finish_reason").get<std::string>());
    }
    if (j.contains("usage") && j.at("usage").is_object()) {
      response.usage.prompt_tokens = j.at("usage").value("prompt_tokens", 0);
      response.usage.completion_tokens = j.at("usage").value("completion_tokens", 0);
    }
    return response;
  } catch (const json::exception& e) {
    fail(ErrorKind::transport, std::string("malformed chat-completions response: ") + e.what());
  }
}

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
  if (request.user.empty()) fail(ErrorKind::config, "chat request with empty user message");
  const std::string body = request_body(request, config_.model_override).dump();
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace(config_.auth_header, config_.auth_prefix + config_.api_key);
  }
  const std::string endpoint = path_prefix_ + "/chat/completions";

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) {
      spdlog::debug("{}: retry {} after {}", config_.name, attempt, last_failure);
    }
    limiter_.acquire();
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto result = client.Post(endpoint, headers, body, "application/json");

    std::optional<std::chrono::milliseconds> hinted;
    if (!result) {
      last_failure = "connection error: " + httplib::to_string(result.error());
    } else if (result->status == 200) {
      return parse_response_body(result->body);
    } else if (retryable_status(result->status)) {
      last_failure = "HTTP " + std::to_string(result->status);
      hinted = retry_after(result);
    } else {
      fail(ErrorKind::config, config_.name + ": HTTP " + std::to_string(result->status) + ": " +
                                  result->body.substr(0, 500));
    }
    if (attempt == config_.retry.max_retries) break;
    auto delay = hinted.value_or(config_.retry.delay_for(attempt + 1));
    sleeper_(std::min(delay, config_.retry.max_delay));
  }
  fail(ErrorKind::transport, config_.name + ": retries exhausted (" + last_failure + ")");
}

}  // namespace personaopt
