#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <string>

#include "personaopt/backend.hpp"

namespace personaopt {

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds initial_delay{500};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_delay{30'000};

  // Delay before retry number `attempt` (1-based), ignoring Retry-After.
  std::chrono::milliseconds delay_for(int attempt) const;
};

// Minimum spacing between request starts; 0 disables limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  std::chrono::nanoseconds interval_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_slot_;
};

struct HttpBackendConfig {
  std::string name = "http";
  // OpenAI-compatible base, e.g. "https://api.openai.com/v1" or
  // "http://localhost:8000/v1". Requests go to <base_url>/chat/completions.
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  // Optional: replaces the request's model_id on the wire.
  std::string model_override;
  RetryPolicy retry;
  double requests_per_second = 0.0;
  std::chrono::seconds timeout{120};

  // PERSONAOPT_BASE_URL / PERSONAOPT_API_KEY, falling back to
  // OPENAI_BASE_URL / OPENAI_API_KEY.
  static HttpBackendConfig from_env();
};

// Chat-completions client for OpenAI-compatible endpoints.
//
// Transient failures (connection errors, 408, 409, 429, 5xx) are retried with
// exponential backoff, honoring Retry-After. Other 4xx responses are
// configuration errors; exhausting the retries is a transport error.
class HttpChatBackend final : public ChatBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpChatBackend(HttpBackendConfig config, Sleeper sleeper = {});

  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return config_.name; }

  static json request_body(const ChatRequest& request, const std::string& model_override = {});
  static ChatResponse parse_response_body(const std::string& body);

 private:
  HttpBackendConfig config_;
  Sleeper sleeper_;
  RateLimiter limiter_;
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // e.g. "/v1"
};

}  // namespace personaopt
