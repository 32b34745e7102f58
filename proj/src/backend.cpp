#include "personaopt/backend.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>

#include "personaopt/text.hpp"

namespace personaopt {

std::string ChatRequest::cache_key() const {
  json j = *this;
  return sha256_hex(j.dump());
}

void to_json(json& j, const ChatRequest& r) {
  j = json{{"model_id", r.model_id},
           {"system", r.system ? json(*r.system) : json(nullptr)},
           {"user", r.user},
           {"temperature", r.temperature},
           {"max_tokens", r.max_tokens},
           {"seed_hint", r.seed_hint ? json(*r.seed_hint) : json(nullptr)}};
}

void from_json(const json& j, ChatRequest& r) {
  r.model_id = j.at("model_id").get<std::string>();
  if (j.contains("system") && !j.at("system").is_null()) {
    r.system = j.at("system").get<std::string>();
  } else {
    r.system.reset();
  }
  r.user = j.at("user").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.max_tokens = j.at("max_tokens").get<int>();
  if (j.contains("seed_hint") && !j.at("seed_hint").is_null()) {
    r.seed_hint = j.at("seed_hint").get<std::uint64_t>();
  } else {
    r.seed_hint.reset();
  }
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::content_filter: return "content_filter";
    case FinishReason::other: return "other";
  }
  return "other";
}

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "stop" || text == "eos") return FinishReason::stop;
  if (text == "length") return FinishReason::length;
  if (text == "content_filter") return FinishReason::content_filter;
  return FinishReason::other;
}

void to_json(json& j, const ChatResponse& r) {
  j = json{{"text", r.text},
           {"finish_reason", std::string(to_string(r.finish_reason))},
           {"usage",
            {{"prompt_tokens", r.usage.prompt_tokens},
             {"completion_tokens", r.usage.completion_tokens}}}};
}

void from_json(const json& j, ChatResponse& r) {
  r.text = j.at("text").get<std::string>();
  r.finish_reason = parse_finish_reason(j.value("finish_reason", std::string("stop")));
  if (j.contains("usage")) {
    r.usage.prompt_tokens = j.at("usage").value("prompt_tokens", 0);
    r.usage.completion_tokens = j.at("usage").value("completion_tokens", 0);
  }
  r.cached = false;
}

void parallel_for(std::size_t count, int max_parallel,
                  const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  if (max_parallel < 1) fail(ErrorKind::config, "parallelism bound must be >= 1");
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(max_parallel));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

std::vector<BatchOutcome> complete_batch(ChatBackend& backend,
                                         std::span<const ChatRequest> requests,
                                         int max_in_flight) {
  if (max_in_flight < 1) fail(ErrorKind::config, "max_in_flight must be >= 1");
  std::vector<BatchOutcome> outcomes(requests.size());
  parallel_for(requests.size(), max_in_flight, [&](std::size_t i) {
    try {
      outcomes[i].response = backend.complete(requests[i]);
    } catch (const Error& e) {
      outcomes[i].error = BatchError{i, e.kind(), e.what()};
    } catch (const std::exception& e) {
      outcomes[i].error = BatchError{i, ErrorKind::transport, e.what()};
    }
  });
  return outcomes;
}

void throw_first_error(std::span<const BatchOutcome> outcomes) {
  for (const auto& outcome : outcomes) {
    if (outcome.error) {
      fail(outcome.error->kind, "request " + std::to_string(outcome.error->index) + ": " +
                                    outcome.error->message);
    }
  }
}

}  // namespace personaopt
