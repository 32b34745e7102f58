#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "personaopt/backend.hpp"

namespace personaopt {

struct CachePolicy {
  // Sampled (temperature > 0) calls are served from cache only when set;
  // serving them from cache would collapse candidate diversity.
  bool cache_stochastic = false;
  // Persist every response, cacheable or not, so the directory doubles as a
  // full transcript of the run.
  bool record_uncached = true;
};

// Content-addressed response cache in front of another backend. Records are
// stored as <directory>/<request hash>.json; an empty directory keeps the
// cache in memory only. There is no expiry.
class CachingBackend final : public ChatBackend {
 public:
  CachingBackend(BackendPtr inner, std::string directory, CachePolicy policy = {});

  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return inner_->name(); }

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }
  bool cacheable(const ChatRequest& request) const;

 private:
  std::optional<ChatResponse> lookup(const std::string& key, const ChatRequest& request);
  void store(const std::string& key, const ChatRequest& request, const ChatResponse& response);
  std::string record_path(const std::string& key) const;

  BackendPtr inner_;
  std::string directory_;
  CachePolicy policy_;
  std::mutex mutex_;
  std::map<std::string, ChatResponse> memory_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

}  // namespace personaopt
