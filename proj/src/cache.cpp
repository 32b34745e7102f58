#include "personaopt/cache.hpp"

#include <filesystem>

#include "personaopt/text.hpp"

namespace personaopt {

namespace fs = std::filesystem;

CachingBackend::CachingBackend(BackendPtr inner, std::string directory, CachePolicy policy)
    : inner_(std::move(inner)), directory_(std::move(directory)), policy_(policy) {
  if (!inner_) fail(ErrorKind::config, "caching backend needs an inner backend");
  if (!directory_.empty()) fs::create_directories(directory_);
}

bool CachingBackend::cacheable(const ChatRequest& request) const {
  return request.deterministic() || policy_.cache_stochastic;
}

std::string CachingBackend::record_path(const std::string& key) const {
  return (fs::path(directory_) / (key + ".json")).string();
}

std::optional<ChatResponse> CachingBackend::lookup(const std::string& key,
                                                   const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  if (const auto it = memory_.find(key); it != memory_.end()) return it->second;
  if (directory_.empty()) return std::nullopt;
  const auto path = record_path(key);
  if (!fs::exists(path)) return std::nullopt;
  json record;
  try {
    record = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::integrity, "corrupt cache record '" + path + "': " + e.what());
  }
  try {
    if (record.at("key").get<std::string>() != key ||
        record.at("request").get<ChatRequest>() != request) {
      fail(ErrorKind::integrity, "cache record '" + path + "' does not match its request");
    }
    auto response = record.at("response").get<ChatResponse>();
    memory_.emplace(key, response);
    return response;
  } catch (const json::exception& e) {
    fail(ErrorKind::integrity, "malformed cache record '" + path + "': " + e.what());
  }
}

void CachingBackend::store(const std::string& key, const ChatRequest& request,
                           const ChatResponse& response) {
  std::lock_guard lock(mutex_);
  if (cacheable(request)) memory_.emplace(key, response);
  if (directory_.empty()) return;
  if (!cacheable(request) && !policy_.record_uncached) return;
  const json record = {{"key", key}, {"request", request}, {"response", response}};
  write_file_atomic(record_path(key), record.dump(2) + "\n");
}

ChatResponse CachingBackend::complete(const ChatRequest& request) {
  const auto key = request.cache_key();
  if (cacheable(request)) {
    if (auto hit = lookup(key, request)) {
      ++hits_;
      hit->cached = true;
      return *hit;
    }
  }
  ++misses_;
  auto response = inner_->complete(request);
  response.cached = false;
  store(key, request, response);
  return response;
}

}  // namespace personaopt
