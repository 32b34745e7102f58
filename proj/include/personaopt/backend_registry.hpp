#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "personaopt/backend.hpp"

namespace personaopt {

// Resolves model references to backends.
//
// A reference is one of
//   - a name declared in a backends file:
//       {"models": {"llama8b": {"kind": "openai", "base_url": "...",
//                               "model": "meta-llama/...", "api_key_env": "KEY"},
//                   "mockA":   {"kind": "mock", "script": "mockA.json"}}}
//   - "mock:<path>" or a path to an existing *.json mock script
//   - "openai:<model>", using PERSONAOPT_BASE_URL / PERSONAOPT_API_KEY
//
// Resolved backends are memoized, so one reference maps to one shared handle.
class BackendRegistry {
 public:
  BackendRegistry() = default;

  static BackendRegistry from_json(const json& j, const std::string& base_dir = ".");
  static BackendRegistry load(const std::string& path);

  void add(const std::string& name, BackendPtr backend);
  BackendPtr resolve(const std::string& ref);

 private:
  BackendPtr build(const std::string& ref);

  std::map<std::string, json> declared_;
  std::string base_dir_ = ".";
  std::map<std::string, BackendPtr> resolved_;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

}  // namespace personaopt
