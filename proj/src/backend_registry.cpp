#include "personaopt/backend_registry.hpp"

#include <cstdlib>
#include <filesystem>

#include "personaopt/http_backend.hpp"
#include "personaopt/mock_backend.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace fs = std::filesystem;

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base_dir) / p).string();
}

}  // namespace

BackendRegistry BackendRegistry::from_json(const json& j, const std::string& base_dir) {
  BackendRegistry registry;
  registry.base_dir_ = base_dir;
  if (j.contains("models")) {
    for (const auto& [name, spec] : j.at("models").items()) registry.declared_[name] = spec;
  }
  return registry;
}

BackendRegistry BackendRegistry::load(const std::string& path) {
  try {
    return from_json(json::parse(read_file(path)), fs::path(path).parent_path().string());
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "backends file '" + path + "': " + e.what());
  }
}

void BackendRegistry::add(const std::string& name, BackendPtr backend) {
  std::lock_guard lock(*mutex_);
  resolved_[name] = std::move(backend);
}

BackendPtr BackendRegistry::resolve(const std::string& ref) {
  std::lock_guard lock(*mutex_);
  if (const auto it = resolved_.find(ref); it != resolved_.end()) return it->second;
  auto backend = build(ref);
  resolved_[ref] = backend;
  return backend;
}

BackendPtr BackendRegistry::build(const std::string& ref) {
  if (const auto it = declared_.find(ref); it != declared_.end()) {
    const auto& spec = it->second;
    const auto kind = spec.value("kind", std::string("openai"));
    if (kind == "mock") {
      const auto script = resolve_path(base_dir_, spec.at("script").get<std::string>());
      return std::make_shared<ScriptedBackend>(ref, MockScript::load(script));
    }
    if (kind == "openai") {
      auto config = HttpBackendConfig::from_env();
      config.name = ref;
      config.base_url = spec.value("base_url", config.base_url);
      config.model_override = spec.value("model", std::string{});
      if (spec.contains("api_key_env")) {
        const auto var = spec.at("api_key_env").get<std::string>();
        const char* value = std::getenv(var.c_str());
        if (value == nullptr) fail(ErrorKind::config, "environment variable " + var + " is not set");
        config.api_key = value;
      }
      config.requests_per_second = spec.value("requests_per_second", 0.0);
      config.retry.max_retries = spec.value("max_retries", config.retry.max_retries);
      return std::make_shared<HttpChatBackend>(config);
    }
    fail(ErrorKind::config, "backend '" + ref + "' has unknown kind '" + kind + "'");
  }
  if (ref.rfind("mock:", 0) == 0) {
    const auto path = resolve_path(base_dir_, ref.substr(5));
    return std::make_shared<ScriptedBackend>(ref, MockScript::load(path));
  }
  if (ref.rfind("openai:", 0) == 0) {
    auto config = HttpBackendConfig::from_env();
    config.name = ref;
    config.model_override = ref.substr(7);
    return std::make_shared<HttpChatBackend>(config);
  }
  if (ref.size() > 5 && ref.substr(ref.size() - 5) == ".json" && fs::exists(ref)) {
    return std::make_shared<ScriptedBackend>(ref, MockScript::load(ref));
  }
  fail(ErrorKind::config, "cannot resolve model reference '" + ref + "'");
}

}  // namespace personaopt
