#include "fixtures.hpp"

#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <thread>

#include "personaopt/rng.hpp"
#include "personaopt/text.hpp"

namespace fixtures {

namespace fs = std::filesystem;

QuestionItem make_item(const std::string& id, Trait trait, const std::string& scenario,
                       std::uint64_t seed) {
  QuestionItem item;
  item.id = id;
  item.trait = trait;
  item.scenario = scenario;
  item.question = "What would you do?";
  item.options = {
      {'A', "Take the bold path in case " + id + " [+]", Keyed::high},
      {'A', "Invite others along in case " + id + " [+]", Keyed::high},
      {'A', "Keep to the usual routine in case " + id + " [-]", Keyed::low},
      {'A', "Stay quietly at home in case " + id + " [-]", Keyed::low},
  };
  Rng rng(derive_seed(seed, "fixture-options", id));
  rng.shuffle(item.options);
  assign_option_labels(item);
  return item;
}

QuestionItem make_twin(const QuestionItem& source) {
  QuestionItem twin = source;
  twin.id = source.id + "-aug";
  twin.scenario = "Put differently: " + source.scenario;
  twin.paraphrase_of = source.id;
  return twin;
}

std::vector<QuestionItem> synthetic_bank(std::span<const Trait> traits, std::size_t n, bool twins,
                                         std::uint64_t seed) {
  std::vector<QuestionItem> items;
  for (Trait trait : traits) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = std::string(short_code(trait)) + "-" + std::to_string(i);
      auto item = make_item(id, trait, "Situation " + id + ": a weekend with free time and a choice to make.", seed);
      items.push_back(item);
      if (twins) items.push_back(make_twin(item));
    }
  }
  return items;
}

std::vector<QuestionItem> synthetic_bank(Trait trait, std::size_t n, bool twins, std::uint64_t seed) {
  const Trait one[] = {trait};
  return synthetic_bank(one, n, twins, seed);
}

std::vector<TwinnedItem> twinned(Trait trait, std::size_t n, std::uint64_t seed) {
  const auto bank = synthetic_bank(trait, n, true, seed);
  return pair_twins(bank, trait);
}

std::vector<LikertItem> likert_bank(std::size_t per_trait, bool with_negative) {
  std::vector<LikertItem> items;
  for (Trait trait : kAllTraits) {
    for (std::size_t i = 0; i < per_trait; ++i) {
      LikertItem item;
      item.id = "mpi-" + std::string(short_code(trait)) + "-" + std::to_string(i);
      item.trait = trait;
      item.statement = "You often act like statement " + item.id + ".";
      item.keying = with_negative && i % 2 == 1 ? LikertKeying::negative : LikertKeying::positive;
      items.push_back(item);
    }
  }
  return items;
}

std::vector<std::pair<char, std::string>> presented_options(const std::string& user) {
  static const std::regex kLine(R"(^([A-Z])\. (.*)$)");
  std::vector<std::pair<char, std::string>> out;
  for (const auto& line : split(user, '\n')) {
    std::smatch m;
    if (std::regex_match(line, m, kLine)) out.emplace_back(m[1].str()[0], m[2].str());
  }
  return out;
}

std::string presented_scenario(const std::string& user) {
  for (const auto& line : split(user, '\n')) {
    if (line.rfind("Situation: ", 0) == 0) return line.substr(11);
  }
  return {};
}

namespace {

char pick(const ChatRequest& request, bool high) {
  const auto options = presented_options(request.user);
  const std::string marker = high ? "[+]" : "[-]";
  // The first matching option by text, so the choice depends on content only.
  const std::pair<char, std::string>* best = nullptr;
  for (const auto& option : options) {
    if (!contains(option.second, marker)) continue;
    if (best == nullptr || option.second < best->second) best = &option;
  }
  return best == nullptr ? '?' : best->first;
}

BackendPtr function_backend(const std::string& name, FunctionBackend::Responder responder) {
  return std::make_shared<FunctionBackend>(name, std::move(responder));
}

std::vector<std::pair<int, std::string>> questionnaire(const std::string& user) {
  static const std::regex kLine(R"(^(\d+)\. (.*)$)");
  std::vector<std::pair<int, std::string>> out;
  for (const auto& line : split(user, '\n')) {
    std::smatch m;
    if (std::regex_match(line, m, kLine)) out.emplace_back(std::stoi(m[1].str()), m[2].str());
  }
  return out;
}

}  // namespace

BackendPtr content_keyed(const std::string& name, double high_rate) {
  return function_backend(name, [high_rate](const ChatRequest& request) {
    // Same scenario (either form) and persona give the same decision.
    const auto key = presented_scenario(request.user) + "|" + request.system.value_or("");
    const double u = static_cast<double>(fnv1a64(key) >> 11) * 0x1.0p-53;
    return std::string(1, pick(request, u < high_rate));
  });
}

BackendPtr always_high(const std::string& name) {
  return function_backend(name, [](const ChatRequest& r) { return std::string(1, pick(r, true)); });
}

BackendPtr always_low(const std::string& name) {
  return function_backend(name, [](const ChatRequest& r) { return std::string(1, pick(r, false)); });
}

BackendPtr uniform_random(const std::string& name) {
  return function_backend(name, [](const ChatRequest& r) {
    const auto index = static_cast<int>(request_uniform(r) * 4.0);
    return std::string(1, static_cast<char>('A' + index));
  });
}

BackendPtr fixed_reply(const std::string& name, const std::string& reply) {
  return function_backend(name, [reply](const ChatRequest&) { return reply; });
}

BackendPtr likert_content(const std::string& name) {
  return function_backend(name, [](const ChatRequest& request) {
    std::string reply;
    for (const auto& [n, statement] : questionnaire(request.user)) {
      reply += std::to_string(n) + ": " + std::to_string(1 + fnv1a64(statement) % 5) + "\n";
    }
    return reply;
  });
}

BackendPtr likert_position_biased(const std::string& name) {
  return function_backend(name, [](const ChatRequest& request) {
    std::string reply;
    for (const auto& [n, statement] : questionnaire(request.user)) {
      // Early statements get high ratings regardless of content.
      reply += std::to_string(n) + ": " + std::to_string(n <= 10 ? 5 : 2) + "\n";
    }
    return reply;
  });
}

BackendPtr likert_uniform(const std::string& name) {
  return function_backend(name, [](const ChatRequest& request) {
    std::string reply;
    for (const auto& [n, statement] : questionnaire(request.user)) {
      const auto rating = 1 + static_cast<int>(request_uniform(request, static_cast<std::uint64_t>(n)) * 5.0);
      reply += std::to_string(n) + ": " + std::to_string(rating) + "\n";
    }
    return reply;
  });
}

int magic_count(const std::string& text) {
  int count = 0;
  for (std::size_t pos = text.find("MAGIC-"); pos != std::string::npos; pos = text.find("MAGIC-", pos + 1)) {
    ++count;
  }
  return count;
}

std::vector<TwinnedItem> hill_items() {
  std::vector<TwinnedItem> out;
  for (int level = 1; level <= 3; ++level) {
    const std::string id = "hill-" + std::to_string(level);
    auto item = make_item(id, Trait::openness,
                          "[level " + std::to_string(level) + "] A free afternoon in a new city.", 3);
    out.push_back({item, make_twin(item)});
  }
  return out;
}

BackendPtr hill_target(const std::string& name) {
  return function_backend(name, [](const ChatRequest& request) {
    static const std::regex kLevel(R"(\[level (\d+)\])");
    std::smatch m;
    const auto scenario = presented_scenario(request.user);
    const int level = std::regex_search(scenario, m, kLevel) ? std::stoi(m[1].str()) : 99;
    const int magic = magic_count(request.system.value_or(""));
    return std::string(1, pick(request, magic >= level));
  });
}

BackendPtr hill_optimizer(const std::string& name) {
  return function_backend(name, [](const ChatRequest& request) {
    const auto& meta = request.user;
    const auto open = meta.rfind("<profile>");
    const auto close = meta.rfind("</profile>");
    int best = 0;
    if (open != std::string::npos && close != std::string::npos && close > open) {
      best = magic_count(meta.substr(open, close - open));
    }
    std::string persona = "You are an explorer who seeks out the unknown.";
    for (int i = 1; i <= best + 1; ++i) persona += " MAGIC-" + std::to_string(i);
    persona += " Variant " + std::to_string(request.seed_hint.value_or(0) % 100003) + ".";
    return "Here is a new profile.\n<persona>\n" + persona + "\n</persona>\n";
  });
}

RunConfig hill_config(int steps, int k) {
  RunConfig config = RunConfig::defaults_for(Trait::openness);
  config.max_steps = steps;
  config.candidates_per_step = k;
  config.train_size = 3;
  config.test_size = 0;
  config.seed = 7;
  config.optimizer_model = "hill-optimizer";
  config.target_model = "hill-target";
  return config;
}

Split hill_split() {
  Split s;
  s.spec = SplitSpec{Trait::openness, 3, 0, 7};
  s.train = hill_items();
  return s;
}

ChatResponse ConcurrencyProbe::complete(const ChatRequest& request) {
  const int now = ++current_;
  int seen = peak_.load();
  while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
  --current_;
  ChatResponse response;
  response.text = request.user;
  return response;
}

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "personaopt-test-XXXXXX").string();
  if (mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

ParsedMeta parse_meta(const std::string& text) {
  ParsedMeta parsed;
  const std::string open = "<profile>\n";
  const std::string close = "\n</profile>\nscore: ";
  for (std::size_t pos = text.find(open); pos != std::string::npos; pos = text.find(open, pos)) {
    const auto body = pos + open.size();
    const auto end = text.find(close, body);
    if (end == std::string::npos) break;
    std::string profile = text.substr(body, end - body);
    if (profile == "(no profile)") profile.clear();
    const auto score_start = end + close.size();
    auto score_end = score_start;
    while (score_end < text.size() && (std::isdigit(static_cast<unsigned char>(text[score_end])) || text[score_end] == '.')) {
      ++score_end;
    }
    parsed.profiles.emplace_back(profile, std::stod(text.substr(score_start, score_end - score_start)));
    parsed.last_profile_end = score_end;
    pos = score_end;
  }
  const std::string ex_open = "<example>";
  const std::string ex_close = "</example>";
  for (std::size_t pos = text.find(ex_open); pos != std::string::npos; pos = text.find(ex_open, pos)) {
    const auto end = text.find(ex_close, pos);
    if (end == std::string::npos) break;
    parsed.examples.push_back(text.substr(pos + ex_open.size(), end - pos - ex_open.size()));
    parsed.last_example_end = end + ex_close.size();
    pos = parsed.last_example_end;
  }
  parsed.directive_pos = text.find("<persona>", parsed.last_example_end);
  return parsed;
}

bool identity_holds(const ScoredPrompt& scored, double tolerance) {
  if (scored.s_ps > scored.s_origin) return false;
  if (scored.s_origin == 0.0) return scored.s_ps == 0.0;
  return std::abs(scored.s_ps - scored.s_consist * scored.s_origin) <= tolerance;
}

}  // namespace fixtures
