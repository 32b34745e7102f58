#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "personaopt/dataset.hpp"
#include "personaopt/domain.hpp"
#include "personaopt/mock_backend.hpp"
#include "personaopt/optimizer.hpp"

namespace fixtures {

using namespace personaopt;

// Synthetic banks. High-keyed option texts carry the marker "[+]", low-keyed
// ones "[-]", so content-keyed responders can find them after shuffling.
QuestionItem make_item(const std::string& id, Trait trait, const std::string& scenario,
                       std::uint64_t seed);
QuestionItem make_twin(const QuestionItem& source);

// n source items per trait with ids "<CODE>-<i>", each followed by its twin
// when `twins` is set.
std::vector<QuestionItem> synthetic_bank(std::span<const Trait> traits, std::size_t n, bool twins,
                                         std::uint64_t seed = 1);
std::vector<QuestionItem> synthetic_bank(Trait trait, std::size_t n, bool twins,
                                         std::uint64_t seed = 1);
std::vector<TwinnedItem> twinned(Trait trait, std::size_t n, std::uint64_t seed = 1);

std::vector<LikertItem> likert_bank(std::size_t per_trait, bool with_negative = false);

// The display letter / option text pairs of a rendered administration.
std::vector<std::pair<char, std::string>> presented_options(const std::string& user);
// The situation line of a rendered administration.
std::string presented_scenario(const std::string& user);

// Responders.
BackendPtr content_keyed(const std::string& name, double high_rate = 1.0);  // picks [+] when the hash allows
BackendPtr always_high(const std::string& name);
BackendPtr always_low(const std::string& name);
BackendPtr uniform_random(const std::string& name);
BackendPtr fixed_reply(const std::string& name, const std::string& reply);

// Likert responders: content-keyed answers depend only on the statement;
// position-biased ones depend only on the position in the questionnaire.
BackendPtr likert_content(const std::string& name);
BackendPtr likert_position_biased(const std::string& name);
BackendPtr likert_uniform(const std::string& name);

// Hill-climb pair. Train items carry "[level L]" tags; the target chooses a
// high-keyed option iff the persona holds at least L "MAGIC-" tokens. The
// optimizer reads the best (last) trajectory profile and emits one with one
// more token.
std::vector<TwinnedItem> hill_items();
BackendPtr hill_target(const std::string& name = "hill-target");
BackendPtr hill_optimizer(const std::string& name = "hill-optimizer");
int magic_count(const std::string& text);

RunConfig hill_config(int steps, int k = 8);
Split hill_split();

// Counts concurrent entries into complete().
class ConcurrencyProbe final : public ChatBackend {
 public:
  explicit ConcurrencyProbe(int delay_ms) : delay_ms_(delay_ms) {}
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return "probe"; }
  int peak() const { return peak_.load(); }

 private:
  int delay_ms_;
  std::atomic<int> current_{0};
  std::atomic<int> peak_{0};
};

// A scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

// Structural view of a rendered meta-prompt, recovered with plain string
// scanning rather than the engine's own renderers.
struct ParsedMeta {
  std::vector<std::pair<std::string, double>> profiles;  // text ("" for no profile), score
  std::vector<std::string> examples;
  std::size_t last_profile_end = 0;
  std::size_t last_example_end = 0;
  std::size_t directive_pos = std::string::npos;  // first "<persona>" mention
};
ParsedMeta parse_meta(const std::string& text);

// s_ps == s_consist * s_origin whenever s_origin > 0.
bool identity_holds(const ScoredPrompt& scored, double tolerance = 1e-12);

}  // namespace fixtures
