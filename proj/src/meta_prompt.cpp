#include "personaopt/meta_prompt.hpp"

#include <algorithm>
#include <set>

#include "personaopt/errors.hpp"
#include "personaopt/templates.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace {

bool ranks_before(const ScoredPrompt& a, const ScoredPrompt& b) {
  if (a.s_ps != b.s_ps) return a.s_ps > b.s_ps;
  if (a.step != b.step) return a.step < b.step;
  return a.prompt.id() < b.prompt.id();
}

}  // namespace

std::vector<ScoredPrompt> rank_entries(std::span<const ScoredPrompt> entries) {
  std::vector<ScoredPrompt> ranked(entries.begin(), entries.end());
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
  std::set<std::string> seen;
  std::vector<ScoredPrompt> unique;
  for (auto& entry : ranked) {
    if (seen.insert(entry.prompt.id()).second) unique.push_back(std::move(entry));
  }
  return unique;
}

std::vector<ScoredPrompt> top_n(std::span<const ScoredPrompt> entries, std::size_t n) {
  auto ranked = rank_entries(entries);
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

std::string task_instruction(Trait trait, bool invert_keying) {
  const std::string name = to_lower(full_name(trait));
  const std::string level = invert_keying ? "as low as possible" : "as high as possible";
  return "Your task is to write a persona profile: a system prompt that makes an AI assistant "
         "behave like a person whose " + name + " is " + level + ". The profile should describe "
         "the character, for example their career, values, hobbies and habits, so that the "
         "assistant stays in character across many everyday situations.\n\n"
         "Each profile was tested by placing the assistant in a set of situations. Its score "
         "combines two measures. The personality score is the fraction of situations in which "
         "the assistant behaved with " + (invert_keying ? "low " : "high ") + name +
         ". The consistency score measures the stability of the assistant's responses: how "
         "often it still behaves the same way when the same situation is described in other "
         "words. A profile scores well only when both are high. Scores range from 0 to 1.";
}

const std::string& format_directive() {
  static const std::string kDirective =
      "Write one new profile that differs from the profiles above and achieves a higher score. "
      "Put the profile between " + std::string(kPersonaOpen) + " and " +
      std::string(kPersonaClose) + ". Nothing else may appear between those markers.";
  return kDirective;
}

ProblemExample open_ended_example(const QuestionItem& item, Rng& rng) {
  if (item.options.empty()) fail(ErrorKind::data, "item '" + item.id + "' has no options");
  const auto& option = item.options[static_cast<std::size_t>(rng.uniform(item.options.size()))];
  return {item.id, option.label, trim(item.scenario) + " " + trim(option.text)};
}

std::string render_trajectory(std::span<const TrajectoryLine> lines) {
  std::string out;
  for (const auto& line : lines) {
    if (!out.empty()) out += "\n\n";
    out += "<profile>\n";
    out += line.text.empty() ? "(no profile)" : line.text;
    out += "\n</profile>\nscore: " + format_fixed(line.score, 3);
  }
  return out;
}

std::string render_examples(std::span<const ProblemExample> examples) {
  std::string out;
  for (const auto& example : examples) {
    if (!out.empty()) out += "\n";
    out += "<example>" + example.text + "</example>";
  }
  return out;
}

MetaPrompt build_meta_prompt(std::span<const ScoredPrompt> buffer, const RunConfig& config,
                             std::span<const QuestionItem> sampled_items, Rng& rng) {
  if (buffer.empty()) fail(ErrorKind::state, "cannot build a meta-prompt from an empty buffer");
  const std::string tmpl = config.meta_prompt_template.empty()
                               ? embedded_template("meta_prompt.txt")
                               : config.meta_prompt_template;

  MetaPrompt meta;
  meta.task_instruct = task_instruction(config.trait, config.invert_keying);
  meta.format_directive = format_directive();
  auto best = top_n(buffer, static_cast<std::size_t>(config.trajectory_top_n));
  for (auto it = best.rbegin(); it != best.rend(); ++it) {
    meta.trajectory.push_back({it->prompt.id(), it->prompt.text(), it->s_ps});
  }
  for (const auto& item : sampled_items) meta.problem_examples.push_back(open_ended_example(item, rng));

  auto render = [&] {
    return render_template(tmpl, {{"task_instruct", meta.task_instruct},
                                  {"trajectory", render_trajectory(meta.trajectory)},
                                  {"examples", render_examples(meta.problem_examples)},
                                  {"format_directive", meta.format_directive},
                                  {"trait", std::string(full_name(config.trait))}});
  };
  meta.text = render();
  while (estimate_tokens(meta.text) > config.meta_prompt_token_budget) {
    if (meta.trajectory.empty()) {
      fail(ErrorKind::config, "meta-prompt needs " + std::to_string(estimate_tokens(meta.text)) +
                                  " tokens without any trajectory; budget is " +
                                  std::to_string(config.meta_prompt_token_budget));
    }
    meta.trajectory.erase(meta.trajectory.begin());
    ++meta.dropped_for_budget;
    meta.text = render();
  }
  return meta;
}

std::optional<std::string> extract_candidate(const std::string& completion) {
  std::size_t pos = 0;
  while (true) {
    const auto open = completion.find(kPersonaOpen, pos);
    if (open == std::string::npos) return std::nullopt;
    const auto start = open + kPersonaOpen.size();
    const auto close = completion.find(kPersonaClose, start);
    if (close == std::string::npos) return std::nullopt;
    auto text = trim(std::string_view(completion).substr(start, close - start));
    if (!text.empty()) return text;
    pos = close + kPersonaClose.size();
  }
}

}  // namespace personaopt
