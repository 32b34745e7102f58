#include "doctest.h"
#include "fixtures.hpp"

#include "personaopt/domain.hpp"
#include "personaopt/errors.hpp"
#include "personaopt/rng.hpp"
#include "personaopt/text.hpp"

#include <functional>

using namespace personaopt;

namespace {

ErrorKind kind_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::state;
}

}  // namespace

TEST_CASE("trait names round-trip through codes and full names") {
  for (Trait trait : kAllTraits) {
    CHECK(parse_trait(short_code(trait)) == trait);
    CHECK(parse_trait(full_name(trait)) == trait);
    CHECK(parse_trait(to_lower(std::string(full_name(trait)))) == trait);
    json j = trait;
    CHECK(j.get<Trait>() == trait);
  }
  CHECK_FALSE(try_parse_trait("machiavellianism"));
  CHECK(kind_of([] { parse_trait("grit"); }) == ErrorKind::domain);
  CHECK(short_code(Trait::agreeableness) == "AGR");
  CHECK(trait_index(Trait::neuroticism) == 4);
}

TEST_CASE("dark triad labels") {
  CHECK(is_dark_triad_label("Machiavellianism"));
  CHECK(is_dark_triad_label("narcissism"));
  CHECK(is_dark_triad_label("PSYCHOPATHY"));
  CHECK_FALSE(is_dark_triad_label("Openness"));
}

TEST_CASE("exit codes follow the documented table") {
  CHECK(exit_code(ErrorKind::data) == 2);
  CHECK(exit_code(ErrorKind::format) == 2);
  CHECK(exit_code(ErrorKind::config) == 3);
  CHECK(exit_code(ErrorKind::transport) == 4);
  CHECK(exit_code(ErrorKind::integrity) == 5);
}

TEST_CASE("reverse keying") {
  for (int raw = 1; raw <= 5; ++raw) {
    CHECK(reverse_score(raw, LikertKeying::positive) == raw);
    CHECK(reverse_score(raw, LikertKeying::negative) == 6 - raw);
  }
  CHECK(kind_of([] { reverse_score(0, LikertKeying::positive); }) == ErrorKind::domain);
  CHECK(kind_of([] { reverse_score(6, LikertKeying::negative); }) == ErrorKind::domain);
}

TEST_CASE("persona prompts") {
  const PersonaPrompt a("You are curious.", PromptOrigin::generated(3));
  const PersonaPrompt b("You are curious.", PromptOrigin::seed());
  CHECK(a.id() == b.id());
  CHECK(a.id().size() == 16);
  CHECK(a.id() == sha256_hex("You are curious.").substr(0, 16));
  CHECK_FALSE(a.empty());

  const auto origin = PersonaPrompt::empty_origin();
  CHECK(origin.empty());
  CHECK(origin.id() == PersonaPrompt::id_for(""));
  CHECK(kind_of([] { PersonaPrompt("", PromptOrigin::seed()); }) == ErrorKind::domain);

  json j = a;
  CHECK(j.get<PersonaPrompt>() == a);
  json origin_json = origin;
  CHECK(origin_json.get<PersonaPrompt>() == origin);

  j["id"] = "0000000000000000";
  CHECK(kind_of([&] { (void)j.get<PersonaPrompt>(); }) == ErrorKind::integrity);
}

TEST_CASE("baseline origin keeps its kind") {
  const PersonaPrompt p("x", PromptOrigin::baseline("p2"));
  json j = p;
  const auto back = j.get<PersonaPrompt>();
  CHECK(back.origin().kind == OriginKind::baseline);
  CHECK(back.origin().baseline_kind == "p2");
}

TEST_CASE("run config defaults") {
  const RunConfig c = RunConfig::defaults_for(Trait::openness);
  CHECK(c.candidates_per_step == 8);
  CHECK(c.trajectory_top_n == 3);
  CHECK(c.questions_per_step == 3);
  CHECK(c.optimizer_temperature == 1.2);
  CHECK(c.target_sampling == TargetSampling::greedy);
  CHECK(c.max_steps == 25);
  CHECK(c.train_size == 200);
  CHECK(c.test_size == 800);
  CHECK(RunConfig::defaults_for(Trait::agreeableness).max_steps == 15);
  CHECK(RunConfig::defaults_for(Trait::conscientiousness).max_steps == 15);
  CHECK(RunConfig::defaults_for(Trait::extraversion).max_steps == 25);
  CHECK(RunConfig::defaults_for(Trait::neuroticism).max_steps == 25);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("run config validation rejects out-of-range fields") {
  const std::vector<std::function<void(RunConfig&)>> breakers = {
      [](RunConfig& c) { c.max_steps = 0; },
      [](RunConfig& c) { c.candidates_per_step = 0; },
      [](RunConfig& c) { c.trajectory_top_n = 0; },
      [](RunConfig& c) { c.questions_per_step = 0; },
      [](RunConfig& c) { c.optimizer_temperature = 0.0; },
      [](RunConfig& c) { c.train_size = 0; },
      [](RunConfig& c) { c.test_size = -1; },
      [](RunConfig& c) { c.questions_per_step = 201; },
      [](RunConfig& c) { c.max_in_flight = 0; },
      [](RunConfig& c) { c.rescore_top_m = -2; },
  };
  for (const auto& brk : breakers) {
    RunConfig c;
    brk(c);
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::config);
  }
}

TEST_CASE("run config json round-trip and partial files") {
  RunConfig c = RunConfig::defaults_for(Trait::extraversion);
  c.seed = 99;
  c.cache_optimizer_calls = true;
  c.administration_instruction = "Pick one.";
  json j = c;
  CHECK(j.get<RunConfig>() == c);

  const auto partial = json::parse(R"({"trait": "AGR", "seed": 4})").get<RunConfig>();
  CHECK(partial.trait == Trait::agreeableness);
  CHECK(partial.max_steps == 15);
  CHECK(partial.seed == 4);

  CHECK(kind_of([] { (void)json::parse(R"({"target_sampling": "top_p"})").get<RunConfig>(); }) ==
        ErrorKind::config);
}

TEST_CASE("fingerprint ignores max_steps only") {
  RunConfig a;
  RunConfig b = a;
  b.max_steps = 40;
  CHECK(a.fingerprint() == b.fingerprint());
  b.seed = 1;
  CHECK(a.fingerprint() != b.fingerprint());
  RunConfig c = a;
  c.optimizer_temperature = 1.0;
  CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("item bank validation") {
  auto bank = fixtures::synthetic_bank(Trait::openness, 3, true);
  auto report = validate_item_bank(bank);
  CHECK(report.valid());
  CHECK(report.source_count == 3);
  CHECK(report.twin_count == 3);
  CHECK(report.paraphrase_coverage == 1.0);

  SUBCASE("bad keying") {
    bank[0].options[0].keyed = bank[0].options[0].keyed == Keyed::high ? Keyed::low : Keyed::high;
    CHECK_FALSE(validate_item_bank(bank).valid());
  }
  SUBCASE("duplicate id") {
    bank[2].id = bank[0].id;
    CHECK_FALSE(validate_item_bank(bank).valid());
  }
  SUBCASE("dangling paraphrase") {
    bank[1].paraphrase_of = "nope";
    CHECK_FALSE(validate_item_bank(bank).valid());
  }
  SUBCASE("cross-trait paraphrase") {
    bank[1].trait = Trait::neuroticism;
    CHECK_FALSE(validate_item_bank(bank).valid());
  }
  SUBCASE("three options") {
    bank[0].options.pop_back();
    CHECK_FALSE(validate_item_bank(bank).valid());
  }
  SUBCASE("partial coverage") {
    bank.erase(bank.begin() + 1);
    const auto r = validate_item_bank(bank);
    CHECK(r.valid());
    CHECK(r.paraphrase_coverage == doctest::Approx(2.0 / 3.0));
  }
}

TEST_CASE("property: item json round-trip on random items") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const Trait trait = kAllTraits[rng.uniform(5)];
    auto item = fixtures::make_item("it-" + std::to_string(trial), trait,
                                    "Scene " + std::to_string(rng.next()), rng.next());
    if (rng.uniform(2) == 0) item.paraphrase_of = "src-" + std::to_string(trial);
    if (rng.uniform(3) == 0) item.question.clear();
    json j = item;
    CHECK(j.get<QuestionItem>() == item);
  }
}

TEST_CASE("scored prompt json round-trip") {
  ScoredPrompt s;
  s.prompt = PersonaPrompt("P", PromptOrigin::generated(2));
  s.trait = Trait::neuroticism;
  s.s_origin = 0.75;
  s.s_consist = 2.0 / 3.0;
  s.s_ps = 0.5;
  s.step = 2;
  s.question_sample = {"a", "b"};
  json j = s;
  CHECK(json::parse(j.dump()).get<ScoredPrompt>() == s);
}
