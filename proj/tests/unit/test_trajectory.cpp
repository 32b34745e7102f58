#include "doctest.h"
#include "fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <functional>

#include "personaopt/errors.hpp"
#include "personaopt/evaluation.hpp"
#include "personaopt/mock_backend.hpp"
#include "personaopt/text.hpp"
#include "personaopt/trajectory.hpp"

using namespace personaopt;
namespace fs = std::filesystem;

namespace {

ErrorKind error_of(const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::state;
}

ScoredPrompt entry(const std::string& text, double s_ps, int step) {
  ScoredPrompt s;
  s.prompt = text.empty() ? PersonaPrompt::empty_origin() : PersonaPrompt(text, PromptOrigin::generated(step));
  s.s_ps = s_ps;
  s.s_origin = s_ps;
  s.s_consist = s_ps > 0 ? 1.0 : 0.0;
  s.step = step;
  return s;
}

}  // namespace

TEST_CASE("trailing average on a hand-computed fixture") {
  const std::vector<double> values = {0.1, 0.4, 0.2, 0.8, 0.5, 0.9, 0.3, 0.7, 1.0, 0.6};
  // out[i] = mean of the last min(i+1, 8) values, summed by hand.
  const std::vector<double> expected = {
      0.1 / 1, 0.5 / 2, 0.7 / 3, 1.5 / 4, 2.0 / 5, 2.9 / 6, 3.2 / 7, 3.9 / 8,
      (3.9 - 0.1 + 1.0) / 8, (3.9 - 0.1 - 0.4 + 1.0 + 0.6) / 8};
  const auto got = trailing_average(values, 8);
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - expected[i]) <= 1e-12);

  CHECK(trailing_average(values, 1) == values);
  CHECK(trailing_average(std::vector<double>{}, 3).empty());
  CHECK(error_of([&] { trailing_average(values, 0); }) == ErrorKind::domain);
}

TEST_CASE("property: trailing average stays within the window's range") {
  Rng gen(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> values(1 + gen.uniform(30));
    for (auto& v : values) v = gen.uniform_real();
    const int window = 1 + static_cast<int>(gen.uniform(12));
    const auto out = trailing_average(values, window);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
      double sum = 0.0, mn = 1.0, mx = 0.0;
      for (std::size_t j = lo; j <= i; ++j) {
        sum += values[j];
        mn = std::min(mn, values[j]);
        mx = std::max(mx, values[j]);
      }
      CHECK(out[i] >= mn - 1e-12);
      CHECK(out[i] <= mx + 1e-12);
      CHECK(std::abs(out[i] - sum / static_cast<double>(i + 1 - lo)) <= 1e-12);
    }
  }
}

TEST_CASE("curves take per-step mean or max") {
  TrajectoryBuffer buffer;
  buffer.append_step(0, {entry("", 0.0, 0)});
  buffer.append_step(1, {entry("a", 0.2, 1), entry("b", 0.6, 1)});
  buffer.append_step(2, {});
  buffer.append_step(3, {entry("c", 1.0, 3)});
  const auto mean = curve(buffer, Trait::openness, 2);
  CHECK(mean.points == std::vector<CurvePoint>{{0, 0.0}, {1, 0.4}, {3, 1.0}});
  REQUIRE(mean.smoothed.size() == 3);
  CHECK(mean.smoothed[1].value == doctest::Approx(0.2));
  CHECK(mean.smoothed[2].value == doctest::Approx(0.7));
  const auto max = curve(buffer, Trait::openness, 8, CurveStat::max);
  CHECK(max.points[1].value == 0.6);

  const json j = mean;
  CHECK(j["window"] == 2);
  CHECK(j["points"].size() == 3);
  const auto svg = render_svg(mean);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(contains(svg, "polyline"));

  CHECK(error_of([] { curve(TrajectoryBuffer{}, Trait::openness); }) == ErrorKind::state);
  CHECK(error_of([&] { curve(buffer, Trait::openness, 0); }) == ErrorKind::domain);
}

TEST_CASE("default checkpoint steps") {
  CHECK(default_checkpoint_steps(25) == std::vector<int>{6, 16, 24});
  CHECK(default_checkpoint_steps(15) == std::vector<int>{5, 10, 15});
  CHECK(default_checkpoint_steps(9) == std::vector<int>{3, 6, 9});
  CHECK(default_checkpoint_steps(1) == std::vector<int>{1});
}

TEST_CASE("checkpoint sampling is seeded per step") {
  TrajectoryBuffer buffer;
  buffer.append_step(0, {entry("", 0.0, 0)});
  for (int s = 1; s <= 4; ++s) {
    std::vector<ScoredPrompt> entries;
    for (int i = 0; i < 6; ++i) entries.push_back(entry("s" + std::to_string(s) + "-" + std::to_string(i), 0.1 * i, s));
    buffer.append_step(s, entries);
  }
  const std::vector<int> steps = {1, 3};
  const auto a = checkpoints(buffer, steps, 4);
  REQUIRE(a.size() == 2);
  CHECK(a[0].step == 1);
  CHECK(a[0].entry.step == 1);
  CHECK(a[1].entry.step == 3);
  CHECK(a[0].candidates_at_step == 6);
  CHECK(a[0].selection_seed == derive_seed(4, "checkpoint", {1}));
  const auto b = checkpoints(buffer, steps, 4);
  CHECK(a[0].entry == b[0].entry);

  // Over many seeds every candidate at a step gets picked.
  std::set<std::string> picked;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    picked.insert(checkpoints(buffer, std::vector<int>{2}, seed)[0].entry.prompt.text());
  }
  CHECK(picked.size() == 6);

  try {
    checkpoints(buffer, std::vector<int>{9}, 1);
    FAIL("expected lookup error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::lookup);
    CHECK(contains(e.what(), "9"));
  }
  CHECK(checkpoints(buffer, std::vector<int>{}, 1).empty());
}

TEST_CASE("checkpoints export and reload") {
  fixtures::TempDir dir;
  Checkpoint c;
  c.step = 6;
  c.entry = entry("Explorer.", 0.5, 6);
  c.entry.question_sample = {"q1", "q2"};
  c.selection_seed = 77;
  c.candidates_at_step = 8;
  c.scoring_seed = 3;
  c.target_model = "t";
  c.summary = "Adventurous.";
  export_checkpoint(dir.path(), c);
  CHECK(checkpoint_path(dir.path(), 6) == (fs::path(dir.path()) / "step-6.json").string());
  const auto back = load_checkpoint(checkpoint_path(dir.path(), 6));
  CHECK(back.entry == c.entry);
  CHECK(back.summary == c.summary);
  CHECK_FALSE(back.summary_error);
  CHECK(back.target_model == "t");

  write_file_atomic(dir.file("bad.json"), "{\"step\": 1}");
  CHECK(error_of([&] { load_checkpoint(dir.file("bad.json")); }) == ErrorKind::format);
  CHECK(error_of([&] { load_checkpoint(dir.file("none.json")); }) == ErrorKind::lookup);
}

TEST_CASE("reloaded checkpoints reproduce their recorded scores") {
  fixtures::TempDir dir;
  RunOptions options;
  options.run_dir = dir.file("run");
  const auto config = fixtures::hill_config(5, 3);
  const auto split = fixtures::hill_split();
  const auto result = run(config, {fixtures::hill_optimizer(), fixtures::hill_target()}, split, options);
  const auto picked = checkpoints(result.buffer, default_checkpoint_steps(5), config.seed);
  for (auto c : picked) {
    c.scoring_seed = config.seed;
    c.target_model = config.target_model;
    export_checkpoint(dir.file("ckpt"), c);
    const auto condition = parse_condition("checkpoint:" + checkpoint_path(dir.file("ckpt"), c.step));
    CHECK(condition.name == "checkpoint:" + std::to_string(c.step));
    const auto items = checkpoint_sample(c, split.train);
    auto target = fixtures::hill_target();
    const auto report = evaluate(condition, Trait::openness, config.target_model, *target, items, c.scoring_seed);
    CHECK(report.scores->s_ps == c.entry.s_ps);
    CHECK(report.scores->s_origin == c.entry.s_origin);
  }
  Checkpoint ghost = picked.front();
  ghost.entry.question_sample.push_back("missing");
  CHECK(error_of([&] { checkpoint_sample(ghost, split.train); }) == ErrorKind::lookup);
  CHECK(error_of([&] { checkpoint_condition(ghost).prompt_for(Trait::neuroticism); }) == ErrorKind::lookup);
}

TEST_CASE("summaries fail per checkpoint") {
  std::vector<Checkpoint> list(3);
  for (int i = 0; i < 3; ++i) {
    list[i].step = i + 1;
    list[i].entry = entry("Profile number " + std::to_string(i), 0.1, i + 1);
  }
  FunctionBackend summarizer("sum", [](const ChatRequest& r) -> std::string {
    if (contains(r.user, "number 1")) fail(ErrorKind::transport, "summarizer down");
    return "  A one-line summary.\n";
  });
  summarize_checkpoints(list, summarizer);
  CHECK(list[0].summary == "A one-line summary.");
  CHECK_FALSE(list[1].summary);
  REQUIRE(list[1].summary_error);
  CHECK(contains(*list[1].summary_error, "summarizer down"));
  CHECK(list[2].summary.has_value());

  std::vector<Checkpoint> none;
  summarize_checkpoints(none, summarizer);
  CHECK(none.empty());
}
