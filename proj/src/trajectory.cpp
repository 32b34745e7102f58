#include "personaopt/trajectory.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "personaopt/rng.hpp"
#include "personaopt/templates.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace fs = std::filesystem;

std::vector<double> trailing_average(std::span<const double> values, int window) {
  if (window < 1) fail(ErrorKind::domain, "smoothing window must be >= 1");
  std::vector<double> out;
  out.reserve(values.size());
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t begin = i + 1 >= w ? i + 1 - w : 0;
    double sum = 0.0;
    for (std::size_t k = begin; k <= i; ++k) sum += values[k];
    out.push_back(sum / static_cast<double>(i - begin + 1));
  }
  return out;
}

Curve curve(const TrajectoryBuffer& buffer, Trait trait, int window, CurveStat stat) {
  if (window < 1) fail(ErrorKind::domain, "smoothing window must be >= 1");
  if (buffer.empty()) fail(ErrorKind::state, "cannot plot an empty buffer");
  Curve out;
  out.trait = trait;
  out.stat = stat;
  out.window = window;
  std::vector<double> raw;
  for (int step : buffer.steps()) {
    const auto entries = buffer.at_step(step);
    double value = 0.0;
    if (stat == CurveStat::mean) {
      for (const auto& e : entries) value += e.s_ps;
      value /= static_cast<double>(entries.size());
    } else {
      for (const auto& e : entries) value = std::max(value, e.s_ps);
    }
    out.points.push_back({step, value});
    raw.push_back(value);
  }
  const auto smoothed = trailing_average(raw, window);
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    out.smoothed.push_back({out.points[i].step, smoothed[i]});
  }
  return out;
}

void to_json(json& j, const Curve& curve) {
  auto encode = [](const std::vector<CurvePoint>& points) {
    json out = json::array();
    for (const auto& p : points) out.push_back({{"step", p.step}, {"value", p.value}});
    return out;
  };
  j = json{{"trait", curve.trait},
           {"stat", curve.stat == CurveStat::mean ? "mean" : "max"},
           {"window", curve.window},
           {"points", encode(curve.points)},
           {"smoothed", encode(curve.smoothed)}};
}

std::string render_svg(const Curve& curve) {
  constexpr double kWidth = 640, kHeight = 360, kLeft = 50, kRight = 20, kTop = 30, kBottom = 40;
  const int first = curve.points.empty() ? 0 : curve.points.front().step;
  const int last = curve.points.empty() ? 1 : std::max(curve.points.back().step, first + 1);
  auto x = [&](int step) {
    return kLeft + (kWidth - kLeft - kRight) * (step - first) / static_cast<double>(last - first);
  };
  auto y = [&](double value) { return kHeight - kBottom - (kHeight - kTop - kBottom) * value; };
  auto polyline = [&](const std::vector<CurvePoint>& points, const char* style) {
    std::string out = "  <polyline fill=\"none\" " + std::string(style) + " points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i > 0) out += ' ';
      out += format_fixed(x(points[i].step), 2) + "," + format_fixed(y(points[i].value), 2);
    }
    return out + "\"/>\n";
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" "
                    "viewBox=\"0 0 640 360\">\n";
  svg += "  <rect width=\"640\" height=\"360\" fill=\"white\"/>\n";
  svg += "  <text x=\"50\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" +
         std::string(full_name(curve.trait)) + ": " +
         (curve.stat == CurveStat::mean ? "mean" : "max") + " s_ps per step (window " +
         std::to_string(curve.window) + ")</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick / 4.0;
    const auto yy = format_fixed(y(v), 2);
    svg += "  <line x1=\"50\" x2=\"620\" y1=\"" + yy + "\" y2=\"" + yy +
           "\" stroke=\"#ddd\"/>\n";
    svg += "  <text x=\"12\" y=\"" + yy + "\" font-family=\"sans-serif\" font-size=\"11\">" +
           format_fixed(v, 2) + "</text>\n";
  }
  svg += "  <text x=\"" + format_fixed(x(first), 2) +
         "\" y=\"350\" font-family=\"sans-serif\" font-size=\"11\">step " + std::to_string(first) +
         "</text>\n";
  svg += "  <text x=\"" + format_fixed(x(last) - 40, 2) +
         "\" y=\"350\" font-family=\"sans-serif\" font-size=\"11\">step " + std::to_string(last) +
         "</text>\n";
  svg += polyline(curve.points, "stroke=\"#9ab\" stroke-width=\"1\"");
  svg += polyline(curve.smoothed, "stroke=\"#c33\" stroke-width=\"2\"");
  svg += "</svg>\n";
  return svg;
}

// ---------------------------------------------------------------------------
// Checkpoints

void to_json(json& j, const Checkpoint& c) {
  j = json{{"step", c.step},
           {"entry", c.entry},
           {"selection_seed", c.selection_seed},
           {"candidates_at_step", c.candidates_at_step},
           {"scoring_seed", c.scoring_seed},
           {"target_model", c.target_model},
           {"summary", c.summary ? json(*c.summary) : json(nullptr)},
           {"summary_error", c.summary_error ? json(*c.summary_error) : json(nullptr)}};
}

void from_json(const json& j, Checkpoint& c) {
  c.step = j.at("step").get<int>();
  c.entry = j.at("entry").get<ScoredPrompt>();
  c.selection_seed = j.at("selection_seed").get<std::uint64_t>();
  c.candidates_at_step = j.at("candidates_at_step").get<std::size_t>();
  c.scoring_seed = j.at("scoring_seed").get<std::uint64_t>();
  c.target_model = j.at("target_model").get<std::string>();
  c.summary.reset();
  c.summary_error.reset();
  if (j.contains("summary") && !j.at("summary").is_null()) c.summary = j.at("summary").get<std::string>();
  if (j.contains("summary_error") && !j.at("summary_error").is_null()) {
    c.summary_error = j.at("summary_error").get<std::string>();
  }
}

std::vector<Checkpoint> checkpoints(const TrajectoryBuffer& buffer, std::span<const int> steps,
                                    std::uint64_t seed) {
  std::vector<Checkpoint> out;
  for (int step : steps) {
    const auto entries = buffer.at_step(step);
    if (entries.empty()) {
      fail(ErrorKind::lookup, "step " + std::to_string(step) + " is not in the buffer");
    }
    Checkpoint c;
    c.step = step;
    c.selection_seed = derive_seed(seed, "checkpoint", {static_cast<std::uint64_t>(step)});
    c.candidates_at_step = entries.size();
    Rng rng(c.selection_seed);
    c.entry = entries[static_cast<std::size_t>(rng.uniform(entries.size()))];
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<int> default_checkpoint_steps(int max_steps) {
  if (max_steps == 25) return {6, 16, 24};
  if (max_steps == 15) return {5, 10, 15};
  std::set<int> steps;
  for (int num : {1, 2, 3}) steps.insert(std::max(1, (max_steps * num + 2) / 3));
  return {steps.begin(), steps.end()};
}

std::string checkpoint_path(const std::string& dir, int step) {
  return (fs::path(dir) / ("step-" + std::to_string(step) + ".json")).string();
}

void export_checkpoint(const std::string& dir, const Checkpoint& checkpoint) {
  write_file_atomic(checkpoint_path(dir, checkpoint.step), json(checkpoint).dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return json::parse(read_file(path)).get<Checkpoint>();
  } catch (const json::exception& e) {
    fail(ErrorKind::format, path + ": " + e.what());
  }
}

void summarize_checkpoints(std::span<Checkpoint> checkpoints, ChatBackend& summarizer,
                           const SummaryOptions& options) {
  const std::string tmpl = options.summary_template.empty()
                               ? embedded_template("summarize_checkpoint.txt")
                               : options.summary_template;
  std::vector<ChatRequest> requests;
  for (const auto& c : checkpoints) {
    ChatRequest request;
    request.model_id = options.model_id;
    request.user = render_template(
        tmpl, {{"trait", to_lower(full_name(c.entry.trait))}, {"profile", c.entry.prompt.text()}});
    request.temperature = 0.0;
    request.max_tokens = options.max_tokens;
    requests.push_back(std::move(request));
  }
  const auto outcomes = complete_batch(summarizer, requests, options.max_in_flight);
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (outcomes[i].ok()) {
      checkpoints[i].summary = trim(outcomes[i].response->text);
      checkpoints[i].summary_error.reset();
    } else {
      checkpoints[i].summary.reset();
      checkpoints[i].summary_error = outcomes[i].error->message;
    }
  }
}

}  // namespace personaopt
