#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace personaopt {

std::string sha256_hex(std::string_view data);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool iequals(std::string_view a, std::string_view b);
bool contains(std::string_view haystack, std::string_view needle);
// Lowercase and collapse every whitespace run to one space; trims the ends.
std::string normalize_space(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Replaces {{name}} slots. Unknown slots raise a config error so template
// typos surface immediately instead of leaking into prompts.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& slots);

// Rough token estimate used for meta-prompt budgeting: one token per four
// bytes, rounded up.
std::size_t estimate_tokens(std::string_view text);

std::string read_file(const std::string& path);
// Writes via a temporary sibling and rename so readers never observe a
// partially written file.
void write_file_atomic(const std::string& path, std::string_view content);

// Fixed-precision decimal rendering independent of the global locale.
std::string format_fixed(double value, int decimals);

}  // namespace personaopt
