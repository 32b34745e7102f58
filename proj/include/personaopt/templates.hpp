#pragma once

#include <string>
#include <string_view>

namespace personaopt {

// Text files from templates/ compiled into the binary. Names are file names,
// e.g. "meta_prompt.txt". Unknown names are a lookup error.
const std::string& embedded_template(std::string_view name);

// The on-disk override when `path` is non-empty, the embedded copy otherwise.
std::string load_template(const std::string& path, std::string_view embedded_name);

}  // namespace personaopt
