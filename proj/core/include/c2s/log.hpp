#pragma once

#include <string_view>

namespace c2s::log {

// Verbosity comes from the C2S_LOG environment variable
// (trace, debug, info, warn, error, off); default is info.
void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

void set_level(std::string_view level);

}  // namespace c2s::log
