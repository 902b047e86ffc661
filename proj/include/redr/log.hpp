#pragma once

#include <functional>
#include <string_view>

namespace redr::log {

using Sink = std::function<void(std::string_view level, std::string_view message)>;

// Replaces the process-wide sink and returns the previous one. The default
// sink writes "[level] message" lines to stderr.
Sink set_sink(Sink sink);

void warn(std::string_view message);
void info(std::string_view message);

}  // namespace redr::log
