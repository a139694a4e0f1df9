#pragma once

#include <string>
#include <vector>

namespace tif {

/// Warnings go to stderr unless quiet; every warning is also retained so
/// reports can echo them.
void set_quiet(bool quiet);
bool quiet();
void warn(const std::string& message);
void info(const std::string& message);

/// Warnings recorded since the last call; clears the buffer.
std::vector<std::string> drain_warnings();

}  // namespace tif
