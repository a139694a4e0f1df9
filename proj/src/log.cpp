#include "tif/log.hpp"

#include <iostream>
#include <mutex>

namespace tif {

namespace {
std::mutex g_mutex;
bool g_quiet = false;
std::vector<std::string> g_warnings;
}  // namespace

void set_quiet(bool q) {
  std::lock_guard lock(g_mutex);
  g_quiet = q;
}

bool quiet() {
  std::lock_guard lock(g_mutex);
  return g_quiet;
}

void warn(const std::string& message) {
  std::lock_guard lock(g_mutex);
  g_warnings.push_back(message);
  if (!g_quiet) std::cerr << "warning: " << message << '\n';
}

void info(const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (!g_quiet) std::cerr << message << '\n';
}

std::vector<std::string> drain_warnings() {
  std::lock_guard lock(g_mutex);
  std::vector<std::string> out;
  out.swap(g_warnings);
  return out;
}

}  // namespace tif
