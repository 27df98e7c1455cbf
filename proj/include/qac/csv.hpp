#pragma once

#include <cstdio>
#include <string>

namespace qac {

// Shortest round-trip-safe decimal form of a double (17 significant digits).
inline std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace qac
