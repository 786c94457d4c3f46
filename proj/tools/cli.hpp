#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dt::cli {

/// Reads one key press; returns false at end of input.
using KeySource = std::function<bool(char&)>;

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  /// Defaults to reading characters from `in`.
  KeySource keys;
};

/// Exit codes: 0 success, 1 domain error, 2 usage error.
int run(const std::vector<std::string>& args, Io io);

}  // namespace dt::cli
