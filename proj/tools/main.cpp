#include <termios.h>
#include <unistd.h>

#include <iostream>
#include <optional>

#include "cli.hpp"

namespace {

// Single-key input while a terminal drill runs.
class RawTerminal {
 public:
  RawTerminal() : active_(isatty(STDIN_FILENO) && tcgetattr(STDIN_FILENO, &saved_) == 0) {
    if (!active_) return;
    termios raw = saved_;
    raw.c_lflag &= static_cast<tcflag_t>(~(ICANON | ECHO));
    raw.c_cc[VMIN] = 1;
    raw.c_cc[VTIME] = 0;
    tcsetattr(STDIN_FILENO, TCSANOW, &raw);
  }
  ~RawTerminal() {
    if (active_) tcsetattr(STDIN_FILENO, TCSANOW, &saved_);
  }
  RawTerminal(const RawTerminal&) = delete;
  RawTerminal& operator=(const RawTerminal&) = delete;

  bool active() const { return active_; }

 private:
  bool active_;
  termios saved_{};
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<RawTerminal> raw;
  dt::cli::KeySource keys = [&](char& c) {
    if (!raw) raw.emplace();
    if (raw->active()) {
      std::cout.flush();
      return read(STDIN_FILENO, &c, 1) == 1;
    }
    return static_cast<bool>(std::cin.get(c));
  };
  return dt::cli::run(args, {std::cin, std::cout, std::cerr, keys});
}
