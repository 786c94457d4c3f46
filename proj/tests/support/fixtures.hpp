#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "drilltutor/drill.hpp"
#include "drilltutor/pattern.hpp"
#include "drilltutor/text.hpp"

namespace dt::test {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(DT_FIXTURES) / name; }

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dt-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Deterministic clock that advances by `step` on every call.
class StepClock {
 public:
  explicit StepClock(std::chrono::milliseconds step = std::chrono::milliseconds(1000))
      : now_(parse_iso8601("2026-10-15T09:00:00.000Z")), step_(step) {}
  Timestamp operator()() {
    auto t = now_;
    now_ += step_;
    return t;
  }
  Timestamp peek() const { return now_; }
  void advance(std::chrono::milliseconds d) { now_ += d; }

 private:
  Timestamp now_;
  std::chrono::milliseconds step_;
};

inline LexicalValue value(const std::string& variable, const std::string& en, const std::string& ja,
                          const std::string& kana = {}) {
  LexicalValue v{variable, {{"en", en}, {"ja", ja}}};
  if (!kana.empty()) v.renderings["ja-Hira"] = kana;
  return v;
}

/// The "present somebody" pattern with two values per variable.
inline PatternTemplate introduction_pattern() {
  return PatternTemplate::from_text(
      "present-title-origin",
      {{"en", "This is <title> <name> from <origin>."},
       {"ja", "Kono kata wa <origin> no <name> <title> desu."},
       {"ja-Hira", "このかたは <origin> の <name> <title> です。"}},
      {"title", "name", "origin"});
}

inline std::map<VariableName, std::vector<LexicalValue>> introduction_values() {
  return {{"title", {value("title", "Mr", "san", "さん"), value("title", "Prof", "sensei", "せんせい")}},
          {"name", {value("name", "Schmidt", "Shimito", "しみと"), value("name", "Tsuji", "Tsuji", "つじ")}},
          {"origin", {value("origin", "Germany", "doitsu", "どいつ"), value("origin", "Japan", "nihon", "にほん")}}};
}

}  // namespace dt::test
