#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drilltutor/pattern.hpp"
#include "drilltutor/text.hpp"

namespace dt {

/// Which rendering plays which role in a drill.
struct DrillLanguages {
  LanguageCode interface = "en";
  LanguageCode target = "ja";
  LanguageCode kana = "ja-Hira";

  bool operator==(const DrillLanguages&) const = default;
};

/// One combination (pattern + specific words) on the exercise list.
struct DrillItem {
  std::string pattern_id;
  ValueTuple tuple;
  std::string source_sentence;  // interface language, for the model
  std::string stimulus;         // e.g. "Prof, Tsuji, Japan"
  std::string target_sentence;  // romanized target
  std::string kana_sentence;    // empty when the pattern has no kana rendering
  std::map<VariableName, Span> target_spans;

  bool operator==(const DrillItem&) const = default;
};

/// Builds the item for one tuple. The stimulus lists the interface-language
/// renderings in the pattern's variable order.
DrillItem make_drill_item(const PatternTemplate& pattern, const ValueTuple& tuple,
                          const DrillLanguages& languages = {});
std::vector<DrillItem> make_drill_items(const PatternTemplate& pattern,
                                        const std::map<VariableName, std::vector<LexicalValue>>& values,
                                        const DrillLanguages& languages = {});

enum class Order { shuffled, fixed };

struct SessionConfig {
  /// Consecutive correct answers after which an item leaves the list.
  std::size_t removal_streak = 2;
  /// A wrongly answered item comes back within this many stimuli.
  std::size_t reinsert_window = 3;
  Order order = Order::shuffled;
  /// Cap on the number of stimuli presented.
  std::optional<std::size_t> max_rounds;
  std::uint64_t seed = 0;
  /// Pause a front end should leave before showing the next stimulus.
  std::chrono::milliseconds stimulus_delay{0};

  /// Throws Error(InvalidConfig).
  void validate() const;
};

enum class Phase { Model, AwaitReport, Feedback, Done };
enum class SelfReport { correct, incorrect };

std::string_view phase_name(Phase phase) noexcept;

enum class EventKind { start, stimulus, report, removed, reinserted, done };

std::string_view event_kind_name(EventKind kind) noexcept;

/// One line of the append-only session log.
struct SessionEvent {
  Timestamp timestamp;
  std::string session_id;
  EventKind kind = EventKind::start;
  std::optional<std::size_t> item;
  std::string payload;

  bool operator==(const SessionEvent&) const = default;
};

/// Tab-separated: timestamp, session id, kind, item (or '-'), payload.
std::string format_event(const SessionEvent& event);
SessionEvent parse_event(std::string_view line);

struct Counters {
  std::size_t presentations = 0;
  std::size_t corrects = 0;
  std::size_t errors = 0;

  bool operator==(const Counters&) const = default;
};

struct SessionStats {
  std::vector<Counters> items;
  std::map<std::string, Counters> patterns;
  Counters totals;
  std::optional<Timestamp> started;
  std::optional<Timestamp> ended;

  bool operator==(const SessionStats&) const = default;
};

/// Statistics are a fold over the event log.
SessionStats fold_events(std::span<const SessionEvent> events, std::span<const DrillItem> items);

struct PatternReport {
  std::string pattern_id;
  std::size_t presentations = 0;
  std::size_t errors = 0;
  double error_rate = 0.0;
};

/// Per-pattern error rates, most problematic first (ties by pattern id).
std::vector<PatternReport> session_report(const SessionStats& stats);

struct Stimulus {
  std::size_t item = 0;
  std::string pattern_id;
  std::string text;
  std::size_t round = 0;  // 1-based count of stimuli presented so far
};

struct Feedback {
  std::size_t item = 0;
  std::string target_sentence;
  std::string kana_sentence;
  SelfReport verification = SelfReport::correct;
  std::size_t streak = 0;
  bool removed = false;
  bool done = false;
};

/// The state machine of one drill run:
/// Model -> (AwaitReport -> Feedback)* -> Done.
class DrillSession {
 public:
  using Clock = std::function<Timestamp()>;

  static DrillSession start(std::vector<DrillItem> items, SessionConfig config,
                            std::string session_id = "session", Clock clock = {});

  const std::string& id() const noexcept { return id_; }
  const SessionConfig& config() const noexcept { return config_; }
  Phase phase() const noexcept { return phase_; }
  const std::vector<DrillItem>& items() const noexcept { return items_; }
  /// The fully worked first example.
  const DrillItem& model() const { return items_[model_]; }
  std::size_t model_index() const noexcept { return model_; }
  /// Pending item indices; the current item (while awaiting a report) is not in it.
  const std::deque<std::size_t>& queue() const noexcept { return queue_; }
  std::optional<std::size_t> current() const noexcept { return current_; }
  std::size_t streak(std::size_t item) const { return streaks_.at(item); }
  bool removed(std::size_t item) const { return removed_.at(item); }
  std::size_t rounds() const noexcept { return rounds_; }

  /// Throws SessionDone when nothing is left, WrongPhase while a report is due.
  Stimulus next_stimulus();
  /// Throws WrongPhase unless a stimulus is awaiting its report.
  Feedback reveal_and_report(SelfReport report);
  /// The student decides to stop.
  void stop();

  const std::vector<SessionEvent>& events() const noexcept { return events_; }
  SessionStats stats() const { return fold_events(events_, items_); }
  std::vector<PatternReport> report() const { return session_report(stats()); }

 private:
  DrillSession() = default;
  void log(EventKind kind, std::optional<std::size_t> item, std::string payload = {});
  std::size_t draw(std::size_t bound);
  void finish();

  std::string id_;
  SessionConfig config_;
  Clock clock_;
  std::mt19937_64 rng_;
  std::vector<DrillItem> items_;
  std::deque<std::size_t> queue_;
  std::vector<std::size_t> streaks_;
  std::vector<bool> removed_;
  std::vector<std::optional<std::size_t>> deadlines_;  // latest round for a re-presentation
  std::optional<std::size_t> current_;
  std::size_t model_ = 0;
  std::size_t rounds_ = 0;
  Phase phase_ = Phase::Model;
  std::vector<SessionEvent> events_;
};

/// Uniform integer in [0, bound) by rejection sampling, so shuffles depend
/// only on the engine's output sequence.
std::size_t uniform_below(std::mt19937_64& rng, std::size_t bound);

}  // namespace dt
