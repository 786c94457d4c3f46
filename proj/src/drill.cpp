#include "drilltutor/drill.hpp"

#include <algorithm>
#include <limits>

#include "drilltutor/error.hpp"

namespace dt {

DrillItem make_drill_item(const PatternTemplate& pattern, const ValueTuple& tuple,
                          const DrillLanguages& languages) {
  DrillItem item;
  item.pattern_id = pattern.id();
  item.tuple = tuple;
  if (pattern.has_rendering(languages.interface))
    item.source_sentence = instantiate(pattern, languages.interface, tuple);
  std::vector<std::string> stimulus;
  for (const auto& name : pattern.variables()) {
    auto it = tuple.find(name);
    if (it == tuple.end()) throw Error(ErrorKind::MissingAssignment, name);
    stimulus.push_back(it->second.in(languages.interface));
  }
  item.stimulus = join(stimulus, ", ");
  auto target = instantiate_with_spans(pattern, languages.target, tuple);
  item.target_sentence = std::move(target.text);
  item.target_spans = std::move(target.spans);
  if (pattern.has_rendering(languages.kana))
    item.kana_sentence = instantiate(pattern, languages.kana, tuple);
  return item;
}

std::vector<DrillItem> make_drill_items(const PatternTemplate& pattern,
                                        const std::map<VariableName, std::vector<LexicalValue>>& values,
                                        const DrillLanguages& languages) {
  std::vector<DrillItem> items;
  for (const auto& e : enumerate(pattern, languages.target, values))
    items.push_back(make_drill_item(pattern, e.tuple, languages));
  return items;
}

void SessionConfig::validate() const {
  if (removal_streak < 1) throw Error(ErrorKind::InvalidConfig, "removal streak must be >= 1");
  if (reinsert_window < 1) throw Error(ErrorKind::InvalidConfig, "reinsert window must be >= 1");
  if (max_rounds && *max_rounds < 1) throw Error(ErrorKind::InvalidConfig, "max rounds must be >= 1");
  if (stimulus_delay.count() < 0) throw Error(ErrorKind::InvalidConfig, "negative delay");
}

std::string_view phase_name(Phase phase) noexcept {
  switch (phase) {
    case Phase::Model: return "model";
    case Phase::AwaitReport: return "await_report";
    case Phase::Feedback: return "feedback";
    case Phase::Done: return "done";
  }
  return "?";
}

std::string_view event_kind_name(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::start: return "start";
    case EventKind::stimulus: return "stimulus";
    case EventKind::report: return "report";
    case EventKind::removed: return "removed";
    case EventKind::reinserted: return "reinserted";
    case EventKind::done: return "done";
  }
  return "?";
}

namespace {

EventKind parse_event_kind(std::string_view name) {
  for (auto k : {EventKind::start, EventKind::stimulus, EventKind::report, EventKind::removed,
                 EventKind::reinserted, EventKind::done})
    if (event_kind_name(k) == name) return k;
  throw Error(ErrorKind::ConstraintViolation, "unknown event kind '" + std::string(name) + "'");
}

std::string clean_field(std::string_view s) {
  std::string out(s);
  std::replace_if(out.begin(), out.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return out;
}

}  // namespace

std::string format_event(const SessionEvent& e) {
  std::string line = format_iso8601(e.timestamp);
  line += '\t';
  line += clean_field(e.session_id);
  line += '\t';
  line += event_kind_name(e.kind);
  line += '\t';
  line += e.item ? std::to_string(*e.item) : "-";
  line += '\t';
  line += clean_field(e.payload);
  return line;
}

SessionEvent parse_event(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  const auto fields = split(line, '\t');
  if (fields.size() != 5)
    throw Error(ErrorKind::ConstraintViolation, "event line needs 5 fields: '" + std::string(line) + "'");
  SessionEvent e;
  e.timestamp = parse_iso8601(fields[0]);
  e.session_id = fields[1];
  e.kind = parse_event_kind(fields[2]);
  if (fields[3] != "-") {
    try {
      e.item = static_cast<std::size_t>(std::stoull(fields[3]));
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConstraintViolation, "bad item id '" + fields[3] + "'");
    }
  }
  e.payload = fields[4];
  return e;
}

SessionStats fold_events(std::span<const SessionEvent> events, std::span<const DrillItem> items) {
  SessionStats stats;
  stats.items.resize(items.size());
  for (const auto& item : items) stats.patterns.try_emplace(item.pattern_id);
  for (const auto& e : events) {
    if (e.kind == EventKind::start) {
      stats.started = e.timestamp;
      continue;
    }
    if (e.kind == EventKind::done) {
      stats.ended = e.timestamp;
      continue;
    }
    if (!e.item || *e.item >= items.size()) continue;
    auto& item = stats.items[*e.item];
    auto& pattern = stats.patterns[items[*e.item].pattern_id];
    if (e.kind == EventKind::stimulus) {
      ++item.presentations;
      ++pattern.presentations;
      ++stats.totals.presentations;
    } else if (e.kind == EventKind::report) {
      const bool ok = e.payload == "correct";
      (ok ? item.corrects : item.errors)++;
      (ok ? pattern.corrects : pattern.errors)++;
      (ok ? stats.totals.corrects : stats.totals.errors)++;
    }
  }
  return stats;
}

std::vector<PatternReport> session_report(const SessionStats& stats) {
  std::vector<PatternReport> out;
  for (const auto& [id, c] : stats.patterns) {
    PatternReport r;
    r.pattern_id = id;
    r.presentations = c.presentations;
    r.errors = c.errors;
    r.error_rate = c.presentations ? static_cast<double>(c.errors) / c.presentations : 0.0;
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const PatternReport& a, const PatternReport& b) {
    return a.error_rate > b.error_rate;
  });
  return out;
}

std::size_t uniform_below(std::mt19937_64& rng, std::size_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t b = bound;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % b;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % b);
}

DrillSession DrillSession::start(std::vector<DrillItem> items, SessionConfig config,
                                 std::string session_id, Clock clock) {
  if (items.empty()) throw Error(ErrorKind::EmptyItemList, "a drill needs at least one item");
  config.validate();
  DrillSession s;
  s.id_ = std::move(session_id);
  s.config_ = config;
  s.clock_ = clock ? std::move(clock) : Clock([] { return std::chrono::system_clock::now(); });
  s.rng_.seed(config.seed);
  s.items_ = std::move(items);
  s.streaks_.assign(s.items_.size(), 0);
  s.removed_.assign(s.items_.size(), false);
  s.deadlines_.assign(s.items_.size(), std::nullopt);

  std::vector<std::size_t> order(s.items_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (config.order == Order::shuffled) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[s.draw(i)]);
  }
  s.queue_.assign(order.begin(), order.end());
  s.model_ = s.queue_.front();
  s.log(EventKind::start, std::nullopt,
        "items=" + std::to_string(s.items_.size()) + " seed=" + std::to_string(config.seed) +
            " order=" + (config.order == Order::shuffled ? "shuffled" : "fixed"));
  return s;
}

std::size_t DrillSession::draw(std::size_t bound) { return uniform_below(rng_, bound); }

void DrillSession::log(EventKind kind, std::optional<std::size_t> item, std::string payload) {
  events_.push_back({clock_(), id_, kind, item, std::move(payload)});
}

void DrillSession::finish() {
  if (phase_ == Phase::Done) return;
  std::string why = queue_.empty() && !current_ ? "completed" : "stopped";
  if (config_.max_rounds && rounds_ >= *config_.max_rounds && !queue_.empty()) why = "max_rounds";
  phase_ = Phase::Done;
  log(EventKind::done, std::nullopt, why);
}

Stimulus DrillSession::next_stimulus() {
  if (phase_ == Phase::Done) throw Error(ErrorKind::SessionDone, id_);
  if (phase_ == Phase::AwaitReport) throw Error(ErrorKind::WrongPhase, "a report is due first");
  if (queue_.empty() || (config_.max_rounds && rounds_ >= *config_.max_rounds)) {
    finish();
    throw Error(ErrorKind::SessionDone, id_);
  }
  const std::size_t round = rounds_ + 1;
  // An item answered wrongly must come back inside its window; deadlines
  // are distinct, so at most one item can be due in any round.
  auto pick = queue_.begin();
  for (auto it = queue_.begin(); it != queue_.end(); ++it) {
    if (deadlines_[*it] && *deadlines_[*it] <= round) {
      pick = it;
      break;
    }
  }
  const std::size_t item = *pick;
  queue_.erase(pick);
  deadlines_[item].reset();
  current_ = item;
  rounds_ = round;
  phase_ = Phase::AwaitReport;
  log(EventKind::stimulus, item);
  return {item, items_[item].pattern_id, items_[item].stimulus, round};
}

Feedback DrillSession::reveal_and_report(SelfReport report) {
  if (phase_ != Phase::AwaitReport || !current_)
    throw Error(ErrorKind::WrongPhase, std::string("cannot report in phase ") + std::string(phase_name(phase_)));
  const std::size_t item = *current_;
  current_.reset();
  Feedback fb;
  fb.item = item;
  fb.target_sentence = items_[item].target_sentence;
  fb.kana_sentence = items_[item].kana_sentence;
  fb.verification = report;

  if (report == SelfReport::correct) {
    log(EventKind::report, item, "correct");
    ++streaks_[item];
    if (streaks_[item] >= config_.removal_streak) {
      removed_[item] = true;
      fb.removed = true;
      log(EventKind::removed, item);
    } else {
      std::size_t pos = queue_.size();
      if (config_.order == Order::shuffled && !queue_.empty()) pos = 1 + draw(queue_.size());
      queue_.insert(queue_.begin() + static_cast<std::ptrdiff_t>(pos), item);
      log(EventKind::reinserted, item, "position=" + std::to_string(pos));
    }
  } else {
    log(EventKind::report, item, "incorrect");
    streaks_[item] = 0;
    const std::size_t pos = std::min(config_.reinsert_window - 1, queue_.size());
    queue_.insert(queue_.begin() + static_cast<std::ptrdiff_t>(pos), item);
    deadlines_[item] = rounds_ + config_.reinsert_window;
    log(EventKind::reinserted, item, "position=" + std::to_string(pos));
  }
  fb.streak = streaks_[item];
  phase_ = Phase::Feedback;
  if (queue_.empty() || (config_.max_rounds && rounds_ >= *config_.max_rounds)) finish();
  fb.done = phase_ == Phase::Done;
  return fb;
}

void DrillSession::stop() { finish(); }

}  // namespace dt
