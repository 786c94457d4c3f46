#include <gtest/gtest.h>

#include <random>

#include "drilltutor/drill.hpp"
#include "drilltutor/error.hpp"
#include "fixtures.hpp"

using namespace dt;
using dt::test::introduction_pattern;
using dt::test::introduction_values;
using dt::test::StepClock;
using dt::test::value;

namespace {

std::vector<DrillItem> intro_items() { return make_drill_items(introduction_pattern(), introduction_values()); }

std::vector<DrillItem> numbered_items(std::size_t n, const std::string& pattern = "p") {
  std::vector<DrillItem> items(n);
  for (std::size_t i = 0; i < n; ++i) {
    items[i].pattern_id = pattern;
    items[i].stimulus = "s" + std::to_string(i);
    items[i].target_sentence = "t" + std::to_string(i);
  }
  return items;
}

SessionConfig fixed(std::size_t k = 2, std::size_t w = 3) {
  SessionConfig c;
  c.removal_streak = k;
  c.reinsert_window = w;
  c.order = Order::fixed;
  return c;
}

}  // namespace

TEST(DrillItem, TsujiStimulusAndTarget) {
  const auto p = introduction_pattern();
  ValueTuple t{{"title", value("title", "Prof", "sensei", "せんせい")},
               {"name", value("name", "Tsuji", "Tsuji", "つじ")},
               {"origin", value("origin", "Japan", "nihon", "にほん")}};
  const auto item = make_drill_item(p, t);
  EXPECT_EQ(item.stimulus, "Prof, Tsuji, Japan");
  EXPECT_EQ(item.source_sentence, "This is Prof Tsuji from Japan.");
  EXPECT_EQ(item.target_sentence, "Kono kata wa nihon no Tsuji sensei desu.");
  EXPECT_EQ(item.kana_sentence, "このかたは にほん の つじ せんせい です。");
  EXPECT_EQ(item.target_sentence, instantiate(p, "ja", t));
}

TEST(DrillItem, TsujiFeedbackIsCorrect) {
  const auto p = introduction_pattern();
  ValueTuple t{{"title", value("title", "Prof", "sensei", "せんせい")},
               {"name", value("name", "Tsuji", "Tsuji", "つじ")},
               {"origin", value("origin", "Japan", "nihon", "にほん")}};
  auto s = DrillSession::start({make_drill_item(p, t)}, fixed());
  EXPECT_EQ(s.phase(), Phase::Model);
  EXPECT_EQ(s.next_stimulus().text, "Prof, Tsuji, Japan");
  const auto fb = s.reveal_and_report(SelfReport::correct);
  EXPECT_EQ(fb.target_sentence, "Kono kata wa nihon no Tsuji sensei desu.");
  EXPECT_EQ(fb.verification, SelfReport::correct);
}

TEST(Session, EmptyItemList) {
  EXPECT_THROW(
      {
        try {
          DrillSession::start({}, {});
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::EmptyItemList);
          throw;
        }
      },
      Error);
}

TEST(Session, InvalidConfig) {
  SessionConfig c;
  c.removal_streak = 0;
  EXPECT_THROW(DrillSession::start(numbered_items(1), c), Error);
  c = {};
  c.reinsert_window = 0;
  EXPECT_THROW(DrillSession::start(numbered_items(1), c), Error);
}

TEST(Session, SingleItemIsTheModel) {
  auto s = DrillSession::start(numbered_items(1), {});
  EXPECT_EQ(s.model_index(), 0u);
  EXPECT_EQ(s.model().stimulus, "s0");
}

TEST(Session, SameSeedSameOrder) {
  SessionConfig c;
  c.seed = 99;
  auto a = DrillSession::start(numbered_items(3), c);
  auto b = DrillSession::start(numbered_items(3), c);
  EXPECT_EQ(a.queue(), b.queue());
}

TEST(Session, PhasesAndWrongPhase) {
  auto s = DrillSession::start(numbered_items(2), fixed());
  EXPECT_THROW(s.reveal_and_report(SelfReport::correct), Error);
  s.next_stimulus();
  EXPECT_EQ(s.phase(), Phase::AwaitReport);
  EXPECT_THROW(s.next_stimulus(), Error);
  s.reveal_and_report(SelfReport::correct);
  EXPECT_EQ(s.phase(), Phase::Feedback);
}

TEST(Session, TwoCorrectsRemoveWithKTwo) {
  auto s = DrillSession::start(numbered_items(1), fixed(2));
  s.next_stimulus();
  EXPECT_FALSE(s.reveal_and_report(SelfReport::correct).removed);
  EXPECT_EQ(s.next_stimulus().item, 0u);
  const auto fb = s.reveal_and_report(SelfReport::correct);
  EXPECT_TRUE(fb.removed);
  EXPECT_TRUE(fb.done);
  EXPECT_EQ(s.phase(), Phase::Done);
  try {
    s.next_stimulus();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SessionDone);
  }
}

TEST(Session, IncorrectThenKCorrects) {
  auto s = DrillSession::start(numbered_items(1), fixed(2));
  s.next_stimulus();
  EXPECT_EQ(s.reveal_and_report(SelfReport::incorrect).streak, 0u);
  for (int i = 0; i < 2; ++i) {
    s.next_stimulus();
    s.reveal_and_report(SelfReport::correct);
  }
  EXPECT_EQ(s.phase(), Phase::Done);
  const auto stats = s.stats();
  EXPECT_EQ(stats.items[0].errors, 1u);
  EXPECT_EQ(stats.items[0].presentations, 3u);
}

TEST(Session, IncorrectComesBackWithinWindow) {
  auto s = DrillSession::start(numbered_items(6), fixed(2, 3));
  const auto first = s.next_stimulus();
  s.reveal_and_report(SelfReport::incorrect);
  bool seen = false;
  for (int i = 0; i < 3 && !seen; ++i) {
    seen = s.next_stimulus().item == first.item;
    s.reveal_and_report(SelfReport::correct);
  }
  EXPECT_TRUE(seen);
}

TEST(Session, MaxRoundsStops) {
  auto c = fixed();
  c.max_rounds = 3;
  auto s = DrillSession::start(numbered_items(5), c);
  for (int i = 0; i < 3; ++i) {
    s.next_stimulus();
    s.reveal_and_report(SelfReport::correct);
  }
  EXPECT_EQ(s.phase(), Phase::Done);
  EXPECT_EQ(s.events().back().payload, "max_rounds");
}

TEST(Session, StopEndsSession) {
  auto s = DrillSession::start(numbered_items(2), fixed());
  s.stop();
  EXPECT_EQ(s.phase(), Phase::Done);
  EXPECT_EQ(s.events().back().payload, "stopped");
}

TEST(Report, ProblematicPatternFirst) {
  auto items = numbered_items(1, "easy");
  auto hard = numbered_items(1, "hard");
  items.push_back(hard[0]);
  auto s = DrillSession::start(items, fixed(1, 1));
  for (std::size_t guard = 0; s.phase() != Phase::Done && guard < 20; ++guard) {
    const auto st = s.next_stimulus();
    const bool wrong = st.pattern_id == "hard" && s.stats().items[st.item].errors < 3;
    s.reveal_and_report(wrong ? SelfReport::incorrect : SelfReport::correct);
  }
  const auto r = s.report();
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].pattern_id, "hard");
  EXPECT_EQ(r[0].errors, 3u);
  EXPECT_EQ(r[1].errors, 0u);
  EXPECT_DOUBLE_EQ(r[1].error_rate, 0.0);
}

TEST(Report, NoErrorsAllRatesZero) {
  auto s = DrillSession::start(numbered_items(3), fixed(1));
  while (s.phase() != Phase::Done) {
    s.next_stimulus();
    s.reveal_and_report(SelfReport::correct);
  }
  for (const auto& r : s.report()) EXPECT_DOUBLE_EQ(r.error_rate, 0.0);
}

TEST(Events, FormatParseRoundTrip) {
  StepClock clock;
  auto s = DrillSession::start(intro_items(), {}, "abc", std::ref(clock));
  s.next_stimulus();
  s.reveal_and_report(SelfReport::incorrect);
  for (const auto& e : s.events()) EXPECT_EQ(parse_event(format_event(e)), e);
  EXPECT_EQ(format_event(s.events()[0]).substr(0, 29), "2026-10-15T09:00:00.000Z\tabc\t");
}

// Stats recomputed from the log lines alone, by hand.
TEST(Events, TotalsMatchIndependentTally) {
  StepClock clock;
  SessionConfig c;
  c.seed = 5;
  auto s = DrillSession::start(intro_items(), c, "x", std::ref(clock));
  std::mt19937 rng(1);
  while (s.phase() != Phase::Done) {
    s.next_stimulus();
    s.reveal_and_report(rng() % 3 == 0 ? SelfReport::incorrect : SelfReport::correct);
  }
  std::size_t stimuli = 0, wrong = 0, right = 0;
  for (const auto& e : s.events()) {
    const auto line = format_event(e);
    if (line.find("\tstimulus\t") != std::string::npos) ++stimuli;
    if (line.ends_with("\tincorrect")) ++wrong;
    else if (line.ends_with("\tcorrect")) ++right;
  }
  const auto stats = s.stats();
  EXPECT_EQ(stats.totals.presentations, stimuli);
  EXPECT_EQ(stats.totals.errors, wrong);
  EXPECT_EQ(stats.totals.corrects, right);
  Counters sum;
  for (const auto& i : stats.items) {
    sum.presentations += i.presentations;
    sum.errors += i.errors;
    sum.corrects += i.corrects;
  }
  EXPECT_EQ(sum, stats.totals);
  EXPECT_TRUE(stats.started && stats.ended);
}

TEST(Rng, UniformBelowInRange) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(uniform_below(rng, 7), 7u);
  EXPECT_EQ(uniform_below(rng, 1), 0u);
}
