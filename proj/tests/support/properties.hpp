#pragma once

// Randomized property checks shared by the unit suite and the acceptance runner.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drilltutor/corpus.hpp"
#include "drilltutor/drill.hpp"
#include "drilltutor/error.hpp"
#include "drilltutor/pattern.hpp"
#include "drilltutor/store.hpp"

namespace dt::test {

struct PropertyResult {
  std::string name;
  std::size_t runs = 0;
  std::size_t violations = 0;
  std::string first_failure;

  bool ok() const { return violations == 0 && runs > 0; }
  void fail(std::size_t run, const std::string& why) {
    if (violations++ == 0) first_failure = "run " + std::to_string(run) + ": " + why;
  }
};

using Rng = std::mt19937_64;

inline std::size_t pick(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Literal words are lowercase Latin; values never are.
inline const std::vector<std::string>& literal_words() {
  static const std::vector<std::string> w{"kono", "kata", "wa", "no", "desu", "this", "is", "a", "from", "and", "ka"};
  return w;
}

inline std::string value_token(Rng& rng) {
  static const std::vector<std::string> stems{"Q", "Z", "X", "ど", "に", "Σ", "Ж"};
  return stems[pick(rng, stems.size())] + std::to_string(pick(rng, 1000));
}

inline std::string random_literal(Rng& rng, bool edge) {
  const std::size_t words = pick(rng, 4);
  std::string out;
  for (std::size_t i = 0; i < words; ++i) out += (i ? " " : "") + literal_words()[pick(rng, literal_words().size())];
  if (out.empty()) return edge ? "" : " ";
  return edge ? out : " " + out + " ";
}

/// Template text with `slots` named slots, in random order, and optional
/// escapes and final punctuation.
inline std::string random_template_text(Rng& rng, const std::vector<std::string>& slots) {
  auto order = slots;
  std::shuffle(order.begin(), order.end(), rng);
  std::string text = random_literal(rng, true);
  if (!text.empty() && !order.empty()) text += ' ';
  for (std::size_t i = 0; i < order.size(); ++i) {
    text += "<" + order[i] + ">";
    if (i + 1 < order.size()) text += random_literal(rng, false);
  }
  if (pick(rng, 3) == 0) text += pick(rng, 2) ? "." : " ka?";
  if (pick(rng, 5) == 0) text += " \\<\\\\\\>";
  return text;
}

inline std::vector<std::string> slot_list(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("v" + std::to_string(i));
  return out;
}

/// instantiate then match recovers the assignment.
inline PropertyResult check_match_round_trip(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"instantiate/match round trip", runs};
  Rng rng(seed);
  for (std::size_t run = 0; run < runs; ++run) {
    const auto slots = slot_list(pick(rng, 5));
    const auto text = random_template_text(rng, slots);
    try {
      const auto segments = parse_template(text);
      if (unparse(segments) != text) r.fail(run, "unparse(parse(t)) != t for " + text);
      const auto pattern = PatternTemplate("p", {{"x", segments}});
      ValueTuple tuple;
      std::map<VariableName, std::string> expected;
      for (const auto& s : slots) {
        const auto v = value_token(rng);
        tuple[s] = LexicalValue{s, {{"x", v}}};
        expected[s] = v;
      }
      const auto sentence = instantiate(pattern, "x", tuple);
      if (sentence != instantiate(pattern, "x", tuple)) r.fail(run, "instantiate not deterministic");
      const auto bindings = match(pattern, "x", sentence);
      const bool found = std::any_of(bindings.begin(), bindings.end(),
                                     [&](const Binding& b) { return b.captures == expected; });
      if (!found) r.fail(run, "no binding reproduces the tuple for '" + sentence + "' from " + text);
    } catch (const Error& e) {
      r.fail(run, std::string(e.what()) + " on " + text);
    }
  }
  return r;
}

/// |enumerate| equals the product of list sizes; distinct values give distinct sentences.
inline PropertyResult check_enumerate_cardinality(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"enumerate cardinality", runs};
  Rng rng(seed);
  for (std::size_t run = 0; run < runs; ++run) {
    const auto slots = slot_list(1 + pick(rng, 4));
    const auto text = random_template_text(rng, slots);
    try {
      const auto pattern = PatternTemplate::from_text("p", {{"x", text}});
      std::map<VariableName, std::vector<LexicalValue>> values;
      std::size_t product = 1;
      int serial = 0;
      for (const auto& s : slots) {
        const std::size_t n = 1 + pick(rng, 4);
        product *= n;
        for (std::size_t i = 0; i < n; ++i)
          values[s].push_back(LexicalValue{s, {{"x", "W" + std::to_string(serial++)}}});
      }
      const auto out = enumerate(pattern, "x", values);
      std::set<std::string> distinct;
      for (const auto& e : out) distinct.insert(e.sentence);
      if (out.size() != product) r.fail(run, "size " + std::to_string(out.size()) + " != " + std::to_string(product));
      else if (distinct.size() != product) r.fail(run, "duplicate sentences for " + text);
    } catch (const Error& e) {
      r.fail(run, e.what());
    }
  }
  return r;
}

inline std::vector<DrillItem> synthetic_items(std::size_t n, std::size_t patterns) {
  std::vector<DrillItem> items(n);
  for (std::size_t i = 0; i < n; ++i) {
    items[i].pattern_id = "p" + std::to_string(i % patterns);
    items[i].stimulus = "s" + std::to_string(i);
    items[i].target_sentence = "t" + std::to_string(i);
  }
  return items;
}

struct DrillTrace {
  std::vector<std::size_t> stimuli;
  SessionStats stats;
  bool operator==(const DrillTrace&) const = default;
};

/// Runs one session against a seeded report stream; reports every policy
/// violation through `fail`.
inline DrillTrace run_drill(std::vector<DrillItem> items, const SessionConfig& config, std::uint64_t report_seed,
                            double error_rate, const std::function<void(const std::string&)>& fail) {
  std::uint64_t tick = 0;
  auto session = DrillSession::start(items, config, "prop",
                                     [&] { return Timestamp(std::chrono::milliseconds(tick++)); });
  Rng reports(report_seed);
  std::bernoulli_distribution wrong(error_rate);
  const std::size_t k = config.removal_streak, w = config.reinsert_window;
  const std::size_t budget = 40 * items.size() * (k + w) + 200;
  std::vector<std::optional<std::size_t>> due(items.size());
  std::vector<std::size_t> streak(items.size(), 0);
  std::vector<bool> gone(items.size(), false);
  DrillTrace trace;
  std::optional<std::size_t> last;
  bool last_wrong = false;
  std::size_t steps = 0;
  while (session.phase() != Phase::Done) {
    if (++steps > 100000) {
      fail("no termination");
      break;
    }
    const std::size_t pending = session.queue().size();
    const auto st = session.next_stimulus();
    trace.stimuli.push_back(st.item);
    if (gone[st.item]) fail("removed item " + std::to_string(st.item) + " presented again");
    if (last && *last == st.item && pending > 1 && !(last_wrong && w == 1))
      fail("item " + std::to_string(st.item) + " twice in a row with " + std::to_string(pending) + " pending");
    for (std::size_t i = 0; i < due.size(); ++i)
      if (due[i] && *due[i] < st.round) fail("item " + std::to_string(i) + " missed its re-insertion window");
    due[st.item].reset();
    // Past the budget every answer is correct so the run must finish.
    const bool incorrect = trace.stimuli.size() < budget && wrong(reports);
    const auto fb = session.reveal_and_report(incorrect ? SelfReport::incorrect : SelfReport::correct);
    streak[st.item] = incorrect ? 0 : streak[st.item] + 1;
    if (fb.streak != streak[st.item]) fail("streak mismatch");
    if (fb.removed != (streak[st.item] >= k)) fail("removal not exactly at K");
    if (fb.removed) gone[st.item] = true;
    if (incorrect) due[st.item] = st.round + w;
    for (std::size_t q : session.queue())
      if (session.streak(q) >= k) fail("item with streak >= K still queued");
    last = st.item;
    last_wrong = incorrect;
  }
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!gone[i]) fail("session ended with item " + std::to_string(i) + " not removed");
  trace.stats = session.stats();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& c = trace.stats.items[i];
    if (c.presentations != c.corrects + c.errors) fail("conservation broken for item " + std::to_string(i));
    if (c.errors > c.presentations) fail("errors > presentations");
  }
  Counters sum;
  for (const auto& c : trace.stats.items) {
    sum.presentations += c.presentations;
    sum.corrects += c.corrects;
    sum.errors += c.errors;
  }
  if (sum != trace.stats.totals) fail("totals differ from item sums");
  std::vector<SessionEvent> replay;
  for (const auto& e : session.events()) replay.push_back(parse_event(format_event(e)));
  if (fold_events(replay, session.items()) != trace.stats) fail("stats not reconstructable from the log");
  return trace;
}

inline SessionConfig random_config(Rng& rng) {
  SessionConfig c;
  c.removal_streak = 1 + pick(rng, 4);
  c.reinsert_window = 1 + pick(rng, 5);
  c.order = pick(rng, 4) ? Order::shuffled : Order::fixed;
  c.seed = rng();
  return c;
}

/// Termination, removal at K, monotone removal, re-insertion window,
/// conservation and log replay over random report streams.
inline PropertyResult check_scheduler(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"scheduler termination and removal after K", runs};
  Rng rng(seed);
  for (std::size_t run = 0; run < runs; ++run) {
    const auto config = random_config(rng);
    const std::size_t n = 1 + pick(rng, 10);
    const auto report_seed = rng();
    const double p = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
    try {
      run_drill(synthetic_items(n, 1 + pick(rng, 3)), config, report_seed, p,
                [&](const std::string& why) { r.fail(run, why); });
    } catch (const Error& e) {
      r.fail(run, e.what());
    }
  }
  return r;
}

/// Identical inputs, configuration and reports give identical runs.
inline PropertyResult check_drill_determinism(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"seeded drill determinism", runs};
  Rng rng(seed);
  for (std::size_t run = 0; run < runs; ++run) {
    const auto config = random_config(rng);
    const auto items = synthetic_items(1 + pick(rng, 10), 2);
    const auto report_seed = rng();
    const auto ignore = [](const std::string&) {};
    if (run_drill(items, config, report_seed, 0.3, ignore) != run_drill(items, config, report_seed, 0.3, ignore))
      r.fail(run, "two identical runs diverged");
  }
  return r;
}

/// Stats: presentations = corrects + errors, per item, per pattern, in total.
inline PropertyResult check_stats_conservation(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"stats conservation", runs};
  Rng rng(seed);
  for (std::size_t run = 0; run < runs; ++run) {
    const auto trace = run_drill(synthetic_items(1 + pick(rng, 8), 1 + pick(rng, 3)), random_config(rng), rng(), 0.4,
                                 [](const std::string&) {});
    auto balanced = [](const Counters& c) { return c.presentations == c.corrects + c.errors; };
    bool ok = balanced(trace.stats.totals);
    for (const auto& c : trace.stats.items) ok = ok && balanced(c);
    for (const auto& [_, c] : trace.stats.patterns) ok = ok && balanced(c);
    if (!ok) r.fail(run, "presentations != corrects + errors");
  }
  return r;
}

// Kana syllables with their romanization, for values that pass the kana check.
inline const std::vector<std::pair<std::string, std::string>>& syllables() {
  static const std::vector<std::pair<std::string, std::string>> s{
      {"か", "ka"}, {"き", "ki"}, {"つ", "tsu"}, {"の", "no"}, {"ま", "ma"}, {"ろ", "ro"}, {"す", "su"}, {"し", "shi"},
      {"ん", "n"},  {"と", "to"}, {"え", "e"},   {"ゆ", "yu"}, {"み", "mi"}, {"ふ", "fu"}, {"せ", "se"}, {"ら", "ra"}};
  return s;
}

inline nlohmann::json random_value(Rng& rng, int serial) {
  std::string kana, roman;
  const std::size_t n = 1 + pick(rng, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [k, r] = syllables()[pick(rng, syllables().size())];
    kana += k;
    roman += r;
  }
  nlohmann::json v{{"en", "w" + std::to_string(serial)}, {"ja", roman}};
  if (pick(rng, 4)) v["ja-Hira"] = kana;
  return v;
}

/// A valid random bundle: a small goal tree with patterns and values.
inline std::string random_bundle(Rng& rng) {
  using json = nlohmann::json;
  json goals = json::array();
  std::vector<std::vector<std::string>> paths;
  int pattern_serial = 0, value_serial = 0;
  const std::size_t goal_count = 1 + pick(rng, 5);
  for (std::size_t g = 0; g < goal_count; ++g) {
    std::vector<std::string> parent;
    if (!paths.empty() && pick(rng, 2)) parent = paths[pick(rng, paths.size())];
    auto path = parent;
    path.push_back("goal " + std::to_string(g));
    paths.push_back(path);
    json patterns = json::array();
    const std::size_t pattern_count = pick(rng, 3);
    for (std::size_t p = 0; p < pattern_count; ++p) {
      const auto slots = slot_list(pick(rng, 3));
      json vars = json::array();
      for (const auto& s : slots) {
        json values = json::array();
        const std::size_t nv = 1 + pick(rng, 3);
        for (std::size_t i = 0; i < nv; ++i) values.push_back(random_value(rng, value_serial++));
        vars.push_back({{"name", s}, {"category", "c" + s}, {"aliases", json::object()}, {"values", values}});
      }
      const auto rendering = [&] {
        auto t = random_template_text(rng, slots);
        return t.empty() ? std::string("desu") : t;
      };
      json renderings{{"en", rendering()}, {"ja", rendering()}};
      if (pick(rng, 2)) renderings["ja-Hira"] = rendering();
      patterns.push_back({{"id", "pat-" + std::to_string(pattern_serial++)}, {"renderings", renderings}, {"variables", vars}});
    }
    json names{{"en", path.back()}};
    if (pick(rng, 2)) names["el"] = "στόχος " + std::to_string(g);
    goals.push_back({{"parent", parent}, {"names", names}, {"patterns", patterns}});
  }
  return json{{"format", "drilltutor-bundle"},
              {"version", 1},
              {"languages", {{"interface", "en"}, {"target", "ja"}, {"kana", "ja-Hira"}}},
              {"goals", goals}}
      .dump();
}

/// export(import(export(import(b)))) == export(import(b)), and re-import is a no-op.
inline PropertyResult check_bundle_idempotence(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"import/export canonical idempotence", runs};
  Rng rng(seed);
  const Principal admin{"admin", true};
  for (std::size_t run = 0; run < runs; ++run) {
    const auto bundle = random_bundle(rng);
    try {
      auto db = make_empty_database();
      const auto report = import_bundle(db, bundle, admin);
      if (!report.ok()) {
        r.fail(run, "generated bundle rejected: " + report.errors[0].message);
        continue;
      }
      const auto first = export_bundle(db);
      auto fresh = make_empty_database();
      import_bundle(fresh, first, admin);
      if (export_bundle(fresh) != first) r.fail(run, "second export differs");
      import_bundle(db, first, admin);
      if (export_bundle(db) != first) r.fail(run, "re-import changed the export");
    } catch (const Error& e) {
      r.fail(run, e.what());
    }
  }
  return r;
}

/// restore(backup()) brings back the exported form after random mutations.
inline PropertyResult check_backup_restore(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"backup/restore export identity", runs};
  Rng rng(seed);
  const Principal admin{"admin", true};
  for (std::size_t run = 0; run < runs; ++run) {
    try {
      std::uint64_t tick = 0;
      StoreOptions options;
      options.clock = [&] { return Timestamp(std::chrono::seconds(tick++)); };
      Store store(std::make_unique<MemoryBackend>(), options);
      store.import_bundle(admin, random_bundle(rng));
      const auto bundle = store.export_bundle();
      const auto table = store.export_table().to_tsv();
      const auto snap = parse_snapshot(serialize_snapshot(store.backup()));
      const std::size_t mutations = 1 + pick(rng, 4);
      for (std::size_t m = 0; m < mutations; ++m) {
        const auto db = store.snapshot();
        switch (pick(rng, 3)) {
          case 0: store.add_goal(admin, {{"en", "extra " + std::to_string(m)}}, kRootGoal); break;
          case 1:
            if (!db.patterns.empty()) store.delete_pattern(admin, db.patterns.begin()->first);
            break;
          case 2: store.import_bundle(admin, random_bundle(rng)); break;
        }
      }
      store.restore(snap);
      if (store.export_bundle() != bundle) r.fail(run, "bundle differs after restore");
      if (store.export_table().to_tsv() != table) r.fail(run, "table differs after restore");
    } catch (const Error& e) {
      r.fail(run, e.what());
    }
  }
  return r;
}

/// Enumerated sentences placed in a corpus are all found again, soundly.
inline PropertyResult check_corpus_round_trip(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"corpus find round trip", runs};
  Rng rng(seed);
  for (std::size_t run = 0; run < runs; ++run) {
    const auto slots = slot_list(1 + pick(rng, 3));
    std::string text = random_template_text(rng, slots);
    // Sentence-internal terminators would split the instance.
    std::erase_if(text, [](char c) { return c == '.' || c == '?'; });
    text += ".";
    try {
      const auto pattern = PatternTemplate::from_text("p", {{"x", text}});
      std::map<VariableName, std::vector<LexicalValue>> values;
      for (const auto& s : slots)
        for (std::size_t i = 0; i < 2; ++i) values[s].push_back({s, {{"x", value_token(rng)}}});
      const auto sentences = enumerate(pattern, "x", values);
      Corpus corpus;
      std::string doc;
      for (const auto& e : sentences) doc += e.sentence + "\n\n";
      corpus.add_document("d", doc);
      const auto matches = find_instances(compile_query(pattern, "x"), corpus);
      std::set<std::string> found;
      for (const auto& m : matches) {
        found.insert(m.text);
        const auto again = render(pattern.rendering("x"), m.captures).text;
        if (fold_case(again) != fold_case(m.text)) r.fail(run, "unsound match '" + m.text + "'");
      }
      for (const auto& e : sentences)
        if (!found.count(e.sentence)) r.fail(run, "missed '" + e.sentence + "'");
    } catch (const Error& e) {
      r.fail(run, std::string(e.what()) + " on " + text);
    }
  }
  return r;
}

/// abstract_patterns over an instance lists the template it came from.
inline PropertyResult check_abstraction_recovers_template(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"abstraction recovers the template", runs};
  Rng rng(seed);
  for (std::size_t run = 0; run < runs; ++run) {
    const std::size_t n = 1 + pick(rng, 3);
    std::string text, rendered;
    CategorizedLexicon lexicon;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string lit = literal_words()[pick(rng, literal_words().size())];
      const std::string category = "cat" + std::to_string(i);
      const std::string word = value_token(rng) + "x" + std::to_string(i);
      lexicon.add(word, category);
      text += (i ? " " : "") + lit + " <" + category + ">";
      rendered += (i ? " " : "") + lit + " " + word;
    }
    try {
      const auto candidates = abstract_patterns(rendered, lexicon);
      const bool found = std::any_of(candidates.begin(), candidates.end(),
                                     [&](const AbstractionCandidate& c) { return c.template_text == text; });
      if (!found) r.fail(run, "'" + text + "' not among candidates for '" + rendered + "'");
    } catch (const Error& e) {
      r.fail(run, e.what());
    }
  }
  return r;
}

/// harvest_values counts equal a plain tally of the captures.
inline PropertyResult check_harvest_tally(std::uint64_t seed, std::size_t runs) {
  PropertyResult r{"harvest counts equal a tally", runs};
  Rng rng(seed);
  for (std::size_t run = 0; run < runs; ++run) {
    std::vector<CandidateMatch> matches;
    std::map<std::string, std::map<std::string, std::size_t>> tally;
    const std::size_t n = pick(rng, 30);
    for (std::size_t i = 0; i < n; ++i) {
      CandidateMatch m;
      for (const auto* var : {"a", "b"}) {
        if (pick(rng, 3) == 0) continue;
        const auto v = "v" + std::to_string(pick(rng, 5));
        m.captures[var] = v;
        ++tally[var][v];
      }
      matches.push_back(m);
    }
    const auto harvested = harvest_values(matches);
    for (const auto& [var, counts] : tally) {
      auto it = harvested.find(var);
      if (it == harvested.end()) {
        r.fail(run, "variable missing");
        continue;
      }
      std::map<std::string, std::size_t> got(it->second.begin(), it->second.end());
      if (got != counts) r.fail(run, "counts differ for " + var);
      if (!std::is_sorted(it->second.begin(), it->second.end(), [](const auto& x, const auto& y) {
            return x.second != y.second ? x.second > y.second : x.first < y.first;
          }))
        r.fail(run, "ranking order");
    }
  }
  return r;
}

}  // namespace dt::test
