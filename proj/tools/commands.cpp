#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "drilltutor/corpus.hpp"
#include "drilltutor/counters.hpp"
#include "drilltutor/crypto.hpp"
#include "drilltutor/drill.hpp"
#include "drilltutor/language.hpp"
#include "drilltutor/selection.hpp"
#include "drilltutor/service.hpp"
#include "drilltutor/store.hpp"
#include "drilltutor/text.hpp"

namespace dt::cli {

namespace fs = std::filesystem;

namespace {

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

/// Commands that only read never create a store file.
std::unique_ptr<Store> open_store(const fs::path& path, bool create) {
  if (!create && !fs::exists(path)) return std::make_unique<Store>(std::make_unique<MemoryBackend>());
  return Store::open(path);
}

std::string percent(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1) << v * 100.0 << '%';
  return ss.str();
}

std::vector<int> parse_numbers(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoi(part));
      } else {
        const int lo = std::stoi(part.substr(0, dash));
        const int hi = std::stoi(part.substr(dash + 1));
        for (int n = lo; n <= hi; ++n) out.push_back(n);
      }
    } catch (const std::logic_error&) {
      throw Usage("bad number list '" + text + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------- drill

struct DrillKeys {
  char correct = 'c';
  char incorrect = 'x';
  char quit = 'q';
  char reveal = ' ';
};

DrillKeys parse_keys(const std::string& spec) {
  DrillKeys keys;
  if (spec.empty()) return keys;
  for (const auto& entry : split(spec, ',')) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || entry.size() != eq + 2) throw Usage("bad key binding '" + entry + "'");
    const auto action = entry.substr(0, eq);
    const char key = entry[eq + 1];
    if (action == "correct")
      keys.correct = key;
    else if (action == "incorrect")
      keys.incorrect = key;
    else if (action == "quit")
      keys.quit = key;
    else if (action == "reveal")
      keys.reveal = key;
    else
      throw Usage("unknown action '" + action + "'");
  }
  return keys;
}

std::string key_name(char c) { return c == ' ' ? "space" : std::string(1, c); }

void print_answer(std::ostream& out, const DrillItem& item, const std::string& romanized) {
  out << "    " << item.target_sentence << '\n';
  if (!item.kana_sentence.empty()) out << "    " << item.kana_sentence << '\n';
  if (!romanized.empty()) out << "    " << romanized << '\n';
}

int run_drill(DrillSession session, const std::string& title, const DrillKeys& keys, const Store* store,
              const LanguageCode& lang, Io& io) {
  auto& out = io.out;
  auto romanize = [&](const DrillItem& item) -> std::string {
    if (!store || item.kana_sentence.empty() || lang == "en") return {};
    try {
      return store->transliterate(item.kana_sentence, lang);
    } catch (const Error&) {
      return {};
    }
  };

  const auto& model = session.model();
  out << "Drill: " << title << " (" << session.items().size() << (session.items().size() == 1 ? " item)\n" : " items)\n");
  out << "Model\n";
  if (!model.stimulus.empty()) out << "  stimulus: " << model.stimulus << '\n';
  if (!model.source_sentence.empty()) out << "  sentence: " << model.source_sentence << '\n';
  out << "  result:\n";
  print_answer(out, model, romanize(model));
  out << "Keys: " << key_name(keys.reveal) << "=reveal " << key_name(keys.correct) << "=correct "
      << key_name(keys.incorrect) << "=incorrect " << key_name(keys.quit) << "=quit\n\n";

  auto next_key = [&](char& c) {
    while (io.keys(c))
      if (c != '\n' && c != '\r' && c != '\t') return true;
    return false;
  };

  bool quit = false;
  while (!quit && session.phase() != Phase::Done) {
    const auto stimulus = session.next_stimulus();
    const auto& shown = stimulus.text.empty() ? session.items()[stimulus.item].source_sentence : stimulus.text;
    out << '#' << stimulus.round << "  " << shown << '\n';
    bool revealed = false;
    std::optional<SelfReport> report;
    char c = 0;
    while (!report) {
      if (!next_key(c)) {
        quit = true;
        break;
      }
      if (c == keys.quit) {
        quit = true;
        break;
      }
      if (c == keys.reveal && !revealed) {
        print_answer(out, session.items()[stimulus.item], romanize(session.items()[stimulus.item]));
        revealed = true;
      } else if (c == keys.correct) {
        report = SelfReport::correct;
      } else if (c == keys.incorrect) {
        report = SelfReport::incorrect;
      }
    }
    if (!report) break;
    const auto fb = session.reveal_and_report(*report);
    if (!revealed) print_answer(out, session.items()[fb.item], romanize(session.items()[fb.item]));
    out << "    " << (fb.verification == SelfReport::correct ? "correct" : "incorrect") << ", streak "
        << fb.streak << (fb.removed ? ", learned" : "") << '\n';
  }
  if (session.phase() != Phase::Done) session.stop();

  const auto stats = session.stats();
  out << '\n'
      << (quit ? "Stopped" : "Finished") << " after " << session.rounds() << " stimuli: "
      << stats.totals.corrects << " correct, " << stats.totals.errors << " incorrect\n";
  out << "pattern\tpresented\terrors\terror rate\n";
  for (const auto& r : session.report())
    out << r.pattern_id << '\t' << r.presentations << '\t' << r.errors << '\t' << percent(r.error_rate) << '\n';
  return 0;
}

// ---------------------------------------------------------------- serve

volatile std::sig_atomic_t g_stop = 0;

extern "C" void on_signal(int) { g_stop = 1; }

std::string load_or_create_secret(const fs::path& file) {
  if (fs::exists(file)) return std::string(trim(read_file(file)));
  const auto key = random_hex(32);
  write_file(file, key + "\n");
  fs::permissions(file, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
  return key;
}

}  // namespace

int run(const std::vector<std::string>& args, Io io) {
  if (!io.keys) io.keys = [&in = io.in](char& c) { return static_cast<bool>(in.get(c)); };

  CLI::App app{"Pattern drill tutor: goals, patterns, drills and corpus mining"};
  app.fallthrough();
  app.name("drilltutor");
  app.require_subcommand(1);
  std::string store_path = "drilltutor.db";
  if (const char* env = std::getenv("DRILLTUTOR_STORE")) store_path = env;
  LanguageCode lang = "en";
  app.add_option("--store", store_path, "Store file (default: $DRILLTUTOR_STORE or drilltutor.db)");
  app.add_option("--lang", lang, "Interface language code");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string log_dir, static_dir, secret_file;
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Port (0 picks one)");
  serve->add_option("--log-dir", log_dir, "Directory for drill session logs");
  serve->add_option("--static", static_dir, "Serve this directory under /");
  serve->add_option("--secret-file", secret_file, "Preference cookie key (created when missing)");

  // enroll
  auto* enroll = app.add_subcommand("enroll", "Create an expert account; the password is read from stdin");
  std::string username;
  bool admin = false;
  enroll->add_option("username", username, "User name")->required();
  enroll->add_flag("--admin", admin, "Grant the admin role");

  // import / export
  auto* import = app.add_subcommand("import", "Import a bundle");
  std::string bundle_file;
  std::string as_user = "admin";
  import->add_option("bundle", bundle_file, "Bundle file")->required()->check(CLI::ExistingFile);
  import->add_option("--as", as_user, "Record owner");

  auto* export_cmd = app.add_subcommand("export", "Print the bundle (or the table view)");
  bool as_table = false;
  std::string out_file;
  export_cmd->add_flag("--table", as_table, "Tab-separated table: goal, pattern, variable, category, values");
  export_cmd->add_option("-o,--out", out_file, "Write to a file instead of stdout");

  // backups
  auto* backup = app.add_subcommand("backup", "Write a snapshot file");
  std::string backup_dir;
  backup->add_option("--dir", backup_dir, "Snapshot directory (default: backups/ next to the store)");
  auto* backups = app.add_subcommand("backups", "List snapshot files, oldest first");
  backups->add_option("--dir", backup_dir, "Snapshot directory");
  auto* restore = app.add_subcommand("restore", "Replace the store contents with a snapshot");
  std::string snapshot_file;
  restore->add_option("snapshot", snapshot_file, "Snapshot file")->required()->check(CLI::ExistingFile);

  // drill
  auto* drill = app.add_subcommand("drill", "Run a drill in the terminal");
  std::string goal_path;
  std::vector<std::string> drill_patterns;
  bool all = false;
  std::uint64_t seed = 0;
  std::size_t k = 2, w = 3;
  std::optional<std::size_t> max_rounds;
  std::string order = "shuffled", key_spec, counter_classes, counter_numbers;
  drill->add_option("--goal", goal_path, "Goal path, '/' separated, case-insensitive");
  drill->add_option("--pattern", drill_patterns, "Only these patterns (repeatable)");
  drill->add_flag("--all", all, "Include the goal's subgoals (the whole tree without --goal)");
  drill->add_option("--seed", seed, "Shuffle seed");
  drill->add_option("--k", k, "Correct answers in a row before an item is learned")->check(CLI::PositiveNumber);
  drill->add_option("--w", w, "A missed item returns within this many stimuli")->check(CLI::PositiveNumber);
  drill->add_option("--max-rounds", max_rounds, "Stop after this many stimuli")->check(CLI::PositiveNumber);
  drill->add_option("--order", order, "shuffled or fixed")->check(CLI::IsMember({"shuffled", "fixed"}));
  drill->add_option("--keys", key_spec, "Key bindings, e.g. correct=j,incorrect=k,quit=q,reveal=r");
  drill->add_option("--counters", counter_classes, "Counter drill over these classes (comma separated)");
  drill->add_option("--numbers", counter_numbers, "Numbers for the counter drill, e.g. 1-10 or 3");

  // mine
  auto* mine = app.add_subcommand("mine", "Search a corpus for instances of a pattern");
  std::string mine_pattern, mine_template, filter = "none", lexicon_file, mine_language;
  std::vector<std::string> corpus_files;
  bool parallel = false;
  mine->add_option("--pattern", mine_pattern, "Stored pattern id");
  mine->add_option("--template", mine_template, "Ad hoc template such as 'This is a <object>.'");
  mine->add_option("--corpus", corpus_files, "Corpus files")->required()->check(CLI::ExistingFile);
  mine->add_option("--filter", filter, "none, lexicon or freq:N");
  mine->add_option("--lexicon", lexicon_file, "Categorized lexicon (surface TAB category)")->check(CLI::ExistingFile);
  mine->add_option("--language", mine_language, "Which rendering to search with (default: --lang)");
  mine->add_flag("--parallel", parallel, "Scan documents concurrently");

  // abstract
  auto* abstract = app.add_subcommand("abstract", "Propose patterns for a sentence");
  std::string sentence;
  std::vector<std::string> abstract_corpus;
  std::size_t top = 0;
  abstract->add_option("--sentence", sentence, "Example sentence")->required();
  abstract->add_option("--lexicon", lexicon_file, "Categorized lexicon")->required()->check(CLI::ExistingFile);
  abstract->add_option("--corpus", abstract_corpus, "Corpus files for ranking by support")->check(CLI::ExistingFile);
  abstract->add_option("--top", top, "Print at most this many candidates");

  // transliterate / counters
  auto* translit = app.add_subcommand("transliterate", "Kana to the script of --lang");
  std::string kana_text;
  translit->add_option("text", kana_text, "Kana text")->required();

  auto* pack = app.add_subcommand("install-language", "Install or replace a language pack (admin)");
  std::string pack_code, pack_ui, pack_kana;
  pack->add_option("code", pack_code, "Language code such as el")->required();
  pack->add_option("--ui", pack_ui, "UI strings (JSON object)")->required()->check(CLI::ExistingFile);
  pack->add_option("--kana", pack_kana, "Kana table (kana TAB spelling)")->required()->check(CLI::ExistingFile);

  auto* counters = app.add_subcommand("counters", "Counter forms: one lookup or the whole table");
  int counter_number = 0;
  std::string counter_class;
  counters->add_option("number", counter_number, "Number");
  counters->add_option("class", counter_class, "Counter class such as hon");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    io.err << "drilltutor: " << e.what() << '\n';
    const auto parsed = app.get_subcommands();
    io.err << (parsed.empty() ? std::string("Run with --help for usage.\n") : parsed.front()->help());
    return 2;
  }

  try {
    if (serve->parsed()) {
      auto store = Store::open(store_path);
      ServiceConfig config;
      config.log_dir = log_dir.empty() ? fs::path(store_path).parent_path() / "session-logs" : fs::path(log_dir);
      config.static_dir = static_dir;
      if (secret_file.empty()) secret_file = store_path + ".key";
      config.preference_key = load_or_create_secret(secret_file);
      Service service(*store, config);
      HttpServer server(service);
      const int bound = server.bind(host, port);
      io.out << "listening on http://" << host << ':' << bound << kApiPrefix << std::endl;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::thread worker([&] { server.run(); });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      worker.join();
      return 0;
    }

    if (enroll->parsed()) {
      std::string password;
      std::getline(io.in, password);
      if (!password.empty() && password.back() == '\r') password.pop_back();
      auto store = Store::open(store_path);
      store->enroll_expert(username, password, admin ? Role::admin : Role::expert);
      io.out << "enrolled " << username << (admin ? " (admin)" : "") << '\n';
      return 0;
    }

    if (import->parsed()) {
      auto store = Store::open(store_path);
      const auto report = store->import_bundle(Principal{as_user, true}, read_file(bundle_file));
      io.out << "goals created: " << report.goals_created << ", updated: " << report.goals_updated << '\n'
             << "patterns created: " << report.patterns_created << ", replaced: " << report.patterns_replaced
             << '\n'
             << "values: " << report.values_created << '\n';
      for (const auto& e : report.errors)
        io.err << "record " << e.record << " (" << e.goal << "): " << error_name(e.kind) << ": " << e.message
               << '\n';
      return report.ok() ? 0 : 1;
    }

    if (export_cmd->parsed()) {
      auto store = open_store(store_path, false);
      const auto text = as_table ? store->export_table().to_tsv() : store->export_bundle();
      if (out_file.empty())
        io.out << text;
      else
        write_file(out_file, text);
      return 0;
    }

    if (backup->parsed() || backups->parsed() || restore->parsed()) {
      StoreOptions options;
      if (!backup_dir.empty()) {
        options.backup_dir = backup_dir;
      } else {
        const auto dir = fs::path(store_path).parent_path();
        options.backup_dir = (dir.empty() ? fs::path(".") : dir) / "backups";
      }
      if (backups->parsed()) {
        const Store lister(std::make_unique<MemoryBackend>(), options);
        for (const auto& path : lister.list_backups()) io.out << path.string() << '\n';
        return 0;
      }
      auto store = Store::open(store_path, options);
      if (backup->parsed()) {
        const auto snapshot = store->backup();
        for (const auto& path : store->list_backups())
          if (path.filename() == snapshot_file_name(snapshot.timestamp)) io.out << path.string() << '\n';
        return 0;
      }
      store->restore(read_snapshot_file(snapshot_file));
      io.out << "restored " << snapshot_file << '\n';
      return 0;
    }

    if (drill->parsed()) {
      SessionConfig config;
      config.removal_streak = k;
      config.reinsert_window = w;
      config.max_rounds = max_rounds;
      config.seed = seed;
      config.order = order == "fixed" ? Order::fixed : Order::shuffled;
      const auto keys = parse_keys(key_spec);

      if (!counter_classes.empty()) {
        if (counter_numbers.empty()) throw Usage("--counters needs --numbers");
        const auto classes = split(counter_classes, ',');
        const auto numbers = parse_numbers(counter_numbers);
        const CountingMode mode = classes.size() == 1 ? CountingMode::vary_number
                                  : numbers.size() == 1 ? CountingMode::vary_object
                                                        : CountingMode::vary_both;
        auto items = generate_counting_items(CounterTable::bundled(), mode, classes, numbers);
        return run_drill(DrillSession::start(std::move(items), config, "terminal"), "counters", keys, nullptr,
                         lang, io);
      }

      auto store = open_store(store_path, false);
      const auto db = store->snapshot();
      ItemSelection selection;
      std::string title = "all goals";
      if (!goal_path.empty()) {
        std::vector<std::string> names;
        for (const auto& part : split(goal_path, '/'))
          if (!trim(part).empty()) names.emplace_back(trim(part));
        auto goal = db.goals.find_path(names, true);
        if (!goal) throw Error(ErrorKind::UnknownGoal, goal_path);
        selection.goal = *goal;
        title = db.goals.goal(*goal).label(lang, db.goals.default_language());
      } else if (!all && drill_patterns.empty()) {
        throw Usage("drill needs --goal, --pattern, --all or --counters");
      }
      selection.include_subgoals = all;
      selection.patterns = drill_patterns;
      auto items = select_items(db, selection, lang);
      return run_drill(DrillSession::start(std::move(items), config, "terminal"), title, keys, store.get(), lang,
                       io);
    }

    if (mine->parsed()) {
      if (mine_pattern.empty() == mine_template.empty()) throw Usage("mine needs exactly one of --pattern, --template");
      const LanguageCode search_lang = mine_language.empty() ? lang : mine_language;
      std::optional<PatternTemplate> pattern;
      if (!mine_template.empty()) {
        pattern = PatternTemplate::from_text("adhoc", {{search_lang, mine_template}});
      } else {
        auto store = open_store(store_path, false);
        pattern = store->read([&](const Database& db) {
          auto it = db.patterns.find(mine_pattern);
          if (it == db.patterns.end()) throw Error(ErrorKind::UnknownPattern, mine_pattern);
          return it->second.pattern;
        });
      }
      std::optional<CategorizedLexicon> lexicon;
      if (!lexicon_file.empty()) lexicon = CategorizedLexicon::load(lexicon_file);
      HarvestFilter harvest = HarvestFilter::none();
      if (filter == "lexicon") {
        if (!lexicon) throw Usage("--filter lexicon needs --lexicon");
        harvest = HarvestFilter::lexicon_only(*lexicon);
      } else if (filter.starts_with("freq:")) {
        std::size_t n = 0;
        try {
          n = std::stoul(filter.substr(5));
        } catch (const std::logic_error&) {
          throw Usage("bad filter '" + filter + "'");
        }
        harvest = HarvestFilter::min_frequency(n);
      } else if (filter != "none") {
        throw Usage("--filter must be none, lexicon or freq:N");
      }

      const auto query = compile_query(*pattern, search_lang);
      std::vector<fs::path> paths(corpus_files.begin(), corpus_files.end());
      const auto corpus = Corpus::from_files(paths);
      const auto matches = find_instances(query, corpus, parallel);
      io.out << "query: " << query.text() << '\n';
      io.out << "matches: " << matches.size() << '\n';
      for (const auto& m : matches) {
        io.out << "  " << m.document << '\t' << m.sentence.begin << '-' << m.sentence.end << '\t' << m.text;
        for (const auto& [name, value] : m.captures) io.out << '\t' << name << '=' << value;
        io.out << '\n';
      }
      for (const auto& [variable, ranked] : harvest_values(matches, harvest)) {
        io.out << "values for " << variable << ":\n";
        for (const auto& [value, count] : ranked) io.out << "  " << value << '\t' << count << '\n';
      }
      return 0;
    }

    if (abstract->parsed()) {
      const auto lexicon = CategorizedLexicon::load(lexicon_file);
      std::optional<Corpus> corpus;
      if (!abstract_corpus.empty()) {
        std::vector<fs::path> paths(abstract_corpus.begin(), abstract_corpus.end());
        corpus = Corpus::from_files(paths);
      }
      const auto candidates = abstract_patterns(sentence, lexicon, corpus ? &*corpus : nullptr);
      io.out << (corpus ? "support\tslots\tpattern\n" : "slots\tpattern\n");
      std::size_t shown = 0;
      for (const auto& c : candidates) {
        if (top && shown++ == top) break;
        if (corpus) io.out << c.support << '\t';
        io.out << c.slot_count << '\t' << c.template_text << '\n';
      }
      return 0;
    }

    if (translit->parsed()) {
      auto store = open_store(store_path, false);
      io.out << store->transliterate(kana_text, lang) << '\n';
      return 0;
    }

    if (pack->parsed()) {
      LanguagePack p;
      p.code = pack_code;
      try {
        p.ui_strings = nlohmann::json::parse(read_file(pack_ui)).get<std::map<std::string, std::string>>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedRequest, pack_ui + ": " + e.what());
      }
      p.transliteration = parse_symbol_table(read_file(pack_kana));
      auto store = open_store(store_path, true);
      store->install_language_pack(Principal{"admin", true}, std::move(p));
      io.out << "installed " << pack_code << '\n';
      return 0;
    }

    if (counters->parsed()) {
      const auto& table = CounterTable::bundled();
      if (!counter_class.empty()) {
        const auto& rule = table.lookup(counter_number, counter_class);
        io.out << rule.form << '\t' << rule.kana << '\n';
        return 0;
      }
      if (counter_number != 0) throw Usage("counters needs both a number and a class");
      io.out << "class\tnumber\tform\tkana\n";
      for (const auto& rule : table.rules())
        io.out << rule.quantifier_class << '\t' << rule.number << '\t' << rule.form << '\t' << rule.kana << '\n';
      return 0;
    }
  } catch (const Usage& e) {
    io.err << "drilltutor: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    io.err << "error: " << e.name() << ": " << e.detail() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    io.err << "error: IoError: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace dt::cli
