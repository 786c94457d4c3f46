#include "drilltutor/store.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>

#include "drilltutor/crypto.hpp"
#include "drilltutor/text.hpp"

namespace dt {

using json = nlohmann::json;

namespace {

constexpr std::string_view kBundleFormat = "drilltutor-bundle";
constexpr std::string_view kImageFormat = "drilltutor-image";
constexpr std::string_view kSnapshotFormat = "drilltutor-snapshot";

std::string role_name(Role role) { return role == Role::admin ? "admin" : "expert"; }

Role parse_role(const std::string& name) {
  if (name == "admin") return Role::admin;
  if (name == "expert") return Role::expert;
  throw Error(ErrorKind::MalformedBundle, "unknown role '" + name + "'");
}

std::string path_text(const GoalTree& tree, GoalId id) { return join(tree.path_names(id), " / "); }

json string_map(const std::map<std::string, std::string>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = v;
  return out;
}

std::map<std::string, std::string> read_string_map(const json& j, std::string_view what) {
  if (!j.is_object()) throw Error(ErrorKind::MalformedBundle, std::string(what) + " must be an object");
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string())
      throw Error(ErrorKind::MalformedBundle, std::string(what) + "." + k + " must be a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

json languages_json(const DrillLanguages& l) {
  return {{"interface", l.interface}, {"target", l.target}, {"kana", l.kana}};
}

DrillLanguages read_languages(const json& j) {
  DrillLanguages l;
  l.interface = j.at("interface").get<std::string>();
  l.target = j.at("target").get<std::string>();
  l.kana = j.at("kana").get<std::string>();
  return l;
}

json pattern_body(const PatternRecord& r) {
  json renderings = json::object();
  for (const auto& [lang, segments] : r.pattern.renderings()) renderings[lang] = unparse(segments);
  json variables = json::array();
  for (const auto& v : r.variables) {
    json values = json::array();
    if (auto it = r.values.find(v.name); it != r.values.end())
      for (const auto& value : it->second) values.push_back(string_map(value.renderings));
    variables.push_back({{"name", v.name},
                         {"category", v.category},
                         {"aliases", string_map(v.display_aliases)},
                         {"values", std::move(values)}});
  }
  return {{"id", r.pattern.id()}, {"renderings", std::move(renderings)}, {"variables", std::move(variables)}};
}

// Parses the id/renderings/variables part shared by bundles and images.
PatternRecord read_pattern_body(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::MalformedBundle, "pattern must be an object");
  if (!j.contains("id") || !j["id"].is_string())
    throw Error(ErrorKind::MalformedBundle, "pattern without a string id");
  const auto id = j["id"].get<std::string>();
  const auto texts = read_string_map(j.value("renderings", json::object()), "renderings");
  const json vars = j.value("variables", json::array());
  if (!vars.is_array()) throw Error(ErrorKind::MalformedBundle, "variables must be an array");

  std::vector<Variable> variables;
  std::vector<VariableName> order;
  std::map<VariableName, std::vector<LexicalValue>> values;
  for (const auto& v : vars) {
    if (!v.is_object() || !v.contains("name") || !v["name"].is_string())
      throw Error(ErrorKind::MalformedBundle, "variable without a string name");
    Variable variable;
    variable.name = v["name"].get<std::string>();
    variable.category = v.value("category", std::string{});
    variable.display_aliases = read_string_map(v.value("aliases", json::object()), "aliases");
    auto& list = values[variable.name];
    const json vals = v.value("values", json::array());
    if (!vals.is_array()) throw Error(ErrorKind::MalformedBundle, "values must be an array");
    for (const auto& value : vals)
      list.push_back(LexicalValue{variable.name, read_string_map(value, "value")});
    order.push_back(variable.name);
    variables.push_back(std::move(variable));
  }
  PatternTemplate pattern = PatternTemplate::from_text(id, texts, order);
  return PatternRecord{std::move(pattern), std::move(variables), std::move(values), kRootGoal, {}};
}

Database& require_pattern_owner(Database& db, const Principal& who, const std::string& id) {
  auto it = db.patterns.find(id);
  if (it == db.patterns.end()) throw Error(ErrorKind::UnknownPattern, id);
  require_owner(who, it->second.owner);
  return db;
}

void require_expert(const Principal& who) {
  if (who.username.empty() && !who.admin)
    throw Error(ErrorKind::PermissionDenied, "an expert account is required");
}

}  // namespace

const Variable& PatternRecord::variable(std::string_view name) const {
  for (const auto& v : variables)
    if (v.name == name) return v;
  throw Error(ErrorKind::UnknownVariable, std::string(name));
}

void require_owner(const Principal& who, const std::string& owner) {
  if (who.admin) return;
  if (owner.empty() || owner != who.username)
    throw Error(ErrorKind::PermissionDenied, who.username + " does not own this record");
}

Database make_empty_database() {
  Database db;
  db.packs.emplace(default_language_pack().code, default_language_pack());
  return db;
}

void validate_pattern_record(const Database& db, const PatternRecord& r) {
  const auto& p = r.pattern;
  if (!is_identifier(p.id()))
    throw Error(ErrorKind::ConstraintViolation, "pattern id '" + p.id() + "' is not an identifier");
  for (const auto& lang : {db.languages.interface, db.languages.target})
    if (!p.has_rendering(lang))
      throw Error(ErrorKind::MissingRendering, p.id() + " has no '" + lang + "' rendering");
  if (!db.goals.contains(r.goal)) throw Error(ErrorKind::UnknownGoal, std::to_string(r.goal));

  std::vector<VariableName> names;
  for (const auto& v : r.variables) names.push_back(v.name);
  if (names != p.variables())
    throw Error(ErrorKind::SlotSetMismatch, p.id() + ": declared variables differ from the slots");

  const auto pack = db.packs.find("en");
  std::optional<Transliterator> romanizer;
  if (pack != db.packs.end() && !pack->second.transliteration.empty())
    romanizer.emplace(pack->second.transliteration);

  for (const auto& [name, list] : r.values) {
    if (!p.has_variable(name)) throw Error(ErrorKind::UnknownVariable, p.id() + ": " + name);
    for (const auto& value : list) {
      if (value.variable != name)
        throw Error(ErrorKind::ConstraintViolation, p.id() + ": value filed under the wrong variable");
      for (const auto& lang : {db.languages.interface, db.languages.target}) {
        auto it = value.renderings.find(lang);
        if (it == value.renderings.end() || trim(it->second).empty())
          throw Error(ErrorKind::MissingRendering, p.id() + "." + name + " value lacks '" + lang + "'");
      }
      auto kana = value.renderings.find(db.languages.kana);
      if (kana == value.renderings.end() || !romanizer) continue;
      const auto& romanized = value.renderings.at(db.languages.target);
      bool ok = false;
      try {
        ok = kana_matches_romanized(*romanizer, kana->second, romanized);
      } catch (const Error&) {
        ok = false;
      }
      if (!ok)
        throw Error(ErrorKind::ConstraintViolation,
                    p.id() + "." + name + ": kana '" + kana->second + "' does not spell '" + romanized + "'");
    }
  }
}

void check_integrity(const Database& db) {
  db.goals.check_invariants();
  for (const auto& g : db.goals.goals()) {
    for (const auto& id : g.pattern_ids) {
      auto it = db.patterns.find(id);
      if (it == db.patterns.end())
        throw Error(ErrorKind::ConstraintViolation, "goal " + std::to_string(g.id) + " lists unknown pattern " + id);
      if (it->second.goal != g.id)
        throw Error(ErrorKind::ConstraintViolation, "pattern " + id + " attached to two goals");
    }
  }
  for (const auto& [id, r] : db.patterns) {
    if (id != r.pattern.id()) throw Error(ErrorKind::ConstraintViolation, "pattern key mismatch for " + id);
    if (!db.goals.contains(r.goal))
      throw Error(ErrorKind::ConstraintViolation, "pattern " + id + " on a missing goal");
    const auto& listed = db.goals.goal(r.goal).pattern_ids;
    if (std::find(listed.begin(), listed.end(), id) == listed.end())
      throw Error(ErrorKind::ConstraintViolation, "pattern " + id + " not listed by its goal");
  }
  if (!db.packs.contains("en")) throw Error(ErrorKind::ConstraintViolation, "the English pack is missing");
}

// ---------------------------------------------------------------- bundles

std::string export_bundle(const Database& db) {
  json goals = json::array();
  for (GoalId id : db.goals.preorder()) {
    if (id == kRootGoal) continue;
    const Goal& g = db.goals.goal(id);
    json patterns = json::array();
    for (const auto& pid : g.pattern_ids) patterns.push_back(pattern_body(db.patterns.at(pid)));
    goals.push_back({{"parent", db.goals.path_names(*g.parent)},
                     {"names", string_map(g.names)},
                     {"patterns", std::move(patterns)}});
  }
  json doc = {{"format", kBundleFormat},
              {"version", kBundleVersion},
              {"languages", languages_json(db.languages)},
              {"goals", std::move(goals)}};
  return doc.dump(2) + "\n";
}

namespace {

struct RecordCounts {
  std::size_t goals_created = 0, goals_updated = 0, patterns_created = 0, patterns_replaced = 0, values = 0;
};

RecordCounts apply_goal_record(Database& db, const json& record, const Principal& who) {
  RecordCounts counts;
  if (!record.is_object()) throw Error(ErrorKind::MalformedBundle, "goal record must be an object");
  const json parent_json = record.value("parent", json::array());
  if (!parent_json.is_array()) throw Error(ErrorKind::MalformedBundle, "parent must be an array of names");
  std::vector<std::string> parent_path;
  for (const auto& n : parent_json) {
    if (!n.is_string()) throw Error(ErrorKind::MalformedBundle, "parent must be an array of names");
    parent_path.push_back(n.get<std::string>());
  }
  auto parent = db.goals.find_path(parent_path);
  if (!parent) throw Error(ErrorKind::UnknownParent, join(parent_path, " / "));

  auto names = read_string_map(record.value("names", json::object()), "names");
  auto def = names.find(db.goals.default_language());
  if (def == names.end() || trim(def->second).empty())
    throw Error(ErrorKind::MissingDefaultName, "goal record without a '" + db.goals.default_language() + "' name");

  GoalId goal;
  if (auto existing = db.goals.find_child(*parent, def->second)) {
    goal = *existing;
    if (db.goals.goal(goal).names != names) {
      require_owner(who, db.goals.goal(goal).owner);
      db.goals.modify_goal(goal, GoalChange{names, std::nullopt, std::nullopt});
      ++counts.goals_updated;
    }
  } else {
    goal = db.goals.add_goal(names, *parent, who.username);
    ++counts.goals_created;
  }

  const json patterns = record.value("patterns", json::array());
  if (!patterns.is_array()) throw Error(ErrorKind::MalformedBundle, "patterns must be an array");
  for (const auto& pj : patterns) {
    PatternRecord r = read_pattern_body(pj);
    r.goal = goal;
    r.owner = who.username;
    if (auto it = db.patterns.find(r.pattern.id()); it != db.patterns.end()) {
      require_owner(who, it->second.owner);
      r.owner = it->second.owner;
      db.goals.detach_pattern(it->second.goal, it->first);
      db.patterns.erase(it);
      ++counts.patterns_replaced;
    } else {
      ++counts.patterns_created;
    }
    validate_pattern_record(db, r);
    for (const auto& [_, list] : r.values) counts.values += list.size();
    const auto id = r.pattern.id();
    db.goals.attach_pattern(goal, id);
    db.patterns.emplace(id, std::move(r));
  }
  check_integrity(db);
  return counts;
}

}  // namespace

ImportReport import_bundle(Database& db, std::string_view bundle, const Principal& who) {
  require_expert(who);
  json doc;
  try {
    doc = json::parse(bundle);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedBundle, e.what());
  }
  if (!doc.is_object() || doc.value("format", std::string{}) != kBundleFormat)
    throw Error(ErrorKind::MalformedBundle, "not a drill tutor bundle");
  if (!doc.contains("version") || !doc["version"].is_number_integer())
    throw Error(ErrorKind::MalformedBundle, "bundle without a version");
  if (doc["version"].get<int>() != kBundleVersion)
    throw Error(ErrorKind::VersionMismatch,
                "bundle version " + std::to_string(doc["version"].get<int>()) + ", expected " +
                    std::to_string(kBundleVersion));
  if (!doc.contains("goals") || !doc["goals"].is_array())
    throw Error(ErrorKind::MalformedBundle, "bundle without a goals array");
  if (doc.contains("languages")) {
    DrillLanguages langs;
    try {
      langs = read_languages(doc["languages"]);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedBundle, std::string("languages: ") + e.what());
    }
    if (!(langs == db.languages)) {
      if (!db.patterns.empty())
        throw Error(ErrorKind::ConstraintViolation, "bundle languages differ from the database's");
      db.languages = langs;
    }
  }

  ImportReport report;
  const auto& goals = doc["goals"];
  for (std::size_t i = 0; i < goals.size(); ++i) {
    Database trial = db;
    std::string label;
    if (goals[i].is_object()) {
      auto parent = goals[i].value("parent", json::array());
      auto names = goals[i].value("names", json::object());
      std::vector<std::string> parts;
      if (parent.is_array())
        for (const auto& p : parent)
          if (p.is_string()) parts.push_back(p.get<std::string>());
      if (names.is_object() && names.contains(db.goals.default_language()) &&
          names[db.goals.default_language()].is_string())
        parts.push_back(names[db.goals.default_language()].get<std::string>());
      label = join(parts, " / ");
    }
    try {
      const auto c = apply_goal_record(trial, goals[i], who);
      db = std::move(trial);
      report.goals_created += c.goals_created;
      report.goals_updated += c.goals_updated;
      report.patterns_created += c.patterns_created;
      report.patterns_replaced += c.patterns_replaced;
      report.values_created += c.values;
    } catch (const Error& e) {
      report.errors.push_back({i, label, e.kind(), e.detail()});
    } catch (const json::exception& e) {
      report.errors.push_back({i, label, ErrorKind::MalformedBundle, e.what()});
    }
  }
  return report;
}

std::string pattern_record_to_json(const PatternRecord& record) {
  json j = pattern_body(record);
  j["goal"] = record.goal;
  j["owner"] = record.owner;
  return j.dump();
}

PatternRecord pattern_record_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    PatternRecord r = read_pattern_body(j);
    if (j.contains("goal")) r.goal = j.at("goal").get<GoalId>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedBundle, std::string("pattern: ") + e.what());
  }
}

// ---------------------------------------------------------------- table

std::string Table::to_tsv() const {
  std::string out = join(header, "\t") + "\n";
  for (const auto& row : rows) out += join(row, "\t") + "\n";
  return out;
}

Table export_table(const Database& db) {
  Table t;
  t.header = {"goal", "pattern", "variable", "category", "values"};
  for (GoalId id : db.goals.preorder()) {
    const Goal& g = db.goals.goal(id);
    for (const auto& pid : g.pattern_ids) {
      const auto& r = db.patterns.at(pid);
      for (const auto& v : r.variables) {
        std::vector<std::string> shown;
        if (auto it = r.values.find(v.name); it != r.values.end())
          for (const auto& value : it->second)
            shown.push_back(value.in(db.languages.interface) + "/" + value.in(db.languages.target));
        t.rows.push_back({path_text(db.goals, id), pid, v.name, v.category, join(shown, ", ")});
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------- image

std::string database_to_image(const Database& db) {
  json nodes = json::array();
  for (const auto& g : db.goals.goals()) {
    json node = {{"id", g.id},
                 {"names", string_map(g.names)},
                 {"children", g.children},
                 {"patterns", g.pattern_ids},
                 {"owner", g.owner}};
    node["parent"] = g.parent ? json(*g.parent) : json(nullptr);
    nodes.push_back(std::move(node));
  }
  json patterns = json::array();
  for (const auto& [id, r] : db.patterns) {
    json p = pattern_body(r);
    p["goal"] = r.goal;
    p["owner"] = r.owner;
    patterns.push_back(std::move(p));
  }
  json experts = json::array();
  for (const auto& [name, a] : db.experts)
    experts.push_back({{"username", a.username},
                       {"credential", a.credential},
                       {"created", format_iso8601(a.created)},
                       {"role", role_name(a.role)}});
  json packs = json::array();
  for (const auto& [code, pack] : db.packs)
    packs.push_back(json::parse(format_language_pack(pack)));
  json doc = {{"format", kImageFormat},
              {"version", kImageVersion},
              {"languages", languages_json(db.languages)},
              {"goals",
               {{"default_language", db.goals.default_language()},
                {"next_id", db.goals.next_id()},
                {"nodes", std::move(nodes)}}},
              {"patterns", std::move(patterns)},
              {"experts", std::move(experts)},
              {"packs", std::move(packs)}};
  return doc.dump();
}

Database database_from_image(std::string_view image) {
  try {
    const json doc = json::parse(image);
    if (doc.value("format", std::string{}) != kImageFormat)
      throw Error(ErrorKind::MalformedBundle, "not a database image");
    if (doc.at("version").get<int>() != kImageVersion)
      throw Error(ErrorKind::VersionMismatch, "image version " + std::to_string(doc.at("version").get<int>()));
    Database db;
    db.languages = read_languages(doc.at("languages"));

    const auto& tree = doc.at("goals");
    std::vector<Goal> goals;
    for (const auto& n : tree.at("nodes")) {
      Goal g;
      g.id = n.at("id").get<GoalId>();
      g.names = read_string_map(n.at("names"), "names");
      if (!n.at("parent").is_null()) g.parent = n.at("parent").get<GoalId>();
      g.children = n.at("children").get<std::vector<GoalId>>();
      g.pattern_ids = n.at("patterns").get<std::vector<std::string>>();
      g.owner = n.value("owner", std::string{});
      goals.push_back(std::move(g));
    }
    db.goals = GoalTree::from_goals(std::move(goals), tree.at("next_id").get<GoalId>(),
                                    tree.at("default_language").get<std::string>());

    for (const auto& p : doc.at("patterns")) {
      PatternRecord r = read_pattern_body(p);
      r.goal = p.at("goal").get<GoalId>();
      r.owner = p.value("owner", std::string{});
      const auto id = r.pattern.id();
      db.patterns.emplace(id, std::move(r));
    }
    for (const auto& e : doc.at("experts")) {
      ExpertAccount a;
      a.username = e.at("username").get<std::string>();
      a.credential = e.at("credential").get<std::string>();
      a.created = parse_iso8601(e.at("created").get<std::string>());
      a.role = parse_role(e.at("role").get<std::string>());
      db.experts.emplace(a.username, std::move(a));
    }
    for (const auto& p : doc.at("packs")) {
      auto pack = parse_language_pack(p.dump());
      db.packs.emplace(pack.code, std::move(pack));
    }
    check_integrity(db);
    return db;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedBundle, std::string("image: ") + e.what());
  }
}

// ---------------------------------------------------------------- snapshots

std::string serialize_snapshot(const Snapshot& s) {
  json doc = {{"format", kSnapshotFormat},
              {"version", s.format_version},
              {"timestamp", format_iso8601(s.timestamp)},
              {"image", json::parse(s.image)}};
  return doc.dump() + "\n";
}

Snapshot parse_snapshot(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedBundle, std::string("snapshot: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", std::string{}) != kSnapshotFormat)
    throw Error(ErrorKind::MalformedBundle, "not a snapshot");
  if (!doc.contains("version") || !doc["version"].is_number_integer())
    throw Error(ErrorKind::MalformedBundle, "snapshot without a version");
  Snapshot s;
  s.format_version = doc["version"].get<int>();
  if (s.format_version != kSnapshotVersion)
    throw Error(ErrorKind::VersionMismatch, "snapshot version " + std::to_string(s.format_version) +
                                                ", expected " + std::to_string(kSnapshotVersion));
  if (!doc.contains("timestamp") || !doc["timestamp"].is_string() || !doc.contains("image"))
    throw Error(ErrorKind::MalformedBundle, "incomplete snapshot");
  s.timestamp = parse_iso8601(doc["timestamp"].get<std::string>());
  s.image = doc["image"].dump();
  return s;
}

std::string snapshot_file_name(Timestamp t) { return "backup-" + format_iso8601_basic(t) + ".snap"; }

Snapshot read_snapshot_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_snapshot(ss.str());
}

// ---------------------------------------------------------------- sqlite

struct SqliteBackend::Handle {
  sqlite3* db = nullptr;
  ~Handle() {
    if (db) sqlite3_close(db);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::StorageFailure, what + ": " + (db ? sqlite3_errmsg(db) : "no connection"));
  }
  void exec(const char* sql) {
    char* message = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &message) != SQLITE_OK) {
      std::string text = message ? message : "unknown";
      sqlite3_free(message);
      throw Error(ErrorKind::StorageFailure, text);
    }
  }
};

namespace {

struct Statement {
  sqlite3_stmt* stmt = nullptr;
  ~Statement() { sqlite3_finalize(stmt); }
};

}  // namespace

SqliteBackend::SqliteBackend(const std::filesystem::path& file) : db_(std::make_unique<Handle>()) {
  if (sqlite3_open_v2(file.string().c_str(), &db_->db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE,
                      nullptr) != SQLITE_OK)
    db_->fail("cannot open " + file.string());
  sqlite3_busy_timeout(db_->db, 5000);
  db_->exec("CREATE TABLE IF NOT EXISTS kv (key TEXT PRIMARY KEY, value TEXT NOT NULL)");
}

SqliteBackend::~SqliteBackend() = default;

std::optional<std::string> SqliteBackend::load() {
  Statement s;
  if (sqlite3_prepare_v2(db_->db, "SELECT value FROM kv WHERE key = 'image'", -1, &s.stmt, nullptr) != SQLITE_OK)
    db_->fail("prepare");
  const int rc = sqlite3_step(s.stmt);
  if (rc == SQLITE_DONE) return std::nullopt;
  if (rc != SQLITE_ROW) db_->fail("load");
  const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(s.stmt, 0));
  return std::string(text, static_cast<std::size_t>(sqlite3_column_bytes(s.stmt, 0)));
}

void SqliteBackend::save(const std::string& image) {
  db_->exec("BEGIN IMMEDIATE");
  try {
    Statement s;
    if (sqlite3_prepare_v2(db_->db, "INSERT OR REPLACE INTO kv (key, value) VALUES ('image', ?1)", -1, &s.stmt,
                           nullptr) != SQLITE_OK)
      db_->fail("prepare");
    sqlite3_bind_text(s.stmt, 1, image.data(), static_cast<int>(image.size()), SQLITE_TRANSIENT);
    if (sqlite3_step(s.stmt) != SQLITE_DONE) db_->fail("save");
  } catch (...) {
    sqlite3_exec(db_->db, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
  db_->exec("COMMIT");
}

// ---------------------------------------------------------------- store

Store::Store(std::unique_ptr<StorageBackend> backend, StoreOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
  if (!backend_) throw Error(ErrorKind::InvalidConfig, "no storage backend");
  if (auto image = backend_->load())
    db_ = database_from_image(*image);
  else
    db_ = make_empty_database();
}

std::unique_ptr<Store> Store::open(const std::filesystem::path& file, StoreOptions options) {
  if (options.backup_dir.empty()) {
    auto dir = file.parent_path();
    options.backup_dir = (dir.empty() ? std::filesystem::path(".") : dir) / "backups";
  }
  return std::make_unique<Store>(std::make_unique<SqliteBackend>(file), std::move(options));
}

Timestamp Store::now() const { return options_.clock ? options_.clock() : std::chrono::system_clock::now(); }

template <class F>
void Store::mutate(F&& f) {
  std::unique_lock lock(mutex_);
  Database next = db_;
  std::forward<F>(f)(next);
  check_integrity(next);
  backend_->save(database_to_image(next));
  db_ = std::move(next);
}

Database Store::snapshot() const {
  std::shared_lock lock(mutex_);
  return db_;
}

void Store::enroll_expert(const std::string& username, std::string_view password, Role role) {
  if (!is_identifier(username))
    throw Error(ErrorKind::ConstraintViolation, "user name must be letters, digits, '_' or '-'");
  if (password.empty()) throw Error(ErrorKind::ConstraintViolation, "empty password");
  auto credential = hash_password(password, options_.password_iterations);
  const auto created = now();
  mutate([&](Database& db) {
    if (db.experts.contains(username)) throw Error(ErrorKind::DuplicateUser, username);
    db.experts.emplace(username, ExpertAccount{username, credential, created, role});
  });
}

std::optional<Principal> Store::authenticate(const std::string& username, std::string_view password) const {
  std::optional<ExpertAccount> account;
  {
    std::shared_lock lock(mutex_);
    if (auto it = db_.experts.find(username); it != db_.experts.end()) account = it->second;
  }
  if (!account || !verify_password(password, account->credential)) return std::nullopt;
  return Principal{account->username, account->role == Role::admin};
}

GoalId Store::add_goal(const Principal& who, std::map<LanguageCode, std::string> names, GoalId parent) {
  require_expert(who);
  GoalId id = kRootGoal;
  mutate([&](Database& db) { id = db.goals.add_goal(std::move(names), parent, who.username); });
  return id;
}

void Store::modify_goal(const Principal& who, GoalId id, const GoalChange& change) {
  mutate([&](Database& db) {
    if (id == kRootGoal) throw Error(ErrorKind::RootImmutable, "the root goal cannot be changed");
    require_owner(who, db.goals.goal(id).owner);
    if (change.pattern_ids)
      throw Error(ErrorKind::ConstraintViolation, "patterns are attached through the pattern routes");
    db.goals.modify_goal(id, change);
  });
}

void Store::delete_goal(const Principal& who, GoalId id, bool cascade) {
  mutate([&](Database& db) {
    if (id == kRootGoal) throw Error(ErrorKind::RootImmutable, "the root goal cannot be deleted");
    for (GoalId g : db.goals.preorder(id)) require_owner(who, db.goals.goal(g).owner);
    for (const auto& pid : db.goals.delete_goal(id, cascade)) db.patterns.erase(pid);
  });
}

void Store::put_pattern(const Principal& who, PatternRecord record) {
  require_expert(who);
  mutate([&](Database& db) {
    const auto id = record.pattern.id();
    if (auto it = db.patterns.find(id); it != db.patterns.end()) {
      require_owner(who, it->second.owner);
      record.owner = it->second.owner;
      db.goals.detach_pattern(it->second.goal, id);
      db.patterns.erase(it);
    } else {
      record.owner = who.username;
    }
    validate_pattern_record(db, record);
    db.goals.attach_pattern(record.goal, id);
    db.patterns.emplace(id, std::move(record));
  });
}

void Store::delete_pattern(const Principal& who, const std::string& pattern_id) {
  mutate([&](Database& db) {
    require_pattern_owner(db, who, pattern_id);
    db.goals.detach_pattern(db.patterns.at(pattern_id).goal, pattern_id);
    db.patterns.erase(pattern_id);
  });
}

void Store::add_value(const Principal& who, const std::string& pattern_id, LexicalValue value) {
  mutate([&](Database& db) {
    require_pattern_owner(db, who, pattern_id);
    auto& r = db.patterns.at(pattern_id);
    if (!r.pattern.has_variable(value.variable)) throw Error(ErrorKind::UnknownVariable, value.variable);
    r.values[value.variable].push_back(std::move(value));
    validate_pattern_record(db, r);
  });
}

void Store::remove_value(const Principal& who, const std::string& pattern_id, const VariableName& variable,
                         std::size_t index) {
  mutate([&](Database& db) {
    require_pattern_owner(db, who, pattern_id);
    auto& r = db.patterns.at(pattern_id);
    if (!r.pattern.has_variable(variable)) throw Error(ErrorKind::UnknownVariable, variable);
    auto& list = r.values[variable];
    if (index >= list.size())
      throw Error(ErrorKind::OutOfRange, variable + " has no value #" + std::to_string(index));
    list.erase(list.begin() + static_cast<std::ptrdiff_t>(index));
  });
}

ImportReport Store::import_bundle(const Principal& who, std::string_view bundle) {
  ImportReport report;
  mutate([&](Database& db) { report = dt::import_bundle(db, bundle, who); });
  return report;
}

std::string Store::export_bundle() const {
  std::shared_lock lock(mutex_);
  return dt::export_bundle(db_);
}

Table Store::export_table() const {
  std::shared_lock lock(mutex_);
  return dt::export_table(db_);
}

Snapshot Store::backup() {
  Snapshot s;
  {
    std::unique_lock lock(mutex_);
    s.timestamp = now();
    // Distinct file names even for back-to-back backups.
    if (s.timestamp <= last_backup_) s.timestamp = last_backup_ + std::chrono::milliseconds(1);
    last_backup_ = s.timestamp;
    s.image = database_to_image(db_);
  }
  if (!options_.backup_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options_.backup_dir, ec);
    const auto path = options_.backup_dir / snapshot_file_name(s.timestamp);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp);
      out << serialize_snapshot(s);
      if (!out.flush()) throw Error(ErrorKind::IoError, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + path.string() + ": " + ec.message());
  }
  return s;
}

std::vector<std::filesystem::path> Store::list_backups() const {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  if (options_.backup_dir.empty() || !std::filesystem::is_directory(options_.backup_dir, ec)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(options_.backup_dir, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("backup-") && name.ends_with(".snap"))
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Store::restore(const Snapshot& snapshot) {
  if (snapshot.format_version != kSnapshotVersion)
    throw Error(ErrorKind::VersionMismatch, "snapshot version " + std::to_string(snapshot.format_version));
  Database restored = database_from_image(snapshot.image);
  mutate([&](Database& db) { db = std::move(restored); });
}

void Store::install_language_pack(const Principal& who, LanguagePack pack) {
  if (!who.admin) throw Error(ErrorKind::PermissionDenied, "installing a language pack needs an admin");
  validate_pack(pack);
  mutate([&](Database& db) { db.packs[pack.code] = std::move(pack); });
}

std::string Store::transliterate(std::string_view kana, const LanguageCode& language) const {
  SymbolTable table;
  {
    std::shared_lock lock(mutex_);
    auto it = db_.packs.find(language);
    if (it == db_.packs.end()) throw Error(ErrorKind::UnknownLanguagePack, language);
    table = it->second.transliteration;
  }
  return Transliterator(std::move(table))(kana);
}

}  // namespace dt
