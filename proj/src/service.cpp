#include "drilltutor/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "drilltutor/crypto.hpp"
#include "drilltutor/drill.hpp"
#include "drilltutor/selection.hpp"
#include "drilltutor/text.hpp"

namespace dt {

using json = nlohmann::json;

// ---------------------------------------------------------------- preferences

ClientPreferences default_preferences() {
  ClientPreferences p;
  p.shortcuts = {{"reveal", " "}, {"correct", "c"}, {"incorrect", "x"}, {"quit", "q"}};
  return p;
}

std::string preferences_to_json(const ClientPreferences& prefs) {
  json goals = json::object();
  for (const auto& [id, label] : prefs.aliases.goal_aliases) goals[std::to_string(id)] = label;
  json variables = json::object();
  for (const auto& [name, label] : prefs.aliases.variable_aliases) variables[name] = label;
  json shortcuts = json::object();
  for (const auto& [action, key] : prefs.shortcuts) shortcuts[action] = key;
  return json{{"language", prefs.language},
              {"aliases", {{"goals", goals}, {"variables", variables}}},
              {"shortcuts", shortcuts}}
      .dump();
}

ClientPreferences preferences_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::MalformedRequest, "preferences must be an object");
    ClientPreferences p = default_preferences();
    p.language = j.value("language", std::string{});
    if (j.contains("aliases")) {
      const auto& a = j.at("aliases");
      const json goals = a.value("goals", json::object());
      const json variables = a.value("variables", json::object());
      for (const auto& [id, label] : goals.items()) {
        std::size_t used = 0;
        const GoalId goal = std::stoull(id, &used);
        if (used != id.size()) throw Error(ErrorKind::MalformedRequest, "goal alias key '" + id + "'");
        p.aliases.goal_aliases[goal] = label.get<std::string>();
      }
      for (const auto& [name, label] : variables.items())
        p.aliases.variable_aliases[name] = label.get<std::string>();
    }
    if (j.contains("shortcuts"))
      for (const auto& [action, key] : j.at("shortcuts").items()) p.shortcuts[action] = key.get<std::string>();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedRequest, std::string("preferences: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorKind::MalformedRequest, std::string("preferences: ") + e.what());
  }
}

std::string seal_preferences(const ClientPreferences& prefs, std::string_view key) {
  const auto payload = base64url_encode(preferences_to_json(prefs));
  return payload + "." + hmac_sha256_hex(key, payload);
}

std::optional<ClientPreferences> open_preferences(std::string_view cookie, std::string_view key) {
  const auto dot = cookie.rfind('.');
  if (dot == std::string_view::npos) return std::nullopt;
  const auto payload = cookie.substr(0, dot);
  if (!constant_time_equal(hmac_sha256_hex(key, payload), cookie.substr(dot + 1))) return std::nullopt;
  std::string text;
  if (!base64url_decode(payload, text)) return std::nullopt;
  try {
    return preferences_from_json(text);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------- requests

std::optional<std::string> HttpRequest::header(std::string_view name) const {
  auto it = headers.find(fold_case(name));
  if (it == headers.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> HttpRequest::param(std::string_view name) const {
  auto it = query.find(std::string(name));
  if (it == query.end()) return std::nullopt;
  return it->second;
}

int status_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::AuthenticationFailed: return 401;
    case ErrorKind::PermissionDenied: return 403;
    case ErrorKind::UnknownGoal:
    case ErrorKind::UnknownChild:
    case ErrorKind::UnknownPattern:
    case ErrorKind::UnknownVariable:
    case ErrorKind::UnknownLanguagePack:
    case ErrorKind::UnknownSession:
    case ErrorKind::UnknownRoute: return 404;
    case ErrorKind::SessionDone:
    case ErrorKind::WrongPhase:
    case ErrorKind::DuplicateUser: return 409;
    case ErrorKind::MalformedRequest:
    case ErrorKind::MalformedBundle:
    case ErrorKind::InvalidUtf8: return 400;
    case ErrorKind::StorageFailure:
    case ErrorKind::IoError: return 500;
    default: return 422;
  }
}

namespace {

using Clock = std::function<Timestamp()>;
using Params = std::map<std::string, std::string>;

HttpResponse json_response(int status, const json& body) {
  HttpResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

HttpResponse error_response(ErrorKind kind, const std::string& message) {
  return json_response(status_for(kind), {{"error", std::string(error_name(kind))}, {"message", message}});
}

json parse_body(const HttpRequest& req) {
  if (!is_valid_utf8(req.body)) throw Error(ErrorKind::InvalidUtf8, "request body");
  try {
    return req.body.empty() ? json::object() : json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedRequest, e.what());
  }
}

std::uint64_t to_id(const std::string& text) {
  std::size_t used = 0;
  try {
    const auto v = std::stoull(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::MalformedRequest, "'" + text + "' is not a number");
}

bool truthy(const std::optional<std::string>& v) { return v && (*v == "1" || *v == "true" || *v == "yes"); }

std::map<std::string, std::string> read_names(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::MalformedRequest, "names must be an object");
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) out[k] = v.get<std::string>();
  return out;
}

json tree_json(const TreeView& v) {
  json children = json::array();
  for (const auto& c : v.children) children.push_back(tree_json(c));
  return {{"id", v.id}, {"label", v.label}, {"patterns", v.pattern_ids}, {"children", std::move(children)}};
}

json goal_json(const Goal& g) {
  return {{"id", g.id},
          {"names", g.names},
          {"parent", g.parent ? json(*g.parent) : json(nullptr)},
          {"children", g.children},
          {"patterns", g.pattern_ids},
          {"owner", g.owner}};
}

json spans_json(const std::map<VariableName, Span>& spans) {
  std::vector<std::pair<VariableName, Span>> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second.begin < b.second.begin; });
  json out = json::array();
  for (const auto& [name, span] : sorted) out.push_back({{"variable", name}, {"begin", span.begin}, {"end", span.end}});
  return out;
}

json counters_json(const Counters& c) {
  return {{"presentations", c.presentations}, {"corrects", c.corrects}, {"errors", c.errors}};
}

std::string cookie_value(const HttpRequest& req, std::string_view name) {
  for (auto [it, end] = req.headers.equal_range("cookie"); it != end; ++it) {
    for (const auto& part : split(it->second, ';')) {
      const auto item = trim(part);
      const auto eq = item.find('=');
      if (eq != std::string_view::npos && item.substr(0, eq) == name) return std::string(item.substr(eq + 1));
    }
  }
  return {};
}

struct Route {
  std::string method;
  std::vector<std::string> pattern;
  std::function<HttpResponse(const HttpRequest&, const Params&)> handler;
};

}  // namespace

// ---------------------------------------------------------------- state

struct Service::State {
  struct Token {
    std::string subject;
    bool admin = false;
    Timestamp expires;
  };

  struct LiveSession {
    explicit LiveSession(DrillSession s) : session(std::move(s)) {}
    std::mutex mutex;
    DrillSession session;
    std::string student;
    LanguageCode language;
    Timestamp last_used;
    std::size_t logged = 0;
  };

  std::mutex mutex;
  std::map<std::string, Token> expert_tokens;
  std::map<std::string, Token> student_tokens;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::mt19937_64 seeds{std::random_device{}()};
  std::vector<Route> routes;
};

namespace {

struct Context {
  Store& store;
  const ServiceConfig& config;
  Service::State& state;
  Clock clock;
};

}  // namespace

Service::~Service() = default;

std::size_t Service::live_sessions() const {
  std::lock_guard lock(state_->mutex);
  return state_->sessions.size();
}

std::size_t Service::expire_sessions() {
  const auto now = config_.clock ? config_.clock() : std::chrono::system_clock::now();
  std::lock_guard lock(state_->mutex);
  std::size_t removed = 0;
  for (auto it = state_->sessions.begin(); it != state_->sessions.end();) {
    if (now - it->second->last_used > config_.session_idle) {
      it = state_->sessions.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  for (auto* tokens : {&state_->expert_tokens, &state_->student_tokens})
    std::erase_if(*tokens, [&](const auto& entry) { return entry.second.expires <= now; });
  return removed;
}

namespace {

class Handlers {
 public:
  Handlers(Store& store, const ServiceConfig& config, Service::State& state)
      : store_(store), config_(config), state_(state) {}

  Timestamp now() const { return config_.clock ? config_.clock() : std::chrono::system_clock::now(); }

  // ---- auth

  std::optional<std::string> bearer(const HttpRequest& req) const {
    auto h = req.header("authorization");
    if (!h || !h->starts_with("Bearer ")) return std::nullopt;
    return std::string(trim(std::string_view(*h).substr(7)));
  }

  Principal expert(const HttpRequest& req) const {
    auto token = bearer(req);
    if (!token) throw Error(ErrorKind::AuthenticationFailed, "expert token required");
    std::lock_guard lock(state_.mutex);
    auto it = state_.expert_tokens.find(*token);
    if (it == state_.expert_tokens.end() || it->second.expires <= now())
      throw Error(ErrorKind::AuthenticationFailed, "unknown or expired expert token");
    return Principal{it->second.subject, it->second.admin};
  }

  std::string student(const HttpRequest& req) const {
    auto token = bearer(req);
    if (!token) throw Error(ErrorKind::AuthenticationFailed, "student token required");
    std::lock_guard lock(state_.mutex);
    auto it = state_.student_tokens.find(*token);
    if (it == state_.student_tokens.end() || it->second.expires <= now())
      throw Error(ErrorKind::AuthenticationFailed, "unknown or expired student token");
    return it->second.subject;
  }

  // ---- preferences and language

  const std::string& key() const { return config_.preference_key; }

  ClientPreferences preferences(const HttpRequest& req) const {
    const auto cookie = cookie_value(req, kPreferenceCookie);
    if (cookie.empty()) return default_preferences();
    auto prefs = open_preferences(cookie, key());
    if (!prefs) throw Error(ErrorKind::MalformedRequest, "preference cookie failed verification");
    return *prefs;
  }

  LanguageCode language(const HttpRequest& req, const ClientPreferences& prefs) const {
    auto installed = [&](const std::string& code) {
      return store_.read([&](const Database& db) { return db.packs.contains(code); });
    };
    if (auto q = req.param("lang")) {
      if (!installed(*q)) throw Error(ErrorKind::UnknownLanguagePack, *q);
      return *q;
    }
    if (!prefs.language.empty() && installed(prefs.language)) return prefs.language;
    if (auto h = req.header("accept-language")) {
      for (const auto& part : split(*h, ',')) {
        auto tag = std::string(trim(part.substr(0, part.find(';'))));
        if (!tag.empty() && installed(tag)) return tag;
        tag = tag.substr(0, tag.find('-'));
        if (!tag.empty() && installed(tag)) return tag;
      }
    }
    return store_.read([](const Database& db) { return db.languages.interface; });
  }

  std::optional<std::string> transliteration(const std::string& kana, const LanguageCode& lang) const {
    if (kana.empty()) return std::nullopt;
    for (const auto& code : {lang, LanguageCode("en")}) {
      try {
        return store_.transliterate(kana, code);
      } catch (const Error&) {
      }
    }
    return std::nullopt;
  }

  json item_json(const DrillItem& item, const LanguageCode& lang) const {
    json j = {{"pattern", item.pattern_id},
              {"stimulus", item.stimulus},
              {"source", item.source_sentence},
              {"target", item.target_sentence},
              {"kana", item.kana_sentence},
              {"highlights", spans_json(item.target_spans)}};
    auto t = transliteration(item.kana_sentence, lang);
    j["transliteration"] = t ? json(*t) : json(nullptr);
    return j;
  }

  // ---- sessions

  std::shared_ptr<Service::State::LiveSession> session(const HttpRequest& req, const std::string& id) const {
    const auto who = student(req);
    std::lock_guard lock(state_.mutex);
    auto it = state_.sessions.find(id);
    if (it == state_.sessions.end()) throw Error(ErrorKind::UnknownSession, id);
    if (it->second->student != who) throw Error(ErrorKind::PermissionDenied, "session belongs to another student");
    return it->second;
  }

  void persist(Service::State::LiveSession& live) const {
    live.last_used = now();
    const auto& events = live.session.events();
    if (config_.log_dir.empty() || live.logged >= events.size()) {
      live.logged = events.size();
      return;
    }
    std::error_code ec;
    std::filesystem::create_directories(config_.log_dir, ec);
    std::ofstream out(config_.log_dir / (live.session.id() + ".log"), std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write the session log");
    for (; live.logged < events.size(); ++live.logged) out << format_event(events[live.logged]) << '\n';
  }

  static SessionConfig read_config(const json& j, std::uint64_t seed) {
    SessionConfig c;
    c.seed = seed;
    if (!j.is_object()) throw Error(ErrorKind::MalformedRequest, "config must be an object");
    auto count = [&](const char* name, std::size_t& field) {
      if (!j.contains(name)) return;
      const auto v = j.at(name).get<long long>();
      if (v < 0) throw Error(ErrorKind::InvalidConfig, std::string(name) + " must not be negative");
      field = static_cast<std::size_t>(v);
    };
    count("k", c.removal_streak);
    count("w", c.reinsert_window);
    if (j.contains("max_rounds") && !j.at("max_rounds").is_null()) {
      std::size_t rounds = 0;
      count("max_rounds", rounds);
      c.max_rounds = rounds;
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("order")) {
      const auto order = j.at("order").get<std::string>();
      if (order == "fixed")
        c.order = Order::fixed;
      else if (order == "shuffled")
        c.order = Order::shuffled;
      else
        throw Error(ErrorKind::InvalidConfig, "order must be 'shuffled' or 'fixed'");
    }
    if (j.contains("stimulus_delay_ms")) c.stimulus_delay = std::chrono::milliseconds(j.at("stimulus_delay_ms").get<long long>());
    c.validate();
    return c;
  }

  static json config_json(const SessionConfig& c) {
    return {{"k", c.removal_streak},
            {"w", c.reinsert_window},
            {"order", c.order == Order::fixed ? "fixed" : "shuffled"},
            {"max_rounds", c.max_rounds ? json(*c.max_rounds) : json(nullptr)},
            {"seed", c.seed},
            {"stimulus_delay_ms", c.stimulus_delay.count()}};
  }

  // ---- expert area

  HttpResponse login(const HttpRequest& req, const Params&) {
    const json body = parse_body(req);
    const auto user = body.value("username", std::string{});
    const auto password = body.value("password", std::string{});
    auto principal = store_.authenticate(user, password);
    if (!principal) throw Error(ErrorKind::AuthenticationFailed, "wrong user name or password");
    const auto token = random_hex(32);
    const auto expires = now() + config_.token_lifetime;
    {
      std::lock_guard lock(state_.mutex);
      state_.expert_tokens[token] = {principal->username, principal->admin, expires};
    }
    return json_response(200, {{"token", token},
                               {"username", principal->username},
                               {"admin", principal->admin},
                               {"expires", format_iso8601(expires)}});
  }

  HttpResponse create_account(const HttpRequest& req, const Params&) {
    const auto who = expert(req);
    if (!who.admin) throw Error(ErrorKind::PermissionDenied, "only an admin can enroll experts");
    const json body = parse_body(req);
    const auto role = body.value("role", std::string("expert"));
    if (role != "expert" && role != "admin") throw Error(ErrorKind::MalformedRequest, "role must be expert or admin");
    const auto user = body.value("username", std::string{});
    store_.enroll_expert(user, body.value("password", std::string{}), role == "admin" ? Role::admin : Role::expert);
    return json_response(201, {{"username", user}, {"role", role}});
  }

  HttpResponse list_goals(const HttpRequest& req, const Params&) {
    expert(req);
    const auto lang = language(req, preferences(req));
    return store_.read([&](const Database& db) {
      json goals = json::array();
      for (GoalId id : db.goals.preorder()) goals.push_back(goal_json(db.goals.goal(id)));
      return json_response(200, {{"tree", tree_json(db.goals.view(lang))}, {"goals", std::move(goals)}});
    });
  }

  HttpResponse get_goal(const HttpRequest& req, const Params& p) {
    expert(req);
    const auto id = to_id(p.at("id"));
    return store_.read([&](const Database& db) { return json_response(200, goal_json(db.goals.goal(id))); });
  }

  HttpResponse create_goal(const HttpRequest& req, const Params&) {
    const auto who = expert(req);
    const json body = parse_body(req);
    if (!body.contains("names")) throw Error(ErrorKind::MalformedRequest, "names required");
    const GoalId parent = body.value("parent", kRootGoal);
    const auto id = store_.add_goal(who, read_names(body.at("names")), parent);
    return store_.read([&](const Database& db) { return json_response(201, goal_json(db.goals.goal(id))); });
  }

  HttpResponse update_goal(const HttpRequest& req, const Params& p) {
    const auto who = expert(req);
    const auto id = to_id(p.at("id"));
    const json body = parse_body(req);
    GoalChange change;
    if (body.contains("names")) change.names = read_names(body.at("names"));
    if (body.contains("parent")) change.parent = body.at("parent").get<GoalId>();
    store_.modify_goal(who, id, change);
    return store_.read([&](const Database& db) { return json_response(200, goal_json(db.goals.goal(id))); });
  }

  HttpResponse delete_goal(const HttpRequest& req, const Params& p) {
    const auto who = expert(req);
    store_.delete_goal(who, to_id(p.at("id")), truthy(req.param("cascade")));
    return HttpResponse{204, "application/json; charset=utf-8", {}, {}};
  }

  HttpResponse get_pattern(const HttpRequest& req, const Params& p) {
    expert(req);
    return store_.read([&](const Database& db) {
      auto it = db.patterns.find(p.at("id"));
      if (it == db.patterns.end()) throw Error(ErrorKind::UnknownPattern, p.at("id"));
      return json_response(200, json::parse(pattern_record_to_json(it->second)));
    });
  }

  HttpResponse put_pattern(const HttpRequest& req, const Params& p) {
    const auto who = expert(req);
    json body = parse_body(req);
    const bool create = !p.contains("id");
    if (!create) {
      if (body.contains("id") && body.at("id") != p.at("id"))
        throw Error(ErrorKind::MalformedRequest, "pattern id in the body differs from the path");
      body["id"] = p.at("id");
      if (!store_.read([&](const Database& db) { return db.patterns.contains(p.at("id")); }))
        throw Error(ErrorKind::UnknownPattern, p.at("id"));
    } else if (body.contains("id") && body.at("id").is_string() &&
               store_.read([&](const Database& db) { return db.patterns.contains(body.at("id").get<std::string>()); })) {
      throw Error(ErrorKind::ConstraintViolation, "pattern " + body.at("id").get<std::string>() + " already exists");
    }
    auto record = pattern_record_from_json(body.dump());
    const auto id = record.pattern.id();
    store_.put_pattern(who, std::move(record));
    return store_.read([&](const Database& db) {
      return json_response(create ? 201 : 200, json::parse(pattern_record_to_json(db.patterns.at(id))));
    });
  }

  HttpResponse delete_pattern(const HttpRequest& req, const Params& p) {
    store_.delete_pattern(expert(req), p.at("id"));
    return HttpResponse{204, "application/json; charset=utf-8", {}, {}};
  }

  HttpResponse add_value(const HttpRequest& req, const Params& p) {
    const auto who = expert(req);
    const json body = parse_body(req);
    LexicalValue value;
    value.variable = body.value("variable", std::string{});
    value.renderings = read_names(body.value("renderings", json::object()));
    store_.add_value(who, p.at("id"), value);
    return store_.read([&](const Database& db) {
      return json_response(201, json::parse(pattern_record_to_json(db.patterns.at(p.at("id")))));
    });
  }

  HttpResponse remove_value(const HttpRequest& req, const Params& p) {
    store_.remove_value(expert(req), p.at("id"), p.at("variable"), to_id(p.at("index")));
    return HttpResponse{204, "application/json; charset=utf-8", {}, {}};
  }

  json preview_json(const Database& db, const PatternRecord& record) const {
    json sentences = json::array();
    for (const auto& e : enumerate(record.pattern, db.languages.target, record.values)) {
      const auto item = make_drill_item(record.pattern, e.tuple, db.languages);
      sentences.push_back(
          {{"stimulus", item.stimulus}, {"source", item.source_sentence}, {"target", item.target_sentence}, {"kana", item.kana_sentence}});
    }
    return {{"pattern", record.pattern.id()}, {"count", sentences.size()}, {"sentences", std::move(sentences)}};
  }

  HttpResponse preview_stored(const HttpRequest& req, const Params& p) {
    expert(req);
    return store_.read([&](const Database& db) {
      auto it = db.patterns.find(p.at("id"));
      if (it == db.patterns.end()) throw Error(ErrorKind::UnknownPattern, p.at("id"));
      return json_response(200, preview_json(db, it->second));
    });
  }

  HttpResponse preview_draft(const HttpRequest& req, const Params&) {
    expert(req);
    const auto record = pattern_record_from_json(parse_body(req).dump());
    return store_.read([&](const Database& db) { return json_response(200, preview_json(db, record)); });
  }

  HttpResponse table(const HttpRequest& req, const Params&) {
    expert(req);
    const auto t = store_.export_table();
    if (req.param("format") == std::optional<std::string>("tsv"))
      return HttpResponse{200, "text/tab-separated-values; charset=utf-8", t.to_tsv(), {}};
    return json_response(200, {{"header", t.header}, {"rows", t.rows}});
  }

  HttpResponse import(const HttpRequest& req, const Params&) {
    const auto who = expert(req);
    const auto report = store_.import_bundle(who, req.body);
    json errors = json::array();
    for (const auto& e : report.errors)
      errors.push_back(
          {{"record", e.record}, {"goal", e.goal}, {"error", std::string(error_name(e.kind))}, {"message", e.message}});
    return json_response(200, {{"goals_created", report.goals_created},
                               {"goals_updated", report.goals_updated},
                               {"patterns_created", report.patterns_created},
                               {"patterns_replaced", report.patterns_replaced},
                               {"values_created", report.values_created},
                               {"errors", std::move(errors)}});
  }

  HttpResponse export_bundle(const HttpRequest& req, const Params&) {
    expert(req);
    return HttpResponse{200, "application/json; charset=utf-8", store_.export_bundle(), {}};
  }

  static json backup_json(const std::string& file) {
    json j = {{"file", file}};
    const std::string stem = file.substr(7, file.size() - 12);
    try {
      j["timestamp"] = format_iso8601(parse_iso8601(stem));
    } catch (const Error&) {
      j["timestamp"] = nullptr;
    }
    return j;
  }

  HttpResponse create_backup(const HttpRequest& req, const Params&) {
    expert(req);
    const auto snapshot = store_.backup();
    return json_response(201, backup_json(snapshot_file_name(snapshot.timestamp)));
  }

  HttpResponse list_backups(const HttpRequest& req, const Params&) {
    expert(req);
    json list = json::array();
    for (const auto& path : store_.list_backups()) list.push_back(backup_json(path.filename().string()));
    return json_response(200, {{"backups", std::move(list)}});
  }

  HttpResponse restore_backup(const HttpRequest& req, const Params& p) {
    const auto who = expert(req);
    if (!who.admin) throw Error(ErrorKind::PermissionDenied, "restoring replaces every expert's data; admin only");
    for (const auto& path : store_.list_backups()) {
      if (path.filename().string() != p.at("file")) continue;
      store_.restore(read_snapshot_file(path));
      return json_response(200, backup_json(p.at("file")));
    }
    throw Error(ErrorKind::UnknownRoute, "no backup named " + p.at("file"));
  }

  HttpResponse put_language(const HttpRequest& req, const Params& p) {
    const auto who = expert(req);
    json body = parse_body(req);
    if (body.contains("code") && body.at("code") != p.at("code"))
      throw Error(ErrorKind::MalformedRequest, "pack code differs from the path");
    body["code"] = p.at("code");
    store_.install_language_pack(who, parse_language_pack(body.dump()));
    return json_response(200, {{"code", p.at("code")}});
  }

  // ---- shared

  HttpResponse list_languages(const HttpRequest&, const Params&) {
    return store_.read([](const Database& db) {
      json codes = json::array();
      for (const auto& [code, _] : db.packs) codes.push_back(code);
      return json_response(200, {{"languages", codes}, {"default", db.languages.interface}});
    });
  }

  HttpResponse get_language(const HttpRequest&, const Params& p) {
    return store_.read([&](const Database& db) {
      auto it = db.packs.find(p.at("code"));
      if (it == db.packs.end()) throw Error(ErrorKind::UnknownLanguagePack, p.at("code"));
      return json_response(200, json::parse(format_language_pack(it->second)));
    });
  }

  HttpResponse transliterate(const HttpRequest& req, const Params&) {
    const auto text = req.param("text").value_or("");
    const auto lang = language(req, preferences(req));
    return json_response(200, {{"text", text}, {"language", lang}, {"result", store_.transliterate(text, lang)}});
  }

  // ---- student area

  HttpResponse student_token(const HttpRequest&, const Params&) {
    const auto token = random_hex(32);
    const auto id = "student-" + random_hex(8);
    const auto expires = now() + config_.token_lifetime;
    {
      std::lock_guard lock(state_.mutex);
      state_.student_tokens[token] = {id, false, expires};
    }
    return json_response(201, {{"token", token}, {"student", id}, {"expires", format_iso8601(expires)}});
  }

  HttpResponse student_goals(const HttpRequest& req, const Params&) {
    const auto prefs = preferences(req);
    const auto lang = language(req, prefs);
    auto view = store_.read([&](const Database& db) { return db.goals.view(lang); });
    return json_response(200, {{"language", lang}, {"tree", tree_json(apply_aliases(std::move(view), prefs.aliases))}});
  }

  static std::string aliased(const Goal& g, const LanguageCode& lang, const LanguageCode& fallback,
                             const AliasSet& aliases) {
    auto it = aliases.goal_aliases.find(g.id);
    return it != aliases.goal_aliases.end() ? it->second : g.label(lang, fallback);
  }

  HttpResponse navigate(const HttpRequest& req, const Params&) {
    const auto prefs = preferences(req);
    const auto lang = language(req, prefs);
    std::vector<std::size_t> path;
    for (const auto& part : split(req.param("path").value_or(""), '/'))
      if (!trim(part).empty()) path.push_back(to_id(std::string(trim(part))));
    return store_.read([&](const Database& db) {
      const auto fallback = db.goals.default_language();
      const auto nav = db.goals.navigate(path);
      json trail = json::array();
      for (GoalId id : nav.trail)
        trail.push_back({{"id", id}, {"label", aliased(db.goals.goal(id), lang, fallback, prefs.aliases)}});
      json children = json::array();
      std::size_t index = 0;
      for (GoalId id : nav.goal->children)
        children.push_back({{"index", index++}, {"id", id}, {"label", aliased(db.goals.goal(id), lang, fallback, prefs.aliases)}});
      return json_response(200, {{"language", lang},
                                 {"goal", {{"id", nav.goal->id}, {"label", aliased(*nav.goal, lang, fallback, prefs.aliases)}}},
                                 {"trail", std::move(trail)},
                                 {"children", std::move(children)},
                                 {"patterns", nav.goal->pattern_ids}});
    });
  }

  HttpResponse goal_patterns(const HttpRequest& req, const Params& p) {
    const auto prefs = preferences(req);
    const auto lang = language(req, prefs);
    const GoalId goal = to_id(p.at("id"));
    return store_.read([&](const Database& db) {
      ItemSelection selection;
      selection.goal = goal;
      selection.include_subgoals = truthy(req.param("all"));
      json patterns = json::array();
      for (const auto& id : selected_patterns(db, selection)) {
        const auto& r = db.patterns.at(id);
        const auto shown = r.pattern.has_rendering(lang) ? lang : db.languages.interface;
        json variables = json::array();
        for (const auto& v : r.variables) {
          json values = json::array();
          std::size_t index = 0;
          for (const auto& value : r.values.at(v.name)) {
            auto label = value.renderings.contains(lang) ? value.renderings.at(lang) : value.in(db.languages.interface);
            auto kana = value.renderings.find(db.languages.kana);
            values.push_back({{"index", index++},
                              {"label", label},
                              {"target", value.in(db.languages.target)},
                              {"kana", kana == value.renderings.end() ? json(nullptr) : json(kana->second)}});
          }
          variables.push_back({{"name", v.name},
                               {"label", variable_label(v, lang, prefs.aliases)},
                               {"category", v.category},
                               {"values", std::move(values)}});
        }
        patterns.push_back({{"id", id},
                            {"goal", r.goal},
                            {"source", r.pattern.rendering_text(shown)},
                            {"target", r.pattern.rendering_text(db.languages.target)},
                            {"kana", r.pattern.has_rendering(db.languages.kana) ? json(r.pattern.rendering_text(db.languages.kana)) : json(nullptr)},
                            {"variables", std::move(variables)}});
      }
      return json_response(200, {{"language", lang}, {"goal", goal}, {"patterns", std::move(patterns)}});
    });
  }

  HttpResponse create_session(const HttpRequest& req, const Params&) {
    const auto who = student(req);
    const auto prefs = preferences(req);
    const auto lang = language(req, prefs);
    const json body = parse_body(req);

    ItemSelection selection;
    if (body.contains("goal") && !body.at("goal").is_null()) selection.goal = body.at("goal").get<GoalId>();
    if (body.contains("patterns")) selection.patterns = body.at("patterns").get<std::vector<std::string>>();
    selection.include_subgoals = body.value("all", false);
    if (body.contains("values"))
      for (const auto& [pattern, vars] : body.at("values").items())
        for (const auto& [variable, indices] : vars.items())
          selection.values[pattern][variable] = indices.get<std::vector<std::size_t>>();

    std::uint64_t seed;
    {
      std::lock_guard lock(state_.mutex);
      seed = config_.default_seed ? *config_.default_seed : state_.seeds();
    }
    const auto config = read_config(body.value("config", json::object()), seed);
    auto items = store_.read([&](const Database& db) { return select_items(db, selection, lang); });
    const auto id = random_hex(16);
    auto live = std::make_shared<Service::State::LiveSession>(
        DrillSession::start(std::move(items), config, id, config_.clock));
    live->student = who;
    live->language = lang;
    std::lock_guard session_lock(live->mutex);
    persist(*live);
    {
      std::lock_guard lock(state_.mutex);
      state_.sessions[id] = live;
    }
    return json_response(201, {{"session", id},
                               {"phase", phase_name(live->session.phase())},
                               {"items", live->session.items().size()},
                               {"config", config_json(config)},
                               {"model", item_json(live->session.model(), lang)}});
  }

  HttpResponse session_state(const HttpRequest& req, const Params& p) {
    auto live = session(req, p.at("id"));
    std::lock_guard lock(live->mutex);
    const auto& s = live->session;
    json current = s.current() ? json(*s.current()) : json(nullptr);
    return json_response(200, {{"session", s.id()},
                               {"phase", phase_name(s.phase())},
                               {"rounds", s.rounds()},
                               {"pending", s.queue().size()},
                               {"current", current},
                               {"config", config_json(s.config())}});
  }

  HttpResponse next(const HttpRequest& req, const Params& p) {
    auto live = session(req, p.at("id"));
    std::lock_guard lock(live->mutex);
    const auto stimulus = live->session.next_stimulus();
    persist(*live);
    return json_response(200, {{"phase", phase_name(live->session.phase())},
                               {"stimulus",
                                {{"item", stimulus.item},
                                 {"pattern", stimulus.pattern_id},
                                 {"text", stimulus.text},
                                 {"round", stimulus.round}}}});
  }

  HttpResponse report(const HttpRequest& req, const Params& p) {
    auto live = session(req, p.at("id"));
    const json body = parse_body(req);
    const auto result = body.value("result", std::string{});
    SelfReport verdict;
    if (result == "correct")
      verdict = SelfReport::correct;
    else if (result == "incorrect")
      verdict = SelfReport::incorrect;
    else
      throw Error(ErrorKind::MalformedRequest, "result must be 'correct' or 'incorrect'");
    std::lock_guard lock(live->mutex);
    const auto fb = live->session.reveal_and_report(verdict);
    persist(*live);
    const auto& item = live->session.items().at(fb.item);
    auto t = transliteration(fb.kana_sentence, live->language);
    return json_response(200, {{"phase", phase_name(live->session.phase())},
                               {"feedback",
                                {{"item", fb.item},
                                 {"pattern", item.pattern_id},
                                 {"stimulus", item.stimulus},
                                 {"target", fb.target_sentence},
                                 {"kana", fb.kana_sentence},
                                 {"transliteration", t ? json(*t) : json(nullptr)},
                                 {"highlights", spans_json(item.target_spans)},
                                 {"verification", fb.verification == SelfReport::correct ? "correct" : "incorrect"},
                                 {"streak", fb.streak},
                                 {"removed", fb.removed},
                                 {"done", fb.done}}}});
  }

  HttpResponse stop(const HttpRequest& req, const Params& p) {
    auto live = session(req, p.at("id"));
    std::lock_guard lock(live->mutex);
    live->session.stop();
    persist(*live);
    return json_response(200, {{"phase", phase_name(live->session.phase())}});
  }

  HttpResponse stats(const HttpRequest& req, const Params& p) {
    auto live = session(req, p.at("id"));
    std::lock_guard lock(live->mutex);
    live->last_used = now();
    const auto& s = live->session;
    const auto st = s.stats();
    json patterns = json::array();
    for (const auto& r : session_report(st))
      patterns.push_back(
          {{"pattern", r.pattern_id}, {"presentations", r.presentations}, {"errors", r.errors}, {"error_rate", r.error_rate}});
    json items = json::array();
    for (std::size_t i = 0; i < st.items.size(); ++i) {
      json entry = counters_json(st.items[i]);
      entry["item"] = i;
      entry["pattern"] = s.items()[i].pattern_id;
      entry["stimulus"] = s.items()[i].stimulus;
      items.push_back(std::move(entry));
    }
    return json_response(200, {{"session", s.id()},
                               {"phase", phase_name(s.phase())},
                               {"rounds", s.rounds()},
                               {"totals", counters_json(st.totals)},
                               {"patterns", std::move(patterns)},
                               {"items", std::move(items)},
                               {"started", st.started ? json(format_iso8601(*st.started)) : json(nullptr)},
                               {"ended", st.ended ? json(format_iso8601(*st.ended)) : json(nullptr)}});
  }

  HttpResponse get_preferences(const HttpRequest& req, const Params&) {
    const auto prefs = preferences(req);
    auto r = json_response(200, {{"preferences", json::parse(preferences_to_json(prefs))},
                                 {"language", language(req, prefs)}});
    return r;
  }

  HttpResponse put_preferences(const HttpRequest& req, const Params&) {
    auto prefs = preferences_from_json(req.body);
    if (!prefs.language.empty() && !store_.read([&](const Database& db) { return db.packs.contains(prefs.language); }))
      throw Error(ErrorKind::UnknownLanguagePack, prefs.language);
    const auto sealed = seal_preferences(prefs, key());
    auto r = json_response(200, {{"preferences", json::parse(preferences_to_json(prefs))}, {"cookie", sealed}});
    r.headers.emplace("Set-Cookie", std::string(kPreferenceCookie) + "=" + sealed +
                                        "; Path=/; Max-Age=31536000; SameSite=Strict");
    return r;
  }

  HttpResponse delete_preferences(const HttpRequest&, const Params&) {
    auto r = json_response(200, {{"preferences", json::parse(preferences_to_json(default_preferences()))}});
    r.headers.emplace("Set-Cookie", std::string(kPreferenceCookie) + "=; Path=/; Max-Age=0; SameSite=Strict");
    return r;
  }

 private:
  Store& store_;
  const ServiceConfig& config_;
  Service::State& state_;
};

std::vector<std::string> path_segments(std::string_view path) {
  std::vector<std::string> out;
  for (const auto& s : split(path, '/'))
    if (!s.empty()) out.push_back(s);
  return out;
}

}  // namespace

Service::Service(Store& store, ServiceConfig config)
    : store_(store), config_(std::move(config)), state_(std::make_unique<State>()) {
  if (config_.preference_key.empty()) config_.preference_key = random_hex(32);
  auto h = std::make_shared<Handlers>(store_, config_, *state_);
  using Method = HttpResponse (Handlers::*)(const HttpRequest&, const Params&);
  auto add = [&](std::string method, std::string_view pattern, Method m) {
    state_->routes.push_back(
        {std::move(method), path_segments(pattern), [h, m](const HttpRequest& r, const Params& p) { return ((*h).*m)(r, p); }});
  };
  add("POST", "expert/login", &Handlers::login);
  add("POST", "expert/accounts", &Handlers::create_account);
  add("GET", "expert/goals", &Handlers::list_goals);
  add("POST", "expert/goals", &Handlers::create_goal);
  add("GET", "expert/goals/{id}", &Handlers::get_goal);
  add("PUT", "expert/goals/{id}", &Handlers::update_goal);
  add("DELETE", "expert/goals/{id}", &Handlers::delete_goal);
  add("POST", "expert/patterns", &Handlers::put_pattern);
  add("GET", "expert/patterns/{id}", &Handlers::get_pattern);
  add("PUT", "expert/patterns/{id}", &Handlers::put_pattern);
  add("DELETE", "expert/patterns/{id}", &Handlers::delete_pattern);
  add("POST", "expert/patterns/{id}/values", &Handlers::add_value);
  add("DELETE", "expert/patterns/{id}/values/{variable}/{index}", &Handlers::remove_value);
  add("GET", "expert/patterns/{id}/preview", &Handlers::preview_stored);
  add("POST", "expert/preview", &Handlers::preview_draft);
  add("GET", "expert/table", &Handlers::table);
  add("POST", "expert/import", &Handlers::import);
  add("GET", "expert/export", &Handlers::export_bundle);
  add("POST", "expert/backups", &Handlers::create_backup);
  add("GET", "expert/backups", &Handlers::list_backups);
  add("POST", "expert/backups/{file}/restore", &Handlers::restore_backup);
  add("PUT", "expert/languages/{code}", &Handlers::put_language);
  add("GET", "languages", &Handlers::list_languages);
  add("GET", "languages/{code}", &Handlers::get_language);
  add("GET", "transliterate", &Handlers::transliterate);
  add("POST", "student/token", &Handlers::student_token);
  add("GET", "student/goals", &Handlers::student_goals);
  add("GET", "student/navigate", &Handlers::navigate);
  add("GET", "student/goals/{id}/patterns", &Handlers::goal_patterns);
  add("POST", "student/sessions", &Handlers::create_session);
  add("GET", "student/sessions/{id}", &Handlers::session_state);
  add("POST", "student/sessions/{id}/next", &Handlers::next);
  add("POST", "student/sessions/{id}/report", &Handlers::report);
  add("POST", "student/sessions/{id}/stop", &Handlers::stop);
  add("GET", "student/sessions/{id}/stats", &Handlers::stats);
  add("GET", "student/preferences", &Handlers::get_preferences);
  add("PUT", "student/preferences", &Handlers::put_preferences);
  add("DELETE", "student/preferences", &Handlers::delete_preferences);
}

HttpResponse Service::handle(const HttpRequest& request) {
  try {
    expire_sessions();
    if (!request.path.starts_with(kApiPrefix))
      throw Error(ErrorKind::UnknownRoute, request.path);
    const auto segments = path_segments(std::string_view(request.path).substr(kApiPrefix.size()));
    bool path_known = false;
    for (const auto& route : state_->routes) {
      if (route.pattern.size() != segments.size()) continue;
      Params params;
      bool ok = true;
      for (std::size_t i = 0; i < segments.size() && ok; ++i) {
        const auto& want = route.pattern[i];
        if (want.size() > 2 && want.front() == '{' && want.back() == '}')
          params[want.substr(1, want.size() - 2)] = segments[i];
        else
          ok = want == segments[i];
      }
      if (!ok) continue;
      path_known = true;
      if (route.method == request.method) return route.handler(request, params);
    }
    if (path_known) {
      HttpResponse r = error_response(ErrorKind::UnknownRoute, request.method + " not allowed here");
      r.status = 405;
      return r;
    }
    throw Error(ErrorKind::UnknownRoute, request.path);
  } catch (const Error& e) {
    return error_response(e.kind(), e.detail());
  } catch (const json::exception& e) {
    return error_response(ErrorKind::MalformedRequest, e.what());
  } catch (const std::exception& e) {
    auto r = error_response(ErrorKind::StorageFailure, e.what());
    r.status = 500;
    return r;
  }
}

// ---------------------------------------------------------------- transport

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  if (!service.config().static_dir.empty()) svr.set_mount_point("/", service.config().static_dir.string());
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    r.body = req.body;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) r.headers.emplace(fold_case(k), v);
    const auto out = impl_->service.handle(r);
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    if (out.status != 204) res.set_content(out.body, out.content_type);
  };
  const std::string all = std::string(kApiPrefix) + "/.*";
  svr.Get(all, handler);
  svr.Post(all, handler);
  svr.Put(all, handler);
  svr.Delete(all, handler);
  svr.Patch(all, handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& svr = impl_->server;
  if (port == 0) {
    const int bound = svr.bind_to_any_port(host);
    if (bound <= 0) throw Error(ErrorKind::IoError, "cannot bind " + host);
    return bound;
  }
  if (!svr.bind_to_port(host, port)) throw Error(ErrorKind::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace dt
