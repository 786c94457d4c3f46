#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "api_client.hpp"
#include "drilltutor/crypto.hpp"
#include "drilltutor/error.hpp"
#include "drilltutor/selection.hpp"
#include "drilltutor/service.hpp"
#include "fixtures.hpp"

using namespace dt;
using namespace dt::test;
using json = nlohmann::json;

namespace {

/// Store with the fixture bundle, an admin, two experts and a settable clock.
struct Fixture {
  TempDir dir;
  Timestamp now = parse_iso8601("2026-10-15T09:00:00.000Z");
  std::unique_ptr<Store> store;

  Fixture() {
    StoreOptions o;
    o.password_iterations = 1000;
    o.backup_dir = dir / "backups";
    o.clock = [this] { return now; };
    store = std::make_unique<Store>(std::make_unique<MemoryBackend>(), o);
    store->enroll_expert("admin", "admin-pw", Role::admin);
    store->enroll_expert("alice", "alice-pw");
    store->enroll_expert("bob", "bob-pw");
    store->import_bundle({"admin", true}, read_text(fixture("present_somebody.bundle.json")));
  }

  ServiceConfig config() {
    ServiceConfig c;
    c.preference_key = "test-key";
    c.default_seed = 7;
    c.log_dir = dir / "logs";
    c.clock = [this] { return now; };
    return c;
  }

  GoalId goal(std::vector<std::string> path) {
    return *store->read([&](const Database& db) { return db.goals.find_path(path); });
  }
};

std::string cookie_from(const ApiResult& r) {
  auto it = r.headers.find("Set-Cookie");
  if (it == r.headers.end()) return {};
  const auto& v = it->second;
  return v.substr(0, v.find(';'));
}

json intro_draft() {
  return json::parse(R"({
    "id": "draft",
    "renderings": {"en": "This is <title> <name> from <origin>.",
                   "ja": "Kono kata wa <origin> no <name> <title> desu."},
    "variables": [
      {"name": "title", "category": "title", "aliases": {}, "values": [{"en": "Mr", "ja": "san"}, {"en": "Prof", "ja": "sensei"}]},
      {"name": "name", "category": "person", "aliases": {}, "values": [{"en": "Schmidt", "ja": "Shimito"}, {"en": "Tsuji", "ja": "Tsuji"}]},
      {"name": "origin", "category": "country", "aliases": {}, "values": [{"en": "Germany", "ja": "doitsu"}, {"en": "Japan", "ja": "nihon"}]}
    ]})");
}

std::vector<std::string> intro_oracle() {
  std::vector<std::string> out;
  for (const auto* title : {"san", "sensei"})
    for (const auto* name : {"Shimito", "Tsuji"})
      for (const auto* origin : {"doitsu", "nihon"})
        out.push_back(std::string("Kono kata wa ") + origin + " no " + name + " " + title + " desu.");
  return out;
}

}  // namespace

TEST(ServiceAuth, LoginGoodAndBad) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto ok = api.post("/expert/login", {{"username", "alice"}, {"password", "alice-pw"}});
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(ok.body.at("token").get<std::string>().size(), 64u);
  const auto bad = api.post("/expert/login", {{"username", "alice"}, {"password", "nope"}});
  EXPECT_EQ(bad.status, 401);
  EXPECT_EQ(bad.body.at("error"), "AuthenticationFailed");
  EXPECT_EQ(api.get("/expert/goals").status, 401);
  EXPECT_EQ(api.get("/expert/goals", "forged-token").status, 401);
}

TEST(ServiceAuth, SeparateTokenNamespaces) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto expert = api.login("alice", "alice-pw");
  const auto student = api.student_token();
  EXPECT_EQ(api.get("/expert/goals", student).status, 401);
  EXPECT_EQ(api.post("/student/sessions", {{"goal", f.goal({"Present somebody"})}}, expert).status, 401);
  EXPECT_EQ(api.get("/student/goals").status, 200);
  EXPECT_EQ(api.post("/student/sessions", {{"goal", f.goal({"Present somebody"})}}, student).status, 201);
}

TEST(ServiceAuth, ExpiredTokensRejected) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto token = api.login("alice", "alice-pw");
  EXPECT_EQ(api.get("/expert/goals", token).status, 200);
  f.now += std::chrono::hours(13);
  EXPECT_EQ(api.get("/expert/goals", token).status, 401);
}

TEST(ServiceExpert, PreviewListsFullEnumeration) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto token = api.login("alice", "alice-pw");
  const auto stored = api.get("/expert/patterns/present-title-origin/preview", token);
  ASSERT_EQ(stored.status, 200);
  EXPECT_EQ(stored.body.at("count"), 8);
  std::vector<std::string> targets;
  for (const auto& s : stored.body.at("sentences")) targets.push_back(s.at("target"));
  EXPECT_EQ(targets, intro_oracle());
  const auto draft = api.post("/expert/preview", intro_draft(), token);
  ASSERT_EQ(draft.status, 200);
  EXPECT_EQ(draft.body.at("count"), 8);
  EXPECT_EQ(draft.body.at("sentences")[0].at("source"), "This is Mr Schmidt from Germany.");
}

TEST(ServiceExpert, GoalAndPatternCrudWithOwnership) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto alice = api.login("alice", "alice-pw");
  const auto bob = api.login("bob", "bob-pw");
  const auto created = api.post("/expert/goals", {{"names", {{"en", "Shopping"}}}}, alice);
  ASSERT_EQ(created.status, 201);
  const auto id = std::to_string(created.body.at("id").get<GoalId>());
  EXPECT_EQ(api.call("PUT", "/expert/goals/" + id, {{"names", {{"en", "Mine"}}}}, bob).status, 403);
  EXPECT_EQ(api.call("PUT", "/expert/goals/" + id, {{"names", {{"en", "Shops"}}}}, alice).status, 200);
  EXPECT_EQ(api.post("/expert/goals", {{"names", {{"en", "Shops"}}}}, alice).status, 422);

  auto pattern = intro_draft();
  pattern["goal"] = created.body.at("id");
  EXPECT_EQ(api.post("/expert/patterns", pattern, alice).status, 201);
  EXPECT_EQ(api.post("/expert/patterns", pattern, alice).status, 422);
  EXPECT_EQ(api.call("DELETE", "/expert/patterns/draft", nullptr, bob).status, 403);
  auto broken = pattern;
  broken["renderings"]["ja"] = "Kono kata wa <place> desu.";
  const auto mismatch = api.call("PUT", "/expert/patterns/draft", broken, alice);
  EXPECT_EQ(mismatch.status, 422);
  EXPECT_EQ(mismatch.body.at("error"), "SlotSetMismatch");

  const auto added = api.post("/expert/patterns/draft/values", {{"variable", "origin"}, {"renderings", {{"en", "Greece"}, {"ja", "girisha"}}}}, alice);
  EXPECT_EQ(added.status, 201);
  EXPECT_EQ(api.get("/expert/patterns/draft/preview", alice).body.at("count"), 12);
  EXPECT_EQ(api.call("DELETE", "/expert/patterns/draft/values/origin/2", nullptr, alice).status, 204);
  json child = json::object();
  child["names"]["en"] = "Groceries";
  child["parent"] = created.body.at("id");
  ASSERT_EQ(api.post("/expert/goals", child, alice).status, 201);
  EXPECT_EQ(api.call("DELETE", "/expert/goals/" + id, nullptr, alice).status, 422);
  EXPECT_EQ(api.call("DELETE", "/expert/goals/" + id, nullptr, alice, {{"cascade", "true"}}).status, 204);
  EXPECT_EQ(api.get("/expert/patterns/draft", alice).status, 404);
}

TEST(ServiceExpert, TableImportExportBackups) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto admin = api.login("admin", "admin-pw");
  const auto alice = api.login("alice", "alice-pw");
  const auto table = api.get("/expert/table", alice);
  EXPECT_EQ(table.body.at("header")[0], "goal");
  EXPECT_EQ(api.get("/expert/table", alice, {{"format", "tsv"}}).raw.substr(0, 4), "goal");

  const auto exported = api.get("/expert/export", alice).raw;
  EXPECT_EQ(exported, f.store->export_bundle());
  const auto report = api.post("/expert/import", json(std::string("{\"format\":\"drilltutor-bundle\",\"version\":1,"
                                                                   "\"goals\":[{\"parent\":[\"Nowhere\"],\"names\":{\"en\":\"x\"}}]}")),
                               alice);
  EXPECT_EQ(report.status, 200);
  EXPECT_EQ(report.body.at("errors").size(), 1u);
  EXPECT_EQ(api.post("/expert/import", json(std::string("{nope")), alice).status, 400);

  const auto backup = api.post("/expert/backups", json::object(), alice);
  ASSERT_EQ(backup.status, 201);
  const std::string file = backup.body.at("file");
  EXPECT_EQ(api.get("/expert/backups", alice).body.at("backups").size(), 1u);
  EXPECT_EQ(api.post("/expert/backups/" + file + "/restore", json::object(), alice).status, 403);
  EXPECT_EQ(api.post("/expert/backups/" + file + "/restore", json::object(), admin).status, 200);
  EXPECT_EQ(f.store->export_bundle(), exported);
}

TEST(ServiceExpert, LanguagePackUpload) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto admin = api.login("admin", "admin-pw");
  auto pack = json::parse(format_language_pack(default_language_pack()));
  pack["code"] = "xx";
  pack["transliteration"].erase("に");
  const auto incomplete = api.call("PUT", "/expert/languages/xx", pack, admin);
  EXPECT_EQ(incomplete.status, 422) << incomplete.raw;
  EXPECT_NE(incomplete.body.at("message").get<std::string>().find("kana:に"), std::string::npos);
  pack["transliteration"]["に"] = "NI";
  EXPECT_EQ(api.call("PUT", "/expert/languages/xx", pack, api.login("alice", "alice-pw")).status, 403);
  EXPECT_EQ(api.call("PUT", "/expert/languages/xx", pack, admin).status, 200);
  EXPECT_EQ(api.get("/transliterate", {}, {{"text", "にほん"}, {"lang", "xx"}}).body.at("result"), "NIhon");
  EXPECT_EQ(api.get("/transliterate", {}, {{"text", "に"}}).body.at("result"), "ni");
  EXPECT_EQ(api.get("/languages/zz").status, 404);
}

TEST(ServiceStudent, SessionStartsWithModel) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto student = api.student_token();
  const json body = {{"goal", f.goal({"Present somebody"})},
                     {"patterns", {"present-title-origin"}},
                     {"values", {{"present-title-origin", {{"title", {1}}, {"name", {1}}, {"origin", {1}}}}}},
                     {"config", {{"k", 2}, {"order", "fixed"}}}};
  const auto created = api.post("/student/sessions", body, student);
  ASSERT_EQ(created.status, 201) << created.raw;
  EXPECT_EQ(created.body.at("phase"), "model");
  EXPECT_EQ(created.body.at("items"), 1);
  const auto& model = created.body.at("model");
  EXPECT_EQ(model.at("stimulus"), "Prof, Tsuji, Japan");
  EXPECT_EQ(model.at("source"), "This is Prof Tsuji from Japan.");
  EXPECT_EQ(model.at("target"), "Kono kata wa nihon no Tsuji sensei desu.");

  const std::string id = created.body.at("session");
  const auto next = api.post("/student/sessions/" + id + "/next", json::object(), student);
  EXPECT_EQ(next.body.at("stimulus").at("text"), "Prof, Tsuji, Japan");
  EXPECT_EQ(api.post("/student/sessions/" + id + "/next", json::object(), student).status, 409);
  const auto fb = api.post("/student/sessions/" + id + "/report", {{"result", "correct"}}, student);
  ASSERT_EQ(fb.status, 200);
  EXPECT_EQ(fb.body.at("feedback").at("target"), "Kono kata wa nihon no Tsuji sensei desu.");
  EXPECT_EQ(fb.body.at("feedback").at("kana"), "このかたは にほん の つじ せんせい です。");
  EXPECT_EQ(fb.body.at("feedback").at("verification"), "correct");
  EXPECT_EQ(fb.body.at("feedback").at("highlights").size(), 3u);
  EXPECT_EQ(api.post("/student/sessions/" + id + "/report", {{"result", "maybe"}}, student).status, 400);
}

TEST(ServiceStudent, DoneSessionAnswers409AndUnknown404) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto student = api.student_token();
  const auto created = api.post("/student/sessions",
                                {{"goal", f.goal({"Ask about things"})}, {"patterns", {"what-is-that"}}, {"config", {{"k", 1}}}},
                                student);
  ASSERT_EQ(created.status, 201);
  const std::string id = created.body.at("session");
  api.post("/student/sessions/" + id + "/next", json::object(), student);
  const auto fb = api.post("/student/sessions/" + id + "/report", {{"result", "correct"}}, student);
  EXPECT_EQ(fb.body.at("phase"), "done");
  EXPECT_EQ(api.post("/student/sessions/" + id + "/report", {{"result", "correct"}}, student).status, 409);
  EXPECT_EQ(api.post("/student/sessions/" + id + "/next", json::object(), student).status, 409);
  EXPECT_EQ(api.get("/student/sessions/nope", student).status, 404);
  EXPECT_EQ(api.get("/student/sessions/" + id, api.student_token()).status, 403);
}

TEST(ServiceStudent, StatsEqualEngineReportFromLog) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto student = api.student_token();
  const auto goal = f.goal({"Present somebody"});
  const auto created = api.post("/student/sessions", {{"goal", goal}, {"config", {{"seed", 3}}}}, student);
  ASSERT_EQ(created.status, 201);
  const std::string id = created.body.at("session");
  std::mt19937 rng(4);
  for (int guard = 0; guard < 500; ++guard) {
    const auto n = api.post("/student/sessions/" + id + "/next", json::object(), student);
    if (n.status != 200) break;
    api.post("/student/sessions/" + id + "/report", {{"result", rng() % 3 ? "correct" : "incorrect"}}, student);
  }
  const auto stats = api.get("/student/sessions/" + id + "/stats", student);
  ASSERT_EQ(stats.status, 200);

  // Independent replay: the persisted log folded over freshly selected items.
  std::vector<SessionEvent> events;
  std::istringstream log(read_text(f.dir / ("logs/" + id + ".log")));
  for (std::string line; std::getline(log, line);) events.push_back(parse_event(line));
  ItemSelection sel;
  sel.goal = goal;
  const auto items = f.store->read([&](const Database& db) { return select_items(db, sel); });
  const auto folded = fold_events(events, items);
  EXPECT_EQ(stats.body.at("totals").at("errors"), folded.totals.errors);
  EXPECT_EQ(stats.body.at("totals").at("presentations"), folded.totals.presentations);
  const auto report = session_report(folded);
  ASSERT_EQ(stats.body.at("patterns").size(), report.size());
  for (std::size_t i = 0; i < report.size(); ++i) {
    EXPECT_EQ(stats.body.at("patterns")[i].at("pattern"), report[i].pattern_id);
    EXPECT_EQ(stats.body.at("patterns")[i].at("errors"), report[i].errors);
  }
  EXPECT_GT(folded.totals.errors, 0u);
}

TEST(ServiceStudent, IdleSessionsExpire) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto student = api.student_token();
  const std::string id = api.post("/student/sessions", {{"goal", f.goal({"Present somebody"})}}, student).body.at("session");
  EXPECT_EQ(svc.live_sessions(), 1u);
  f.now += std::chrono::minutes(29);
  EXPECT_EQ(api.get("/student/sessions/" + id, student).status, 200);
  f.now += std::chrono::minutes(31);
  EXPECT_EQ(svc.expire_sessions(), 1u);
  EXPECT_EQ(api.get("/student/sessions/" + id, student).status, 404);
}

TEST(ServiceStudent, NavigateAndPatterns) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto nav = api.get("/student/navigate", {}, {{"path", "2/0"}});
  ASSERT_EQ(nav.status, 200);
  EXPECT_EQ(nav.body.at("goal").at("label"), "Tell the time");
  EXPECT_EQ(nav.body.at("trail").size(), 3u);
  EXPECT_EQ(api.get("/student/navigate", {}, {{"path", "9"}}).status, 404);
  const auto id = std::to_string(f.goal({"Everyday topics"}));
  EXPECT_EQ(api.get("/student/goals/" + id + "/patterns").body.at("patterns").size(), 0u);
  EXPECT_EQ(api.get("/student/goals/" + id + "/patterns", {}, {{"all", "true"}}).body.at("patterns").size(), 2u);
}

TEST(ServicePreferences, RoundTripAliasesAndTampering) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  const auto goal = f.goal({"Present somebody"});
  json prefs = json::object();
  prefs["language"] = "en";
  prefs["aliases"]["goals"][std::to_string(goal)] = "intros";
  prefs["aliases"]["variables"] = json::object();
  prefs["shortcuts"]["correct"] = "j";
  const auto put = api.call("PUT", "/student/preferences", prefs);
  ASSERT_EQ(put.status, 200) << put.raw;
  const auto cookie = cookie_from(put);
  ASSERT_EQ(cookie.rfind("dt_prefs=", 0), 0u);

  const auto read = api.call("GET", "/student/preferences", nullptr, {}, {}, {{"cookie", cookie}});
  EXPECT_EQ(read.body.at("preferences").at("shortcuts").at("correct"), "j");
  EXPECT_EQ(read.body.at("preferences").at("aliases").at("goals").at(std::to_string(goal)), "intros");

  const auto tree = api.call("GET", "/student/goals", nullptr, {}, {}, {{"cookie", cookie}});
  EXPECT_EQ(tree.body.at("tree").at("children")[0].at("label"), "intros");
  EXPECT_EQ(api.get("/student/goals").body.at("tree").at("children")[0].at("label"), "Present somebody");

  auto tampered = cookie;
  tampered[12] = tampered[12] == 'A' ? 'B' : 'A';
  EXPECT_EQ(api.call("GET", "/student/goals", nullptr, {}, {}, {{"cookie", tampered}}).status, 400);
  EXPECT_EQ(api.call("GET", "/student/preferences", nullptr, {}, {}, {{"cookie", "dt_prefs=" + seal_preferences(default_preferences(), "other-key")}}).status,
            400);
}

TEST(ServicePreferences, LanguageSelection) {
  Fixture f;
  auto pack = default_language_pack();
  pack.code = "el";
  pack.ui_strings["app.title"] = "Δάσκαλος";
  f.store->install_language_pack({"admin", true}, pack);
  Service svc(*f.store, f.config());
  Api api(svc);
  EXPECT_EQ(api.get("/student/goals", {}, {{"lang", "el"}}).body.at("tree").at("children")[0].at("label"), "Συστήνω κάποιον");
  EXPECT_EQ(api.get("/student/goals", {}, {{"lang", "fr"}}).status, 404);
  const auto by_header = api.call("GET", "/student/goals", nullptr, {}, {}, {{"accept-language", "el-GR,en;q=0.5"}});
  EXPECT_EQ(by_header.body.at("language"), "el");
  EXPECT_EQ(api.get("/student/goals").body.at("language"), "en");
}

TEST(ServiceContract, ReadEndpointsStableAcrossRestart) {
  Fixture f;
  auto read_all = [&](Service& svc) {
    Api api(svc);
    const auto token = api.login("alice", "alice-pw");
    std::vector<std::string> out;
    for (const auto* path : {"/languages", "/languages/en", "/student/goals", "/expert/table", "/expert/export"})
      out.push_back(api.get(path, token).raw);
    out.push_back(api.get("/student/navigate", {}, {{"path", "0"}}).raw);
    out.push_back(api.get("/expert/patterns/present-name/preview", token).raw);
    return out;
  };
  std::vector<std::string> first;
  {
    Service svc(*f.store, f.config());
    first = read_all(svc);
  }
  Service again(*f.store, f.config());
  EXPECT_EQ(read_all(again), first);
}

TEST(ServiceContract, RoutingErrors) {
  Fixture f;
  Service svc(*f.store, f.config());
  Api api(svc);
  EXPECT_EQ(api.get("/nothing/here").status, 404);
  EXPECT_EQ(api.call("DELETE", "/languages").status, 405);
  EXPECT_EQ(api.post("/expert/login", json(std::string("{broken"))).status, 400);
  EXPECT_EQ(status_for(ErrorKind::ConstraintViolation), 422);
}

TEST(ServiceHttp, RealSocketRoundTrip) {
  Fixture f;
  Service svc(*f.store, f.config());
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread t([&] { server.run(); });
  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  httplib::Result langs;
  for (int i = 0; i < 50 && !langs; ++i) {
    langs = client.Get("/api/v1/languages");
    if (!langs) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  ASSERT_TRUE(langs);
  EXPECT_EQ(langs->status, 200);
  EXPECT_EQ(langs->get_header_value("Content-Type"), "application/json; charset=utf-8");

  const auto login = client.Post("/api/v1/expert/login", R"({"username":"alice","password":"alice-pw"})", "application/json");
  ASSERT_TRUE(login);
  EXPECT_EQ(login->status, 200);
  const auto token = json::parse(login->body).at("token").get<std::string>();
  const auto preview = client.Get("/api/v1/expert/patterns/present-title-origin/preview",
                                  {{"Authorization", "Bearer " + token}});
  ASSERT_TRUE(preview);
  EXPECT_EQ(json::parse(preview->body).at("count"), 8);

  const auto prefs = client.Put("/api/v1/student/preferences", R"({"language":"en"})", "application/json");
  ASSERT_TRUE(prefs);
  EXPECT_NE(prefs->get_header_value("Set-Cookie").find("dt_prefs="), std::string::npos);

  const auto bad = client.Post("/api/v1/expert/login", R"({"username":"alice","password":"x"})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 401);
  server.stop();
  t.join();
}
