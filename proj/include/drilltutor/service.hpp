#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "drilltutor/goals.hpp"
#include "drilltutor/store.hpp"

namespace dt {

inline constexpr std::string_view kApiPrefix = "/api/v1";
inline constexpr std::string_view kPreferenceCookie = "dt_prefs";

struct ServiceConfig {
  std::chrono::minutes session_idle{30};
  std::chrono::minutes token_lifetime{12 * 60};
  /// One `<session id>.log` per drill session; empty keeps logs in memory only.
  std::filesystem::path log_dir;
  /// Key for the preference cookie tag. A random key is drawn when empty,
  /// which invalidates cookies across restarts.
  std::string preference_key;
  /// Seed for sessions that do not choose one; drawn at random when empty.
  std::optional<std::uint64_t> default_seed;
  std::function<Timestamp()> clock;
  /// Served under "/" when set (the web client).
  std::filesystem::path static_dir;
};

/// Keyboard shortcuts, interface language and student aliases; held by the
/// client in the integrity-tagged `dt_prefs` cookie.
struct ClientPreferences {
  LanguageCode language;  // empty: not chosen
  AliasSet aliases;
  std::map<std::string, std::string> shortcuts;

  bool operator==(const ClientPreferences&) const = default;
};

ClientPreferences default_preferences();
std::string preferences_to_json(const ClientPreferences& prefs);
/// Throws Error(MalformedRequest).
ClientPreferences preferences_from_json(std::string_view text);
/// base64url(json) "." hex(HMAC-SHA256(key, base64url(json)))
std::string seal_preferences(const ClientPreferences& prefs, std::string_view key);
/// nullopt when the tag does not verify or the payload is malformed.
std::optional<ClientPreferences> open_preferences(std::string_view cookie, std::string_view key);

struct HttpRequest {
  std::string method;
  std::string path;
  std::multimap<std::string, std::string> query;
  std::multimap<std::string, std::string> headers;  // names lower-cased
  std::string body;

  std::optional<std::string> header(std::string_view name) const;
  std::optional<std::string> param(std::string_view name) const;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json; charset=utf-8";
  std::string body;
  std::multimap<std::string, std::string> headers;
};

/// HTTP status for a library error.
int status_for(ErrorKind kind) noexcept;

/// The Expert and Student areas. handle() is transport-independent and safe
/// to call from concurrent threads; one request at a time per drill session.
class Service {
 public:
  explicit Service(Store& store, ServiceConfig config = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpResponse handle(const HttpRequest& request);
  const ServiceConfig& config() const noexcept { return config_; }
  /// Drops idle sessions; returns how many were removed.
  std::size_t expire_sessions();
  std::size_t live_sessions() const;

  struct State;  // defined in service.cpp

 private:
  Store& store_;
  ServiceConfig config_;
  std::unique_ptr<State> state_;
};

/// cpp-httplib front end for a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port. Throws Error(IoError).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dt
