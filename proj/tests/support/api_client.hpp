#pragma once

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "drilltutor/service.hpp"

namespace dt::test {

struct ApiResult {
  int status = 0;
  nlohmann::json body;
  std::string raw;
  std::multimap<std::string, std::string> headers;
};

/// In-process caller for Service::handle.
class Api {
 public:
  explicit Api(Service& service) : service_(service) {}

  ApiResult call(const std::string& method, const std::string& path, const nlohmann::json& body = nullptr,
                 const std::string& token = {}, std::multimap<std::string, std::string> query = {},
                 std::multimap<std::string, std::string> headers = {}) {
    HttpRequest req;
    req.method = method;
    req.path = std::string(kApiPrefix) + path;
    req.query = std::move(query);
    req.headers = std::move(headers);
    if (!token.empty()) req.headers.emplace("authorization", "Bearer " + token);
    if (!body.is_null()) req.body = body.is_string() ? body.get<std::string>() : body.dump();
    const auto res = service_.handle(req);
    ApiResult out{res.status, nullptr, res.body, res.headers};
    if (res.content_type.starts_with("application/json") && !res.body.empty())
      out.body = nlohmann::json::parse(res.body, nullptr, false);
    return out;
  }

  ApiResult get(const std::string& path, const std::string& token = {},
                std::multimap<std::string, std::string> query = {}) {
    return call("GET", path, nullptr, token, std::move(query));
  }
  ApiResult post(const std::string& path, const nlohmann::json& body, const std::string& token = {}) {
    return call("POST", path, body, token);
  }

  std::string login(const std::string& user, const std::string& password) {
    const auto r = post("/expert/login", {{"username", user}, {"password", password}});
    return r.status == 200 ? r.body.at("token").get<std::string>() : std::string{};
  }
  std::string student_token() { return post("/student/token", nlohmann::json::object()).body.at("token"); }

 private:
  Service& service_;
};

}  // namespace dt::test
