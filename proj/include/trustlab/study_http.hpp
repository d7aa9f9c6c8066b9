#pragma once

// HTTP+JSON routes over StudyService. Protocol violations map to 409 with a
// machine-readable reason, bad payloads to 400, unknown sessions to 404.

#include <string>

#include "httplib.h"
#include "trustlab/study_service.hpp"

namespace trustlab {

namespace detail {

inline void reply(httplib::Response& res, const ApiResult& r) {
  res.status = r.status;
  if (r.status != 204) res.set_content(r.body.dump(), "application/json");
}

inline std::optional<Json> parse_body(const httplib::Request& req, httplib::Response& res) {
  try {
    return req.body.empty() ? Json::object() : Json::parse(req.body);
  } catch (const Json::parse_error&) {
    reply(res, {400, Json{{"error", "invalid_request"}, {"message", "body is not JSON"}}});
    return std::nullopt;
  }
}

inline Json field(const Json& body, const char* key) { return body.is_object() && body.contains(key) ? body.at(key) : Json(); }

}  // namespace detail

inline void mount_study_routes(httplib::Server& srv, StudyService& svc) {
  using httplib::Request;
  using httplib::Response;
  using detail::field;
  using detail::parse_body;
  using detail::reply;

  srv.Post("/api/sessions", [&svc](const Request& req, Response& res) {
    const auto body = parse_body(req, res);
    if (!body) return;
    const auto user = field(*body, "user_id");
    if (!user.is_string()) return reply(res, {400, Json{{"error", "invalid_request"}, {"message", "user_id required"}}});
    std::map<std::string, std::string> attrs;
    if (const auto a = field(*body, "attributes"); a.is_object())
      for (const auto& [k, v] : a.items())
        if (v.is_string()) attrs[k] = v.get<std::string>();
    reply(res, svc.create_session(user.get<std::string>(), attrs));
  });
  srv.Get("/api/sessions/:id/problem",
          [&svc](const Request& req, Response& res) { reply(res, svc.get_problem(req.path_params.at("id"))); });
  srv.Post("/api/sessions/:id/initial", [&svc](const Request& req, Response& res) {
    if (const auto body = parse_body(req, res)) reply(res, svc.post_initial(req.path_params.at("id"), field(*body, "decision")));
  });
  srv.Get("/api/sessions/:id/advice",
          [&svc](const Request& req, Response& res) { reply(res, svc.get_advice(req.path_params.at("id"))); });
  srv.Post("/api/sessions/:id/final", [&svc](const Request& req, Response& res) {
    if (const auto body = parse_body(req, res)) reply(res, svc.post_final(req.path_params.at("id"), field(*body, "decision")));
  });
  srv.Post("/api/sessions/:id/trust", [&svc](const Request& req, Response& res) {
    if (const auto body = parse_body(req, res)) reply(res, svc.post_trust(req.path_params.at("id"), field(*body, "trust")));
  });
  srv.Get("/api/sessions/:id/progress",
          [&svc](const Request& req, Response& res) { reply(res, svc.get_progress(req.path_params.at("id"))); });
  srv.Post("/api/sessions/:id/events", [&svc](const Request& req, Response& res) {
    const auto body = parse_body(req, res);
    if (!body) return;
    const auto name = field(*body, "name");
    reply(res, svc.post_client_event(req.path_params.at("id"), name.is_string() ? name.get<std::string>() : "",
                                     field(*body, "detail")));
  });
  srv.Get("/api/sessions/:id/settlement",
          [&svc](const Request& req, Response& res) { reply(res, svc.get_settlement(req.path_params.at("id"))); });
  srv.Get("/api/health", [](const Request&, Response& res) { res.set_content(R"({"ok":true})", "application/json"); });
  srv.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
    std::string msg = "internal error";
    int status = 500;
    try {
      std::rethrow_exception(ep);
    } catch (const ConflictError& e) {
      status = 409;
      msg = e.what();
    } catch (const DataError& e) {
      status = 400;
      msg = e.what();
    } catch (const std::exception& e) {
      msg = e.what();
    }
    reply(res, {status, Json{{"error", status == 500 ? "internal" : "invalid_request"}, {"message", msg}}});
  });
}

}  // namespace trustlab
