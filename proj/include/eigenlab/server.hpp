// SPDX-License-Identifier: Apache-2.0
//
// HTTP/1.1 front end for SessionStore:
//   POST /sessions                  create
//   POST /sessions/{id}/step        step (or dry-run preview)
//   POST /sessions/{id}/rewind      rewind
//   GET  /sessions/{id}             read state (?history=true for records)
#pragma once

#include <functional>
#include <string>
#include <utility>

#include "eigenlab/session.hpp"
#include "httplib.h"

namespace eigenlab {

inline int http_status_for(const std::string& code) {
  if (code == "UnknownSession") return 404;
  if (code == "ValidationError" || code == "IndexOutOfRange") return 400;
  if (code == "SingularMatrix") return 422;
  return 500;
}

class SessionServer {
 public:
  using LogFn = std::function<void(const std::string&)>;

  explicit SessionServer(SessionStore& store, LogFn log = {}) : store_(store), log_(std::move(log)) {
    // httplib defaults to SO_REUSEPORT, which lets a second server share a
    // busy port silently.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    routes();
  }

  /// False when the port cannot be bound (e.g. already in use).
  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }

  /// Blocks until stop() is called.
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  template <typename Handler>
  httplib::Server::Handler wrap(Handler h) {
    return [this, h](const httplib::Request& req, httplib::Response& res) {
      Json body;
      try {
        body = h(req);
        res.status = req.method == "POST" && req.path == "/sessions" ? 201 : 200;
      } catch (const Error& e) {
        body = error_json(e.code(), e.what());
        res.status = http_status_for(e.code());
      } catch (const std::exception& e) {
        body = error_json("InternalError", e.what());
        res.status = 500;
      }
      res.set_content(body.dump(), "application/json");
    };
  }

  static Json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return Json();
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
    }
  }

  void routes() {
    server_.Post("/sessions", wrap([this](const httplib::Request& req) { return store_.handle_create(parse_body(req)); }));
    server_.Post(R"(/sessions/([^/]+)/step)", wrap([this](const httplib::Request& req) {
                   return store_.handle_step(req.matches[1], parse_body(req));
                 }));
    server_.Post(R"(/sessions/([^/]+)/rewind)", wrap([this](const httplib::Request& req) {
                   return store_.handle_rewind(req.matches[1], parse_body(req));
                 }));
    server_.Get(R"(/sessions/([^/]+))", wrap([this](const httplib::Request& req) {
                  const std::string h = req.has_param("history") ? req.get_param_value("history") : "";
                  return store_.state_json(req.matches[1], h == "true" || h == "1");
                }));
    server_.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
      if (log_) log_(req.method + " " + req.path + " -> " + std::to_string(res.status));
    });
  }

  SessionStore& store_;
  LogFn log_;
  httplib::Server server_;
};

}  // namespace eigenlab
