// Copyright 2026 The podfed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "podfed/api/http_gateway.hpp"

#include <functional>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace podfed::api {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, http_status(e.code()), error_body(e)); }

/// Runs a handler, mapping exceptions onto error responses.
void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const json::exception& e) {
    send_error(res, Error(Errc::invalid_argument, std::string("bad request body: ") + e.what()));
  } catch (const std::exception& e) {
    spdlog::error("unhandled error in HTTP handler: {}", e.what());
    send_error(res, Error(Errc::io, e.what()));
  }
}

std::string bearer(const httplib::Request& req) {
  const std::string h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) {
    throw Error(Errc::unauthorized, "missing bearer token");
  }
  return h.substr(prefix.size());
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body);
  if (!body.is_object()) throw Error(Errc::invalid_argument, "request body must be a JSON object");
  return body;
}

std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    throw Error(Errc::invalid_argument, std::string("'") + key + "' (string) required");
  }
  return body.at(key).get<std::string>();
}

std::int64_t required_int(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_number_integer()) {
    throw Error(Errc::invalid_argument, std::string("'") + key + "' (integer) required");
  }
  return body.at(key).get<std::int64_t>();
}

}  // namespace

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::not_found:        return 404;
    case Errc::conflict:         return 409;
    case Errc::forbidden:        return 403;
    case Errc::locked:           return 403;
    case Errc::unauthorized:     return 401;
    case Errc::invalid_argument: return 400;
    case Errc::invalid_window:   return 400;
    case Errc::exhausted:        return 503;
    case Errc::unavailable:      return 503;
    case Errc::reclaim_failed:   return 503;
    case Errc::port_in_use:      return 409;
    case Errc::pod_not_ready:    return 409;
    case Errc::tunnel_expired:   return 409;
    case Errc::timeout:          return 504;
    case Errc::too_large:        return 413;
    case Errc::io:               return 500;
  }
  return 500;
}

json error_body(const Error& e) {
  json details = json::object();
  if (const auto* api = dynamic_cast<const ApiError*>(&e)) details = api->details();
  if (const auto* rc = dynamic_cast<const reservation::ReservationConflict*>(&e)) {
    details = {{"blocking", reservation::to_json(rc->blocking())}};
  }
  return {{"error", to_string(e.code())},
          {"message", e.what()},
          {"retryable", e.retryable()},
          {"details", details}};
}

struct HttpGateway::Impl {
  FederationService& service;
  std::string host;
  std::uint64_t max_body_bytes;
  httplib::Server server;
  int port = 0;
  std::thread thread;

  Impl(FederationService& s, std::string h, std::uint64_t max_body)
      : service(s), host(std::move(h)), max_body_bytes(max_body) {}

  void routes();
};

void HttpGateway::Impl::routes() {
  using Req = httplib::Request;
  using Res = httplib::Response;
  FederationService& svc = service;

  server.Post("/auth", [&svc](const Req& req, Res& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const ApiToken t = svc.authenticate(required_string(body, "user_id"), required_string(body, "password"));
      send_json(res, 200, to_json(t));
    });
  });

  server.Get("/inventory", [&svc](const Req& req, Res& res) {
    guarded(res, [&] {
      const std::string token = bearer(req);
      const bool by_lab = req.has_param("lab"), by_tb = req.has_param("testbed");
      if (by_lab && by_tb) throw Error(Errc::invalid_argument, "use either lab or testbed, not both");
      reservation::InventoryFilter f;
      if (by_lab) f = reservation::InventoryFilter::lab(req.get_param_value("lab"));
      if (by_tb) f = reservation::InventoryFilter::testbed(req.get_param_value("testbed"));
      send_json(res, 200, svc.inventory(token, f));
    });
  });

  server.Get("/reservations", [&svc](const Req& req, Res& res) {
    guarded(res, [&] {
      const std::string token = bearer(req);
      send_json(res, 200, svc.reservations(token, req.get_param_value("testbed")));
    });
  });

  server.Post("/reservations", [&svc](const Req& req, Res& res) {
    guarded(res, [&] {
      const std::string token = bearer(req);
      const json body = parse_body(req);
      reservation::ReservationRequest r;
      r.testbed_id = required_string(body, "testbed_id");
      r.node_id = required_string(body, "node_id");
      if (!body.contains("device_ids") || !body.at("device_ids").is_array()) {
        throw Error(Errc::invalid_argument, "'device_ids' (array) required");
      }
      r.device_ids = body.at("device_ids").get<std::set<std::string>>();
      r.window = {required_int(body, "start"), required_int(body, "end")};
      send_json(res, 201, reservation::to_json(svc.reserve(token, std::move(r))));
    });
  });

  server.Delete(R"(/reservations/([^/]+))", [&svc](const Req& req, Res& res) {
    guarded(res, [&] {
      svc.cancel_reservation(bearer(req), req.matches[1]);
      res.status = 204;
    });
  });

  server.Post("/sessions", [&svc](const Req& req, Res& res) {
    guarded(res, [&] {
      const std::string token = bearer(req);
      const json body = parse_body(req);
      ConnectRequest c;
      c.instance = body.value("instance", std::string("new"));
      c.app = body.value("app", std::string());
      c.reservation_id = body.value("reservation_id", std::string());
      if (c.instance == "new" && (c.app.empty() || c.reservation_id.empty())) {
        throw Error(Errc::invalid_argument, "'reservation_id' and 'app' required for a new instance");
      }
      const SessionDescriptor s = svc.connect(token, c);
      send_json(res, s.state == SessionState::live ? 200 : 202, to_json(s));
    });
  });

  server.Get("/sessions", [&svc](const Req& req, Res& res) {
    guarded(res, [&] {
      json out = json::array();
      for (const auto& s : svc.sessions(bearer(req))) out.push_back(to_json(s));
      send_json(res, 200, {{"sessions", out}});
    });
  });

  server.Delete(R"(/sessions/([^/]+))", [&svc](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, 200, to_json(svc.disconnect(bearer(req), req.matches[1]))); });
  });

  server.Post(R"(/sessions/([^/]+)/files)", [&svc](const Req& req, Res& res) {
    guarded(res, [&] {
      const std::string token = bearer(req);
      if (!req.has_param("name")) throw Error(Errc::invalid_argument, "'name' query parameter required");
      const UploadResult u = svc.upload(token, req.matches[1], req.get_param_value("name"), req.body);
      send_json(res, 201,
                {{"session_id", u.session_id}, {"pod_name", u.pod_name}, {"path", u.path}, {"bytes", u.bytes}});
    });
  });

  server.Get("/cluster", [&svc](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, 200, svc.cluster_status(bearer(req))); });
  });

  server.Get(R"(/pods/([^/]+))", [&svc](const Req& req, Res& res) {
    guarded(res, [&] { send_json(res, 200, svc.pod_status(bearer(req), req.matches[1])); });
  });

  server.Get("/metrics", [&svc](const Req&, Res& res) {
    guarded(res, [&] {
      res.status = 200;
      res.set_content(svc.metrics(), "text/plain; version=0.0.4");
    });
  });

  server.set_error_handler([](const Req&, Res& res) {
    if (!res.body.empty()) return;
    const Errc code = res.status == 404 ? Errc::not_found
                      : res.status == 413 ? Errc::too_large
                                          : Errc::invalid_argument;
    json body = error_body(Error(code, "HTTP " + std::to_string(res.status)));
    res.set_content(body.dump(), kJson);
  });
}

HttpGateway::HttpGateway(FederationService& service, const std::string& host, std::uint16_t port,
                         std::uint64_t max_body_bytes)
    : impl_(std::make_unique<Impl>(service, host, max_body_bytes)) {
  impl_->server.set_payload_max_length(max_body_bytes + (1u << 20));
  impl_->routes();
  impl_->port = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (impl_->port <= 0) {
    throw Error(Errc::io, "cannot bind HTTP gateway to " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  spdlog::info("HTTP gateway listening on {}:{}", host, impl_->port);
}

HttpGateway::~HttpGateway() { stop(); }

std::uint16_t HttpGateway::port() const { return static_cast<std::uint16_t>(impl_->port); }

const std::string& HttpGateway::host() const { return impl_->host; }

void HttpGateway::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace podfed::api
