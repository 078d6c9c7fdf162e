#pragma once

#include "mvr/service.hpp"

#include <httplib.h>

namespace mvr {

/// Binds the render endpoints to an HTTP server. The model must outlive it.
inline void mount_routes(httplib::Server& server, const ServiceModel& model) {
  auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get("/meta", [&model, send](const httplib::Request&, httplib::Response& res) { send(res, handle_meta(model)); });
  server.Post("/render", [&model, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_render(model, req.body));
  });
  server.Post("/pick-feature", [&model, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_pick_feature(model, req.body));
  });
  // the viewer is served from another origin during development
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

}  // namespace mvr
