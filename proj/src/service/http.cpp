// Eigen must precede httplib: <resolv.h> defines a `_res` macro that breaks
// Eigen's product kernels.
#include "sonder/error.hpp"
#include "sonder/service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

namespace sonder {

namespace {

void send(httplib::Response& res, const Reply& reply) {
  res.status = reply.status;
  res.set_content(reply.body, reply.content_type);
}

}  // namespace

void SearchService::mount(httplib::Server& server) {
  using Handler = Reply (SearchService::*)(const std::string&);
  auto post = [&](const char* path, Handler handler) {
    server.Post(path, [this, handler](const httplib::Request& req, httplib::Response& res) {
      send(res, (this->*handler)(req.body));
    });
  };
  post("/session", &SearchService::create_session);
  post("/search", &SearchService::search);
  post("/click", &SearchService::click);
  post("/survey", &SearchService::survey);

  server.Get("/health", [this](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) { send(res, metrics()); });
  server.Get(R"(/scales/([A-Za-z0-9_.\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, scale(req.matches[1]));
  });

  if (config_.static_dir) {
    if (!server.set_mount_point("/app", config_.static_dir->string())) {
      throw Error(ErrorCode::InvalidConfig, "static directory " + config_.static_dir->string() + " does not exist");
    }
  }

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", "Internal"}, {"detail", what}}.dump(), "application/json");
  });
}

void run_server(SearchService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port)) {
    throw Error(ErrorCode::InvalidConfig, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace sonder
