#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <iostream>

#include "grandjury/service.hpp"

namespace grandjury::api {

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}

  Service& service;
  httplib::Server server;
  std::thread thread;

  void install() {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      Request r;
      r.method = req.method;
      r.path = req.path;
      r.body = req.body;
      for (const auto& [k, v] : req.params) r.query.emplace(k, v);
      for (const auto& [k, v] : req.headers) {
        std::string name = k;
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        r.headers[name] = v;
      }
      if (req.is_multipart_form_data()) {
        for (const auto& [name, part] : req.files) r.form[name] = part.content;
      }
      auto out = service.handle(r);
      res.status = out.status;
      res.set_content(out.body.dump(), "application/json");
    };
    server.set_tcp_nodelay(true);
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
      res.status = 500;
      res.set_content(R"({"code":"StorageFailure","message":"internal error","detail":""})",
                      "application/json");
    });
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) { impl_->install(); }

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::StorageFailure, "cannot bind HTTP listener", host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::listen_blocking(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::StorageFailure, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace grandjury::api
