#include "personaforge/service/server.hpp"

#include <stdexcept>
#include <thread>

#include <httplib.h>

namespace personaforge::service {

struct HttpServer::Impl {
  Platform& platform;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  Impl(Platform& p, ServerOptions o) : platform(p), options(std::move(o)) {}

  void route(const httplib::Request& req, httplib::Response& res) {
    Request request;
    request.method = req.method;
    request.path = req.path;
    request.body = req.body;
    request.idempotency_key = req.get_header_value("Idempotency-Key");
    const Response response = platform.handle(request);
    res.status = response.status;
    if (!response.binary.empty()) {
      res.set_content(response.binary, response.content_type);
    } else {
      res.set_content(response.body.dump(), "application/json");
    }
  }
};

HttpServer::HttpServer(Platform& platform, ServerOptions options)
    : impl_(std::make_unique<Impl>(platform, std::move(options))) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) { impl_->route(req, res); };
  const std::string pattern = std::string(kApiPrefix) + "/.*";
  impl_->server.Get(pattern, handler);
  impl_->server.Post(pattern, handler);
  impl_->server.Put(pattern, handler);
  impl_->server.Delete(pattern, handler);
  impl_->server.Patch(pattern, handler);
  if (!impl_->options.static_dir.empty() &&
      !impl_->server.set_mount_point("/", impl_->options.static_dir.string())) {
    throw std::runtime_error("static directory not found: " + impl_->options.static_dir.string());
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (impl_->port >= 0) return impl_->port;
  if (impl_->options.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (impl_->server.bind_to_port(impl_->options.host, impl_->options.port)) {
    impl_->port = impl_->options.port;
  }
  if (impl_->port < 0) {
    throw std::runtime_error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  return impl_->port;
}

void HttpServer::listen() {
  bind();
  impl_->server.listen_after_bind();
}

int HttpServer::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int HttpServer::port() const { return impl_->port; }

}  // namespace personaforge::service
