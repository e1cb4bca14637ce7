#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "personaforge/service/platform.hpp"

namespace personaforge::service {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::filesystem::path static_dir;  // optional dashboard build served at "/"
};

/// HTTP adapter over Platform::handle. Accepts concurrent requests.
class HttpServer {
 public:
  HttpServer(Platform& platform, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket and returns the bound port.
  int bind();
  /// Serves until stop(); binds first when needed.
  void listen();
  /// Binds and serves on a background thread.
  int start();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace personaforge::service
