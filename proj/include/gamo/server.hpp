#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "gamo/gateway.hpp"

namespace httplib {
class Server;
}

namespace gamo {

/// Everything a running server needs, wired together from an engine config.
struct Service {
  std::shared_ptr<const Classifier> classifier;
  std::shared_ptr<TemplateRegistry> registry;
  std::shared_ptr<CollectionStore> store;
  std::shared_ptr<const GameEngine> engine;
  std::shared_ptr<Gateway> gateway;
};

// Without config.backend_path the built-in reference weights are used
// (input side 48, 64 features, seed 0). Templates persist under
// templates_dir when given.
Service assemble_service(const EngineConfig& config,
                         const std::filesystem::path& dataset_root,
                         std::optional<std::filesystem::path> templates_dir,
                         Gateway::Clock clock = {});

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;
  std::size_t worker_threads = 32;
};

/// Binds the gateway onto HTTP routes. start() returns once the socket is
/// listening; stop() joins the listener thread.
class GameServer {
 public:
  GameServer(std::shared_ptr<Gateway> gateway, ServerOptions options);
  ~GameServer();
  GameServer(const GameServer&) = delete;
  GameServer& operator=(const GameServer&) = delete;

  // Returns the bound port. Throws Error(io) if binding fails.
  int start();
  // Blocks on the calling thread until stop() is called from elsewhere.
  void run();
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();

  std::shared_ptr<Gateway> gateway_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::thread listener_;
  int port_ = 0;
};

}  // namespace gamo
