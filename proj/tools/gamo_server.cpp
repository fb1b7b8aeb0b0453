// gamo-server: serves the game API (and optionally the browser bundle).
//
// Every flag can also come from the environment as GAMO_<FLAG>, e.g.
// GAMO_PORT=9000 or GAMO_DATASET=/data/gamo. Flags on the command line win.

#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "gamo/server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"GaMo game server"};
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::optional<std::string> config_path;
  std::string dataset = "gamo-data";
  std::optional<std::string> backend;
  std::optional<std::string> thresholds;
  std::optional<std::string> templates;
  std::optional<std::string> static_dir;
  std::size_t workers = 32;

  app.add_option("--bind", bind, "Address to listen on")->envname("GAMO_BIND");
  app.add_option("--port", port, "TCP port (0 = any free port)")->envname("GAMO_PORT");
  app.add_option("--config", config_path, "Engine config file (key=value)")
      ->envname("GAMO_CONFIG")->check(CLI::ExistingFile);
  app.add_option("--dataset", dataset, "Collection store root")->envname("GAMO_DATASET");
  app.add_option("--backend", backend, "GMF1 weight file")
      ->envname("GAMO_BACKEND")->check(CLI::ExistingFile);
  app.add_option("--thresholds", thresholds, "Per-emotion threshold file")
      ->envname("GAMO_THRESHOLDS")->check(CLI::ExistingFile);
  app.add_option("--templates", templates, "Directory for player template sets")
      ->envname("GAMO_TEMPLATES");
  app.add_option("--static", static_dir, "Directory served at / (browser bundle)")
      ->envname("GAMO_STATIC")->check(CLI::ExistingDirectory);
  app.add_option("--workers", workers, "HTTP worker threads")->envname("GAMO_WORKERS");
  CLI11_PARSE(app, argc, argv);

  try {
    gamo::EngineConfig config;
    if (config_path) config = gamo::load_engine_config(*config_path);
    if (backend) config.backend_path = *backend;
    if (thresholds) config.thresholds_path = *thresholds;
    if (!templates) templates = (std::filesystem::path(dataset) / "templates").string();

    // Block termination signals before any thread starts so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto service = gamo::assemble_service(config, dataset, std::filesystem::path(*templates));
    gamo::ServerOptions options;
    options.bind_address = bind;
    options.port = port;
    options.worker_threads = workers;
    if (static_dir) options.static_dir = *static_dir;
    gamo::GameServer server(service.gateway, options);
    const int bound = server.start();
    std::fprintf(stderr, "gamo-server: backend %s, dataset %s (%llu samples), listening on %s:%d\n",
                 service.classifier->name().c_str(), dataset.c_str(),
                 static_cast<unsigned long long>(service.store->distribution().total),
                 bind.c_str(), bound);

    int received = 0;
    sigwait(&signals, &received);
    std::fprintf(stderr, "gamo-server: signal %d, shutting down\n", received);
    server.stop();
  } catch (const std::exception& e) {
    std::cerr << "gamo-server: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
