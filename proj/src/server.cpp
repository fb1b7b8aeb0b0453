#include "gamo/server.hpp"

#include <httplib.h>

namespace gamo {

namespace {

void reply(httplib::Response& res, const ApiResponse& api) {
  res.status = api.status;
  res.set_content(api.body.dump(), "application/json");
}

}  // namespace

Service assemble_service(const EngineConfig& config,
                         const std::filesystem::path& dataset_root,
                         std::optional<std::filesystem::path> templates_dir,
                         Gateway::Clock clock) {
  Service s;
  if (config.backend_path) {
    s.classifier = load_backend(describe_weights(*config.backend_path));
  } else {
    s.classifier = std::make_shared<ReferenceBackend>("reference",
                                                      ReferenceWeights::random(48, 64, 0));
  }
  const auto thresholds =
      config.thresholds_path ? load_thresholds(*config.thresholds_path) : ThresholdTable{};
  auto detector = std::make_shared<CenterCropDetector>();
  s.registry = std::make_shared<TemplateRegistry>(s.classifier, detector, std::move(templates_dir));
  s.store = std::make_shared<CollectionStore>(dataset_root);
  auto general = std::make_shared<ClassifierJudge>(s.classifier, detector, thresholds);
  auto customized = std::make_shared<TemplateJudge>(s.registry);
  s.engine = std::make_shared<GameEngine>(config, general, customized, s.registry,
                                          std::make_shared<StoreSink>(s.store));
  GatewayOptions options;
  options.max_payload_bytes = config.max_payload_bytes;
  s.gateway = std::make_shared<Gateway>(s.engine, s.registry, s.store, options, std::move(clock));
  return s;
}

GameServer::GameServer(std::shared_ptr<Gateway> gateway, ServerOptions options)
    : gateway_(std::move(gateway)),
      options_(std::move(options)),
      http_(std::make_unique<httplib::Server>()) {
  install_routes();
}

GameServer::~GameServer() { stop(); }

void GameServer::install_routes() {
  auto& http = *http_;
  const auto workers = options_.worker_threads;
  http.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  // The gateway enforces the configured limit and answers with invalid_image.
  http.set_payload_max_length(64u << 20);
  // httplib also sets SO_REUSEPORT, which would let a second server share the port.
  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });

  auto gw = gateway_;
  http.Post("/api/sessions", [gw](const httplib::Request& req, httplib::Response& res) {
    reply(res, gw->create_session(req.body));
  });
  http.Get(R"(/api/sessions/([^/]+))", [gw](const httplib::Request& req, httplib::Response& res) {
    reply(res, gw->get_session(req.matches[1]));
  });
  http.Post(R"(/api/sessions/([^/]+)/frames)",
            [gw](const httplib::Request& req, httplib::Response& res) {
              reply(res, gw->submit_frame(req.matches[1], req.body));
            });
  http.Post(R"(/api/players/([^/]+)/templates/complete)",
            [gw](const httplib::Request& req, httplib::Response& res) {
              reply(res, gw->complete_registration(req.matches[1]));
            });
  http.Post(R"(/api/players/([^/]+)/templates/([^/]+))",
            [gw](const httplib::Request& req, httplib::Response& res) {
              reply(res, gw->register_template(req.matches[1], req.matches[2], req.body));
            });
  http.Get("/api/stats", [gw](const httplib::Request&, httplib::Response& res) {
    reply(res, gw->stats());
  });

  http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    ApiError e;
    e.status = res.status;
    if (res.status == 413) {
      e.code = ApiErrorCode::invalid_image;
      e.message = "request body too large";
    } else if (res.status == 404) {
      e.code = ApiErrorCode::backend_error;
      e.message = "no route for " + req.method + " " + req.path;
    } else {
      e.code = ApiErrorCode::backend_error;
      e.message = "request failed with status " + std::to_string(res.status);
    }
    res.set_content(e.to_json().dump(), "application/json");
  });
  http.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        ApiError e;
        e.status = 500;
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& ex) {
          e.message = ex.what();
        } catch (...) {
          e.message = "unknown failure";
        }
        res.status = 500;
        res.set_content(e.to_json().dump(), "application/json");
      });

  if (options_.static_dir) {
    if (!http.set_mount_point("/", options_.static_dir->string())) {
      throw Error(Errc::io, "static directory not found: " + options_.static_dir->string());
    }
  }
}

int GameServer::start() {
  if (listener_.joinable()) return port_;
  if (options_.port == 0) {
    port_ = http_->bind_to_any_port(options_.bind_address);
  } else {
    port_ = http_->bind_to_port(options_.bind_address, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw Error(Errc::io, "cannot bind " + options_.bind_address + ":" +
                              std::to_string(options_.port));
  }
  listener_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return port_;
}

void GameServer::run() {
  start();
  if (listener_.joinable()) listener_.join();
}

void GameServer::stop() {
  if (http_) http_->stop();
  if (listener_.joinable() && listener_.get_id() != std::this_thread::get_id()) {
    listener_.join();
  }
}

}  // namespace gamo
