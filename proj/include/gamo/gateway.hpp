#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "gamo/engine.hpp"
#include "gamo/json_io.hpp"
#include "gamo/rng.hpp"
#include "gamo/store.hpp"
#include "gamo/templates.hpp"

namespace gamo {

enum class ApiErrorCode {
  invalid_image,
  no_face,
  rate_limited,
  session_over,
  unregistered_player,
  incomplete_registration,
  backend_error,
};

std::string_view to_string(ApiErrorCode code);

struct ApiError {
  ApiErrorCode code = ApiErrorCode::backend_error;
  std::string message;
  int status = 500;
  std::vector<Emotion> missing;    // incomplete_registration
  std::optional<Emotion> emotion;  // no_face during template capture

  bool retryable() const {
    return code == ApiErrorCode::rate_limited || code == ApiErrorCode::no_face;
  }
  // {"error": {"code", "message", "retryable"[, "missing"][, "emotion"]}}
  Json to_json() const;
};

// Maps library errors onto the closed API error set.
ApiError to_api_error(const Error& error);

struct ApiResponse {
  int status = 200;
  Json body;
};

struct GatewayOptions {
  std::size_t max_payload_bytes = 2u << 20;
};

/// Request handling for every endpoint, independent of the HTTP library.
/// Bodies arrive as raw JSON text; every response is either the endpoint's
/// success document or an ApiError document.
///
/// Sessions live in a map guarded by a reader/writer lock; each session has
/// its own mutex so requests for one session serialize while different
/// sessions proceed in parallel. Deadlines are enforced lazily: every
/// request touching a session first ticks it to the current server time.
class Gateway {
 public:
  using Clock = std::function<Millis()>;

  Gateway(std::shared_ptr<const GameEngine> engine,
          std::shared_ptr<TemplateRegistry> registry,
          std::shared_ptr<CollectionStore> store, GatewayOptions options = {},
          Clock clock = {});

  ApiResponse create_session(const std::string& body);
  ApiResponse submit_frame(const std::string& session_id, const std::string& body);
  ApiResponse get_session(const std::string& session_id);
  ApiResponse register_template(const std::string& player_id,
                                const std::string& emotion, const std::string& body);
  ApiResponse complete_registration(const std::string& player_id);
  ApiResponse stats();

  std::size_t session_count() const;

 private:
  struct Slot {
    explicit Slot(GameSession s) : session(std::move(s)) {}
    std::mutex mutex;
    GameSession session;
  };

  std::shared_ptr<Slot> find(const std::string& session_id) const;
  FaceImage decode_payload(const Json& body) const;
  Json describe(const GameSession& session, Millis now) const;
  std::string new_session_id();

  std::shared_ptr<const GameEngine> engine_;
  std::shared_ptr<TemplateRegistry> registry_;
  std::shared_ptr<CollectionStore> store_;
  GatewayOptions options_;
  Clock clock_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::mutex id_mutex_;
  SplitMix64 id_rng_;
};

}  // namespace gamo
