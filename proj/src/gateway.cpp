#include "gamo/gateway.hpp"

#include <chrono>
#include <cstdio>
#include <random>

#include "gamo/image_codec.hpp"

namespace gamo {

namespace {

ApiError make_error(ApiErrorCode code, int status, std::string message) {
  ApiError e;
  e.code = code;
  e.status = status;
  e.message = std::move(message);
  return e;
}

ApiResponse respond(const ApiError& e) { return {e.status, e.to_json()}; }

Json labels(const std::vector<Emotion>& emotions) {
  Json out = Json::array();
  for (auto e : emotions) out.push_back(label(e));
  return out;
}

Json target_json(const ActiveTarget& t, Millis now) {
  Json j;
  j["emotion"] = label(t.emotion);
  j["index"] = index_of(t.emotion);
  j["spawned_at_ms"] = t.spawn_time.count();
  j["deadline_ms"] = t.deadline.count();
  j["remaining_ms"] = std::max<std::int64_t>(0, (t.deadline - now).count());
  return j;
}

Json events_json(const std::vector<SessionEvent>& events) {
  Json out = Json::array();
  for (const auto& e : events) {
    Json j;
    j["kind"] = to_string(e.kind);
    j["emotion"] = label(e.emotion);
    j["at_ms"] = e.at.count();
    j["lives"] = e.lives;
    j["score"] = e.score;
    out.push_back(std::move(j));
  }
  return out;
}

Json scores_json(const EmotionScores& scores) {
  Json j = Json::object();
  for (auto e : kAllEmotions) j[std::string(label(e))] = scores[e];
  return j;
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  auto j = Json::parse(body);
  if (!j.is_object()) throw Error(Errc::parse, "request body must be a JSON object");
  return j;
}

template <typename Handler>
ApiResponse guarded(Handler&& handler) {
  try {
    return handler();
  } catch (const Error& e) {
    return respond(to_api_error(e));
  } catch (const nlohmann::json::exception& e) {
    return respond(make_error(ApiErrorCode::invalid_image, 400,
                              std::string("malformed request body: ") + e.what()));
  } catch (const std::exception& e) {
    return respond(make_error(ApiErrorCode::backend_error, 500, e.what()));
  }
}

}  // namespace

std::string_view to_string(ApiErrorCode code) {
  switch (code) {
    case ApiErrorCode::invalid_image: return "invalid_image";
    case ApiErrorCode::no_face: return "no_face";
    case ApiErrorCode::rate_limited: return "rate_limited";
    case ApiErrorCode::session_over: return "session_over";
    case ApiErrorCode::unregistered_player: return "unregistered_player";
    case ApiErrorCode::incomplete_registration: return "incomplete_registration";
    case ApiErrorCode::backend_error: return "backend_error";
  }
  return "backend_error";
}

Json ApiError::to_json() const {
  Json e;
  e["code"] = to_string(code);
  e["message"] = message;
  e["retryable"] = retryable();
  if (code == ApiErrorCode::incomplete_registration) e["missing"] = labels(missing);
  if (emotion) e["emotion"] = label(*emotion);
  Json j;
  j["error"] = std::move(e);
  return j;
}

ApiError to_api_error(const Error& error) {
  switch (error.code()) {
    case Errc::invalid_image:
    case Errc::invalid_scores:
    case Errc::parse:
      return make_error(ApiErrorCode::invalid_image, 400, error.what());
    case Errc::no_face: {
      auto e = make_error(ApiErrorCode::no_face, 422, error.what());
      if (const auto* nf = dynamic_cast<const NoFaceError*>(&error)) e.emotion = nf->emotion();
      return e;
    }
    case Errc::session_over:
      return make_error(ApiErrorCode::session_over, 409, error.what());
    case Errc::unregistered_player:
      return make_error(ApiErrorCode::unregistered_player, 404, error.what());
    case Errc::incomplete_registration: {
      auto e = make_error(ApiErrorCode::incomplete_registration, 409, error.what());
      if (const auto* ir = dynamic_cast<const IncompleteRegistration*>(&error)) {
        e.missing = ir->missing();
      }
      return e;
    }
    default:
      return make_error(ApiErrorCode::backend_error, 500, error.what());
  }
}

Gateway::Gateway(std::shared_ptr<const GameEngine> engine,
                 std::shared_ptr<TemplateRegistry> registry,
                 std::shared_ptr<CollectionStore> store, GatewayOptions options,
                 Clock clock)
    : engine_(std::move(engine)),
      registry_(std::move(registry)),
      store_(std::move(store)),
      options_(options),
      clock_(std::move(clock)),
      id_rng_(std::random_device{}() ^
              (static_cast<std::uint64_t>(std::random_device{}()) << 32)) {
  if (!clock_) {
    const auto origin = std::chrono::steady_clock::now();
    clock_ = [origin] {
      return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - origin);
    };
  }
}

std::string Gateway::new_session_id() {
  std::lock_guard lock(id_mutex_);
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%016llx",
                static_cast<unsigned long long>(id_rng_.next()));
  return buf;
}

std::shared_ptr<Gateway::Slot> Gateway::find(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return nullptr;
  return it->second;
}

std::size_t Gateway::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

FaceImage Gateway::decode_payload(const Json& body) const {
  const auto it = body.find("image");
  if (it == body.end() || !it->is_string()) {
    throw Error(Errc::invalid_image, "body needs an \"image\" field with base64 PNG/JPEG");
  }
  const auto& text = it->get_ref<const std::string&>();
  if (text.size() / 4 * 3 > options_.max_payload_bytes + 3) {
    throw Error(Errc::invalid_image, "image payload exceeds " +
                                         std::to_string(options_.max_payload_bytes) + " bytes");
  }
  const auto bytes = base64_decode(text);
  if (bytes.size() > options_.max_payload_bytes) {
    throw Error(Errc::invalid_image, "image payload exceeds " +
                                         std::to_string(options_.max_payload_bytes) + " bytes");
  }
  return decode_image(bytes);
}

Json Gateway::describe(const GameSession& s, Millis now) const {
  Json j;
  j["session_id"] = s.id();
  j["mode"] = to_string(s.config().mode);
  j["player_id"] = s.config().player_id ? Json(*s.config().player_id) : Json(nullptr);
  j["state"] = s.running() ? "running" : "over";
  j["lives"] = s.lives();
  j["initial_lives"] = s.config().initial_lives;
  j["score"] = s.score();
  j["target"] = s.active_target() ? target_json(*s.active_target(), now) : Json(nullptr);
  j["bomb_ttl_ms"] = s.config().bomb_ttl.count();
  j["min_frame_interval_ms"] = s.config().min_frame_interval.count();
  j["server_time_ms"] = now.count();
  if (!s.running()) j["final_score"] = s.score();
  return j;
}

ApiResponse Gateway::create_session(const std::string& body) {
  return guarded([&] {
    const auto req = parse_body(body);
    SessionRequest request;
    const auto mode = req.value("mode", std::string("general"));
    const auto parsed = parse_game_mode(mode);
    if (!parsed) throw Error(Errc::parse, "unknown mode '" + mode + "'");
    request.mode = *parsed;
    if (req.contains("player_id") && !req["player_id"].is_null()) {
      auto player = req["player_id"].get<std::string>();
      if (!valid_player_id(player)) throw Error(Errc::unregistered_player, "invalid player id");
      request.player_id = std::move(player);
    }
    if (req.contains("seed") && !req["seed"].is_null()) {
      request.seed = req["seed"].get<std::uint64_t>();
    } else {
      std::lock_guard lock(id_mutex_);
      request.seed = id_rng_.next();
    }
    if (req.contains("scheduler_policy")) {
      const auto text = req["scheduler_policy"].get<std::string>();
      request.scheduler_policy = parse_scheduler_policy(text);
      if (!request.scheduler_policy) throw Error(Errc::parse, "unknown scheduler_policy");
    }
    request.session_id = new_session_id();
    const auto now = clock_();
    auto slot = std::make_shared<Slot>(engine_->start_session(request, now));
    auto doc = describe(slot->session, now);
    doc["seed"] = *request.seed;
    {
      std::unique_lock lock(sessions_mutex_);
      sessions_.emplace(*request.session_id, std::move(slot));
    }
    return ApiResponse{200, std::move(doc)};
  });
}

ApiResponse Gateway::get_session(const std::string& session_id) {
  return guarded([&] {
    auto slot = find(session_id);
    if (!slot) return respond(make_error(ApiErrorCode::session_over, 404, "unknown session"));
    std::lock_guard lock(slot->mutex);
    const auto now = clock_();
    auto events = engine_->tick(slot->session, now);
    auto doc = describe(slot->session, now);
    doc["events"] = events_json(events);
    return ApiResponse{200, std::move(doc)};
  });
}

ApiResponse Gateway::submit_frame(const std::string& session_id, const std::string& body) {
  return guarded([&] {
    auto slot = find(session_id);
    if (!slot) return respond(make_error(ApiErrorCode::session_over, 404, "unknown session"));
    const auto req = parse_body(body);
    std::optional<std::int64_t> client_ts;
    if (req.contains("client_timestamp_ms") && !req["client_timestamp_ms"].is_null()) {
      client_ts = req["client_timestamp_ms"].get<std::int64_t>();
    }
    const auto frame = decode_payload(req);
    const auto wall = std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());

    std::lock_guard lock(slot->mutex);
    const auto now = clock_();
    auto outcome = engine_->submit_frame(slot->session, frame, now, wall);
    if (outcome.status == FrameStatus::rate_limited) {
      return respond(make_error(ApiErrorCode::rate_limited, 429,
                                "frames must be at least " +
                                    std::to_string(slot->session.config().min_frame_interval.count()) +
                                    " ms apart"));
    }
    if (outcome.status == FrameStatus::no_face) {
      return respond(make_error(ApiErrorCode::no_face, 422, "no face detected in frame"));
    }
    auto doc = describe(slot->session, now);
    const auto& j = outcome.judgement;
    doc["judged_target"] = label(outcome.target);
    doc["matched"] = j.matched;
    doc["scored"] = outcome.scored;
    doc["scores"] = j.scores ? scores_json(*j.scores) : Json(nullptr);
    doc["threshold"] = j.decision ? Json(j.decision->threshold_used) : Json(nullptr);
    doc["matched_emotion"] = j.matched_emotion ? Json(label(*j.matched_emotion)) : Json(nullptr);
    doc["target_score"] = j.target_score;
    doc["saved_record"] = outcome.saved_record ? Json(*outcome.saved_record) : Json(nullptr);
    doc["next_target"] = outcome.next_target ? target_json(*outcome.next_target, now) : Json(nullptr);
    doc["events"] = events_json(outcome.events);
    doc["client_timestamp_ms"] = client_ts ? Json(*client_ts) : Json(nullptr);
    return ApiResponse{200, std::move(doc)};
  });
}

ApiResponse Gateway::register_template(const std::string& player_id,
                                       const std::string& emotion_text,
                                       const std::string& body) {
  return guarded([&] {
    if (!valid_player_id(player_id)) throw Error(Errc::unregistered_player, "invalid player id");
    const auto emotion = parse_emotion(emotion_text);
    if (!emotion) throw Error(Errc::parse, "unknown emotion '" + emotion_text + "'");
    const auto frame = decode_payload(parse_body(body));
    const auto feature = registry_->register_template(player_id, *emotion, frame);
    const auto set = registry_->snapshot(player_id);
    Json doc;
    doc["player_id"] = player_id;
    doc["emotion"] = label(*emotion);
    doc["captured"] = true;
    doc["feature_dimension"] = feature.dimension();
    doc["registered"] = labels(set->present());
    doc["missing"] = labels(set->missing());
    doc["complete"] = set->complete();
    return ApiResponse{200, std::move(doc)};
  });
}

ApiResponse Gateway::complete_registration(const std::string& player_id) {
  return guarded([&] {
    const auto set = registry_->complete_registration(player_id);
    Json doc;
    doc["player_id"] = player_id;
    doc["complete"] = true;
    doc["registered"] = labels(set.present());
    return ApiResponse{200, std::move(doc)};
  });
}

ApiResponse Gateway::stats() {
  return guarded([&] { return ApiResponse{200, distribution_to_json(store_->distribution())}; });
}

}  // namespace gamo
