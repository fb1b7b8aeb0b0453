#include "gamo/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>

#include "gamo/error.hpp"
#include "gamo/templates.hpp"

namespace gamo {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_number(std::string_view text, std::size_t line_no) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("bad number '" + std::string(text) + "'", line_no);
  }
  return v;
}

class CountingSink final : public SampleSink {
 public:
  std::string save(const FaceImage&, Emotion label, const SampleMetadata&) override {
    ++counts_[index_of(label)];
    return std::to_string(++saved_);
  }
  EmotionCounts counts() const override { return counts_; }

 private:
  EmotionCounts counts_{};
  std::uint64_t saved_ = 0;
};

// The simulated player: a biased coin per target, drawn from its own stream.
class CoinJudge final : public FrameJudge {
 public:
  CoinJudge(const std::array<double, kEmotionCount>& p, std::uint64_t seed)
      : p_(p), rng_(seed) {}

  Judgement judge(const FaceImage& frame, Emotion target,
                  const std::optional<std::string>&) const override {
    Judgement j;
    j.face_found = true;
    j.matched = rng_.unit() < p_[index_of(target)];
    j.matched_emotion = target;
    j.target_score = j.matched ? 1.0 : 0.0;
    j.face = frame;
    return j;
  }

 private:
  std::array<double, kEmotionCount> p_;
  mutable SplitMix64 rng_;
};

}  // namespace

std::string_view to_string(SchedulerPolicy policy) {
  return policy == SchedulerPolicy::uniform ? "uniform" : "balance_aware";
}

std::string_view to_string(SavePolicy policy) {
  return policy == SavePolicy::on_match ? "on_match" : "all";
}

std::optional<SchedulerPolicy> parse_scheduler_policy(std::string_view text) {
  if (text == "uniform") return SchedulerPolicy::uniform;
  if (text == "balance_aware") return SchedulerPolicy::balance_aware;
  return std::nullopt;
}

std::optional<SavePolicy> parse_save_policy(std::string_view text) {
  if (text == "on_match" || text == "save_on_match") return SavePolicy::on_match;
  if (text == "all" || text == "save_all") return SavePolicy::all;
  return std::nullopt;
}

std::string_view to_string(SessionEvent::Kind kind) {
  switch (kind) {
    case SessionEvent::Kind::target_spawned: return "target_spawned";
    case SessionEvent::Kind::life_lost: return "life_lost";
    case SessionEvent::Kind::game_over: return "game_over";
  }
  return "unknown";
}

EngineConfig parse_engine_config(std::istream& in,
                                 const std::filesystem::path& base_dir) {
  EngineConfig c;
  auto resolve = [&](std::string_view v) {
    std::filesystem::path p{std::string(v)};
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "initial_lives") {
      c.initial_lives = parse_number<int>(value, line_no);
      if (c.initial_lives < 1) throw ParseError("initial_lives must be >= 1", line_no);
    } else if (key == "bomb_ttl_ms") {
      c.bomb_ttl = Millis{parse_number<std::int64_t>(value, line_no)};
      if (c.bomb_ttl.count() < 1) throw ParseError("bomb_ttl_ms must be >= 1", line_no);
    } else if (key == "min_frame_interval_ms") {
      c.min_frame_interval = Millis{parse_number<std::int64_t>(value, line_no)};
      if (c.min_frame_interval.count() < 0) {
        throw ParseError("min_frame_interval_ms must be >= 0", line_no);
      }
    } else if (key == "scheduler_policy") {
      auto p = parse_scheduler_policy(value);
      if (!p) throw ParseError("unknown scheduler_policy", line_no);
      c.scheduler_policy = *p;
    } else if (key == "save_policy") {
      auto p = parse_save_policy(value);
      if (!p) throw ParseError("unknown save_policy", line_no);
      c.save_policy = *p;
    } else if (key == "thresholds_path") {
      c.thresholds_path = resolve(value);
    } else if (key == "backend_path") {
      c.backend_path = resolve(value);
    } else if (key == "max_payload_bytes") {
      c.max_payload_bytes = parse_number<std::size_t>(value, line_no);
    } else {
      throw ParseError("unknown key '" + std::string(key) + "'", line_no);
    }
  }
  return c;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  return parse_engine_config(in, path.parent_path());
}

std::array<std::uint64_t, kEmotionCount> spawn_weights(SchedulerPolicy policy,
                                                       const EmotionCounts& counts) {
  std::array<std::uint64_t, kEmotionCount> w;
  w.fill(1);
  if (policy == SchedulerPolicy::balance_aware) {
    const auto max_count = *std::max_element(counts.begin(), counts.end());
    for (std::size_t i = 0; i < kEmotionCount; ++i) w[i] = 1 + max_count - counts[i];
  }
  return w;
}

Emotion draw_target(SplitMix64& rng, SchedulerPolicy policy,
                    const EmotionCounts& counts) {
  const auto w = spawn_weights(policy, counts);
  const auto total = std::accumulate(w.begin(), w.end(), std::uint64_t{0});
  auto r = rng.bounded(total);
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (r < w[i]) return emotion_at(i);
    r -= w[i];
  }
  return Emotion::Surprise;  // unreachable: r < total
}

GameSession::GameSession(SessionConfig config, Millis now, const EmotionCounts& counts)
    : config_(std::move(config)), rng_(config_.seed), lives_(config_.initial_lives) {
  if (config_.initial_lives < 1) {
    throw Error(Errc::invalid_config, "initial lives must be >= 1");
  }
  if (config_.bomb_ttl.count() < 1) throw Error(Errc::invalid_config, "bomb ttl must be > 0");
  spawn_target(now, counts);
}

Emotion GameSession::spawn_target(Millis now, const EmotionCounts& counts) {
  if (state_ == SessionState::over) {
    throw Error(Errc::illegal_state, "cannot spawn a target after game over");
  }
  if (active_) throw Error(Errc::illegal_state, "a target is already active");
  const auto e = draw_target(rng_, config_.scheduler_policy, counts);
  active_ = ActiveTarget{e, now, now + config_.bomb_ttl};
  history_.push_back(e);
  return e;
}

std::vector<SessionEvent> GameSession::tick(Millis now, const EmotionCounts& counts) {
  std::vector<SessionEvent> events;
  while (state_ == SessionState::running && active_ && now >= active_->deadline) {
    const auto missed = *active_;
    active_.reset();
    --lives_;
    ++life_losses_;
    events.push_back({SessionEvent::Kind::life_lost, missed.emotion, missed.deadline,
                      lives_, score_});
    if (lives_ == 0) {
      state_ = SessionState::over;
      events.push_back({SessionEvent::Kind::game_over, missed.emotion, missed.deadline,
                        lives_, score_});
      break;
    }
    const auto next = spawn_target(missed.deadline, counts);
    events.push_back({SessionEvent::Kind::target_spawned, next, missed.deadline, lives_,
                      score_});
  }
  return events;
}

bool GameSession::admit_frame(Millis now) {
  if (state_ == SessionState::over) throw Error(Errc::session_over, "game is over");
  if (last_frame_ && now - *last_frame_ < config_.min_frame_interval) return false;
  last_frame_ = now;
  return true;
}

SessionEvent GameSession::record_match(Millis now, const EmotionCounts& counts) {
  if (state_ == SessionState::over) throw Error(Errc::session_over, "game is over");
  if (!active_) throw Error(Errc::illegal_state, "no active target to score");
  ++score_;
  active_.reset();
  const auto next = spawn_target(now, counts);
  return {SessionEvent::Kind::target_spawned, next, now, lives_, score_};
}

ClassifierJudge::ClassifierJudge(std::shared_ptr<const Classifier> classifier,
                                 std::shared_ptr<const FaceDetector> detector,
                                 ThresholdTable thresholds)
    : classifier_(std::move(classifier)),
      detector_(std::move(detector)),
      thresholds_(thresholds) {}

Judgement ClassifierJudge::judge(const FaceImage& frame, Emotion target,
                                 const std::optional<std::string>&) const {
  Judgement j;
  const auto region = detector_->detect(frame);
  if (!region) return j;
  j.face_found = true;
  j.face = crop(frame, *region);
  j.scores = classifier_->classify(*j.face);
  j.decision = verify(target, *j.scores, thresholds_);
  j.matched = j.decision->matched;
  j.target_score = j.decision->target_score;
  return j;
}

TemplateJudge::TemplateJudge(std::shared_ptr<const TemplateRegistry> registry)
    : registry_(std::move(registry)) {}

Judgement TemplateJudge::judge(const FaceImage& frame, Emotion target,
                               const std::optional<std::string>& player_id) const {
  if (!player_id) {
    throw Error(Errc::unregistered_player, "customized mode needs a player id");
  }
  Judgement j;
  const auto match = registry_->match_detected(*player_id, frame);
  if (!match) return j;
  j.face_found = true;
  j.face = crop(frame, match->region);
  j.matched_emotion = match->emotion;
  j.matched = match->emotion == target;
  j.target_score = 1.0 / (1.0 + std::sqrt(match->squared_distances[index_of(target)]));
  return j;
}

GameEngine::GameEngine(EngineConfig config, std::shared_ptr<const FrameJudge> general,
                       std::shared_ptr<const FrameJudge> customized,
                       std::shared_ptr<const TemplateRegistry> registry,
                       std::shared_ptr<SampleSink> sink)
    : config_(std::move(config)),
      general_(std::move(general)),
      customized_(std::move(customized)),
      registry_(std::move(registry)),
      sink_(std::move(sink)) {}

EmotionCounts GameEngine::counts() const {
  return sink_ ? sink_->counts() : EmotionCounts{};
}

GameSession GameEngine::start_session(const SessionRequest& request, Millis now) const {
  if (request.mode == GameMode::customized) {
    if (!request.player_id || !registry_ || !customized_ ||
        !registry_->is_registered(*request.player_id)) {
      throw Error(Errc::unregistered_player,
                  "customized mode needs a player with all seven templates");
    }
  } else if (!general_) {
    throw Error(Errc::invalid_config, "no general-mode judge configured");
  }
  SessionConfig sc;
  sc.session_id = request.session_id.value_or("session");
  sc.mode = request.mode;
  sc.player_id = request.player_id;
  sc.scheduler_policy = request.scheduler_policy.value_or(config_.scheduler_policy);
  sc.save_policy = config_.save_policy;
  sc.seed = request.seed.value_or(0);
  sc.initial_lives = config_.initial_lives;
  sc.bomb_ttl = config_.bomb_ttl;
  sc.min_frame_interval = config_.min_frame_interval;
  return GameSession(std::move(sc), now, counts());
}

std::vector<SessionEvent> GameEngine::tick(GameSession& session, Millis now) const {
  if (!session.running()) return {};
  return session.tick(now, counts());
}

FrameOutcome GameEngine::submit_frame(GameSession& session, const FaceImage& frame,
                                      Millis now, Timestamp wall_time) const {
  if (!session.running()) throw Error(Errc::session_over, "game is over");
  FrameOutcome out;
  out.events = session.tick(now, counts());
  if (!session.running()) throw Error(Errc::session_over, "game ended before this frame");
  auto snapshot = [&] {
    out.lives = session.lives();
    out.score = session.score();
  };
  out.target = session.active_target()->emotion;
  if (!session.admit_frame(now)) {
    out.status = FrameStatus::rate_limited;
    snapshot();
    return out;
  }

  const auto& judge =
      session.config().mode == GameMode::general ? general_ : customized_;
  out.judgement = judge->judge(frame, out.target, session.config().player_id);

  SampleMetadata meta;
  meta.session_id = session.id();
  meta.player_id = session.config().player_id;
  meta.mode = session.config().mode;
  meta.verified = out.judgement.matched;
  meta.target_score = out.judgement.target_score;
  meta.timestamp = wall_time;
  const bool save_all = session.config().save_policy == SavePolicy::all;

  if (!out.judgement.face_found) {
    out.status = FrameStatus::no_face;
    if (save_all && sink_) out.saved_record = sink_->save(frame, out.target, meta);
    snapshot();
    return out;
  }
  if (out.judgement.matched) {
    if (sink_) out.saved_record = sink_->save(*out.judgement.face, out.target, meta);
    out.scored = true;
    out.events.push_back(session.record_match(now, counts()));
    out.next_target = session.active_target();
  } else if (save_all && sink_) {
    out.saved_record = sink_->save(*out.judgement.face, out.target, meta);
  }
  snapshot();
  return out;
}

SimulationResult simulate_session(const std::array<double, kEmotionCount>& p,
                                  std::uint64_t seed, const SimulationConfig& config,
                                  std::shared_ptr<SampleSink> sink,
                                  const SimulationObserver& observer) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(Errc::invalid_config, "match probabilities must lie in [0,1]");
    }
  }
  if (!sink) sink = std::make_shared<CountingSink>();
  const auto before = sink->counts();
  auto judge = std::make_shared<CoinJudge>(p, seed ^ 0x5DEECE66DULL);
  GameEngine engine(config.engine, judge, nullptr, nullptr, sink);

  SessionRequest request;
  request.seed = seed;
  request.session_id = "sim-" + std::to_string(seed);
  auto session = engine.start_session(request, Millis{0});
  const FaceImage frame = FaceImage::filled(kMinImageSide, kMinImageSide, 128, 128, 128);
  const Millis frame_offset =
      std::max(config.engine.min_frame_interval, config.engine.bomb_ttl / 2);

  SimulationResult result;
  if (observer) observer(session, {});
  while (session.running() && result.rounds < config.max_rounds) {
    const auto target = *session.active_target();
    ++result.rounds;
    const Millis frame_time = std::min(target.spawn_time + frame_offset,
                                       target.deadline - Millis{1});
    auto outcome = engine.submit_frame(session, frame, frame_time, Timestamp{});
    if (observer) observer(session, outcome.events);
    if (!outcome.scored) {
      auto events = engine.tick(session, target.deadline);
      if (observer) observer(session, events);
    }
  }
  const auto after = sink->counts();
  for (std::size_t i = 0; i < kEmotionCount; ++i) result.saves[i] = after[i] - before[i];
  result.final_score = session.score();
  result.life_losses = session.life_losses();
  result.final_lives = session.lives();
  result.game_over = !session.running();
  result.targets = session.target_history();
  return result;
}

}  // namespace gamo
