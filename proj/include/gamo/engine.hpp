#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gamo/backend.hpp"
#include "gamo/emotion.hpp"
#include "gamo/image.hpp"
#include "gamo/rng.hpp"
#include "gamo/store.hpp"

namespace gamo {

class TemplateRegistry;

// Engine time: milliseconds on whatever monotonic clock the caller uses.
using Millis = std::chrono::milliseconds;

enum class SchedulerPolicy { uniform, balance_aware };
enum class SavePolicy { on_match, all };

std::string_view to_string(SchedulerPolicy policy);
std::string_view to_string(SavePolicy policy);
std::optional<SchedulerPolicy> parse_scheduler_policy(std::string_view text);
std::optional<SavePolicy> parse_save_policy(std::string_view text);

struct EngineConfig {
  int initial_lives = 5;
  Millis bomb_ttl{10'000};
  Millis min_frame_interval{500};
  SchedulerPolicy scheduler_policy = SchedulerPolicy::uniform;
  SavePolicy save_policy = SavePolicy::on_match;
  std::optional<std::filesystem::path> thresholds_path;
  std::optional<std::filesystem::path> backend_path;
  std::size_t max_payload_bytes = 2u << 20;
};

// key=value lines: initial_lives, bomb_ttl_ms, min_frame_interval_ms,
// scheduler_policy, save_policy, thresholds_path, backend_path,
// max_payload_bytes. Relative paths resolve against base_dir.
EngineConfig parse_engine_config(std::istream& in,
                                 const std::filesystem::path& base_dir = {});
EngineConfig load_engine_config(const std::filesystem::path& path);

// Uniform: every weight 1. Balance-aware: 1 + max_count - count_e.
std::array<std::uint64_t, kEmotionCount> spawn_weights(SchedulerPolicy policy,
                                                       const EmotionCounts& counts);
Emotion draw_target(SplitMix64& rng, SchedulerPolicy policy,
                    const EmotionCounts& counts);

struct ActiveTarget {
  Emotion emotion = Emotion::Angry;
  Millis spawn_time{0};
  Millis deadline{0};
};

enum class SessionState { running, over };

struct SessionEvent {
  enum class Kind { target_spawned, life_lost, game_over };
  Kind kind = Kind::target_spawned;
  Emotion emotion = Emotion::Angry;  // spawned or missed target
  Millis at{0};
  int lives = 0;
  std::uint64_t score = 0;
};

std::string_view to_string(SessionEvent::Kind kind);

struct SessionConfig {
  std::string session_id;
  GameMode mode = GameMode::general;
  std::optional<std::string> player_id;
  SchedulerPolicy scheduler_policy = SchedulerPolicy::uniform;
  SavePolicy save_policy = SavePolicy::on_match;
  std::uint64_t seed = 0;
  int initial_lives = 5;
  Millis bomb_ttl{10'000};
  Millis min_frame_interval{500};
};

/// Lives, score and target bookkeeping for one game, with no knowledge of
/// images. Single-writer: callers serialize access per session.
class GameSession {
 public:
  GameSession(SessionConfig config, Millis now, const EmotionCounts& counts);

  const SessionConfig& config() const { return config_; }
  const std::string& id() const { return config_.session_id; }
  SessionState state() const { return state_; }
  bool running() const { return state_ == SessionState::running; }
  int lives() const { return lives_; }
  std::uint64_t score() const { return score_; }
  std::uint64_t life_losses() const { return life_losses_; }
  const std::optional<ActiveTarget>& active_target() const { return active_; }
  const std::vector<Emotion>& target_history() const { return history_; }
  std::optional<Millis> last_accepted_frame() const { return last_frame_; }

  // Throws illegal_state while a target is active or the game is over.
  Emotion spawn_target(Millis now, const EmotionCounts& counts);

  // Expires every deadline at or before `now`. Each miss costs a life; the
  // replacement target spawns at the missed deadline.
  std::vector<SessionEvent> tick(Millis now, const EmotionCounts& counts);

  // Throws session_over when the game has ended. Returns false (and changes
  // nothing) if the frame falls inside the rate window.
  bool admit_frame(Millis now);

  // Scores the active target and spawns the next one.
  SessionEvent record_match(Millis now, const EmotionCounts& counts);

 private:
  SessionConfig config_;
  SplitMix64 rng_;
  SessionState state_ = SessionState::running;
  int lives_;
  std::uint64_t score_ = 0;
  std::uint64_t life_losses_ = 0;
  std::optional<ActiveTarget> active_;
  std::optional<Millis> last_frame_;
  std::vector<Emotion> history_;
};

/// What a judge concluded about one frame.
struct Judgement {
  bool face_found = false;
  bool matched = false;
  std::optional<EmotionScores> scores;         // general mode
  std::optional<VerificationDecision> decision;  // general mode
  std::optional<Emotion> matched_emotion;      // customized mode
  double target_score = 0.0;
  std::optional<FaceImage> face;  // crop that would be saved
};

class FrameJudge {
 public:
  virtual ~FrameJudge() = default;
  virtual Judgement judge(const FaceImage& frame, Emotion target,
                          const std::optional<std::string>& player_id) const = 0;
};

// General mode: detect, classify, threshold the target's probability.
class ClassifierJudge final : public FrameJudge {
 public:
  ClassifierJudge(std::shared_ptr<const Classifier> classifier,
                  std::shared_ptr<const FaceDetector> detector,
                  ThresholdTable thresholds);

  Judgement judge(const FaceImage& frame, Emotion target,
                  const std::optional<std::string>& player_id) const override;

 private:
  std::shared_ptr<const Classifier> classifier_;
  std::shared_ptr<const FaceDetector> detector_;
  ThresholdTable thresholds_;
};

// Customized mode: nearest template must equal the target. The recorded
// target score is 1 / (1 + L2 distance to the target's template).
class TemplateJudge final : public FrameJudge {
 public:
  explicit TemplateJudge(std::shared_ptr<const TemplateRegistry> registry);

  Judgement judge(const FaceImage& frame, Emotion target,
                  const std::optional<std::string>& player_id) const override;

 private:
  std::shared_ptr<const TemplateRegistry> registry_;
};

// Where verified (or, under save-all, every) frame ends up.
class SampleSink {
 public:
  virtual ~SampleSink() = default;
  virtual std::string save(const FaceImage& image, Emotion label,
                           const SampleMetadata& meta) = 0;
  virtual EmotionCounts counts() const = 0;
};

class StoreSink final : public SampleSink {
 public:
  explicit StoreSink(std::shared_ptr<CollectionStore> store) : store_(std::move(store)) {}
  std::string save(const FaceImage& image, Emotion label,
                   const SampleMetadata& meta) override {
    return store_->save_sample(image, label, meta);
  }
  EmotionCounts counts() const override { return store_->counts(); }

 private:
  std::shared_ptr<CollectionStore> store_;
};

enum class FrameStatus { judged, rate_limited, no_face };

struct FrameOutcome {
  FrameStatus status = FrameStatus::judged;
  Emotion target = Emotion::Angry;
  Judgement judgement;
  bool scored = false;
  std::optional<std::string> saved_record;
  std::vector<SessionEvent> events;
  int lives = 0;
  std::uint64_t score = 0;
  std::optional<ActiveTarget> next_target;  // set when a match consumed the target
};

struct SessionRequest {
  GameMode mode = GameMode::general;
  std::optional<std::string> player_id;
  std::optional<std::uint64_t> seed;
  std::optional<SchedulerPolicy> scheduler_policy;
  std::optional<std::string> session_id;
};

class GameEngine {
 public:
  GameEngine(EngineConfig config, std::shared_ptr<const FrameJudge> general,
             std::shared_ptr<const FrameJudge> customized,
             std::shared_ptr<const TemplateRegistry> registry,
             std::shared_ptr<SampleSink> sink);

  const EngineConfig& config() const { return config_; }

  // Throws unregistered_player for customized mode without a complete set.
  GameSession start_session(const SessionRequest& request, Millis now) const;

  // Catches up expired deadlines, rate-limits, judges, scores and saves.
  FrameOutcome submit_frame(GameSession& session, const FaceImage& frame,
                            Millis now, Timestamp wall_time) const;

  std::vector<SessionEvent> tick(GameSession& session, Millis now) const;

 private:
  EmotionCounts counts() const;

  EngineConfig config_;
  std::shared_ptr<const FrameJudge> general_;
  std::shared_ptr<const FrameJudge> customized_;
  std::shared_ptr<const TemplateRegistry> registry_;
  std::shared_ptr<SampleSink> sink_;
};

struct SimulationConfig {
  EngineConfig engine;
  std::uint64_t max_rounds = 100'000;
};

struct SimulationResult {
  std::uint64_t final_score = 0;
  EmotionCounts saves{};
  std::uint64_t life_losses = 0;
  std::uint64_t rounds = 0;
  int final_lives = 0;
  bool game_over = false;
  std::vector<Emotion> targets;
};

// Called after every step with the session and the events it produced.
using SimulationObserver =
    std::function<void(const GameSession&, const std::vector<SessionEvent>&)>;

/// Plays one general-mode session against a stochastic player who matches
/// target e with probability p[e], sending exactly one frame per target.
/// The player's coin flips use a stream separate from the scheduler's.
SimulationResult simulate_session(const std::array<double, kEmotionCount>& p,
                                  std::uint64_t seed,
                                  const SimulationConfig& config = {},
                                  std::shared_ptr<SampleSink> sink = nullptr,
                                  const SimulationObserver& observer = {});

}  // namespace gamo
