#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace gamo {

// Canonical order; indices are part of every on-disk format.
enum class Emotion : std::uint8_t {
  Angry = 0,
  Disgust = 1,
  Fear = 2,
  Happy = 3,
  Neutral = 4,
  Sad = 5,
  Surprise = 6,
};

inline constexpr std::size_t kEmotionCount = 7;

inline constexpr std::array<Emotion, kEmotionCount> kAllEmotions = {
    Emotion::Angry, Emotion::Disgust, Emotion::Fear,    Emotion::Happy,
    Emotion::Neutral, Emotion::Sad,   Emotion::Surprise};

constexpr std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }

Emotion emotion_at(std::size_t index);

// Lowercase canonical label ("happy"), used in config files, URLs and JSON.
std::string_view label(Emotion e);
// Capitalised name ("Happy"), used in rendered tables.
std::string_view display_name(Emotion e);
// Accepts either spelling, case-insensitively.
std::optional<Emotion> parse_emotion(std::string_view text);

using EmotionCounts = std::array<std::uint64_t, kEmotionCount>;

inline constexpr double kProbabilitySumTolerance = 1e-6;

/// A probability vector over the seven emotions.
///
/// Construction validates that every component lies in [0,1] and that the
/// components sum to 1 within kProbabilitySumTolerance; use normalize_scores
/// to build one from raw non-negative backend outputs.
class EmotionScores {
 public:
  explicit EmotionScores(const std::array<double, kEmotionCount>& values);

  static EmotionScores uniform();

  double operator[](Emotion e) const { return values_[index_of(e)]; }
  const std::array<double, kEmotionCount>& values() const { return values_; }

  friend bool operator==(const EmotionScores&, const EmotionScores&) = default;

 private:
  std::array<double, kEmotionCount> values_;
};

EmotionScores normalize_scores(std::span<const double> raw);

// argmax, ties go to the lowest canonical index.
Emotion top_emotion(const EmotionScores& scores);

inline constexpr double kDefaultThreshold = 0.5;

class ThresholdTable {
 public:
  ThresholdTable() { values_.fill(kDefaultThreshold); }
  explicit ThresholdTable(const std::array<double, kEmotionCount>& values);

  double operator[](Emotion e) const { return values_[index_of(e)]; }
  void set(Emotion e, double threshold);
  const std::array<double, kEmotionCount>& values() const { return values_; }

 private:
  std::array<double, kEmotionCount> values_{};
};

// One `<label>=<real>` per line; blank lines and `#` comments are ignored,
// missing emotions keep the default.
ThresholdTable parse_thresholds(std::istream& in);
ThresholdTable load_thresholds(const std::filesystem::path& path);

struct VerificationDecision {
  bool matched = false;
  Emotion target = Emotion::Angry;
  double target_score = 0.0;
  double threshold_used = 0.0;
};

VerificationDecision verify(Emotion target, const EmotionScores& scores,
                            const ThresholdTable& thresholds);

}  // namespace gamo
