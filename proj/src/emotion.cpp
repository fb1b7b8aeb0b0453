#include "gamo/emotion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>

#include "gamo/error.hpp"

namespace gamo {

namespace {

constexpr std::array<std::string_view, kEmotionCount> kLabels = {
    "angry", "disgust", "fear", "happy", "neutral", "sad", "surprise"};
constexpr std::array<std::string_view, kEmotionCount> kDisplayNames = {
    "Angry", "Disgust", "Fear", "Happy", "Neutral", "Sad", "Surprise"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

Emotion emotion_at(std::size_t index) {
  if (index >= kEmotionCount) {
    throw Error(Errc::invalid_scores,
                "emotion index out of range: " + std::to_string(index));
  }
  return static_cast<Emotion>(index);
}

std::string_view label(Emotion e) { return kLabels[index_of(e)]; }

std::string_view display_name(Emotion e) { return kDisplayNames[index_of(e)]; }

std::optional<Emotion> parse_emotion(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (lowered == kLabels[i]) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

EmotionScores::EmotionScores(const std::array<double, kEmotionCount>& values)
    : values_(values) {
  double sum = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(Errc::invalid_scores, "score component outside [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw Error(Errc::invalid_scores,
                "scores sum to " + std::to_string(sum) + ", expected 1");
  }
}

EmotionScores EmotionScores::uniform() {
  std::array<double, kEmotionCount> v;
  v.fill(1.0 / kEmotionCount);
  return EmotionScores(v);
}

EmotionScores normalize_scores(std::span<const double> raw) {
  if (raw.size() != kEmotionCount) {
    throw Error(Errc::invalid_scores, "expected 7 raw scores, got " +
                                          std::to_string(raw.size()));
  }
  double sum = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(Errc::invalid_scores, "raw scores must be finite and >= 0");
    }
    sum += v;
  }
  if (sum <= 0.0) {
    throw Error(Errc::invalid_scores, "raw scores are all zero");
  }
  std::array<double, kEmotionCount> out;
  for (std::size_t i = 0; i < kEmotionCount; ++i) out[i] = raw[i] / sum;
  return EmotionScores(out);
}

Emotion top_emotion(const EmotionScores& scores) {
  const auto& v = scores.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < kEmotionCount; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<Emotion>(best);
}

ThresholdTable::ThresholdTable(const std::array<double, kEmotionCount>& values) {
  for (std::size_t i = 0; i < kEmotionCount; ++i) set(emotion_at(i), values[i]);
}

void ThresholdTable::set(Emotion e, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(Errc::invalid_config, "threshold for " +
                                          std::string(label(e)) +
                                          " outside [0,1]");
  }
  values_[index_of(e)] = threshold;
}

ThresholdTable parse_thresholds(std::istream& in) {
  ThresholdTable table;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected <label>=<threshold>", line_no);
    }
    auto name = trim(line.substr(0, eq));
    auto value = std::string(trim(line.substr(eq + 1)));
    auto emotion = parse_emotion(name);
    if (!emotion) {
      throw ParseError("unknown emotion '" + std::string(name) + "'", line_no);
    }
    double threshold = 0.0;
    try {
      std::size_t used = 0;
      threshold = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ParseError("bad threshold '" + value + "'", line_no);
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw ParseError("threshold outside [0,1]", line_no);
    }
    table.set(*emotion, threshold);
  }
  return table;
}

ThresholdTable load_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open thresholds " + path.string());
  return parse_thresholds(in);
}

VerificationDecision verify(Emotion target, const EmotionScores& scores,
                            const ThresholdTable& thresholds) {
  VerificationDecision d;
  d.target = target;
  d.target_score = scores[target];
  d.threshold_used = thresholds[target];
  d.matched = d.target_score >= d.threshold_used;
  return d;
}

}  // namespace gamo
