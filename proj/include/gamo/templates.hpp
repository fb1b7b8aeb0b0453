#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "gamo/backend.hpp"
#include "gamo/emotion.hpp"
#include "gamo/error.hpp"
#include "gamo/image.hpp"

namespace gamo {

class IncompleteRegistration : public Error {
 public:
  explicit IncompleteRegistration(std::vector<Emotion> missing);
  const std::vector<Emotion>& missing() const { return missing_; }

 private:
  std::vector<Emotion> missing_;
};

// Raised when the detector finds no face; names the emotion being captured
// when there is one so the client knows which capture to redo.
class NoFaceError : public Error {
 public:
  explicit NoFaceError(std::optional<Emotion> emotion);
  std::optional<Emotion> emotion() const { return emotion_; }

 private:
  std::optional<Emotion> emotion_;
};

// Player ids double as file names: 1-64 chars of [A-Za-z0-9_.-], not
// starting with '.'.
bool valid_player_id(std::string_view id);

class TemplateSet {
 public:
  explicit TemplateSet(std::string player_id) : player_id_(std::move(player_id)) {}

  const std::string& player_id() const { return player_id_; }
  bool complete() const;
  bool has(Emotion e) const { return templates_[index_of(e)].has_value(); }
  const FeatureVector& at(Emotion e) const;
  std::vector<Emotion> missing() const;
  std::vector<Emotion> present() const;
  std::optional<std::size_t> dimension() const;

  // Rejects vectors whose dimension differs from those already stored.
  void put(Emotion e, FeatureVector feature);

 private:
  std::string player_id_;
  std::array<std::optional<FeatureVector>, kEmotionCount> templates_;
};

// Minimum squared L2 over the stored templates; ties go to the lowest
// canonical index. Requires a complete set.
Emotion nearest_template(const TemplateSet& set, const FeatureVector& query);

// GMT1 layout: "GMT1", u32 feature_dimension, u8 presence bitmap (bit i =
// emotion i), then the present vectors in canonical order as LE binary32.
std::vector<std::uint8_t> serialize_templates(const TemplateSet& set);
TemplateSet parse_templates(std::string player_id,
                            std::span<const std::uint8_t> bytes);

/// Shared per-player template store backed by `<dir>/<player_id>.gmt`.
///
/// Sets are held as immutable snapshots: a registration builds a new
/// snapshot and swaps it in, so a concurrent match always sees either the
/// old or the new set, never a half-written one. Writers for one player
/// serialize on the registry lock; file writes go through a temp file and a
/// rename.
class TemplateRegistry {
 public:
  TemplateRegistry(std::shared_ptr<const Classifier> classifier,
                   std::shared_ptr<const FaceDetector> detector,
                   std::optional<std::filesystem::path> directory = std::nullopt);

  FeatureVector register_template(const std::string& player_id, Emotion emotion,
                                  const FaceImage& image);
  TemplateSet complete_registration(const std::string& player_id);
  Emotion match_template(const std::string& player_id, const FaceImage& image) const;

  struct Match {
    Emotion emotion = Emotion::Angry;
    FaceRegion region;
    std::array<double, kEmotionCount> squared_distances{};
  };
  // As match_template, but reports a missing face as nullopt and keeps the
  // detected region and every distance.
  std::optional<Match> match_detected(const std::string& player_id,
                                      const FaceImage& image) const;

  // Current snapshot, loading from disk on first use. Null if unknown.
  std::shared_ptr<const TemplateSet> snapshot(const std::string& player_id) const;
  bool is_registered(const std::string& player_id) const;

  // The face embedding used for both registration and matching.
  FeatureVector extract(const FaceImage& image, std::optional<Emotion> capturing) const;

 private:
  std::shared_ptr<const TemplateSet> lookup_locked(const std::string& player_id) const;
  void persist(const TemplateSet& set) const;

  std::shared_ptr<const Classifier> classifier_;
  std::shared_ptr<const FaceDetector> detector_;
  std::optional<std::filesystem::path> directory_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<const TemplateSet>> sets_;
};

}  // namespace gamo
