#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gamo/emotion.hpp"
#include "gamo/error.hpp"
#include "gamo/image.hpp"

namespace gamo {

enum class GameMode { general, customized };

std::string_view to_string(GameMode mode);
std::optional<GameMode> parse_game_mode(std::string_view text);

using Timestamp = std::chrono::time_point<std::chrono::system_clock,
                                          std::chrono::milliseconds>;

// "2026-10-19T04:31:00.125Z"
std::string format_iso8601(Timestamp t);
std::optional<Timestamp> parse_iso8601(std::string_view text);

struct SampleMetadata {
  std::string session_id;
  std::optional<std::string> player_id;
  GameMode mode = GameMode::general;
  bool verified = true;
  double target_score = 0.0;
  Timestamp timestamp{};
};

struct DatasetRecord {
  std::string record_id;
  Emotion label = Emotion::Angry;
  std::string image_path;  // relative to the store root
  SampleMetadata meta;
};

class DanglingRecord : public Error {
 public:
  explicit DanglingRecord(std::string record_id)
      : Error(Errc::dangling_record, "image missing for record " + record_id),
        record_id_(std::move(record_id)) {}
  const std::string& record_id() const { return record_id_; }

 private:
  std::string record_id_;
};

// Tab-separated: record_id, label, image path, session_id, player_id or
// "-", mode, verified 0/1, target_score (4 decimals), ISO-8601 UTC time.
std::string format_manifest_line(const DatasetRecord& record);
DatasetRecord parse_manifest_line(std::string_view line, std::size_t line_no);

struct Distribution {
  EmotionCounts counts{};
  std::uint64_t total = 0;

  // max/min over the seven classes; infinity if any class is empty.
  double imbalance_ratio() const;
  friend bool operator==(const Distribution&, const Distribution&) = default;
};

struct DatasetManifest {
  std::vector<DatasetRecord> records;
  EmotionCounts counts{};
};

// Record ids must be unique; errors carry the 1-based line number.
DatasetManifest parse_manifest(std::istream& in);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Recomputed from the records alone, ignoring manifest.counts.
Distribution distribution(const DatasetManifest& manifest);

inline constexpr const char* kManifestName = "manifest.tsv";

/// Append-only store rooted at a directory:
///   <root>/manifest.tsv
///   <root>/images/<label>/<record_id>.png
///
/// The PNG is fully written (temp file + rename) before its manifest line
/// is appended, so every manifest line points at an existing file. Appends
/// from any number of threads go through one writer lock. A torn final
/// line left by a crash is dropped when the store is reopened.
class CollectionStore {
 public:
  explicit CollectionStore(std::filesystem::path root);

  std::string save_sample(const FaceImage& image, Emotion label,
                          const SampleMetadata& meta);

  const std::filesystem::path& root() const { return root_; }
  EmotionCounts counts() const;
  Distribution distribution() const;
  DatasetManifest manifest() const;

 private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::ofstream manifest_out_;
  std::vector<DatasetRecord> records_;
  EmotionCounts counts_{};
  std::uint64_t next_sequence_ = 1;
};

/// Read-only view over a store for evaluation; images are decoded on
/// demand. Opening verifies that every record's image exists.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root);

  const std::string& name() const { return name_; }
  std::size_t size() const { return records_.size(); }
  const DatasetRecord& record(std::size_t i) const { return records_[i]; }
  Emotion label(std::size_t i) const { return records_[i].label; }
  FaceImage image(std::size_t i) const;

 private:
  std::string name_;
  std::filesystem::path root_;
  std::vector<DatasetRecord> records_;
};

}  // namespace gamo
