#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gamo/backend.hpp"
#include "gamo/emotion.hpp"
#include "gamo/store.hpp"

namespace gamo {

// rows = true label, columns = prediction
using ConfusionMatrix = std::array<std::array<std::uint64_t, kEmotionCount>, kEmotionCount>;

class LabeledSource {
 public:
  virtual ~LabeledSource() = default;
  virtual std::string name() const = 0;
  virtual std::size_t size() const = 0;
  virtual Emotion label(std::size_t i) const = 0;
  virtual FaceImage image(std::size_t i) const = 0;
};

class DatasetSource final : public LabeledSource {
 public:
  explicit DatasetSource(Dataset dataset) : dataset_(std::move(dataset)) {}
  std::string name() const override { return dataset_.name(); }
  std::size_t size() const override { return dataset_.size(); }
  Emotion label(std::size_t i) const override { return dataset_.label(i); }
  FaceImage image(std::size_t i) const override { return dataset_.image(i); }

 private:
  Dataset dataset_;
};

class InMemorySource final : public LabeledSource {
 public:
  explicit InMemorySource(std::string name) : name_(std::move(name)) {}
  void add(FaceImage image, Emotion label) { samples_.emplace_back(std::move(image), label); }
  std::string name() const override { return name_; }
  std::size_t size() const override { return samples_.size(); }
  Emotion label(std::size_t i) const override { return samples_.at(i).second; }
  FaceImage image(std::size_t i) const override { return samples_.at(i).first; }

 private:
  std::string name_;
  std::vector<std::pair<FaceImage, Emotion>> samples_;
};

struct EvaluationReport {
  std::string dataset;
  std::string backend;
  std::string label;  // column title; defaults to "<backend> on <dataset>"
  // nullopt for classes without samples
  std::array<std::optional<double>, kEmotionCount> accuracy{};
  double micro_average = 0.0;
  double macro_average = 0.0;
  std::optional<ConfusionMatrix> confusion;
  EmotionCounts counts{};

  std::uint64_t total() const;
  std::string column_title() const;
};

// Derives accuracies and counts from a confusion matrix.
EvaluationReport report_from_confusion(const ConfusionMatrix& confusion,
                                       std::string dataset, std::string backend);

/// Classifies every sample (whole image, no thresholds) and tallies the
/// confusion matrix. Work is split across `workers` threads; the merged
/// matrix does not depend on the split. Throws empty_dataset.
EvaluationReport evaluate(const Classifier& backend, const LabeledSource& dataset,
                          unsigned workers = 1);

// Same computation; exists so call sites say which pairing they mean.
inline EvaluationReport cross_evaluate(const Classifier& backend_trained_elsewhere,
                                       const LabeledSource& dataset,
                                       unsigned workers = 1) {
  return evaluate(backend_trained_elsewhere, dataset, workers);
}

/// Markdown table: a header row of column titles, then Average (micro) and
/// the seven emotions in canonical order, two decimals per cell.
std::string format_report(std::span<const EvaluationReport> reports);

struct ParsedReportTable {
  std::vector<std::string> columns;
  // rows[0] = Average, rows[1..7] = emotions; nullopt for "-" cells
  std::array<std::vector<std::optional<double>>, kEmotionCount + 1> rows;
};
ParsedReportTable parse_report_table(std::string_view text);

struct StudyRecord {
  std::string player;
  std::string engine;
  int round = 1;
  std::uint64_t score = 0;
};

struct StudyMean {
  std::string player;
  std::string engine;
  double mean_score = 0.0;
  std::size_t rounds = 0;
};

// Tab-separated player, engine, round, score; an optional header line
// starting with "player" is skipped.
std::vector<StudyRecord> parse_study(std::istream& in);

/// Mean final score per (player, engine), sorted by player then engine.
/// Every player must have played every engine that appears in the study,
/// otherwise incomplete_study names the missing pairs.
std::vector<StudyMean> aggregate_scores(std::span<const StudyRecord> records);

// player, engine, mean_score, rounds; tab-separated with a header.
std::string format_study_means(std::span<const StudyMean> means);

}  // namespace gamo
