#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gamo/emotion.hpp"
#include "gamo/image.hpp"

namespace gamo {

class FeatureVector {
 public:
  explicit FeatureVector(std::vector<float> components);

  std::size_t dimension() const { return components_.size(); }
  std::span<const float> components() const { return components_; }
  float operator[](std::size_t i) const { return components_[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<float> components_;
};

// Accumulated in double so the result does not depend on summation width.
double squared_l2(const FeatureVector& a, const FeatureVector& b);

/// Weights of the reference backend, laid out exactly as in a GMF1 file:
///   "GMF1", u32 input_side, u32 feature_dimension, u32 7, u32 flags=0,
///   F[feature_dimension][input_side^2], c[feature_dimension],
///   W[7][feature_dimension], b[7]
/// all little-endian, floats IEEE-754 binary32, row-major, no padding.
struct ReferenceWeights {
  std::uint32_t input_side = 0;
  std::uint32_t feature_dimension = 0;
  std::vector<float> feature_map;   // F
  std::vector<float> feature_bias;  // c
  std::vector<float> logit_map;     // W
  std::vector<float> logit_bias;    // b

  std::size_t input_size() const {
    return static_cast<std::size_t>(input_side) * input_side;
  }

  static ReferenceWeights zeros(std::uint32_t input_side,
                                std::uint32_t feature_dimension);
  // Entries uniform in [-scale, scale); deterministic in seed.
  static ReferenceWeights random(std::uint32_t input_side,
                                 std::uint32_t feature_dimension,
                                 std::uint64_t seed, float scale = 0.05f);

  friend bool operator==(const ReferenceWeights&,
                         const ReferenceWeights&) = default;
};

std::vector<std::uint8_t> serialize_weights(const ReferenceWeights& weights);
// Throws BackendLoadError naming the first inconsistent byte.
ReferenceWeights parse_weights(std::span<const std::uint8_t> bytes);
ReferenceWeights load_weights(const std::filesystem::path& path);
void save_weights(const ReferenceWeights& weights,
                  const std::filesystem::path& path);

struct BackendDescriptor {
  std::string name;
  int input_side = 0;
  int feature_dimension = 0;
  std::variant<std::filesystem::path, std::vector<std::uint8_t>> weights_source;
};

// Reads only the header of a weight file to fill in a descriptor.
BackendDescriptor describe_weights(const std::filesystem::path& path);

/// An emotion classifier that can also produce the feature embedding used
/// for template matching. Implementations are immutable once constructed
/// and safe to call concurrently.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual const std::string& name() const = 0;
  virtual std::size_t feature_dimension() const = 0;
  virtual EmotionScores classify(const FaceImage& image) const = 0;
  virtual FeatureVector embed(const FaceImage& image) const = 0;
};

class ReferenceBackend final : public Classifier {
 public:
  ReferenceBackend(std::string name, ReferenceWeights weights);

  const std::string& name() const override { return name_; }
  std::size_t feature_dimension() const override {
    return weights_.feature_dimension;
  }
  EmotionScores classify(const FaceImage& image) const override;
  FeatureVector embed(const FaceImage& image) const override;

  // Nearest-neighbour resize to input_side^2, integer-mean grayscale, /255.
  std::vector<float> preprocess(const FaceImage& image) const;
  std::array<double, kEmotionCount> logits(const FeatureVector& feature) const;

  const ReferenceWeights& weights() const { return weights_; }

 private:
  std::string name_;
  ReferenceWeights weights_;
};

std::shared_ptr<const Classifier> load_backend(
    const BackendDescriptor& descriptor);

EmotionScores softmax(const std::array<double, kEmotionCount>& logits);

class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::optional<FaceRegion> detect(const FaceImage& image) const = 0;
};

// Largest centred square, or nothing when the frame is nearly blank.
class CenterCropDetector final : public FaceDetector {
 public:
  // Floor on the variance of the integer-mean gray level (0..255 scale).
  explicit CenterCropDetector(double variance_floor = 4.0)
      : variance_floor_(variance_floor) {}

  std::optional<FaceRegion> detect(const FaceImage& image) const override;

 private:
  double variance_floor_;
};

}  // namespace gamo
