#include "gamo/backend.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gamo/error.hpp"
#include "gamo/rng.hpp"

namespace gamo {

namespace {

constexpr char kWeightMagic[4] = {'G', 'M', 'F', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_floats(std::vector<std::uint8_t>& out, const std::vector<float>& v) {
  for (float f : v) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void expect_magic(const char (&magic)[4]) {
    for (int i = 0; i < 4; ++i) {
      if (pos_ >= bytes_.size()) throw BackendLoadError("truncated magic", pos_);
      if (bytes_[pos_] != static_cast<std::uint8_t>(magic[i])) {
        throw BackendLoadError("bad magic", pos_);
      }
      ++pos_;
    }
  }

  std::uint32_t u32(const char* what) {
    if (remaining() < 4) {
      throw BackendLoadError(std::string("truncated ") + what, bytes_.size());
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::vector<float> floats(std::size_t count, const char* what) {
    if (remaining() / 4 < count) {
      throw BackendLoadError(std::string("truncated ") + what, bytes_.size());
    }
    std::vector<float> out(count);
    for (auto& f : out) {
      const std::size_t at = pos_;
      f = std::bit_cast<float>(u32(what));
      if (!std::isfinite(f)) {
        throw BackendLoadError(std::string("non-finite value in ") + what, at);
      }
    }
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendLoadError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct WeightHeader {
  std::uint32_t input_side;
  std::uint32_t feature_dimension;
};

WeightHeader read_header(ByteReader& r) {
  r.expect_magic(kWeightMagic);
  WeightHeader h{};
  std::size_t at = r.offset();
  h.input_side = r.u32("input_side");
  if (h.input_side < kMinImageSide || h.input_side > 1024) {
    throw BackendLoadError("input_side out of range", at);
  }
  at = r.offset();
  h.feature_dimension = r.u32("feature_dimension");
  if (h.feature_dimension < 1 || h.feature_dimension > 65536) {
    throw BackendLoadError("feature_dimension out of range", at);
  }
  at = r.offset();
  if (r.u32("class count") != kEmotionCount) {
    throw BackendLoadError("class count must be 7", at);
  }
  at = r.offset();
  if (r.u32("flags") != 0) throw BackendLoadError("flags must be 0", at);
  return h;
}

}  // namespace

FeatureVector::FeatureVector(std::vector<float> components)
    : components_(std::move(components)) {
  if (components_.empty()) {
    throw Error(Errc::invalid_config, "feature vector must be non-empty");
  }
  for (float f : components_) {
    if (!std::isfinite(f)) {
      throw Error(Errc::invalid_config, "feature vector has non-finite component");
    }
  }
}

double squared_l2(const FeatureVector& a, const FeatureVector& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(Errc::invalid_config, "feature dimensions differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

ReferenceWeights ReferenceWeights::zeros(std::uint32_t input_side,
                                         std::uint32_t feature_dimension) {
  ReferenceWeights w;
  w.input_side = input_side;
  w.feature_dimension = feature_dimension;
  w.feature_map.assign(static_cast<std::size_t>(feature_dimension) * w.input_size(), 0.0f);
  w.feature_bias.assign(feature_dimension, 0.0f);
  w.logit_map.assign(kEmotionCount * feature_dimension, 0.0f);
  w.logit_bias.assign(kEmotionCount, 0.0f);
  return w;
}

ReferenceWeights ReferenceWeights::random(std::uint32_t input_side,
                                          std::uint32_t feature_dimension,
                                          std::uint64_t seed, float scale) {
  auto w = zeros(input_side, feature_dimension);
  SplitMix64 rng(seed);
  auto fill = [&](std::vector<float>& v) {
    for (auto& f : v) f = static_cast<float>((rng.unit() * 2.0 - 1.0) * scale);
  };
  fill(w.feature_map);
  fill(w.feature_bias);
  fill(w.logit_map);
  fill(w.logit_bias);
  return w;
}

std::vector<std::uint8_t> serialize_weights(const ReferenceWeights& w) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * (w.feature_map.size() + w.feature_bias.size() +
                                  w.logit_map.size() + w.logit_bias.size()));
  out.insert(out.end(), std::begin(kWeightMagic), std::end(kWeightMagic));
  put_u32(out, w.input_side);
  put_u32(out, w.feature_dimension);
  put_u32(out, static_cast<std::uint32_t>(kEmotionCount));
  put_u32(out, 0);
  put_floats(out, w.feature_map);
  put_floats(out, w.feature_bias);
  put_floats(out, w.logit_map);
  put_floats(out, w.logit_bias);
  return out;
}

ReferenceWeights parse_weights(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto h = read_header(r);
  ReferenceWeights w;
  w.input_side = h.input_side;
  w.feature_dimension = h.feature_dimension;
  w.feature_map = r.floats(static_cast<std::size_t>(h.feature_dimension) * w.input_size(), "F");
  w.feature_bias = r.floats(h.feature_dimension, "c");
  w.logit_map = r.floats(kEmotionCount * h.feature_dimension, "W");
  w.logit_bias = r.floats(kEmotionCount, "b");
  if (r.remaining() != 0) throw BackendLoadError("trailing bytes", r.offset());
  return w;
}

ReferenceWeights load_weights(const std::filesystem::path& path) {
  return parse_weights(read_file(path));
}

void save_weights(const ReferenceWeights& weights,
                  const std::filesystem::path& path) {
  const auto bytes = serialize_weights(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
}

BackendDescriptor describe_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendLoadError("cannot open " + path.string(), 0);
  std::vector<std::uint8_t> head(kHeaderBytes);
  in.read(reinterpret_cast<char*>(head.data()), kHeaderBytes);
  head.resize(static_cast<std::size_t>(in.gcount()));
  ByteReader r(head);
  const auto h = read_header(r);
  BackendDescriptor d;
  d.name = path.stem().string();
  d.input_side = static_cast<int>(h.input_side);
  d.feature_dimension = static_cast<int>(h.feature_dimension);
  d.weights_source = path;
  return d;
}

ReferenceBackend::ReferenceBackend(std::string name, ReferenceWeights weights)
    : name_(std::move(name)), weights_(std::move(weights)) {
  const auto dim = static_cast<std::size_t>(weights_.feature_dimension);
  if (weights_.input_side < kMinImageSide || dim < 1 ||
      weights_.feature_map.size() != dim * weights_.input_size() ||
      weights_.feature_bias.size() != dim ||
      weights_.logit_map.size() != kEmotionCount * dim ||
      weights_.logit_bias.size() != kEmotionCount) {
    throw Error(Errc::backend_load, "reference weights have inconsistent shapes");
  }
}

std::vector<float> ReferenceBackend::preprocess(const FaceImage& image) const {
  const auto side = static_cast<std::int64_t>(weights_.input_side);
  const std::int64_t w = image.width();
  const std::int64_t h = image.height();
  std::vector<float> x(weights_.input_size());
  for (std::int64_t row = 0; row < side; ++row) {
    const auto sy = static_cast<int>(row * h / side);
    for (std::int64_t col = 0; col < side; ++col) {
      const auto sx = static_cast<int>(col * w / side);
      const std::uint8_t* p = image.pixel(sx, sy);
      const int gray = (p[0] + p[1] + p[2]) / 3;
      x[static_cast<std::size_t>(row * side + col)] = static_cast<float>(gray) / 255.0f;
    }
  }
  return x;
}

FeatureVector ReferenceBackend::embed(const FaceImage& image) const {
  const auto x = preprocess(image);
  const std::size_t n = x.size();
  std::vector<float> feature(weights_.feature_dimension);
  for (std::size_t i = 0; i < feature.size(); ++i) {
    const float* row = weights_.feature_map.data() + i * n;
    double acc = weights_.feature_bias[i];
    for (std::size_t j = 0; j < n; ++j) {
      acc += static_cast<double>(row[j]) * static_cast<double>(x[j]);
    }
    feature[i] = static_cast<float>(acc);
  }
  return FeatureVector(std::move(feature));
}

std::array<double, kEmotionCount> ReferenceBackend::logits(
    const FeatureVector& feature) const {
  const std::size_t dim = weights_.feature_dimension;
  if (feature.dimension() != dim) {
    throw Error(Errc::invalid_config, "feature dimension does not match backend");
  }
  std::array<double, kEmotionCount> out{};
  for (std::size_t k = 0; k < kEmotionCount; ++k) {
    const float* row = weights_.logit_map.data() + k * dim;
    double acc = weights_.logit_bias[k];
    for (std::size_t i = 0; i < dim; ++i) {
      acc += static_cast<double>(row[i]) * static_cast<double>(feature[i]);
    }
    out[k] = acc;
  }
  return out;
}

EmotionScores ReferenceBackend::classify(const FaceImage& image) const {
  return softmax(logits(embed(image)));
}

EmotionScores softmax(const std::array<double, kEmotionCount>& logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::array<double, kEmotionCount> e{};
  double sum = 0.0;
  for (std::size_t k = 0; k < kEmotionCount; ++k) {
    e[k] = std::exp(logits[k] - peak);
    sum += e[k];
  }
  for (auto& v : e) v /= sum;
  return EmotionScores(e);
}

std::shared_ptr<const Classifier> load_backend(
    const BackendDescriptor& descriptor) {
  if (descriptor.input_side < kMinImageSide || descriptor.feature_dimension < 1) {
    throw BackendLoadError("descriptor out of range", 0);
  }
  ReferenceWeights weights;
  if (const auto* path = std::get_if<std::filesystem::path>(&descriptor.weights_source)) {
    weights = load_weights(*path);
  } else {
    weights = parse_weights(std::get<std::vector<std::uint8_t>>(descriptor.weights_source));
  }
  if (weights.input_side != static_cast<std::uint32_t>(descriptor.input_side)) {
    throw BackendLoadError("input_side differs from descriptor", 4);
  }
  if (weights.feature_dimension !=
      static_cast<std::uint32_t>(descriptor.feature_dimension)) {
    throw BackendLoadError("feature_dimension differs from descriptor", 8);
  }
  return std::make_shared<ReferenceBackend>(descriptor.name, std::move(weights));
}

std::optional<FaceRegion> CenterCropDetector::detect(const FaceImage& image) const {
  const auto data = image.data();
  const std::size_t n = data.size() / 3;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < data.size(); i += 3) {
    const double g = (data[i] + data[i + 1] + data[i + 2]) / 3;
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / static_cast<double>(n);
  const double variance = sum_sq / static_cast<double>(n) - mean * mean;
  if (variance < variance_floor_) return std::nullopt;
  const int side = std::min(image.width(), image.height());
  return FaceRegion{(image.width() - side) / 2, (image.height() - side) / 2,
                    side, side};
}

}  // namespace gamo
