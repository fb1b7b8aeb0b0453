#include "gamo/templates.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <mutex>

namespace gamo {

namespace {

std::string join_labels(const std::vector<Emotion>& emotions) {
  std::string out;
  for (auto e : emotions) {
    if (!out.empty()) out += ", ";
    out += label(e);
  }
  return out;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

IncompleteRegistration::IncompleteRegistration(std::vector<Emotion> missing)
    : Error(Errc::incomplete_registration,
            "templates missing for: " + join_labels(missing)),
      missing_(std::move(missing)) {}

NoFaceError::NoFaceError(std::optional<Emotion> emotion)
    : Error(Errc::no_face,
            emotion ? "no face detected while capturing " +
                          std::string(label(*emotion)) + "; please recapture"
                    : std::string("no face detected")),
      emotion_(emotion) {}

bool valid_player_id(std::string_view id) {
  if (id.empty() || id.size() > 64 || id.front() == '.') return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

bool TemplateSet::complete() const {
  for (const auto& t : templates_) {
    if (!t) return false;
  }
  return true;
}

const FeatureVector& TemplateSet::at(Emotion e) const {
  const auto& t = templates_[index_of(e)];
  if (!t) {
    throw Error(Errc::incomplete_registration,
                "no template for " + std::string(label(e)));
  }
  return *t;
}

std::vector<Emotion> TemplateSet::missing() const {
  std::vector<Emotion> out;
  for (auto e : kAllEmotions) {
    if (!has(e)) out.push_back(e);
  }
  return out;
}

std::vector<Emotion> TemplateSet::present() const {
  std::vector<Emotion> out;
  for (auto e : kAllEmotions) {
    if (has(e)) out.push_back(e);
  }
  return out;
}

std::optional<std::size_t> TemplateSet::dimension() const {
  for (const auto& t : templates_) {
    if (t) return t->dimension();
  }
  return std::nullopt;
}

void TemplateSet::put(Emotion e, FeatureVector feature) {
  if (auto dim = dimension(); dim && *dim != feature.dimension()) {
    // Overwriting the only stored template may change the dimension.
    if (!(present().size() == 1 && has(e))) {
      throw Error(Errc::invalid_config, "template dimension mismatch");
    }
  }
  templates_[index_of(e)] = std::move(feature);
}

Emotion nearest_template(const TemplateSet& set, const FeatureVector& query) {
  if (!set.complete()) throw IncompleteRegistration(set.missing());
  std::size_t best = 0;
  double best_distance = squared_l2(set.at(Emotion::Angry), query);
  for (std::size_t i = 1; i < kEmotionCount; ++i) {
    const double d = squared_l2(set.at(emotion_at(i)), query);
    if (d < best_distance) {
      best = i;
      best_distance = d;
    }
  }
  return emotion_at(best);
}

std::vector<std::uint8_t> serialize_templates(const TemplateSet& set) {
  std::vector<std::uint8_t> out = {'G', 'M', 'T', '1'};
  put_u32(out, static_cast<std::uint32_t>(set.dimension().value_or(0)));
  std::uint8_t bitmap = 0;
  for (auto e : set.present()) bitmap |= static_cast<std::uint8_t>(1u << index_of(e));
  out.push_back(bitmap);
  for (auto e : set.present()) {
    for (float f : set.at(e).components()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

TemplateSet parse_templates(std::string player_id,
                            std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t magic[] = {'G', 'M', 'T', '1'};
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size()) throw BackendLoadError("truncated template magic", i);
    if (bytes[i] != magic[i]) throw BackendLoadError("bad template magic", i);
  }
  if (bytes.size() < 9) throw BackendLoadError("truncated template header", bytes.size());
  const std::uint32_t dim = get_u32(bytes, 4);
  const std::uint8_t bitmap = bytes[8];
  if (bitmap & 0x80) throw BackendLoadError("presence bitmap uses bit 7", 8);
  if (bitmap != 0 && dim == 0) throw BackendLoadError("zero feature dimension", 4);
  TemplateSet set(std::move(player_id));
  std::size_t at = 9;
  for (auto e : kAllEmotions) {
    if (!(bitmap & (1u << index_of(e)))) continue;
    if ((bytes.size() - at) / 4 < dim) {
      throw BackendLoadError("truncated template vector", bytes.size());
    }
    std::vector<float> v(dim);
    for (auto& f : v) {
      f = std::bit_cast<float>(get_u32(bytes, at));
      if (!std::isfinite(f)) throw BackendLoadError("non-finite template value", at);
      at += 4;
    }
    set.put(e, FeatureVector(std::move(v)));
  }
  if (at != bytes.size()) throw BackendLoadError("trailing bytes", at);
  return set;
}

TemplateRegistry::TemplateRegistry(std::shared_ptr<const Classifier> classifier,
                                   std::shared_ptr<const FaceDetector> detector,
                                   std::optional<std::filesystem::path> directory)
    : classifier_(std::move(classifier)),
      detector_(std::move(detector)),
      directory_(std::move(directory)) {
  if (directory_) std::filesystem::create_directories(*directory_);
}

FeatureVector TemplateRegistry::extract(const FaceImage& image,
                                        std::optional<Emotion> capturing) const {
  const auto region = detector_->detect(image);
  if (!region) throw NoFaceError(capturing);
  return classifier_->embed(crop(image, *region));
}

std::shared_ptr<const TemplateSet> TemplateRegistry::lookup_locked(
    const std::string& player_id) const {
  if (auto it = sets_.find(player_id); it != sets_.end()) return it->second;
  if (!directory_) return nullptr;
  const auto path = *directory_ / (player_id + ".gmt");
  std::ifstream in(path, std::ios::binary);
  if (!in) return nullptr;
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  auto set = std::make_shared<const TemplateSet>(parse_templates(player_id, bytes));
  sets_.emplace(player_id, set);
  return set;
}

std::shared_ptr<const TemplateSet> TemplateRegistry::snapshot(
    const std::string& player_id) const {
  if (!valid_player_id(player_id)) return nullptr;
  {
    std::shared_lock lock(mutex_);
    if (auto it = sets_.find(player_id); it != sets_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  return lookup_locked(player_id);
}

bool TemplateRegistry::is_registered(const std::string& player_id) const {
  auto set = snapshot(player_id);
  return set && set->complete();
}

void TemplateRegistry::persist(const TemplateSet& set) const {
  if (!directory_) return;
  const auto bytes = serialize_templates(set);
  const auto path = *directory_ / (set.player_id() + ".gmt");
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

FeatureVector TemplateRegistry::register_template(const std::string& player_id,
                                                  Emotion emotion,
                                                  const FaceImage& image) {
  if (!valid_player_id(player_id)) {
    throw Error(Errc::unregistered_player, "invalid player id");
  }
  auto feature = extract(image, emotion);
  std::unique_lock lock(mutex_);
  auto current = lookup_locked(player_id);
  auto next = current ? std::make_shared<TemplateSet>(*current)
                      : std::make_shared<TemplateSet>(player_id);
  next->put(emotion, feature);
  persist(*next);
  sets_[player_id] = std::move(next);
  return feature;
}

TemplateSet TemplateRegistry::complete_registration(const std::string& player_id) {
  if (!valid_player_id(player_id)) {
    throw Error(Errc::unregistered_player, "invalid player id");
  }
  auto set = snapshot(player_id);
  if (!set) throw IncompleteRegistration({kAllEmotions.begin(), kAllEmotions.end()});
  if (!set->complete()) throw IncompleteRegistration(set->missing());
  std::unique_lock lock(mutex_);
  persist(*set);
  return *set;
}

Emotion TemplateRegistry::match_template(const std::string& player_id,
                                         const FaceImage& image) const {
  auto match = match_detected(player_id, image);
  if (!match) throw NoFaceError(std::nullopt);
  return match->emotion;
}

std::optional<TemplateRegistry::Match> TemplateRegistry::match_detected(
    const std::string& player_id, const FaceImage& image) const {
  auto set = snapshot(player_id);
  if (!set || !set->complete()) {
    throw Error(Errc::unregistered_player,
                "player '" + player_id + "' has no complete template set");
  }
  const auto region = detector_->detect(image);
  if (!region) return std::nullopt;
  const auto query = classifier_->embed(crop(image, *region));
  Match m;
  m.region = *region;
  m.emotion = nearest_template(*set, query);
  for (auto e : kAllEmotions) {
    m.squared_distances[index_of(e)] = squared_l2(set->at(e), query);
  }
  return m;
}

}  // namespace gamo
