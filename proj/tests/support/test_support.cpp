#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "gamo/engine.hpp"
#include "gamo/image_codec.hpp"
#include "gamo/store.hpp"
#include "gamo/templates.hpp"

namespace testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  for (;;) {
    char name[64];
    std::snprintf(name, sizeof name, "%s-%08x%08x", tag.c_str(), rd(), rd());
    path_ = fs::temp_directory_path() / name;
    if (fs::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

gamo::FaceImage noise_image(std::uint64_t seed, int width, int height) {
  std::mt19937_64 gen(seed * 0x2545F4914F6CDD1DULL + 17);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
  for (auto& v : rgb) v = static_cast<std::uint8_t>(gen() >> 56);
  return gamo::FaceImage(width, height, std::move(rgb));
}

std::string synthetic_manifest(const gamo::EmotionCounts& counts, std::uint64_t seed,
                               const std::string& session) {
  static const char* names[7] = {"angry", "disgust", "fear", "happy",
                                 "neutral", "sad", "surprise"};
  std::vector<int> labels;
  for (int e = 0; e < 7; ++e) labels.insert(labels.end(), counts[e], e);
  std::mt19937_64 gen(seed);
  std::shuffle(labels.begin(), labels.end(), gen);
  std::string out;
  out.reserve(labels.size() * 110);
  char line[256];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto id = i + 1;
    std::snprintf(line, sizeof line,
                  "%08zu\t%s\timages/%s/%08zu.png\t%s\t-\tcustomized\t1\t%.4f\t"
                  "2017-03-%02zuT12:%02zu:%02zu.%03zuZ\n",
                  id, names[labels[i]], names[labels[i]], id, session.c_str(),
                  0.5 + 0.0001 * static_cast<double>(i % 5000), 1 + i % 28, i % 60,
                  (i / 60) % 60, i % 1000);
    out += line;
  }
  return out;
}

fs::path fixture_path(const std::string& name) { return fs::path(GAMO_FIXTURE_DIR) / name; }

std::size_t brute_force_nearest(const std::array<std::vector<float>, 7>& templates,
                                const std::vector<float>& query) {
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < 7; ++e) {
    double sum = 0.0;
    for (std::size_t k = 0; k < query.size(); ++k) {
      const double d = static_cast<double>(templates[e][k]) - static_cast<double>(query[k]);
      sum += d * d;
    }
    const double distance = std::sqrt(sum);
    if (distance < best_distance) {
      best_distance = distance;
      best = e;
    }
  }
  return best;
}

std::array<double, 7> long_hand_logits(const gamo::FaceImage& image, int side,
                                       const std::vector<float>& feature_map,
                                       const std::vector<float>& feature_bias,
                                       const std::vector<float>& logit_map,
                                       const std::vector<float>& logit_bias,
                                       std::vector<double>* feature_out) {
  const std::size_t n = static_cast<std::size_t>(side) * side;
  std::vector<double> x(n);
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      const int sx = col * image.width() / side;
      const int sy = row * image.height() / side;
      const auto* px = image.pixel(sx, sy);
      const int gray = (px[0] + px[1] + px[2]) / 3;
      x[static_cast<std::size_t>(row) * side + col] = static_cast<float>(gray / 255.0f);
    }
  }
  const std::size_t dim = feature_bias.size();
  std::vector<double> feature(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double acc = feature_bias[i];
    for (std::size_t j = 0; j < n; ++j) acc += static_cast<double>(feature_map[i * n + j]) * x[j];
    feature[i] = static_cast<float>(acc);
  }
  std::array<double, 7> logits{};
  for (std::size_t e = 0; e < 7; ++e) {
    double acc = logit_bias[e];
    for (std::size_t i = 0; i < dim; ++i) {
      acc += static_cast<double>(logit_map[e * dim + i]) * feature[i];
    }
    logits[e] = acc;
  }
  if (feature_out) *feature_out = feature;
  return logits;
}

double chi_square_uniform(const std::vector<std::uint64_t>& observed) {
  double total = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  const double expected = total / static_cast<double>(observed.size());
  double chi = 0.0;
  for (auto o : observed) {
    const double d = static_cast<double>(o) - expected;
    chi += d * d / expected;
  }
  return chi;
}

std::uint64_t oracle_session_score(double p, int lives, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution match(p);
  std::uint64_t score = 0;
  while (lives > 0) {
    if (match(gen)) {
      ++score;
    } else {
      --lives;
    }
  }
  return score;
}

// --- schemas ---------------------------------------------------------------

namespace {

const std::set<std::string> kLabels = {"angry", "disgust", "fear", "happy",
                                       "neutral", "sad", "surprise"};

class Checker {
 public:
  explicit Checker(std::vector<std::string>& out) : out_(out) {}

  void fail(const std::string& where, const std::string& what) {
    out_.push_back(where + ": " + what);
  }

  bool object(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
      fail(where, "not an object");
      return false;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) fail(where, "unexpected field '" + it.key() + "'");
    }
    return true;
  }

  const Json* field(const Json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key)) {
      fail(where, "missing '" + key + "'");
      return nullptr;
    }
    return &j[key];
  }

  void string(const Json& j, const std::string& where, const std::string& key) {
    if (auto* v = field(j, where, key); v && !v->is_string()) fail(where, key + " not a string");
  }
  void boolean(const Json& j, const std::string& where, const std::string& key) {
    if (auto* v = field(j, where, key); v && !v->is_boolean()) fail(where, key + " not a boolean");
  }
  void integer(const Json& j, const std::string& where, const std::string& key, bool non_negative) {
    auto* v = field(j, where, key);
    if (!v) return;
    if (!v->is_number_integer()) {
      fail(where, key + " not an integer");
    } else if (non_negative && v->get<std::int64_t>() < 0) {
      fail(where, key + " negative");
    }
  }
  void number(const Json& j, const std::string& where, const std::string& key) {
    if (auto* v = field(j, where, key); v && !v->is_number()) fail(where, key + " not a number");
  }
  void label(const Json& j, const std::string& where, const std::string& key, bool nullable) {
    auto* v = field(j, where, key);
    if (!v) return;
    if (nullable && v->is_null()) return;
    if (!v->is_string() || !kLabels.count(v->get<std::string>())) {
      fail(where, key + " not an emotion label");
    }
  }
  void label_array(const Json& j, const std::string& where, const std::string& key) {
    auto* v = field(j, where, key);
    if (!v) return;
    if (!v->is_array()) {
      fail(where, key + " not an array");
      return;
    }
    for (const auto& e : *v) {
      if (!e.is_string() || !kLabels.count(e.get<std::string>())) {
        fail(where, key + " holds a non-label");
      }
    }
  }

  void target(const Json& j, const std::string& where) {
    if (!object(j, where, {"emotion", "index", "spawned_at_ms", "deadline_ms", "remaining_ms"})) {
      return;
    }
    label(j, where, "emotion", false);
    integer(j, where, "index", true);
    integer(j, where, "spawned_at_ms", false);
    integer(j, where, "deadline_ms", false);
    integer(j, where, "remaining_ms", true);
    if (j.contains("index") && j["index"].is_number_integer() && j["index"].get<int>() > 6) {
      fail(where, "index out of range");
    }
    if (j.contains("deadline_ms") && j.contains("spawned_at_ms") &&
        j["deadline_ms"].is_number() && j["spawned_at_ms"].is_number() &&
        j["deadline_ms"].get<std::int64_t>() <= j["spawned_at_ms"].get<std::int64_t>()) {
      fail(where, "deadline not after spawn");
    }
  }

  void event(const Json& j, const std::string& where) {
    if (!object(j, where, {"kind", "emotion", "at_ms", "lives", "score"})) return;
    auto* kind = field(j, where, "kind");
    static const std::set<std::string> kinds = {"target_spawned", "life_lost", "game_over"};
    if (kind && (!kind->is_string() || !kinds.count(kind->get<std::string>()))) {
      fail(where, "unknown event kind");
    }
    label(j, where, "emotion", false);
    integer(j, where, "at_ms", false);
    integer(j, where, "lives", true);
    integer(j, where, "score", true);
  }

  void session(const Json& j, const std::string& where) {
    string(j, where, "session_id");
    auto* mode = field(j, where, "mode");
    if (mode && (!mode->is_string() ||
                 (*mode != "general" && *mode != "customized"))) {
      fail(where, "mode not general/customized");
    }
    if (auto* p = field(j, where, "player_id"); p && !p->is_string() && !p->is_null()) {
      fail(where, "player_id not string/null");
    }
    auto* state = field(j, where, "state");
    if (state && (!state->is_string() || (*state != "running" && *state != "over"))) {
      fail(where, "state not running/over");
    }
    integer(j, where, "lives", true);
    integer(j, where, "initial_lives", true);
    integer(j, where, "score", true);
    integer(j, where, "bomb_ttl_ms", true);
    integer(j, where, "min_frame_interval_ms", true);
    integer(j, where, "server_time_ms", false);
    if (auto* t = field(j, where, "target"); t && !t->is_null()) target(*t, where + ".target");
    if (j.contains("seed") && !j["seed"].is_number_unsigned()) fail(where, "seed not unsigned");
    if (j.contains("events")) events(j["events"], where + ".events");
    if (!state || !state->is_string() || !j.contains("lives") || !j.contains("target")) return;
    const bool over = *state == "over";
    if (over != (j["lives"] == 0)) fail(where, "state over iff lives 0 violated");
    if (over == !j["target"].is_null()) fail(where, "running iff target present violated");
    if (over != j.contains("final_score")) fail(where, "final_score iff over violated");
    if (over && j.contains("final_score") && j["final_score"] != j["score"]) {
      fail(where, "final_score differs from score");
    }
  }

  void events(const Json& j, const std::string& where) {
    if (!j.is_array()) {
      fail(where, "not an array");
      return;
    }
    for (std::size_t i = 0; i < j.size(); ++i) event(j[i], where + "[" + std::to_string(i) + "]");
  }

 private:
  std::vector<std::string>& out_;
};

const std::set<std::string> kSessionFields = {
    "session_id", "mode", "player_id", "state", "lives", "initial_lives", "score",
    "target", "bomb_ttl_ms", "min_frame_interval_ms", "server_time_ms", "final_score",
    "seed", "events"};

}  // namespace

std::vector<std::string> schema_violations(const Json& doc, const std::string& schema) {
  std::vector<std::string> out;
  Checker c(out);
  if (schema == "session") {
    if (c.object(doc, "session", kSessionFields)) c.session(doc, "session");
  } else if (schema == "frame") {
    auto allowed = kSessionFields;
    allowed.erase("seed");
    for (const char* k : {"judged_target", "matched", "scored", "scores", "threshold",
                          "matched_emotion", "target_score", "saved_record", "next_target",
                          "client_timestamp_ms"}) {
      allowed.insert(k);
    }
    if (!c.object(doc, "frame", allowed)) return out;
    c.session(doc, "frame");
    c.label(doc, "frame", "judged_target", false);
    c.boolean(doc, "frame", "matched");
    c.boolean(doc, "frame", "scored");
    c.number(doc, "frame", "target_score");
    c.label(doc, "frame", "matched_emotion", true);
    if (!doc.contains("events")) c.fail("frame", "missing 'events'");
    if (auto* s = c.field(doc, "frame", "scores"); s && !s->is_null()) {
      if (c.object(*s, "frame.scores", kLabels)) {
        double sum = 0.0;
        for (const auto& l : kLabels) {
          if (!s->contains(l) || !(*s)[l].is_number()) {
            c.fail("frame.scores", "missing " + l);
            continue;
          }
          const double v = (*s)[l].get<double>();
          if (v < 0.0 || v > 1.0) c.fail("frame.scores", l + " outside [0,1]");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) c.fail("frame.scores", "does not sum to 1");
      }
    }
    if (auto* t = c.field(doc, "frame", "threshold"); t && !t->is_null() && !t->is_number()) {
      c.fail("frame", "threshold not number/null");
    }
    if (auto* r = c.field(doc, "frame", "saved_record"); r && !r->is_null() && !r->is_string()) {
      c.fail("frame", "saved_record not string/null");
    }
    if (auto* t = c.field(doc, "frame", "client_timestamp_ms");
        t && !t->is_null() && !t->is_number_integer()) {
      c.fail("frame", "client_timestamp_ms not integer/null");
    }
    if (auto* n = c.field(doc, "frame", "next_target"); n && !n->is_null()) {
      c.target(*n, "frame.next_target");
    }
    if (doc.contains("mode") && doc.contains("scores") && doc.contains("matched_emotion")) {
      const bool general = doc["mode"] == "general";
      if (general == doc["scores"].is_null()) c.fail("frame", "scores present iff general mode");
      if (general != doc["matched_emotion"].is_null()) {
        c.fail("frame", "matched_emotion present iff customized mode");
      }
    }
    if (doc.contains("scored") && doc.contains("matched") && doc["scored"] == true &&
        doc["matched"] != true) {
      c.fail("frame", "scored without a match");
    }
    if (doc.contains("scored") && doc.contains("next_target") &&
        (doc["scored"] == true) == doc["next_target"].is_null()) {
      c.fail("frame", "next_target present iff scored");
    }
  } else if (schema == "template_ack") {
    if (!c.object(doc, "ack", {"player_id", "emotion", "captured", "feature_dimension",
                               "registered", "missing", "complete"})) {
      return out;
    }
    c.string(doc, "ack", "player_id");
    c.label(doc, "ack", "emotion", false);
    c.boolean(doc, "ack", "captured");
    c.integer(doc, "ack", "feature_dimension", true);
    c.label_array(doc, "ack", "registered");
    c.label_array(doc, "ack", "missing");
    c.boolean(doc, "ack", "complete");
    if (doc.contains("registered") && doc.contains("missing") && doc["registered"].is_array() &&
        doc["missing"].is_array()) {
      std::set<std::string> all;
      for (const auto& l : doc["registered"]) all.insert(l.get<std::string>());
      for (const auto& l : doc["missing"]) all.insert(l.get<std::string>());
      if (all.size() != 7 || doc["registered"].size() + doc["missing"].size() != 7) {
        c.fail("ack", "registered and missing must partition the seven emotions");
      }
      if (doc.contains("complete") && (doc["complete"] == true) != doc["missing"].empty()) {
        c.fail("ack", "complete iff nothing missing");
      }
    }
  } else if (schema == "complete") {
    if (!c.object(doc, "complete", {"player_id", "complete", "registered"})) return out;
    c.string(doc, "complete", "player_id");
    c.label_array(doc, "complete", "registered");
    if (doc.value("complete", false) != true) c.fail("complete", "complete must be true");
    if (doc.contains("registered") && doc["registered"].size() != 7) {
      c.fail("complete", "registered must list all seven");
    }
  } else if (schema == "stats") {
    if (!c.object(doc, "stats", {"counts", "total"})) return out;
    c.integer(doc, "stats", "total", true);
    std::uint64_t sum = 0;
    if (auto* counts = c.field(doc, "stats", "counts"); counts &&
        c.object(*counts, "stats.counts", kLabels)) {
      for (const auto& l : kLabels) {
        c.integer(*counts, "stats.counts", l, true);
        if (counts->contains(l) && (*counts)[l].is_number_unsigned()) {
          sum += (*counts)[l].get<std::uint64_t>();
        }
      }
    }
    if (doc.contains("total") && doc["total"].is_number_unsigned() &&
        doc["total"].get<std::uint64_t>() != sum) {
      c.fail("stats", "total differs from the sum of counts");
    }
  } else if (schema == "error") {
    if (!c.object(doc, "error_doc", {"error"}) || !doc.contains("error")) {
      c.fail("error_doc", "missing 'error'");
      return out;
    }
    const auto& e = doc["error"];
    if (!c.object(e, "error", {"code", "message", "retryable", "missing", "emotion"})) return out;
    static const std::set<std::string> codes = {
        "invalid_image", "no_face", "rate_limited", "session_over",
        "unregistered_player", "incomplete_registration", "backend_error"};
    auto* code = c.field(e, "error", "code");
    c.string(e, "error", "message");
    c.boolean(e, "error", "retryable");
    if (code && (!code->is_string() || !codes.count(code->get<std::string>()))) {
      c.fail("error", "code outside the closed set");
    } else if (code && e.contains("retryable") && e["retryable"].is_boolean()) {
      const bool expect = *code == "rate_limited" || *code == "no_face";
      if (e["retryable"].get<bool>() != expect) c.fail("error", "retryable mismatch for code");
    }
    if (e.contains("missing")) c.label_array(e, "error", "missing");
    if (e.contains("emotion")) c.label(e, "error", "emotion", false);
  } else {
    out.push_back("unknown schema " + schema);
  }
  return out;
}

gamo::EmotionScores ScriptedClassifier::classify(const gamo::FaceImage& image) const {
  std::array<double, 7> v;
  v.fill(0.01);
  v[image.pixel(0, 0)[1] % 7] = 0.94;
  return gamo::EmotionScores(v);
}

gamo::FeatureVector ScriptedClassifier::embed(const gamo::FaceImage& image) const {
  std::vector<float> f(7);
  for (std::size_t i = 0; i < 7; ++i) f[i] = image.data()[i * 3] / 100.0f;
  return gamo::FeatureVector(std::move(f));
}

gamo::FaceImage scripted_frame(gamo::Emotion shown, std::uint64_t seed) {
  const auto base = noise_image(seed, 32, 32);
  std::vector<std::uint8_t> rgb(base.data().begin(), base.data().end());
  const auto idx = gamo::index_of(shown);
  for (std::size_t i = 0; i < 7; ++i) rgb[i * 3] = i == idx ? 100 : 0;
  rgb[1] = static_cast<std::uint8_t>(idx);
  return gamo::FaceImage(32, 32, std::move(rgb));
}

gamo::FaceImage faceless_frame() {
  return gamo::FaceImage(32, 32, std::vector<std::uint8_t>(32 * 32 * 3, 128));
}

std::string frame_body(const gamo::FaceImage& image) {
  Json j;
  j["image"] = gamo::base64_encode(gamo::encode_png(image));
  return j.dump();
}

GatewayRig::GatewayRig(gamo::EngineConfig config, std::size_t max_payload) {
  auto classifier = std::make_shared<ScriptedClassifier>();
  auto detector = std::make_shared<gamo::CenterCropDetector>();
  store = std::make_shared<gamo::CollectionStore>(dir / "data");
  registry = std::make_shared<gamo::TemplateRegistry>(classifier, detector, dir / "templates");
  engine = std::make_shared<gamo::GameEngine>(
      config, std::make_shared<gamo::ClassifierJudge>(classifier, detector, gamo::ThresholdTable{}),
      std::make_shared<gamo::TemplateJudge>(registry), registry,
      std::make_shared<gamo::StoreSink>(store));
  gamo::GatewayOptions options;
  options.max_payload_bytes = max_payload;
  gateway = std::make_shared<gamo::Gateway>(engine, registry, store, options,
                                            [this] { return now; });
}

}  // namespace testing
