#include "gamo/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include "gamo/image_codec.hpp"
#include "gamo/templates.hpp"

namespace gamo {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

bool safe_field(std::string_view s) {
  return !s.empty() && s.find_first_of("\t\r\n") == std::string_view::npos;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string sequence_id(std::uint64_t seq) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%08llu", static_cast<unsigned long long>(seq));
  return buf;
}

}  // namespace

std::string_view to_string(GameMode mode) {
  return mode == GameMode::general ? "general" : "customized";
}

std::optional<GameMode> parse_game_mode(std::string_view text) {
  if (text == "general") return GameMode::general;
  if (text == "customized") return GameMode::customized;
  return std::nullopt;
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()),
                static_cast<int>(hms.subseconds().count()));
  return buf;
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH:MM:SS[.mmm]Z
  if (text.size() != 20 && text.size() != 24) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':' || text.back() != 'Z') {
    return std::nullopt;
  }
  int y = 0;
  unsigned mo = 0, d = 0;
  int h = 0, mi = 0, s = 0, ms = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d) || !parse_int(text.substr(11, 2), h) ||
      !parse_int(text.substr(14, 2), mi) || !parse_int(text.substr(17, 2), s)) {
    return std::nullopt;
  }
  if (text.size() == 24) {
    if (text[19] != '.' || !parse_int(text.substr(20, 3), ms)) return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return Timestamp{sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} +
                   seconds{s} + milliseconds{ms}};
}

std::string format_manifest_line(const DatasetRecord& r) {
  char score[32];
  std::snprintf(score, sizeof score, "%.4f", r.meta.target_score);
  std::string line;
  line += r.record_id;
  line += '\t';
  line += label(r.label);
  line += '\t';
  line += r.image_path;
  line += '\t';
  line += r.meta.session_id;
  line += '\t';
  line += r.meta.player_id.value_or("-");
  line += '\t';
  line += to_string(r.meta.mode);
  line += '\t';
  line += r.meta.verified ? '1' : '0';
  line += '\t';
  line += score;
  line += '\t';
  line += format_iso8601(r.meta.timestamp);
  return line;
}

DatasetRecord parse_manifest_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto f = split_tabs(line);
  if (f.size() != 9) {
    throw ParseError("expected 9 tab-separated fields, got " + std::to_string(f.size()),
                     line_no);
  }
  DatasetRecord r;
  if (!safe_field(f[0])) throw ParseError("empty record id", line_no);
  r.record_id = f[0];
  const auto emotion = parse_emotion(f[1]);
  if (!emotion || f[1] != label(*emotion)) {
    throw ParseError("unknown label '" + std::string(f[1]) + "'", line_no);
  }
  r.label = *emotion;
  if (!safe_field(f[2])) throw ParseError("empty image path", line_no);
  r.image_path = f[2];
  if (!safe_field(f[3])) throw ParseError("empty session id", line_no);
  r.meta.session_id = f[3];
  if (f[4] != "-") {
    if (!valid_player_id(f[4])) throw ParseError("bad player id", line_no);
    r.meta.player_id = std::string(f[4]);
  }
  const auto mode = parse_game_mode(f[5]);
  if (!mode) throw ParseError("unknown mode '" + std::string(f[5]) + "'", line_no);
  r.meta.mode = *mode;
  if (f[6] != "0" && f[6] != "1") throw ParseError("verified must be 0 or 1", line_no);
  r.meta.verified = f[6] == "1";
  {
    const auto dot = f[7].find('.');
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f[7].data(), f[7].data() + f[7].size(), v);
    if (ec != std::errc() || ptr != f[7].data() + f[7].size() ||
        dot == std::string_view::npos || f[7].size() - dot - 1 != 4 || v < 0.0 ||
        v > 1.0) {
      throw ParseError("target score must be in [0,1] with 4 decimals", line_no);
    }
    r.meta.target_score = v;
  }
  const auto ts = parse_iso8601(f[8]);
  if (!ts) throw ParseError("bad timestamp '" + std::string(f[8]) + "'", line_no);
  r.meta.timestamp = *ts;
  return r;
}

double Distribution::imbalance_ratio() const {
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

DatasetManifest parse_manifest(std::istream& in) {
  DatasetManifest m;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto record = parse_manifest_line(line, line_no);
    if (!seen.insert(record.record_id).second) {
      throw ParseError("duplicate record id " + record.record_id, line_no);
    }
    ++m.counts[index_of(record.label)];
    m.records.push_back(std::move(record));
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());
  return parse_manifest(in);
}

Distribution distribution(const DatasetManifest& manifest) {
  Distribution d;
  for (const auto& r : manifest.records) ++d.counts[index_of(r.label)];
  for (auto c : d.counts) d.total += c;
  return d;
}

CollectionStore::CollectionStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "images", ec);
  if (ec) throw Error(Errc::io, "cannot create store at " + root_.string());
  for (auto e : kAllEmotions) fs::create_directories(root_ / "images" / std::string(label(e)));

  const auto manifest_path = root_ / kManifestName;
  if (fs::exists(manifest_path)) {
    // Drop a torn trailing line so the next append starts clean.
    std::string content;
    {
      std::ifstream in(manifest_path, std::ios::binary);
      content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    if (!content.empty() && content.back() != '\n') {
      const auto last_newline = content.rfind('\n');
      const auto keep = last_newline == std::string::npos ? 0 : last_newline + 1;
      fs::resize_file(manifest_path, keep);
      content.resize(keep);
    }
    std::istringstream in(content);
    auto parsed = parse_manifest(in);
    records_ = std::move(parsed.records);
    counts_ = parsed.counts;
    for (const auto& r : records_) {
      std::uint64_t seq = 0;
      if (parse_int(std::string_view(r.record_id), seq)) {
        next_sequence_ = std::max(next_sequence_, seq + 1);
      }
    }
  }
  manifest_out_.open(manifest_path, std::ios::app | std::ios::binary);
  if (!manifest_out_) throw Error(Errc::io, "cannot open " + manifest_path.string());
}

std::string CollectionStore::save_sample(const FaceImage& image, Emotion emotion,
                                         const SampleMetadata& meta) {
  if (!safe_field(meta.session_id)) throw Error(Errc::io, "session id is not storable");
  if (meta.player_id && !valid_player_id(*meta.player_id)) {
    throw Error(Errc::io, "player id is not storable");
  }
  DatasetRecord record;
  {
    std::lock_guard lock(mutex_);
    record.record_id = sequence_id(next_sequence_++);
  }
  record.label = emotion;
  record.image_path =
      "images/" + std::string(label(emotion)) + "/" + record.record_id + ".png";
  record.meta = meta;
  record.meta.target_score = std::clamp(meta.target_score, 0.0, 1.0);

  const auto final_path = root_ / record.image_path;
  auto tmp = final_path;
  tmp += ".tmp";
  write_png(image, tmp);
  fs::rename(tmp, final_path);

  const auto line = format_manifest_line(record) + "\n";
  std::lock_guard lock(mutex_);
  manifest_out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  manifest_out_.flush();
  if (!manifest_out_) throw Error(Errc::io, "manifest append failed");
  ++counts_[index_of(emotion)];
  records_.push_back(std::move(record));
  return records_.back().record_id;
}

EmotionCounts CollectionStore::counts() const {
  std::lock_guard lock(mutex_);
  return counts_;
}

Distribution CollectionStore::distribution() const {
  Distribution d;
  d.counts = counts();
  for (auto c : d.counts) d.total += c;
  return d;
}

DatasetManifest CollectionStore::manifest() const {
  std::lock_guard lock(mutex_);
  return DatasetManifest{records_, counts_};
}

Dataset Dataset::open(const fs::path& root) {
  Dataset ds;
  ds.root_ = root;
  ds.name_ = fs::absolute(root).lexically_normal().filename().string();
  if (ds.name_.empty()) ds.name_ = fs::absolute(root).parent_path().filename().string();
  ds.records_ = load_manifest(root / kManifestName).records;
  for (const auto& r : ds.records_) {
    if (!fs::exists(root / r.image_path)) throw DanglingRecord(r.record_id);
  }
  return ds;
}

FaceImage Dataset::image(std::size_t i) const {
  const auto& r = records_.at(i);
  const auto path = root_ / r.image_path;
  if (!fs::exists(path)) throw DanglingRecord(r.record_id);
  return read_image(path);
}

}  // namespace gamo
