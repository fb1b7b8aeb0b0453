#include "gamo/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "gamo/error.hpp"

namespace gamo {

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto at = s.find(sep, start);
    out.push_back(s.substr(start, at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

// "| a | b |" -> {"a", "b"}
std::vector<std::string_view> table_cells(std::string_view line) {
  line = trim(line);
  if (line.size() < 2 || line.front() != '|' || line.back() != '|') return {};
  auto parts = split(line.substr(1, line.size() - 2), '|');
  for (auto& p : parts) p = trim(p);
  return parts;
}

}  // namespace

std::uint64_t EvaluationReport::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::string EvaluationReport::column_title() const {
  if (!label.empty()) return label;
  return backend + " on " + dataset;
}

EvaluationReport report_from_confusion(const ConfusionMatrix& confusion,
                                       std::string dataset, std::string backend) {
  EvaluationReport r;
  r.dataset = std::move(dataset);
  r.backend = std::move(backend);
  r.confusion = confusion;
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  double macro_sum = 0.0;
  int supported = 0;
  for (std::size_t t = 0; t < kEmotionCount; ++t) {
    std::uint64_t row = 0;
    for (auto v : confusion[t]) row += v;
    r.counts[t] = row;
    total += row;
    correct += confusion[t][t];
    if (row > 0) {
      r.accuracy[t] = static_cast<double>(confusion[t][t]) / static_cast<double>(row);
      macro_sum += *r.accuracy[t];
      ++supported;
    }
  }
  if (total == 0) throw Error(Errc::empty_dataset, "no samples to evaluate");
  r.micro_average = static_cast<double>(correct) / static_cast<double>(total);
  r.macro_average = macro_sum / supported;
  return r;
}

EvaluationReport evaluate(const Classifier& backend, const LabeledSource& dataset,
                          unsigned workers) {
  const std::size_t n = dataset.size();
  if (n == 0) throw Error(Errc::empty_dataset, "dataset " + dataset.name() + " is empty");
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));

  std::vector<ConfusionMatrix> partial(workers, ConfusionMatrix{});
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](unsigned w) {
    try {
      for (std::size_t i = w; i < n; i += workers) {
        const auto predicted = top_emotion(backend.classify(dataset.image(i)));
        ++partial[w][index_of(dataset.label(i))][index_of(predicted)];
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ConfusionMatrix merged{};
  for (const auto& m : partial) {
    for (std::size_t t = 0; t < kEmotionCount; ++t) {
      for (std::size_t p = 0; p < kEmotionCount; ++p) merged[t][p] += m[t][p];
    }
  }
  return report_from_confusion(merged, dataset.name(), backend.name());
}

std::string format_report(std::span<const EvaluationReport> reports) {
  if (reports.empty()) throw Error(Errc::invalid_config, "no reports to format");

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{""};
  for (const auto& r : reports) header.push_back(r.column_title());
  grid.push_back(std::move(header));
  std::vector<std::string> average{"Average"};
  for (const auto& r : reports) average.push_back(cell(r.micro_average));
  grid.push_back(std::move(average));
  for (auto e : kAllEmotions) {
    std::vector<std::string> row{std::string(display_name(e))};
    for (const auto& r : reports) row.push_back(cell(r.accuracy[index_of(e)]));
    grid.push_back(std::move(row));
  }

  std::vector<std::size_t> width(grid.front().size(), 3);
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    out << '|';
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << ' ' << row[c] << std::string(width[c] - row[c].size(), ' ') << " |";
    }
    out << '\n';
  };
  emit(grid.front());
  out << '|';
  for (auto w : width) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (std::size_t r = 1; r < grid.size(); ++r) emit(grid[r]);
  return out.str();
}

ParsedReportTable parse_report_table(std::string_view text) {
  ParsedReportTable t;
  std::size_t row = 0;
  bool header_seen = false;
  for (auto line : split(text, '\n')) {
    const auto cells = table_cells(line);
    if (cells.empty()) continue;
    if (!header_seen) {
      t.columns.assign(cells.begin() + 1, cells.end());
      header_seen = true;
      continue;
    }
    if (cells.front().starts_with("---") || cells.front().starts_with("--")) continue;
    if (row > kEmotionCount) throw ParseError("too many table rows", row + 3);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c] == "-") {
        t.rows[row].push_back(std::nullopt);
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      if (ec != std::errc()) throw ParseError("bad cell '" + std::string(cells[c]) + "'", row + 3);
      t.rows[row].push_back(v);
    }
    ++row;
  }
  if (row != kEmotionCount + 1) throw ParseError("expected 8 data rows", row + 2);
  return t;
}

std::vector<StudyRecord> parse_study(std::istream& in) {
  std::vector<StudyRecord> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && line.starts_with("player")) continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) throw ParseError("expected player, engine, round, score", line_no);
    StudyRecord r;
    r.player = trim(f[0]);
    r.engine = trim(f[1]);
    if (r.player.empty() || r.engine.empty()) throw ParseError("empty player or engine", line_no);
    const auto round = trim(f[2]);
    const auto score = trim(f[3]);
    auto [p1, e1] = std::from_chars(round.data(), round.data() + round.size(), r.round);
    if (e1 != std::errc() || p1 != round.data() + round.size() || r.round < 1) {
      throw ParseError("round must be an integer >= 1", line_no);
    }
    auto [p2, e2] = std::from_chars(score.data(), score.data() + score.size(), r.score);
    if (e2 != std::errc() || p2 != score.data() + score.size()) {
      throw ParseError("score must be a non-negative integer", line_no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StudyMean> aggregate_scores(std::span<const StudyRecord> records) {
  if (records.empty()) throw Error(Errc::incomplete_study, "study has no records");
  std::set<std::string> players;
  std::set<std::string> engines;
  std::map<std::pair<std::string, std::string>, std::pair<std::uint64_t, std::size_t>> groups;
  for (const auto& r : records) {
    if (r.round < 1) throw Error(Errc::incomplete_study, "round index must be >= 1");
    players.insert(r.player);
    engines.insert(r.engine);
    auto& g = groups[{r.player, r.engine}];
    g.first += r.score;
    ++g.second;
  }
  std::string missing;
  std::vector<StudyMean> out;
  for (const auto& p : players) {
    for (const auto& e : engines) {
      auto it = groups.find({p, e});
      if (it == groups.end()) {
        missing += (missing.empty() ? "" : ", ") + p + "/" + e;
        continue;
      }
      out.push_back({p, e,
                     static_cast<double>(it->second.first) /
                         static_cast<double>(it->second.second),
                     it->second.second});
    }
  }
  if (!missing.empty()) {
    throw Error(Errc::incomplete_study, "no rounds recorded for " + missing);
  }
  return out;
}

std::string format_study_means(std::span<const StudyMean> means) {
  std::ostringstream out;
  out << "player\tengine\tmean_score\trounds\n";
  for (const auto& m : means) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", m.mean_score);
    out << m.player << '\t' << m.engine << '\t' << buf << '\t' << m.rounds << '\n';
  }
  return out.str();
}

}  // namespace gamo
