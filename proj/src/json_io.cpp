#include "gamo/json_io.hpp"

#include <fstream>

#include "gamo/error.hpp"

namespace gamo {

namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw ParseError("report schema: " + what, 0);
}

double accuracy_value(const Json& v, const char* what) {
  if (!v.is_number()) schema_error(std::string(what) + " must be a number");
  const double d = v.get<double>();
  if (!(d >= 0.0 && d <= 1.0)) schema_error(std::string(what) + " outside [0,1]");
  return d;
}

}  // namespace

Json counts_to_json(const EmotionCounts& counts) {
  Json j = Json::object();
  for (auto e : kAllEmotions) j[std::string(label(e))] = counts[index_of(e)];
  return j;
}

EmotionCounts counts_from_json(const Json& j) {
  if (!j.is_object()) schema_error("counts must be an object");
  EmotionCounts c{};
  for (auto e : kAllEmotions) {
    const auto it = j.find(std::string(label(e)));
    if (it == j.end() || !it->is_number_unsigned()) {
      schema_error("counts." + std::string(label(e)) + " must be a non-negative integer");
    }
    c[index_of(e)] = it->get<std::uint64_t>();
  }
  return c;
}

Json distribution_to_json(const Distribution& d) {
  Json j;
  j["counts"] = counts_to_json(d.counts);
  j["total"] = d.total;
  return j;
}

Json report_to_json(const EvaluationReport& r) {
  Json j;
  j["counts"] = counts_to_json(r.counts);
  j["total"] = r.total();
  j["dataset"] = r.dataset;
  j["backend"] = r.backend;
  j["label"] = r.column_title();
  Json acc = Json::object();
  for (auto e : kAllEmotions) {
    const auto& a = r.accuracy[index_of(e)];
    acc[std::string(label(e))] = a ? Json(*a) : Json(nullptr);
  }
  j["accuracy"] = std::move(acc);
  j["micro_average"] = r.micro_average;
  j["macro_average"] = r.macro_average;
  if (r.confusion) {
    Json rows = Json::array();
    for (const auto& row : *r.confusion) rows.push_back(row);
    j["confusion"] = std::move(rows);
  } else {
    j["confusion"] = nullptr;
  }
  return j;
}

EvaluationReport report_from_json(const Json& j) {
  if (!j.is_object()) schema_error("top level must be an object");
  EvaluationReport r;
  r.counts = counts_from_json(j.value("counts", Json()));
  if (!j.contains("total") || !j["total"].is_number_unsigned() ||
      j["total"].get<std::uint64_t>() != r.total()) {
    schema_error("total must equal the sum of counts");
  }
  r.dataset = j.value("dataset", "");
  r.backend = j.value("backend", "");
  r.label = j.value("label", "");
  const auto& acc = j.value("accuracy", Json());
  if (!acc.is_object()) schema_error("accuracy must be an object");
  for (auto e : kAllEmotions) {
    const auto it = acc.find(std::string(label(e)));
    if (it == acc.end()) schema_error("accuracy." + std::string(label(e)) + " missing");
    if (!it->is_null()) r.accuracy[index_of(e)] = accuracy_value(*it, "accuracy");
  }
  if (!j.contains("micro_average")) schema_error("micro_average missing");
  r.micro_average = accuracy_value(j["micro_average"], "micro_average");
  if (j.contains("macro_average")) {
    r.macro_average = accuracy_value(j["macro_average"], "macro_average");
  } else {
    double sum = 0.0;
    int n = 0;
    for (const auto& a : r.accuracy) {
      if (a) {
        sum += *a;
        ++n;
      }
    }
    r.macro_average = n ? sum / n : 0.0;
  }
  if (j.contains("confusion") && !j["confusion"].is_null()) {
    const auto& rows = j["confusion"];
    if (!rows.is_array() || rows.size() != kEmotionCount) schema_error("confusion must be 7x7");
    ConfusionMatrix m{};
    for (std::size_t t = 0; t < kEmotionCount; ++t) {
      if (!rows[t].is_array() || rows[t].size() != kEmotionCount) {
        schema_error("confusion must be 7x7");
      }
      for (std::size_t p = 0; p < kEmotionCount; ++p) {
        if (!rows[t][p].is_number_unsigned()) schema_error("confusion cells must be counts");
        m[t][p] = rows[t][p].get<std::uint64_t>();
      }
    }
    r.confusion = m;
  }
  return r;
}

EvaluationReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open report " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  return report_from_json(j);
}

void save_report(const EvaluationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
}

}  // namespace gamo
