#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "gamo/eval.hpp"
#include "gamo/store.hpp"

namespace gamo {

using Json = nlohmann::ordered_json;

Json counts_to_json(const EmotionCounts& counts);
EmotionCounts counts_from_json(const Json& j);

// {"counts": {"angry": n, ...}, "total": n}
Json distribution_to_json(const Distribution& d);

// The stats schema plus dataset, backend, label, accuracy (per emotion,
// null without support), micro_average, macro_average and confusion
// (7x7 rows = true label, or null).
Json report_to_json(const EvaluationReport& report);
// Throws ParseError (line 0) on schema violations.
EvaluationReport report_from_json(const Json& j);

EvaluationReport load_report(const std::filesystem::path& path);
void save_report(const EvaluationReport& report, const std::filesystem::path& path);

}  // namespace gamo
