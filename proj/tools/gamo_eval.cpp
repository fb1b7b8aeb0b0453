// gamo-eval: self/cross evaluation of reference backends on collected
// datasets, report tables, and engine-study aggregation.
//
//   gamo-eval --backend model.gmf --dataset root [--cross-backend other.gmf] [--out dir]
//   gamo-eval report a.json b.json ...
//   gamo-eval study scores.tsv [--out means.tsv]

#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "gamo/eval.hpp"
#include "gamo/json_io.hpp"

namespace {

std::string slug(const std::string& title) {
  std::string out;
  for (char c : title) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluate emotion backends and summarize studies"};
  app.require_subcommand(0, 1);

  std::string backend_path;
  std::string dataset_root;
  std::string cross_path;
  std::string out_dir;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--backend", backend_path, "GMF1 weights evaluated on their own dataset")
      ->check(CLI::ExistingFile);
  app.add_option("--dataset", dataset_root, "Collection store root")->check(CLI::ExistingDirectory);
  app.add_option("--cross-backend", cross_path, "GMF1 weights trained on another dataset")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Directory for JSON reports");
  app.add_option("--workers", workers, "Classification threads")->check(CLI::PositiveNumber);

  auto* report_cmd = app.add_subcommand("report", "Render report files as one table");
  std::vector<std::string> report_files;
  report_cmd->add_option("files", report_files, "Report JSON files")
      ->required()->check(CLI::ExistingFile);

  auto* study_cmd = app.add_subcommand("study", "Mean final score per player and engine");
  std::string study_file;
  std::string study_out;
  study_cmd->add_option("file", study_file, "player<TAB>engine<TAB>round<TAB>score")
      ->required()->check(CLI::ExistingFile);
  study_cmd->add_option("--out", study_out, "Write the table here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*report_cmd) {
      std::vector<gamo::EvaluationReport> reports;
      for (const auto& f : report_files) reports.push_back(gamo::load_report(f));
      std::cout << gamo::format_report(reports);
      return 0;
    }
    if (*study_cmd) {
      std::ifstream in(study_file);
      const auto records = gamo::parse_study(in);
      const auto table = gamo::format_study_means(gamo::aggregate_scores(records));
      if (study_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream(study_out) << table;
      }
      return 0;
    }
    if (backend_path.empty() || dataset_root.empty()) {
      std::cerr << "gamo-eval: --backend and --dataset are required\n" << app.help();
      return 2;
    }

    const gamo::DatasetSource source(gamo::Dataset::open(dataset_root));
    std::vector<gamo::EvaluationReport> reports;
    const auto self = gamo::load_backend(gamo::describe_weights(backend_path));
    reports.push_back(gamo::evaluate(*self, source, workers));
    if (!cross_path.empty()) {
      const auto other = gamo::load_backend(gamo::describe_weights(cross_path));
      auto cross = gamo::cross_evaluate(*other, source, workers);
      cross.label = other->name() + " cross";
      reports.push_back(std::move(cross));
    }
    std::cout << gamo::format_report(reports);
    for (const auto& r : reports) {
      char line[128];
      std::snprintf(line, sizeof line, "%s: %llu samples, micro %.4f, macro %.4f\n",
                    r.column_title().c_str(), static_cast<unsigned long long>(r.total()),
                    r.micro_average, r.macro_average);
      std::cout << line;
    }
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      for (const auto& r : reports) {
        gamo::save_report(r, std::filesystem::path(out_dir) / (slug(r.column_title()) + ".json"));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "gamo-eval: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
