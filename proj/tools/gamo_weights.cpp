// gamo-weights: writes GMF1 weight files for the reference backend.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "gamo/backend.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate or inspect reference backend weights"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Write a weight file");
  std::string out;
  std::uint32_t side = 48;
  std::uint32_t dim = 64;
  std::uint64_t seed = 0;
  float scale = 0.05f;
  bool zeros = false;
  gen->add_option("-o,--out", out, "Output path")->required();
  gen->add_option("--input-side", side, "Square input side")->check(CLI::Range(static_cast<std::uint32_t>(gamo::kMinImageSide), 1024u));
  gen->add_option("--features", dim, "Feature dimension")->check(CLI::Range(1u, 65536u));
  gen->add_option("--seed", seed, "Seed for random weights");
  gen->add_option("--scale", scale, "Random entries lie in [-scale, scale)");
  gen->add_flag("--zeros", zeros, "All-zero weights (uniform scores)");

  auto* info = app.add_subcommand("info", "Print the header of a weight file");
  std::string in;
  info->add_option("file", in, "Weight file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) {
      const auto w = zeros ? gamo::ReferenceWeights::zeros(side, dim)
                           : gamo::ReferenceWeights::random(side, dim, seed, scale);
      if (const auto parent = std::filesystem::path(out).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
      }
      gamo::save_weights(w, out);
      std::cout << out << ": input_side " << side << ", features " << dim << '\n';
    } else {
      const auto d = gamo::describe_weights(in);
      std::cout << d.name << ": input_side " << d.input_side << ", features "
                << d.feature_dimension << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "gamo-weights: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
