// msse: run pipeline stages or compare two metrics reports.
//
//   msse <stage> --config <path> [--out-dir <path>]
//   msse compare <metrics_a.json> <metrics_b.json> [--metric micro_f1] [--alpha 0.05]
//
// Log level: MSSE_LOG_LEVEL (trace, debug, info, warn, err, off).

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "msse/msse.hpp"

namespace {

int compare(const std::string& path_a, const std::string& path_b, const std::string& metric, double alpha) {
  try {
    auto load = [](const std::string& p) {
      std::ifstream in(p);
      if (!in) throw msse::Error("cannot open " + p);
      return nlohmann::json::parse(in);
    };
    const auto a = msse::fold_series(load(path_a), metric);
    const auto b = msse::fold_series(load(path_b), metric);
    const auto c = msse::compare_runs(a, b, metric, alpha);
    std::cout << msse::comparison_json(c).dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  msse::pipeline::init_logging();

  CLI::App app{"Structured synset embeddings and emotion annotation propagation"};
  app.footer(msse::pipeline::config_help());
  app.require_subcommand(1);

  std::string config, out_dir = "out";
  for (const char* name : {"synth", "walk", "embed", "train", "propagate", "evaluate", "all"}) {
    const std::string what = std::string_view(name) == "all" ? "run every stage, skipping cached ones"
                                                             : std::string("run the ") + name + " stage";
    auto* sub = app.add_subcommand(name, what);
    sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", out_dir, "artifact directory")->capture_default_str();
  }

  std::string metrics_a, metrics_b, metric = "micro_f1";
  double alpha = 0.05;
  auto* cmp = app.add_subcommand("compare", "Shapiro-Wilk and paired t-test on per-fold scores of two runs");
  cmp->add_option("a", metrics_a, "first metrics.json")->required()->check(CLI::ExistingFile);
  cmp->add_option("b", metrics_b, "second metrics.json")->required()->check(CLI::ExistingFile);
  cmp->add_option("--metric", metric, "per-fold key")->capture_default_str();
  cmp->add_option("--alpha", alpha, "significance level")->capture_default_str()->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);

  auto* chosen = app.get_subcommands().front();
  if (chosen == cmp) return compare(metrics_a, metrics_b, metric, alpha);
  const auto stage = msse::pipeline::parse_stage(chosen->get_name());
  return msse::pipeline::run(*stage, config, out_dir);
}
