// tonemine: synth / cluster / predict / report over one config file.
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <tbb/global_control.h>

#include "tonemine/config.hpp"
#include "tonemine/errors.hpp"
#include "tonemine/pipeline.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitInternal = 1;

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "pipeline config (INI)");
  cmd->add_option("-o,--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "global seed (overrides [run] seed)");
  cmd->add_option("-j,--jobs", c.jobs, "worker threads (0 = all cores)");
}

tonemine::config::PipelineConfig make_config(const Common& c) {
  tonemine::config::Overrides o;
  o.seed = c.seed;
  o.jobs = c.jobs;
  if (!c.out.empty()) o.out = c.out;
  if (c.config_path.empty()) return tonemine::config::default_config(o);
  return tonemine::config::load_config(c.config_path, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mine tone n-gram contour shape types and predict them from linguistic features"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  Common common;
  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted shape clusters");
  add_common(synth, common);
  synth->add_option("--spec", spec_path, "synthetic corpus spec (INI); default spec when omitted");
  auto* cluster = app.add_subcommand("cluster", "derive shape types per n and tone category");
  add_common(cluster, common);
  auto* predict = app.add_subcommand("predict", "train and evaluate shape-type predictors");
  add_common(predict, common);
  auto* report = app.add_subcommand("report", "summarize predictor accuracies and feature weights");
  add_common(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    const auto cfg = make_config(common);
    std::unique_ptr<tbb::global_control> limit;
    if (cfg.jobs > 0) {
      limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, cfg.jobs);
    }
    if (synth->parsed()) {
      std::optional<std::filesystem::path> spec;
      if (!spec_path.empty()) spec = spec_path;
      tonemine::pipeline::run_synth(cfg, spec);
    } else if (cluster->parsed()) {
      tonemine::pipeline::run_cluster(cfg);
    } else if (predict->parsed()) {
      tonemine::pipeline::run_predict(cfg);
    } else if (report->parsed()) {
      const auto summary = tonemine::pipeline::run_report(cfg);
      if (!quiet) {
        for (const auto& row : summary["accuracy"]) {
          std::printf("n=%d %-9s median accuracy %.3f (%zu categories)\n", row["n"].get<int>(),
                      row["feature_set"].get<std::string>().c_str(), row["median"].get<double>(),
                      row["count"].get<std::size_t>());
        }
      }
    }
  } catch (const tonemine::ParseError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const tonemine::ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
  return 0;
}
