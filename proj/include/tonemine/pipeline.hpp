#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tonemine/community.hpp"
#include "tonemine/config.hpp"
#include "tonemine/contour_net.hpp"
#include "tonemine/predict.hpp"
#include "tonemine/synth.hpp"

// End-to-end stages behind the CLI subcommands. Every stage reads and
// writes files under config.paths.out (layout in README.md).
namespace tonemine::pipeline {

std::filesystem::path corpus_dir(const config::PipelineConfig& c);
std::filesystem::path cluster_dir(const config::PipelineConfig& c, int n);
std::filesystem::path category_dir(const config::PipelineConfig& c, int n, const Category& category);
std::filesystem::path predict_dir(const config::PipelineConfig& c);
std::filesystem::path report_dir(const config::PipelineConfig& c);

/// Writes the corpus into corpus_dir(). Without a spec file the default
/// spec is used with the config seed.
synth::SynthCorpus run_synth(const config::PipelineConfig& c, const std::optional<std::filesystem::path>& spec_path);
void write_synth_corpus(const std::filesystem::path& dir, const synth::SynthCorpus& corpus,
                        const std::string& header_line);

struct CategoryClustering {
  int n = 1;
  Category category;
  std::size_t instances = 0;
  contour_net::ThresholdSelection selection;
  community::TuneResult tune;
  community::ShapeTypeSet types;
  double separability = 0.0;
};

struct ClusterOutcome {
  std::vector<preprocess::DatasetMap> datasets;  // parallel to config.ns
  std::vector<CategoryClustering> categories;
  std::vector<std::string> skipped;  // "n/category: reason"
};

/// ingest -> preprocess -> threshold search -> Louvain -> pruning for every
/// n and category. Throws ValidationError for an empty corpus or when no
/// category reaches min_category_size.
ClusterOutcome run_cluster(const config::PipelineConfig& c);

/// features -> predict for every clustered category and feature set.
std::vector<predict::CategoryResult> run_predict(const config::PipelineConfig& c);

/// Summary of the predict outputs; also written to report/summary.json.
nlohmann::json run_report(const config::PipelineConfig& c);

}  // namespace tonemine::pipeline
