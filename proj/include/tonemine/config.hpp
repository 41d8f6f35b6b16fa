#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tonemine/predict.hpp"

namespace tonemine::config {

struct Paths {
  std::filesystem::path out = "out";
  std::filesystem::path f0;           // default <out>/corpus/f0.jsonl
  std::filesystem::path segmentation;  // default <out>/corpus/segmentation.tsv
  std::filesystem::path annotations;   // default <out>/corpus/annotations.tsv
  std::filesystem::path phonemes;      // default <data>/phonemes.tsv
  std::filesystem::path pos_map;       // default <data>/pos_coarse.tsv
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::vector<int> ns{1};
  std::size_t jobs = 0;  // 0 = all hardware threads
  Paths paths;

  std::map<int, std::vector<double>> phi;  // per n; defaults to contour_net::default_thresholds
  std::size_t min_category_size = 100;
  std::size_t prune_threshold = 10;
  std::vector<double> resolutions{0.5, 0.75, 1.0, 1.5, 2.0};
  std::size_t null_replicates = 1;
  std::size_t max_types = 10;

  double svm_cost = 1.0;
  std::vector<predict::FeatureSet> feature_sets;
  std::size_t min_tag_count = 5;
  std::size_t min_class_size = 20;

  const std::vector<double>& thresholds(int n) const { return phi.at(n); }
  /// Hash of every setting that influences results (paths and jobs excluded).
  std::uint64_t hash() const;
  std::string hash_hex() const;
  /// `# config_hash=...,seed=...` line for CSV/TSV outputs (no newline).
  std::string header_line() const;
  std::map<std::string, std::string> provenance() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> jobs;
};

/// INI sections [run] (seed, n, jobs), [paths], [cluster], [predict].
/// Relative paths resolve against `base_dir`. The seed is mandatory: either
/// in [run] or as an override; otherwise ValidationError.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, const Overrides& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});
/// Config without a file: every default, seed from the overrides (still mandatory).
PipelineConfig default_config(const Overrides& overrides);

/// Directory of the bundled phoneme and POS tables.
std::filesystem::path data_dir();

}  // namespace tonemine::config
