#include "tonemine/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "tonemine/contour_net.hpp"
#include "tonemine/errors.hpp"
#include "tonemine/text_util.hpp"

#ifndef TONEMINE_DATA_DIR
#define TONEMINE_DATA_DIR "data"
#endif

namespace tonemine::config {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

fs::path data_dir() {
  if (const char* env = std::getenv("TONEMINE_DATA_DIR")) return env;
  return TONEMINE_DATA_DIR;
}

std::uint64_t PipelineConfig::hash() const {
  std::string s = fmt::format("seed={};", seed);
  for (int n : ns) {
    s += fmt::format("n={};phi=", n);
    for (double p : phi.at(n)) s += fmt::format("{},", p);
  }
  s += fmt::format("min_cat={};prune={};replicates={};max_types={};res=", min_category_size, prune_threshold,
                   null_replicates, max_types);
  for (double r : resolutions) s += fmt::format("{},", r);
  s += fmt::format(";cost={};min_tag={};min_class={};sets=", svm_cost, min_tag_count, min_class_size);
  for (auto f : feature_sets) s += predict::to_string(f) + ",";
  return fnv1a(s);
}

std::string PipelineConfig::hash_hex() const { return fmt::format("{:016x}", hash()); }

std::string PipelineConfig::header_line() const {
  return fmt::format("# config_hash={},seed={}", hash_hex(), seed);
}

std::map<std::string, std::string> PipelineConfig::provenance() const {
  return {{"config_hash", hash_hex()}, {"seed", std::to_string(seed)}};
}

namespace {

void finish(PipelineConfig& c, const Overrides& o) {
  if (o.out) c.paths.out = *o.out;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.seed) c.seed = *o.seed;
  const fs::path corpus = c.paths.out / "corpus";
  if (c.paths.f0.empty()) c.paths.f0 = corpus / "f0.jsonl";
  if (c.paths.segmentation.empty()) c.paths.segmentation = corpus / "segmentation.tsv";
  if (c.paths.annotations.empty()) c.paths.annotations = corpus / "annotations.tsv";
  if (c.paths.phonemes.empty()) c.paths.phonemes = data_dir() / "phonemes.tsv";
  if (c.paths.pos_map.empty()) c.paths.pos_map = data_dir() / "pos_coarse.tsv";
  if (c.feature_sets.empty()) c.feature_sets = predict::all_feature_sets();
  if (c.ns.empty()) throw ValidationError("config: n must list at least one of 1, 2, 3");
  for (int n : c.ns) {
    if (n < 1 || n > 3) throw ValidationError(fmt::format("config: n = {} outside 1..3", n));
    if (!c.phi.count(n)) c.phi[n] = contour_net::default_thresholds(n);
    for (double p : c.phi[n]) {
      if (!(p > 0.0)) throw ValidationError("config: thresholds must be > 0");
    }
  }
  if (c.resolutions.empty()) throw ValidationError("config: empty resolution grid");
  if (!(c.svm_cost > 0.0)) throw ValidationError("config: svm_cost must be > 0");
  if (c.max_types < 2) throw ValidationError("config: max_types must be >= 2");
  if (c.null_replicates == 0) throw ValidationError("config: replicates must be >= 1");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

PipelineConfig default_config(const Overrides& overrides) {
  if (!overrides.seed) throw ValidationError("a seed is required (--seed or [run] seed)");
  PipelineConfig c;
  finish(c, overrides);
  return c;
}

PipelineConfig parse_config(std::istream& in, const fs::path& base_dir, const Overrides& overrides) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message(), e.line());
  }
  PipelineConfig c;
  try {
    const auto seed = tree.get_optional<std::uint64_t>("run.seed");
    if (!seed && !overrides.seed) throw ValidationError("config: [run] seed is required");
    if (seed) c.seed = *seed;
    if (auto v = tree.get_optional<std::string>("run.n")) c.ns = parse_number_list<int>(*v);
    c.jobs = tree.get<std::size_t>("run.jobs", c.jobs);

    if (auto v = tree.get_optional<std::string>("paths.out")) c.paths.out = resolve(base_dir, *v);
    for (auto [key, field] : {std::pair{"f0", &Paths::f0}, {"segmentation", &Paths::segmentation},
                              {"annotations", &Paths::annotations}, {"phonemes", &Paths::phonemes},
                              {"pos_map", &Paths::pos_map}}) {
      if (auto v = tree.get_optional<std::string>(std::string("paths.") + key)) c.paths.*field = resolve(base_dir, *v);
    }

    for (int n = 1; n <= 3; ++n) {
      if (auto v = tree.get_optional<std::string>(fmt::format("cluster.phi_{}", n))) {
        c.phi[n] = parse_number_list<double>(*v);
      }
    }
    c.min_category_size = tree.get<std::size_t>("cluster.min_category_size", c.min_category_size);
    c.prune_threshold = tree.get<std::size_t>("cluster.prune_t", c.prune_threshold);
    c.null_replicates = tree.get<std::size_t>("cluster.replicates", c.null_replicates);
    c.max_types = tree.get<std::size_t>("cluster.max_types", c.max_types);
    if (auto v = tree.get_optional<std::string>("cluster.resolutions")) c.resolutions = parse_number_list<double>(*v);

    c.svm_cost = tree.get<double>("predict.svm_cost", c.svm_cost);
    c.min_tag_count = tree.get<std::size_t>("predict.min_tag_count", c.min_tag_count);
    c.min_class_size = tree.get<std::size_t>("predict.min_class_size", c.min_class_size);
    if (auto v = tree.get_optional<std::string>("predict.feature_sets")) {
      for (const auto& item : split(*v, ',')) {
        if (!trim(item).empty()) c.feature_sets.push_back(predict::parse_feature_set(trim(item)));
      }
    }
  } catch (const pt::ptree_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  finish(c, overrides);
  return c;
}

PipelineConfig load_config(const fs::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  return parse_config(in, path.parent_path(), overrides);
}

}  // namespace tonemine::config
