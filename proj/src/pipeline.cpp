#include "tonemine/pipeline.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <tbb/parallel_for.h>

#include "tonemine/errors.hpp"
#include "tonemine/features.hpp"
#include "tonemine/ingest.hpp"
#include "tonemine/preprocess.hpp"
#include "tonemine/text_util.hpp"

namespace tonemine::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using config::PipelineConfig;

fs::path corpus_dir(const PipelineConfig& c) { return c.paths.out / "corpus"; }
fs::path cluster_dir(const PipelineConfig& c, int n) { return c.paths.out / "cluster" / fmt::format("n{}", n); }
fs::path category_dir(const PipelineConfig& c, int n, const Category& category) {
  return cluster_dir(c, n) / category_name(category);
}
fs::path predict_dir(const PipelineConfig& c) { return c.paths.out / "predict"; }
fs::path report_dir(const PipelineConfig& c) { return c.paths.out / "report"; }

namespace {

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  fn(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::ifstream open_input(const fs::path& path, const std::string& hint) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("missing {} ({})", hint, path.string()));
  return in;
}

json meta_block(const PipelineConfig& c) { return {{"config_hash", c.hash_hex()}, {"seed", c.seed}}; }

std::string tag(int n, const Category& cat, const char* stage) {
  return fmt::format("{}/n{}/{}", stage, n, category_name(cat));
}

}  // namespace

void write_synth_corpus(const fs::path& dir, const synth::SynthCorpus& corpus, const std::string& header_line) {
  const std::string meta_json = [&] {
    // "# config_hash=h,seed=s" -> {"meta":{"config_hash":"h","seed":"s"}}
    json m = json::object();
    for (const auto& kv : split(header_line.substr(2), ',')) {
      const auto eq = kv.find('=');
      if (eq != std::string::npos) m[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return json{{"meta", m}}.dump();
  }();
  write_file(dir / "f0.jsonl", [&](std::ostream& o) {
    o << meta_json << '\n';
    ingest::write_f0_tracks(o, corpus.tracks);
  });
  write_file(dir / "segmentation.tsv", [&](std::ostream& o) {
    o << header_line << '\n';
    ingest::write_segmentation(o, corpus.syllables);
  });
  write_file(dir / "annotations.tsv", [&](std::ostream& o) {
    o << header_line << '\n';
    ingest::write_annotations(o, corpus.tokens);
  });
  write_file(dir / "ground_truth.csv", [&](std::ostream& o) {
    o << header_line << '\n';
    synth::write_ground_truth(o, corpus.ground_truth);
  });
}

synth::SynthCorpus run_synth(const PipelineConfig& c, const std::optional<fs::path>& spec_path) {
  synth::SynthSpec spec;
  if (spec_path) {
    spec = synth::load_spec(*spec_path);
  } else {
    spec = synth::default_spec();
    spec.seed = c.seed;
  }
  auto corpus = synth::generate_corpus(spec);
  write_synth_corpus(corpus_dir(c), corpus, fmt::format("# config_hash={},seed={}", c.hash_hex(), spec.seed));
  write_file(corpus_dir(c) / "spec.ini", [&](std::ostream& o) { synth::write_spec(o, spec); });
  spdlog::info("synth: {} utterances, {} syllables -> {}", corpus.tracks.size(), corpus.syllables.size(),
               corpus_dir(c).string());
  return corpus;
}

namespace {

std::optional<CategoryClustering> cluster_category(const PipelineConfig& c, const preprocess::NgramDataset& ds,
                                                   std::string& skip_reason) {
  CategoryClustering out;
  out.n = ds.n;
  out.category = ds.category;
  out.instances = ds.instances.size();
  const auto vectors = ds.vectors();
  const auto& phis = c.thresholds(ds.n);
  const double cutoff = *std::max_element(phis.begin(), phis.end());
  const auto pairs = contour_net::NearPairs::from_vectors(vectors, cutoff);
  try {
    out.selection = contour_net::select_threshold(pairs, phis, derive_seed(c.seed, tag(ds.n, ds.category, "null")),
                                                  c.null_replicates);
  } catch (const ValidationError& e) {
    skip_reason = e.what();
    return std::nullopt;
  }
  const auto graph = contour_net::threshold_graph(pairs, out.selection.threshold);
  community::TuneOptions opts;
  opts.resolutions = c.resolutions;
  opts.prune_threshold = c.prune_threshold;
  opts.max_types = c.max_types;
  out.tune = community::tune_and_partition(graph.graph, derive_seed(c.seed, tag(ds.n, ds.category, "louvain")), opts);
  try {
    const auto pruned = community::prune_small(out.tune.partition, c.prune_threshold);
    out.types = community::shape_types(ds, pruned);
  } catch (const ValidationError& e) {
    skip_reason = e.what();
    return std::nullopt;
  }
  if (out.types.types.size() >= 2) {
    out.separability =
        community::evaluate_separability(ds, out.types, derive_seed(c.seed, tag(ds.n, ds.category, "separability")))
            .mean_accuracy;
  } else {
    out.separability = 1.0;
  }
  return out;
}

void write_category(const PipelineConfig& c, const CategoryClustering& cc) {
  const auto dir = category_dir(c, cc.n, cc.category);
  write_file(dir / "labels.csv", [&](std::ostream& o) {
    o << c.header_line() << '\n';
    community::write_labels_csv(o, cc.types);
  });
  write_file(dir / "thresholds.csv", [&](std::ostream& o) {
    o << c.header_line() << '\n';
    contour_net::write_diagnostics_csv(o, cc.selection);
  });
  write_file(dir / "shape_types.json", [&](std::ostream& o) {
    json j = community::shape_types_json(cc.types);
    j["meta"] = meta_block(c);
    j["threshold"] = cc.selection.threshold;
    j["resolution"] = cc.tune.resolution;
    j["fallback"] = cc.tune.fallback;
    o << j.dump(1) << '\n';
  });
}

}  // namespace

ClusterOutcome run_cluster(const PipelineConfig& c) {
  ingest::AssemblyReport report;
  auto corpus = ingest::load_corpus(c.paths.f0, c.paths.segmentation, c.paths.annotations, &report);
  if (corpus.empty()) throw ValidationError("empty corpus: no utterance has all three layers");
  spdlog::info("cluster: {} utterances ({} dropped)", corpus.size(), report.dropped);
  const auto clean = preprocess::clean_corpus(std::move(corpus));

  ClusterOutcome outcome;
  std::map<std::pair<int, std::size_t>, std::size_t> histogram;
  for (int n : c.ns) {
    auto datasets = preprocess::build_ngram_datasets(clean, n, c.min_category_size);
    fs::create_directories(cluster_dir(c, n));
    preprocess::save_datasets(cluster_dir(c, n) / "dataset.jsonl", datasets, n, c.provenance());
    std::vector<const preprocess::NgramDataset*> order;
    for (const auto& [_, ds] : datasets) order.push_back(&ds);

    std::vector<std::optional<CategoryClustering>> slots(order.size());
    std::vector<std::string> reasons(order.size());
    tbb::parallel_for(std::size_t{0}, order.size(),
                      [&](std::size_t i) { slots[i] = cluster_category(c, *order[i], reasons[i]); });

    write_file(cluster_dir(c, n) / "categories.csv", [&](std::ostream& o) {
      o << c.header_line() << '\n'
        << "category,instances,threshold,resolution,communities,types,pruned,fallback,separability\n";
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (!slots[i]) {
          outcome.skipped.push_back(fmt::format("n{}/{}: {}", n, category_name(order[i]->category), reasons[i]));
          spdlog::warn("cluster: skipping n={} category {}: {}", n, category_name(order[i]->category), reasons[i]);
          continue;
        }
        const auto& cc = *slots[i];
        write_category(c, cc);
        std::size_t pruned = 0;
        for (const auto& [_, l] : cc.types.labels) pruned += l == community::kPruned;
        o << fmt::format("{},{},{},{},{},{},{},{},{}\n", category_name(cc.category), cc.instances,
                         cc.selection.threshold, cc.tune.resolution, cc.tune.partition.community_count(),
                         cc.types.types.size(), pruned, cc.tune.fallback ? 1 : 0, cc.separability);
        ++histogram[{n, cc.types.types.size()}];
        outcome.categories.push_back(std::move(*slots[i]));
      }
    });
    outcome.datasets.push_back(std::move(datasets));
  }
  if (outcome.categories.empty()) {
    throw ValidationError(fmt::format("no category could be clustered (min_category_size = {})", c.min_category_size));
  }
  write_file(c.paths.out / "cluster" / "type_count_histogram.csv", [&](std::ostream& o) {
    o << c.header_line() << '\n' << "n,type_count,categories\n";
    for (const auto& [key, count] : histogram) o << fmt::format("{},{},{}\n", key.first, key.second, count);
  });
  spdlog::info("cluster: {} categories clustered, {} skipped", outcome.categories.size(), outcome.skipped.size());
  return outcome;
}

namespace {

std::vector<Category> clustered_categories(const PipelineConfig& c, int n) {
  auto in = open_input(cluster_dir(c, n) / "categories.csv", "cluster outputs; run `cluster` first");
  std::vector<Category> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    out.push_back(parse_category(split(line, ',').at(0)));
  }
  return out;
}

}  // namespace

std::vector<predict::CategoryResult> run_predict(const PipelineConfig& c) {
  const auto corpus = ingest::load_corpus(c.paths.f0, c.paths.segmentation, c.paths.annotations);
  if (corpus.empty()) throw ValidationError("empty corpus");
  const auto phonemes = features::PhonemeTable::load(c.paths.phonemes);
  const auto coarse = features::PosCoarseMap::load(c.paths.pos_map);

  struct Task {
    const features::FeatureSchema* schema;
    const std::vector<features::FeatureVector>* vectors;
    const std::vector<int>* labels;
    Category category;
    predict::FeatureSet fs;
  };
  std::vector<features::FeatureSchema> schemas;
  schemas.reserve(c.ns.size());
  std::vector<std::vector<features::FeatureVector>> all_vectors;
  std::vector<std::vector<int>> all_labels;
  std::vector<std::tuple<std::size_t, std::size_t, Category>> category_refs;  // schema, data slot, category

  for (int n : c.ns) {
    const auto categories = clustered_categories(c, n);
    const auto datasets = preprocess::load_datasets(cluster_dir(c, n) / "dataset.jsonl");
    schemas.push_back(features::build_schema(corpus, n, coarse, phonemes, c.min_tag_count));
    const auto& schema = schemas.back();
    write_file(predict_dir(c) / fmt::format("schema_n{}.json", n), [&](std::ostream& o) {
      json j = features::schema_json(schema);
      j["meta"] = meta_block(c);
      o << j.dump(1) << '\n';
    });
    for (const auto& cat : categories) {
      const auto ds = datasets.find(cat);
      if (ds == datasets.end()) throw ValidationError("dataset lacks clustered category " + category_name(cat));
      auto in = open_input(category_dir(c, n, cat) / "labels.csv", "labels file");
      const auto label_map = community::read_labels_csv(in);
      std::vector<features::FeatureVector> vectors;
      std::vector<int> labels;
      for (const auto& inst : ds->second.instances) {
        const auto l = label_map.find(inst.instance_id);
        if (l == label_map.end()) {
          throw ValidationError(fmt::format("labels for {} miss instance {}", category_name(cat), inst.instance_id));
        }
        vectors.push_back(features::extract_features(inst, corpus, schema, phonemes));
        labels.push_back(l->second);
      }
      all_vectors.push_back(std::move(vectors));
      all_labels.push_back(std::move(labels));
      category_refs.emplace_back(schemas.size() - 1, all_vectors.size() - 1, cat);
    }
  }

  std::vector<Task> tasks;
  for (const auto& [schema_i, slot, cat] : category_refs) {
    for (auto fs : c.feature_sets) tasks.push_back({&schemas[schema_i], &all_vectors[slot], &all_labels[slot], cat, fs});
  }
  std::vector<std::optional<predict::CategoryResult>> results(tasks.size());
  tbb::parallel_for(std::size_t{0}, tasks.size(), [&](std::size_t i) {
    const auto& t = tasks[i];
    predict::ExperimentConfig ec;
    ec.feature_set = t.fs;
    ec.seed = predict::experiment_seed(c.seed, t.category, t.fs);
    ec.svm_cost = c.svm_cost;
    ec.min_class_size = c.min_class_size;
    results[i] = predict::run_experiment(t.category, *t.vectors, *t.labels, *t.schema, ec);
  });

  std::vector<predict::CategoryResult> out;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i]) {
      out.push_back(std::move(*results[i]));
    } else {
      ++skipped;
    }
  }
  if (skipped) spdlog::warn("predict: {} experiments skipped by class balancing", skipped);

  const auto report = predict::aggregate_report(out);
  write_file(predict_dir(c) / "results.csv", [&](std::ostream& o) {
    o << c.header_line() << '\n';
    predict::write_results_csv(o, out);
  });
  write_file(predict_dir(c) / "importance.csv", [&](std::ostream& o) {
    o << c.header_line() << '\n';
    predict::write_importance_csv(o, out);
  });
  write_file(predict_dir(c) / "deltas.csv", [&](std::ostream& o) {
    o << c.header_line() << '\n';
    predict::write_deltas_csv(o, report);
  });
  spdlog::info("predict: {} experiments", out.size());
  return out;
}

namespace {

json five_json(const predict::FiveNumber& f) {
  return {{"min", f.min}, {"q1", f.q1}, {"median", f.median}, {"q3", f.q3}, {"max", f.max}, {"count", f.count}};
}

}  // namespace

json run_report(const PipelineConfig& c) {
  auto rin = open_input(predict_dir(c) / "results.csv", "predict results; run `predict` first");
  auto results = predict::read_results_csv(rin);
  if (results.empty()) throw ValidationError("predict results are empty");
  if (std::ifstream iin(predict_dir(c) / "importance.csv"); iin) predict::read_importance_csv(iin, results);
  const auto report = predict::aggregate_report(results);

  json j;
  j["meta"] = meta_block(c);
  j["accuracy"] = json::array();
  for (const auto& [key, f] : report.accuracy) {
    json row = five_json(f);
    row["n"] = key.first;
    row["feature_set"] = predict::to_string(key.second);
    j["accuracy"].push_back(row);
  }
  j["feature_weights"] = json::array();
  for (const auto& [key, f] : report.feature_weights) {
    json row = five_json(f);
    row["n"] = key.first;
    row["feature"] = key.second;
    j["feature_weights"].push_back(row);
  }
  j["domain_weights"] = json::array();
  for (const auto& [key, f] : report.domain_weights) {
    json row = five_json(f);
    row["n"] = key.first;
    row["domain"] = key.second;
    j["domain_weights"].push_back(row);
  }
  j["deltas"] = json::array();
  std::map<int, std::pair<std::size_t, std::size_t>> positive;
  for (const auto& d : report.deltas) {
    j["deltas"].push_back({{"n", d.n}, {"category", category_name(d.category)}, {"delta_nosyn_dfp", d.delta}});
    auto& [pos, total] = positive[d.n];
    pos += d.delta > 0.0;
    ++total;
  }
  j["delta_positive_fraction"] = json::object();
  for (const auto& [n, pt] : positive) {
    j["delta_positive_fraction"][std::to_string(n)] = static_cast<double>(pt.first) / static_cast<double>(pt.second);
  }
  write_file(report_dir(c) / "summary.json", [&](std::ostream& o) { o << j.dump(1) << '\n'; });
  return j;
}

}  // namespace tonemine::pipeline
