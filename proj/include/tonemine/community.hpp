#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tonemine/graph.hpp"
#include "tonemine/preprocess.hpp"

// Louvain partitioning of a thresholded contour graph, outlier-community
// pruning, centroid shape types and their separability check.
namespace tonemine::community {

inline constexpr int kPruned = -1;
inline constexpr std::size_t kDefaultPruneThreshold = 10;
inline constexpr std::size_t kDefaultMaxTypes = 10;

struct Partition {
  std::vector<std::uint32_t> assignment;  // node -> community, dense from 0
  double modularity = 0.0;

  std::size_t community_count() const;
  std::vector<std::size_t> sizes() const;
};

/// Q = sum_c [ e_c / m - (d_c / 2m)^2 ]; 0 for an edgeless graph.
double modularity(const UndirectedGraph& g, std::span<const std::uint32_t> assignment);

/// Greedy modularity optimization: node moves in a seeded random order,
/// then aggregation, until a level moves no node. Several seeded runs are
/// made, each re-run from its own result while Q improves, and the best is
/// kept. `resolution` scales the null-model term during optimization; the
/// reported modularity is the plain (resolution 1) Q of the final assignment.
Partition louvain(const UndirectedGraph& g, double resolution, std::uint64_t seed);

struct PrunedPartition {
  std::vector<int> labels;                // node -> type id, or kPruned
  std::vector<std::size_t> member_counts;  // per surviving type
  std::size_t type_count() const { return member_counts.size(); }
};

/// Communities smaller than t are marked kPruned; survivors are renumbered
/// densely in their original order. Throws ValidationError when nothing survives.
PrunedPartition prune_small(const Partition& partition, std::size_t t = kDefaultPruneThreshold);

struct ResolutionTrial {
  double resolution = 0.0;
  std::size_t communities = 0;
  std::size_t surviving = 0;
  double modularity = 0.0;
};

struct TuneOptions {
  std::vector<double> resolutions{0.5, 0.75, 1.0, 1.5, 2.0};
  std::size_t prune_threshold = kDefaultPruneThreshold;
  std::size_t max_types = kDefaultMaxTypes;  // accepted iff 1 <= surviving < max_types
};

struct TuneResult {
  Partition partition;
  double resolution = 0.0;
  bool fallback = false;
  std::vector<ResolutionTrial> trials;
};

/// Sweeps the resolution grid and keeps the highest-modularity partition
/// whose surviving community count is in [1, max_types). Without such a
/// partition it falls back to the one with the fewest surviving
/// communities (at least one), else the fewest communities overall.
TuneResult tune_and_partition(const UndirectedGraph& g, std::uint64_t seed,
                              const TuneOptions& options = {});

struct ShapeType {
  int type_id = 0;
  std::vector<double> centroid;
  std::size_t member_count = 0;
  std::vector<double> dispersion;  // per-sample standard deviation
};

struct ShapeTypeSet {
  Category category;
  int n = 1;
  std::vector<ShapeType> types;
  std::map<std::uint64_t, int> labels;  // instance_id -> type id or kPruned
};

/// Node i of the graph is dataset.instances[i].
ShapeTypeSet shape_types(const preprocess::NgramDataset& dataset, const PrunedPartition& pruned);

nlohmann::json shape_types_json(const ShapeTypeSet& set);
ShapeTypeSet shape_types_from_json(const nlohmann::json& j);
/// CSV `instance_id,type_id`; pruned instances carry type_id -1.
void write_labels_csv(std::ostream& out, const ShapeTypeSet& set);
std::map<std::uint64_t, int> read_labels_csv(std::istream& in);

struct SeparabilityResult {
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

/// Mean stratified k-fold accuracy of an unpruned decision tree predicting
/// type labels from f0 vectors. Instances labelled kPruned are ignored.
SeparabilityResult evaluate_separability(std::span<const std::vector<double>> vectors,
                                         std::span<const int> labels, std::uint64_t seed,
                                         std::size_t folds = 5);
SeparabilityResult evaluate_separability(const preprocess::NgramDataset& dataset,
                                         const ShapeTypeSet& set, std::uint64_t seed,
                                         std::size_t folds = 5);

/// Hubert-Arabie adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace tonemine::community
