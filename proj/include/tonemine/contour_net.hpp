#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tonemine/graph.hpp"

// Similarity network over the f0 vectors of one tone category, and selection
// of the distance threshold against degree-preserving null models.
namespace tonemine::contour_net {

/// Condensed upper-triangular table of pairwise Euclidean distances.
class DistanceTable {
 public:
  DistanceTable() = default;
  DistanceTable(std::size_t n_nodes, std::vector<double> condensed);

  std::size_t node_count() const { return n_; }
  /// Distance between distinct nodes i and j, in either order.
  double operator()(std::size_t i, std::size_t j) const { return d_[index(i, j)]; }
  std::span<const double> condensed() const { return d_; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const;

  std::size_t n_ = 0;
  std::vector<double> d_;
};

double euclidean(std::span<const double> a, std::span<const double> b);

/// Requires at least two vectors of equal length.
DistanceTable pairwise_distances(std::span<const std::vector<double>> vectors);

struct WeightedPair {
  NodeId u = 0;
  NodeId v = 0;
  double distance = 0.0;
};

/// Every pair within `cutoff`, sorted by (distance, u, v). Threshold graphs
/// for any phi <= cutoff are prefixes, so large categories never need the
/// full quadratic table.
class NearPairs {
 public:
  /// Tiled computation over row blocks of `block_rows` rows.
  static NearPairs from_vectors(std::span<const std::vector<double>> vectors, double cutoff,
                                std::size_t block_rows = 128);
  static NearPairs from_table(const DistanceTable& table, double cutoff);

  std::size_t node_count() const { return n_; }
  double cutoff() const { return cutoff_; }
  const std::vector<WeightedPair>& pairs() const { return pairs_; }

 private:
  std::size_t n_ = 0;
  double cutoff_ = 0.0;
  std::vector<WeightedPair> pairs_;
};

struct ContourGraph {
  UndirectedGraph graph;
  double threshold = 0.0;
};

/// Edge (u, v) iff distance(u, v) <= phi. Requires phi > 0.
ContourGraph threshold_graph(const DistanceTable& table, double phi);
/// Same, from precomputed near pairs; requires phi <= pairs.cutoff().
ContourGraph threshold_graph(const NearPairs& pairs, double phi);

/// Triangle count through every node.
std::vector<std::uint64_t> triangles_per_node(const UndirectedGraph& g);

/// Average local clustering coefficient; nodes of degree < 2 contribute 0.
double clustering_coefficient(const UndirectedGraph& g);

/// 2m / (k (k - 1)). Invariant under degree-preserving rewiring; reported
/// only as a diagnostic.
double graph_density(const UndirectedGraph& g);

/// `swaps` attempted double-edge swaps: (a,b),(c,d) -> (a,d),(c,b), skipped
/// when the result would contain a self-loop or a duplicate edge.
UndirectedGraph randomize_degree_preserving(const UndirectedGraph& g, std::size_t swaps,
                                            std::uint64_t seed);

struct ThresholdDiagnostic {
  double phi = 0.0;
  std::size_t edges = 0;
  double cc_observed = 0.0;
  double cc_random = 0.0;
  double delta = 0.0;
  double density = 0.0;
};

struct ThresholdSelection {
  double threshold = 0.0;
  std::vector<ThresholdDiagnostic> diagnostics;  // ascending phi
};

/// Candidate thresholds: {1.0, 1.5, ..., 4.5} for bigrams and trigrams,
/// {0.2, 0.4, 0.6, 0.8} for unigrams.
std::vector<double> default_thresholds(int n);

/// For every phi: observed graph G', randomized G_r with |E(G')| swap
/// attempts, delta = CC(G') - CC(G_r) (averaged over `replicates` null
/// models). Returns the phi with the largest delta among non-empty graphs;
/// ties go to the smaller phi. Every phi uses the same null-model seeds.
/// Throws ValidationError("no connective threshold") when all G' are empty.
ThresholdSelection select_threshold(const NearPairs& pairs, std::vector<double> candidates,
                                    std::uint64_t seed, std::size_t replicates = 1);
ThresholdSelection select_threshold(const DistanceTable& table, std::vector<double> candidates,
                                    std::uint64_t seed, std::size_t replicates = 1);

/// CSV `phi,edges,cc_observed,cc_random,delta`.
void write_diagnostics_csv(std::ostream& out, const ThresholdSelection& selection);

}  // namespace tonemine::contour_net
