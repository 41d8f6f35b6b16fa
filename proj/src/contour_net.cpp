#include "tonemine/contour_net.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include <fmt/format.h>
#include <tbb/parallel_for.h>

#include "tonemine/errors.hpp"
#include "tonemine/text_util.hpp"

namespace tonemine::contour_net {

DistanceTable::DistanceTable(std::size_t n_nodes, std::vector<double> condensed)
    : n_(n_nodes), d_(std::move(condensed)) {
  if (d_.size() != n_ * (n_ - 1) / 2) throw std::invalid_argument("condensed size != n(n-1)/2");
}

std::size_t DistanceTable::index(std::size_t i, std::size_t j) const {
  if (i == j || i >= n_ || j >= n_) throw std::out_of_range("distance index");
  if (i > j) std::swap(i, j);
  // Row i holds pairs (i, i+1..n-1).
  return i * n_ - i * (i + 1) / 2 + (j - i - 1);
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

void check_vectors(std::span<const std::vector<double>> vectors) {
  if (vectors.size() < 2) throw ValidationError("pairwise distances need at least 2 vectors");
  for (const auto& v : vectors) {
    if (v.size() != vectors.front().size()) throw ValidationError("f0 vectors differ in length");
  }
}

}  // namespace

DistanceTable pairwise_distances(std::span<const std::vector<double>> vectors) {
  check_vectors(vectors);
  const std::size_t n = vectors.size();
  std::vector<double> d(n * (n - 1) / 2);
  tbb::parallel_for(std::size_t{0}, n - 1, [&](std::size_t i) {
    std::size_t base = i * n - i * (i + 1) / 2;
    for (std::size_t j = i + 1; j < n; ++j) d[base + (j - i - 1)] = euclidean(vectors[i], vectors[j]);
  });
  return DistanceTable(n, std::move(d));
}

namespace {

bool pair_less(const WeightedPair& a, const WeightedPair& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.u != b.u) return a.u < b.u;
  return a.v < b.v;
}

}  // namespace

NearPairs NearPairs::from_vectors(std::span<const std::vector<double>> vectors, double cutoff,
                                  std::size_t block_rows) {
  check_vectors(vectors);
  NearPairs out;
  out.n_ = vectors.size();
  out.cutoff_ = cutoff;
  const std::size_t n = vectors.size();
  const std::size_t blocks = (n + block_rows - 1) / block_rows;
  const double cutoff2 = cutoff * cutoff;
  std::vector<std::vector<WeightedPair>> per_block(blocks);
  tbb::parallel_for(std::size_t{0}, blocks, [&](std::size_t b) {
    const std::size_t lo = b * block_rows;
    const std::size_t hi = std::min(n, lo + block_rows);
    auto& local = per_block[b];
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& vi = vectors[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto& vj = vectors[j];
        double s = 0.0;
        for (std::size_t k = 0; k < vi.size(); ++k) {
          const double d = vi[k] - vj[k];
          s += d * d;
        }
        if (s <= cutoff2) {
          local.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), std::sqrt(s)});
        }
      }
    }
  });
  for (auto& blk : per_block) out.pairs_.insert(out.pairs_.end(), blk.begin(), blk.end());
  std::sort(out.pairs_.begin(), out.pairs_.end(), pair_less);
  return out;
}

NearPairs NearPairs::from_table(const DistanceTable& table, double cutoff) {
  NearPairs out;
  out.n_ = table.node_count();
  out.cutoff_ = cutoff;
  for (std::size_t i = 0; i < out.n_; ++i) {
    for (std::size_t j = i + 1; j < out.n_; ++j) {
      const double d = table(i, j);
      if (d <= cutoff) out.pairs_.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), d});
    }
  }
  std::sort(out.pairs_.begin(), out.pairs_.end(), pair_less);
  return out;
}

ContourGraph threshold_graph(const DistanceTable& table, double phi) {
  if (!(phi > 0.0)) throw ValidationError("threshold must be positive");
  std::vector<Edge> edges;
  const std::size_t n = table.node_count();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (table(i, j) <= phi) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }
  }
  return {UndirectedGraph(n, std::move(edges)), phi};
}

ContourGraph threshold_graph(const NearPairs& pairs, double phi) {
  if (!(phi > 0.0)) throw ValidationError("threshold must be positive");
  if (phi > pairs.cutoff()) throw std::invalid_argument("threshold above near-pair cutoff");
  const auto& ps = pairs.pairs();
  const auto end = std::partition_point(ps.begin(), ps.end(),
                                        [phi](const WeightedPair& p) { return p.distance <= phi; });
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(end - ps.begin()));
  for (auto it = ps.begin(); it != end; ++it) edges.emplace_back(it->u, it->v);
  return {UndirectedGraph(pairs.node_count(), std::move(edges)), phi};
}

std::vector<std::uint64_t> triangles_per_node(const UndirectedGraph& g) {
  const std::size_t n = g.node_count();
  // Orient every edge from lower to higher (degree, id) rank.
  auto rank_less = [&](NodeId a, NodeId b) {
    const auto da = g.degree(a), db = g.degree(b);
    return da != db ? da < db : a < b;
  };
  // Forward lists in CSR form: one allocation instead of one per node.
  std::vector<std::size_t> start(n + 1, 0);
  for (const auto& [u, v] : g.edges()) ++start[(rank_less(u, v) ? u : v) + 1];
  for (std::size_t v = 0; v < n; ++v) start[v + 1] += start[v];
  std::vector<NodeId> forward(start.back());
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (const auto& [u, v] : g.edges()) {
      if (rank_less(u, v)) {
        forward[fill[u]++] = v;
      } else {
        forward[fill[v]++] = u;
      }
    }
  }
  auto out = [&](std::size_t v) {
    return std::span<const NodeId>(forward.data() + start[v], forward.data() + start[v + 1]);
  };
  std::vector<std::uint64_t> tri(n, 0);
  std::vector<char> mark(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    for (NodeId u : out(v)) mark[u] = 1;
    for (NodeId u : out(v)) {
      for (NodeId w : out(u)) {
        if (mark[w]) {
          ++tri[v];
          ++tri[u];
          ++tri[w];
        }
      }
    }
    for (NodeId u : out(v)) mark[u] = 0;
  }
  return tri;
}

double clustering_coefficient(const UndirectedGraph& g) {
  const std::size_t n = g.node_count();
  if (n == 0) return 0.0;
  const auto tri = triangles_per_node(g);
  double sum = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const double d = static_cast<double>(g.degree(static_cast<NodeId>(v)));
    if (d < 2) continue;
    sum += 2.0 * static_cast<double>(tri[v]) / (d * (d - 1.0));
  }
  return sum / static_cast<double>(n);
}

double graph_density(const UndirectedGraph& g) {
  const double k = static_cast<double>(g.node_count());
  if (k < 2) return 0.0;
  return 2.0 * static_cast<double>(g.edge_count()) / (k * (k - 1.0));
}

UndirectedGraph randomize_degree_preserving(const UndirectedGraph& g, std::size_t swaps,
                                            std::uint64_t seed) {
  std::vector<Edge> edges = g.edges();
  const std::size_t m = edges.size();
  if (m < 2) return g;
  auto key = [](NodeId a, NodeId b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  std::unordered_set<std::uint64_t> present;
  present.reserve(m * 2);
  for (const auto& [u, v] : edges) present.insert(key(u, v));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, m - 1);
  std::uniform_int_distribution<std::size_t> second(0, m - 2);
  std::bernoulli_distribution flip(0.5);
  for (std::size_t s = 0; s < swaps; ++s) {
    const std::size_t i = first(rng);
    std::size_t j = second(rng);
    if (j >= i) ++j;
    auto [a, b] = edges[i];
    auto [c, d] = edges[j];
    if (flip(rng)) std::swap(c, d);
    if (a == d || c == b) continue;
    if (present.count(key(a, d)) || present.count(key(c, b))) continue;
    present.erase(key(a, b));
    present.erase(key(c, d));
    present.insert(key(a, d));
    present.insert(key(c, b));
    edges[i] = {a, d};
    edges[j] = {c, b};
  }
  return UndirectedGraph(g.node_count(), std::move(edges));
}

std::vector<double> default_thresholds(int n) {
  if (n == 1) return {0.2, 0.4, 0.6, 0.8};
  if (n == 2 || n == 3) return {1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5};
  throw ValidationError(fmt::format("no default thresholds for n = {}", n));
}

ThresholdSelection select_threshold(const NearPairs& pairs, std::vector<double> candidates,
                                    std::uint64_t seed, std::size_t replicates) {
  if (candidates.empty()) throw ValidationError("empty threshold candidate set");
  if (replicates == 0) replicates = 1;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  ThresholdSelection sel;
  sel.diagnostics.resize(candidates.size());
  tbb::parallel_for(std::size_t{0}, candidates.size(), [&](std::size_t k) {
    const double phi = candidates[k];
    const auto observed = threshold_graph(pairs, phi).graph;
    ThresholdDiagnostic diag;
    diag.phi = phi;
    diag.edges = observed.edge_count();
    diag.density = graph_density(observed);
    diag.cc_observed = clustering_coefficient(observed);
    double cc_random = 0.0;
    for (std::size_t r = 0; r < replicates; ++r) {
      const auto randomized =
          randomize_degree_preserving(observed, observed.edge_count(), derive_seed(seed, std::to_string(r)));
      cc_random += clustering_coefficient(randomized);
    }
    diag.cc_random = cc_random / static_cast<double>(replicates);
    diag.delta = diag.cc_observed - diag.cc_random;
    sel.diagnostics[k] = diag;
  });

  const ThresholdDiagnostic* best = nullptr;
  for (const auto& d : sel.diagnostics) {
    if (d.edges == 0) continue;
    if (!best || d.delta > best->delta) best = &d;
  }
  if (!best) throw ValidationError("no connective threshold");
  sel.threshold = best->phi;
  return sel;
}

ThresholdSelection select_threshold(const DistanceTable& table, std::vector<double> candidates,
                                    std::uint64_t seed, std::size_t replicates) {
  if (candidates.empty()) throw ValidationError("empty threshold candidate set");
  const double cutoff = *std::max_element(candidates.begin(), candidates.end());
  return select_threshold(NearPairs::from_table(table, cutoff), std::move(candidates), seed, replicates);
}

void write_diagnostics_csv(std::ostream& out, const ThresholdSelection& selection) {
  out << "phi,edges,cc_observed,cc_random,delta\n";
  for (const auto& d : selection.diagnostics) {
    out << fmt::format("{},{},{:.10f},{:.10f},{:.10f}\n", d.phi, d.edges, d.cc_observed, d.cc_random, d.delta);
  }
}

}  // namespace tonemine::contour_net
