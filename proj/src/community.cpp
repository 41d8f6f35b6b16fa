#include "tonemine/community.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tonemine/decision_tree.hpp"
#include "tonemine/errors.hpp"
#include "tonemine/text_util.hpp"

namespace tonemine::community {

using nlohmann::json;

std::size_t Partition::community_count() const {
  if (assignment.empty()) return 0;
  return *std::max_element(assignment.begin(), assignment.end()) + 1;
}

std::vector<std::size_t> Partition::sizes() const {
  std::vector<std::size_t> out(community_count(), 0);
  for (auto c : assignment) ++out[c];
  return out;
}

namespace {

// Q with the null-model term scaled by `resolution`; 1 gives plain modularity.
double scaled_modularity(const UndirectedGraph& g, std::span<const std::uint32_t> assignment, double resolution) {
  const double m = static_cast<double>(g.edge_count());
  if (m == 0.0) return 0.0;
  if (assignment.size() != g.node_count()) throw std::invalid_argument("assignment size != node count");
  const std::size_t k = assignment.empty() ? 0 : *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<double> intra(k, 0.0), degree(k, 0.0);
  for (const auto& [u, v] : g.edges()) {
    if (assignment[u] == assignment[v]) intra[assignment[u]] += 1.0;
  }
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    degree[assignment[v]] += static_cast<double>(g.degree(static_cast<NodeId>(v)));
  }
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double frac = degree[c] / (2.0 * m);
    q += intra[c] / m - resolution * frac * frac;
  }
  return q;
}

}  // namespace

double modularity(const UndirectedGraph& g, std::span<const std::uint32_t> assignment) {
  return scaled_modularity(g, assignment, 1.0);
}

namespace {

// Weighted multigraph used across Louvain levels. `self` holds the total
// weight of edges folded inside each aggregated node.
struct LevelGraph {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;
  std::vector<double> self;
  std::vector<double> degree;  // sum of incident weights, self-loops counted twice
  double total = 0.0;          // 2m
};

LevelGraph from_graph(const UndirectedGraph& g) {
  LevelGraph lg;
  const std::size_t n = g.node_count();
  lg.adj.resize(n);
  lg.self.assign(n, 0.0);
  lg.degree.assign(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    for (NodeId u : g.neighbors(static_cast<NodeId>(v))) lg.adj[v].emplace_back(u, 1.0);
    lg.degree[v] = static_cast<double>(g.degree(static_cast<NodeId>(v)));
  }
  lg.total = 2.0 * static_cast<double>(g.edge_count());
  return lg;
}

// One level of local moving. Returns true if any node changed community.
bool move_nodes(const LevelGraph& lg, std::vector<std::uint32_t>& comm, double resolution,
                std::mt19937_64& rng) {
  const std::size_t n = lg.adj.size();
  std::vector<double> tot(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) tot[comm[v]] += lg.degree[v];

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> link(n, 0.0);
  std::vector<std::uint32_t> touched;
  bool any_move = false;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::uint32_t v : order) {
      const std::uint32_t home = comm[v];
      const double kv = lg.degree[v];
      touched.clear();
      for (const auto& [u, w] : lg.adj[v]) {
        if (u == v) continue;
        const auto c = comm[u];
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += w;
      }
      tot[home] -= kv;
      const double scale = resolution * kv / lg.total;
      std::uint32_t best = home;
      double best_gain = link[home] - scale * tot[home];
      for (auto c : touched) {
        const double gain = link[c] - scale * tot[c];
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[best] += kv;
      for (auto c : touched) link[c] = 0.0;
      link[home] = 0.0;
      if (best != home) {
        comm[v] = best;
        improved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

// Renumbers communities densely in order of first appearance.
std::size_t densify(std::vector<std::uint32_t>& comm) {
  std::vector<std::uint32_t> remap(comm.size(), UINT32_MAX);
  std::uint32_t next = 0;
  for (auto& c : comm) {
    if (remap[c] == UINT32_MAX) remap[c] = next++;
    c = remap[c];
  }
  return next;
}

LevelGraph aggregate(const LevelGraph& lg, const std::vector<std::uint32_t>& comm, std::size_t k) {
  LevelGraph out;
  out.adj.resize(k);
  out.self.assign(k, 0.0);
  out.degree.assign(k, 0.0);
  out.total = lg.total;
  std::vector<std::map<std::uint32_t, double>> acc(k);
  for (std::size_t v = 0; v < lg.adj.size(); ++v) {
    const auto cv = comm[v];
    out.self[cv] += lg.self[v];
    out.degree[cv] += lg.degree[v];
    for (const auto& [u, w] : lg.adj[v]) {
      const auto cu = comm[u];
      if (cu == cv) {
        out.self[cv] += 0.5 * w;  // each internal edge is seen from both ends
      } else {
        acc[cv][cu] += w;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    out.adj[c].assign(acc[c].begin(), acc[c].end());
  }
  return out;
}

// Multilevel local moving from a given level-0 partition. Nodes start in
// `start`, move greedily, then communities are aggregated and the coarse
// graph is processed the same way until a level changes nothing.
std::vector<std::uint32_t> multilevel(const UndirectedGraph& g, double resolution, std::mt19937_64& rng,
                                      std::vector<std::uint32_t> comm) {
  LevelGraph lg = from_graph(g);
  std::vector<std::uint32_t> membership(g.node_count());
  std::iota(membership.begin(), membership.end(), 0u);
  while (true) {
    const bool moved = move_nodes(lg, comm, resolution, rng);
    const std::size_t k = densify(comm);
    for (auto& m : membership) m = comm[m];
    if (k == lg.adj.size()) {
      if (!moved) break;
      continue;
    }
    lg = aggregate(lg, comm, k);
    comm.resize(k);
    std::iota(comm.begin(), comm.end(), 0u);
  }
  densify(membership);
  return membership;
}

// Independent shuffled runs; the best one wins. A single run gets stuck
// noticeably below the optimum on a few small graphs.
constexpr int kLouvainRestarts = 8;

}  // namespace

Partition louvain(const UndirectedGraph& g, double resolution, std::uint64_t seed) {
  const std::size_t n = g.node_count();
  Partition p;
  p.assignment.resize(n);
  std::iota(p.assignment.begin(), p.assignment.end(), 0u);
  if (n == 0 || g.edge_count() == 0) {
    p.modularity = modularity(g, p.assignment);
    return p;
  }
  std::mt19937_64 rng(seed);
  auto quality = [&](const std::vector<std::uint32_t>& a) { return scaled_modularity(g, a, resolution); };
  std::vector<std::uint32_t> best;
  double best_q = -std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < kLouvainRestarts; ++restart) {
    auto a = multilevel(g, resolution, rng, p.assignment);
    double q = quality(a);
    while (true) {
      auto next = multilevel(g, resolution, rng, a);
      const double nq = quality(next);
      if (nq <= q + 1e-12) break;
      a = std::move(next);
      q = nq;
    }
    if (q > best_q + 1e-12) {
      best = std::move(a);
      best_q = q;
    }
  }
  p.assignment = std::move(best);
  p.modularity = modularity(g, p.assignment);
  return p;
}

PrunedPartition prune_small(const Partition& partition, std::size_t t) {
  if (t < 1) throw ValidationError("prune threshold must be >= 1");
  const auto sizes = partition.sizes();
  std::vector<int> remap(sizes.size(), kPruned);
  PrunedPartition out;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] >= t) {
      remap[c] = static_cast<int>(out.member_counts.size());
      out.member_counts.push_back(sizes[c]);
    }
  }
  if (out.member_counts.empty()) throw ValidationError("no surviving shape types");
  out.labels.reserve(partition.assignment.size());
  for (auto c : partition.assignment) out.labels.push_back(remap[c]);
  return out;
}

namespace {

std::size_t surviving_count(const Partition& p, std::size_t t) {
  const auto sizes = p.sizes();
  return static_cast<std::size_t>(
      std::count_if(sizes.begin(), sizes.end(), [t](std::size_t s) { return s >= t; }));
}

}  // namespace

TuneResult tune_and_partition(const UndirectedGraph& g, std::uint64_t seed, const TuneOptions& options) {
  if (options.resolutions.empty()) throw ValidationError("empty resolution grid");
  std::vector<Partition> parts;
  TuneResult result;
  for (double r : options.resolutions) {
    parts.push_back(louvain(g, r, seed));
    const auto& p = parts.back();
    result.trials.push_back({r, p.community_count(), surviving_count(p, options.prune_threshold), p.modularity});
  }

  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto s = result.trials[i].surviving;
    if (s >= 1 && s < options.max_types && (!pick || parts[i].modularity > parts[*pick].modularity)) pick = i;
  }
  if (!pick) {
    result.fallback = true;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto s = result.trials[i].surviving;
      if (s >= 1 && (!pick || s < result.trials[*pick].surviving)) pick = i;
    }
  }
  if (!pick) {
    pick = 0;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      if (result.trials[i].communities < result.trials[*pick].communities) pick = i;
    }
  }
  result.resolution = options.resolutions[*pick];
  result.partition = std::move(parts[*pick]);
  return result;
}

ShapeTypeSet shape_types(const preprocess::NgramDataset& dataset, const PrunedPartition& pruned) {
  if (pruned.labels.size() != dataset.instances.size()) {
    throw std::invalid_argument("partition size != dataset size");
  }
  if (pruned.type_count() == 0) throw ValidationError("no surviving shape types");
  const std::size_t len = dataset.instances.front().f0_vector.size();
  ShapeTypeSet set;
  set.category = dataset.category;
  set.n = dataset.n;
  std::vector<std::vector<double>> sum(pruned.type_count(), std::vector<double>(len, 0.0));
  std::vector<std::vector<double>> sumsq = sum;
  std::vector<std::size_t> count(pruned.type_count(), 0);
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    const int label = pruned.labels[i];
    set.labels[dataset.instances[i].instance_id] = label;
    if (label == kPruned) continue;
    const auto k = static_cast<std::size_t>(label);
    ++count[k];
    const auto& v = dataset.instances[i].f0_vector;
    for (std::size_t j = 0; j < len; ++j) sum[k][j] += v[j];
  }
  for (std::size_t k = 0; k < count.size(); ++k) {
    for (auto& x : sum[k]) x /= static_cast<double>(count[k]);
  }
  // Second pass for the spread keeps it stable for tight clusters.
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    const int label = pruned.labels[i];
    if (label == kPruned) continue;
    const auto k = static_cast<std::size_t>(label);
    const auto& v = dataset.instances[i].f0_vector;
    for (std::size_t j = 0; j < len; ++j) sumsq[k][j] += (v[j] - sum[k][j]) * (v[j] - sum[k][j]);
  }
  for (std::size_t k = 0; k < count.size(); ++k) {
    ShapeType t;
    t.type_id = static_cast<int>(k);
    t.member_count = count[k];
    t.centroid = sum[k];
    t.dispersion.resize(len);
    for (std::size_t j = 0; j < len; ++j) t.dispersion[j] = std::sqrt(sumsq[k][j] / static_cast<double>(count[k]));
    set.types.push_back(std::move(t));
  }
  return set;
}

json shape_types_json(const ShapeTypeSet& set) {
  json types = json::array();
  for (const auto& t : set.types) {
    types.push_back({{"type_id", t.type_id},
                     {"member_count", t.member_count},
                     {"centroid", t.centroid},
                     {"dispersion", t.dispersion}});
  }
  return {{"category", category_name(set.category)}, {"n", set.n}, {"types", types}};
}

ShapeTypeSet shape_types_from_json(const json& j) {
  ShapeTypeSet set;
  set.category = parse_category(j.at("category").get<std::string>());
  set.n = j.at("n").get<int>();
  for (const auto& t : j.at("types")) {
    ShapeType st;
    st.type_id = t.at("type_id").get<int>();
    st.member_count = t.at("member_count").get<std::size_t>();
    st.centroid = t.at("centroid").get<std::vector<double>>();
    st.dispersion = t.at("dispersion").get<std::vector<double>>();
    set.types.push_back(std::move(st));
  }
  return set;
}

void write_labels_csv(std::ostream& out, const ShapeTypeSet& set) {
  out << "instance_id,type_id\n";
  for (const auto& [id, label] : set.labels) out << id << ',' << label << '\n';
}

std::map<std::uint64_t, int> read_labels_csv(std::istream& in) {
  std::map<std::uint64_t, int> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (trim(line) != "instance_id,type_id") throw ParseError("expected header instance_id,type_id", line_no);
      header = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 2) throw ParseError("expected 2 columns", line_no);
    out[parse_number<std::uint64_t>(cols[0], line_no)] = parse_number<int>(cols[1], line_no);
  }
  if (!header) throw ParseError("missing labels header");
  return out;
}

SeparabilityResult evaluate_separability(std::span<const std::vector<double>> vectors,
                                         std::span<const int> labels, std::uint64_t seed,
                                         std::size_t folds) {
  if (vectors.size() != labels.size()) throw std::invalid_argument("vectors/labels size mismatch");
  if (folds < 2) throw ValidationError("need at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kPruned) by_class[labels[i]].push_back(i);
  }
  if (by_class.size() < 2) throw ValidationError("separability needs at least 2 shape types");

  // Stratified folds: shuffle each class, deal members round-robin.
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(labels.size(), -1);
  std::map<int, int> dense;
  for (auto& [label, members] : by_class) {
    dense[label] = static_cast<int>(dense.size());
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < members.size(); ++k) fold_of[members[k]] = static_cast<int>(k % folds);
  }

  SeparabilityResult res;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::vector<double>> train_x;
    std::vector<int> train_y;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (fold_of[i] < 0) continue;
      if (static_cast<std::size_t>(fold_of[i]) == f) {
        test.push_back(i);
      } else {
        train_x.push_back(vectors[i]);
        train_y.push_back(dense[labels[i]]);
      }
    }
    if (test.empty() || train_x.empty()) continue;
    DecisionTree tree;
    tree.fit(train_x, train_y);
    std::size_t correct = 0;
    for (auto i : test) correct += tree.predict(vectors[i]) == dense[labels[i]];
    res.fold_accuracies.push_back(static_cast<double>(correct) / static_cast<double>(test.size()));
  }
  res.mean_accuracy = std::accumulate(res.fold_accuracies.begin(), res.fold_accuracies.end(), 0.0) /
                      static_cast<double>(res.fold_accuracies.size());
  return res;
}

SeparabilityResult evaluate_separability(const preprocess::NgramDataset& dataset, const ShapeTypeSet& set,
                                         std::uint64_t seed, std::size_t folds) {
  std::vector<int> labels;
  labels.reserve(dataset.instances.size());
  for (const auto& inst : dataset.instances) {
    const auto it = set.labels.find(inst.instance_id);
    labels.push_back(it == set.labels.end() ? kPruned : it->second);
  }
  const auto vectors = dataset.vectors();
  return evaluate_separability(vectors, labels, seed, folds);
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [_, v] : joint) index += c2(v);
  for (const auto& [_, v] : ra) sa += c2(v);
  for (const auto& [_, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace tonemine::community
