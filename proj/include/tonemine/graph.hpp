#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace tonemine {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Simple undirected graph: no self-loops, no multi-edges. Edges are stored
/// normalized (first < second) and sorted; adjacency is kept in CSR form.
class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  /// Self-loops are rejected, duplicates collapsed.
  UndirectedGraph(std::size_t n_nodes, std::vector<Edge> edges);

  std::size_t node_count() const { return n_nodes_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  std::vector<std::size_t> degree_sequence() const;
  bool has_edge(NodeId u, NodeId v) const;

  bool operator==(const UndirectedGraph& o) const {
    return n_nodes_ == o.n_nodes_ && edges_ == o.edges_;
  }

 private:
  std::size_t n_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;  // sorted per node
};

}  // namespace tonemine
