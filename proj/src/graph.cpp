#include "tonemine/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace tonemine {

UndirectedGraph::UndirectedGraph(std::size_t n_nodes, std::vector<Edge> edges)
    : n_nodes_(n_nodes), edges_(std::move(edges)) {
  for (auto& e : edges_) {
    if (e.first == e.second) throw std::invalid_argument("self-loop in edge list");
    if (e.first >= n_nodes_ || e.second >= n_nodes_) throw std::out_of_range("edge endpoint out of range");
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  offsets_.assign(n_nodes_ + 1, 0);
  for (const auto& [u, v] : edges_) {
    ++offsets_[u + 1];
    ++offsets_[v + 1];
  }
  for (std::size_t i = 0; i < n_nodes_; ++i) offsets_[i + 1] += offsets_[i];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [u, v] : edges_) {
    adjacency_[fill[u]++] = v;
    adjacency_[fill[v]++] = u;
  }
  for (std::size_t v = 0; v < n_nodes_; ++v) {
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
  }
}

std::vector<std::size_t> UndirectedGraph::degree_sequence() const {
  std::vector<std::size_t> out(n_nodes_);
  for (std::size_t v = 0; v < n_nodes_; ++v) out[v] = degree(static_cast<NodeId>(v));
  return out;
}

bool UndirectedGraph::has_edge(NodeId u, NodeId v) const {
  if (u >= n_nodes_ || v >= n_nodes_) return false;
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

}  // namespace tonemine
