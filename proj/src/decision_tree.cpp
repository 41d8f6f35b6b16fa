#include "tonemine/decision_tree.hpp"

#include <algorithm>
#include <stdexcept>

namespace tonemine {

void DecisionTree::fit(std::span<const std::vector<double>> rows, std::span<const int> labels) {
  if (rows.size() != labels.size() || rows.empty()) throw std::invalid_argument("decision tree: bad training set");
  nodes_.clear();
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> idx(rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  grow(rows, labels, idx, 0, idx.size(), classes);
}

int DecisionTree::grow(std::span<const std::vector<double>> rows, std::span<const int> labels,
                       std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int classes) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();

  std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
  for (std::size_t i = lo; i < hi; ++i) counts[static_cast<std::size_t>(labels[idx[i]])] += 1.0;
  const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  nodes_[id].label = majority;
  const double total = static_cast<double>(hi - lo);
  if (counts[static_cast<std::size_t>(majority)] == total || hi - lo < 2) return id;

  double parent_score = 0.0;
  for (double c : counts) parent_score += c * c;
  parent_score /= total;

  // Maximizes sum_c l_c^2 / n_l + sum_c r_c^2 / n_r, i.e. minimizes weighted Gini.
  double best_score = parent_score + 1e-12;
  int best_feature = -1;
  double best_threshold = 0.0;
  const std::size_t n_features = rows[idx[lo]].size();
  std::vector<std::pair<double, int>> column(hi - lo);
  std::vector<double> left(static_cast<std::size_t>(classes));
  for (std::size_t f = 0; f < n_features; ++f) {
    for (std::size_t i = lo; i < hi; ++i) column[i - lo] = {rows[idx[i]][f], labels[idx[i]]};
    std::sort(column.begin(), column.end());
    if (column.front().first == column.back().first) continue;
    std::fill(left.begin(), left.end(), 0.0);
    double sl = 0.0, sr = parent_score * total;
    for (std::size_t k = 1; k < column.size(); ++k) {
      const auto y = static_cast<std::size_t>(column[k - 1].second);
      const double cr = counts[y] - left[y];
      sl += 2.0 * left[y] + 1.0;
      sr -= 2.0 * cr - 1.0;
      left[y] += 1.0;
      if (column[k - 1].first == column[k].first) continue;
      const double nl = static_cast<double>(k);
      const double score = sl / nl + sr / (total - nl);
      if (score > best_score) {
        best_score = score;
        best_feature = static_cast<int>(f);
        best_threshold = 0.5 * (column[k - 1].first + column[k].first);
      }
    }
  }
  if (best_feature < 0) return id;

  const auto mid_it = std::stable_partition(
      idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(hi),
      [&](std::size_t r) { return rows[r][static_cast<std::size_t>(best_feature)] <= best_threshold; });
  const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
  nodes_[id].feature = best_feature;
  nodes_[id].threshold = best_threshold;
  const int l = grow(rows, labels, idx, lo, mid, classes);
  nodes_[id].left = l;
  const int r = grow(rows, labels, idx, mid, hi, classes);
  nodes_[id].right = r;
  return id;
}

int DecisionTree::predict(std::span<const double> row) const {
  if (nodes_.empty()) throw std::logic_error("decision tree not fitted");
  int cur = 0;
  while (nodes_[cur].feature >= 0) {
    const auto& nd = nodes_[cur];
    cur = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes_[cur].label;
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    const auto [node, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes_[node].feature >= 0) {
      stack.emplace_back(nodes_[node].left, d + 1);
      stack.emplace_back(nodes_[node].right, d + 1);
    }
  }
  return best;
}

}  // namespace tonemine
