#pragma once

#include <span>
#include <vector>

namespace tonemine {

/// CART classifier with Gini impurity, grown until leaves are pure or no
/// split separates their samples. Labels are dense non-negative ints.
class DecisionTree {
 public:
  void fit(std::span<const std::vector<double>> rows, std::span<const int> labels);
  int predict(std::span<const double> row) const;
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t depth() const;

 private:
  struct Node {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
  };

  int grow(std::span<const std::vector<double>> rows, std::span<const int> labels,
           std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int classes);

  std::vector<Node> nodes_;
};

}  // namespace tonemine
