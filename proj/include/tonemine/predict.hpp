#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tonemine/features.hpp"

// Shape-type prediction from linguistic features: balancing, linear SVM,
// feature-set ablations, baselines and feature importance.
namespace tonemine::predict {

enum class FeatureSet { Data, Dfp, NoSyn, NoNtone, NoPitch, Random, Mle };

std::string to_string(FeatureSet fs);
FeatureSet parse_feature_set(const std::string& s);
const std::vector<FeatureSet>& all_feature_sets();

/// Raw features kept by a feature set (Random keeps everything, Mle nothing).
std::vector<bool> feature_mask(const features::FeatureSchema& schema, FeatureSet fs);

inline constexpr std::size_t kMinClassSize = 20;

struct ExperimentConfig {
  FeatureSet feature_set = FeatureSet::Data;
  double split_ratio = 0.9;
  std::uint64_t seed = 0;
  double svm_cost = 1.0;
  double tolerance = 1e-4;
  std::size_t max_epochs = 1000;
  std::size_t min_class_size = kMinClassSize;
};

/// Indices kept after downsampling every class to the minority size, in
/// ascending order; nullopt (category skipped) when fewer than two classes
/// or the minority class is smaller than `min_class_size`.
std::optional<std::vector<std::size_t>> balance_classes(std::span<const int> labels, std::uint64_t seed,
                                                        std::size_t min_class_size = kMinClassSize);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class shuffle; round(ratio * size) of each class goes to train, at
/// least one member of each class to test.
Split stratified_split(std::span<const std::size_t> indices, std::span<const int> labels, double ratio,
                       std::uint64_t seed);

struct LinearModel {
  std::vector<int> classes;
  std::vector<std::vector<double>> weights;  // per class, one entry per encoded column
  std::vector<double> bias;

  std::vector<double> scores(std::span<const double> row) const;
  int predict(std::span<const double> row) const;
};

/// One-vs-rest L2-regularized hinge-loss SVMs solved by dual coordinate
/// descent; the bias is an extra constant column. Throws ValidationError on
/// non-finite inputs.
LinearModel train_linear_svm(std::span<const std::vector<double>> rows, std::span<const int> labels,
                             const ExperimentConfig& config);

double accuracy(const LinearModel& model, std::span<const std::vector<double>> rows, std::span<const int> labels);

/// Label permutation used by the `random` feature set.
std::vector<int> permute_labels(std::span<const int> labels, std::uint64_t seed);

struct Importance {
  std::vector<std::string> columns;
  std::vector<double> per_column;           // sums to 1
  std::map<std::string, double> per_feature;  // one-hot columns folded into their feature
  std::map<std::string, double> per_domain;
};

/// |w| summed over classes, normalized to sum 1, then rolled up by raw
/// feature and by linguistic domain.
Importance feature_importance(const LinearModel& model, const features::FeatureSchema& schema,
                              std::span<const std::string> column_names,
                              std::span<const std::size_t> column_feature);

struct CategoryResult {
  Category category;
  int n = 1;
  FeatureSet feature_set = FeatureSet::Data;
  double test_accuracy = 0.0;
  std::size_t class_count = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::optional<Importance> importance;  // absent for mle
};

/// Runs one (category, feature set) experiment. Instances whose label is
/// community::kPruned are ignored. nullopt when balancing skips the category.
std::optional<CategoryResult> run_experiment(const Category& category,
                                             std::span<const features::FeatureVector> vectors,
                                             std::span<const int> labels, const features::FeatureSchema& schema,
                                             const ExperimentConfig& config);

/// Seed of one experiment, independent of scheduling order.
std::uint64_t experiment_seed(std::uint64_t global_seed, const Category& category, FeatureSet fs);

struct FiveNumber {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  std::size_t count = 0;
};

/// Quartiles by linear interpolation between order statistics.
FiveNumber five_number(std::vector<double> values);

struct Report {
  std::map<std::pair<int, FeatureSet>, FiveNumber> accuracy;
  std::map<std::pair<int, std::string>, FiveNumber> feature_weights;  // (n, feature)
  std::map<std::pair<int, std::string>, FiveNumber> domain_weights;   // (n, domain)
  struct Delta {
    int n;
    Category category;
    double delta;  // acc(no_syn) - acc(dfp)
  };
  std::vector<Delta> deltas;
};

Report aggregate_report(std::span<const CategoryResult> results);

void write_results_csv(std::ostream& out, std::span<const CategoryResult> results);
void write_importance_csv(std::ostream& out, std::span<const CategoryResult> results);
void write_deltas_csv(std::ostream& out, const Report& report);
std::vector<CategoryResult> read_results_csv(std::istream& in);
/// Rows of `n,category,feature,importance`, attached to results with matching (n, category, data).
void read_importance_csv(std::istream& in, std::vector<CategoryResult>& results);

}  // namespace tonemine::predict
