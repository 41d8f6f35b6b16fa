#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "tonemine/community.hpp"
#include "tonemine/errors.hpp"
#include "tonemine/predict.hpp"
#include "tonemine/text_util.hpp"

using namespace tonemine;
using namespace tonemine::predict;
using features::FeatureVector;

namespace {

features::FeatureSchema toy_schema() {
  return features::build_schema(1, features::collapse_tagset({{"NN", 50}, {"VV", 50}}),
                                features::collapse_tagset({{"nsubj", 50}, {"root", 50}}));
}

// All-default feature vector with the given numeric values.
FeatureVector toy_vector(const features::FeatureSchema& s, std::uint64_t id, double start, double end,
                         double position, const std::string& pos = "NN") {
  FeatureVector v;
  v.instance_id = id;
  for (const auto& f : s.features) {
    switch (f.kind) {
      case features::FeatureKind::Categorical: v.values.emplace_back(f.levels.front()); break;
      case features::FeatureKind::Boolean: v.values.emplace_back(false); break;
      case features::FeatureKind::Numeric: v.values.emplace_back(0.0); break;
    }
  }
  v.values[s.index_of("start_pitch")] = start;
  v.values[s.index_of("end_pitch")] = end;
  v.values[s.index_of("sent_position")] = position;
  v.values[s.index_of("pos_tag_1")] = pos;
  return v;
}

// `per_class` instances of `classes` labels; start_pitch separates the classes
// when `informative`, everything else is noise.
struct ToyData {
  std::vector<FeatureVector> vectors;
  std::vector<int> labels;
};

ToyData toy_data(const features::FeatureSchema& s, int classes, std::size_t per_class, bool informative,
                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  ToyData d;
  for (int c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const double start = informative ? 3.0 * c + 0.3 * g(rng) : g(rng);
      d.vectors.push_back(toy_vector(s, d.vectors.size(), start, g(rng), std::abs(g(rng)) / 4.0,
                                     rng() % 2 ? "NN" : "VV"));
      d.labels.push_back(c);
    }
  }
  return d;
}

ExperimentConfig config_for(FeatureSet fs, std::uint64_t seed = 7) {
  ExperimentConfig c;
  c.feature_set = fs;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("feature set names and masks") {
  for (auto fs : all_feature_sets()) CHECK(parse_feature_set(to_string(fs)) == fs);
  CHECK_THROWS_AS(parse_feature_set("everything"), ValidationError);

  const auto s = toy_schema();
  const auto dfp = feature_mask(s, FeatureSet::Dfp);
  CHECK(std::count(dfp.begin(), dfp.end(), true) == 2);
  CHECK(dfp[s.index_of("start_pitch")]);
  const auto nosyn = feature_mask(s, FeatureSet::NoSyn);
  CHECK_FALSE(nosyn[s.index_of("pos_tag_1")]);
  CHECK_FALSE(nosyn[s.index_of("dep_func_1")]);
  CHECK(nosyn[s.index_of("tok_bound_1")]);
  const auto notone = feature_mask(s, FeatureSet::NoNtone);
  CHECK_FALSE(notone[s.index_of("prev_tone")]);
  CHECK_FALSE(notone[s.index_of("next_tone")]);
  const auto nopitch = feature_mask(s, FeatureSet::NoPitch);
  CHECK(std::count(nopitch.begin(), nopitch.end(), false) == 2);
  const auto random = feature_mask(s, FeatureSet::Random);
  CHECK(std::count(random.begin(), random.end(), true) == 17);
}

TEST_CASE("balance_classes") {
  std::vector<int> labels(140, 0);
  std::fill(labels.begin() + 100, labels.end(), 1);
  const auto kept = balance_classes(labels, 1);
  REQUIRE(kept);
  CHECK(kept->size() == 80);
  CHECK(std::count_if(kept->begin(), kept->end(), [&](std::size_t i) { return labels[i] == 0; }) == 40);
  CHECK(std::is_sorted(kept->begin(), kept->end()));

  std::vector<int> even(100, 0);
  std::fill(even.begin() + 50, even.end(), 1);
  CHECK(balance_classes(even, 1)->size() == 100);

  std::vector<int> sparse(110, 0);
  std::fill(sparse.begin() + 100, sparse.end(), 1);
  CHECK_FALSE(balance_classes(sparse, 1).has_value());
  CHECK_FALSE(balance_classes(std::vector<int>(50, 3), 1).has_value());
}

TEST_CASE("property: the split is stratified and disjoint") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(40 + rng() % 300);
    for (auto& l : labels) l = static_cast<int>(rng() % 5);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (rng() % 4) idx.push_back(i);
    }
    const auto split = stratified_split(idx, labels, 0.9, rng());
    std::vector<std::size_t> inter;
    std::set_intersection(split.train.begin(), split.train.end(), split.test.begin(), split.test.end(),
                          std::back_inserter(inter));
    REQUIRE(inter.empty());
    REQUIRE(split.train.size() + split.test.size() == idx.size());
    std::set<int> test_classes, all_classes;
    for (auto i : split.test) test_classes.insert(labels[i]);
    for (auto i : idx) all_classes.insert(labels[i]);
    for (int c : all_classes) {
      const auto total = std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return labels[i] == c; });
      if (total >= 2) REQUIRE(test_classes.count(c) == 1);
    }
  }
}

TEST_CASE("svm: separable blobs are fit perfectly") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    const int c = i % 2;
    rows.push_back({(c ? 4.0 : -4.0) + g(rng), (c ? 4.0 : -4.0) + g(rng)});
    labels.push_back(c);
  }
  const auto model = train_linear_svm(rows, labels, config_for(FeatureSet::Data));
  CHECK(accuracy(model, rows, labels) == 1.0);
  CHECK(model.weights.size() == 2);
  CHECK(model.weights[0].size() == 2);

  rows[3][1] = std::nan("");
  CHECK_THROWS_AS(train_linear_svm(rows, labels, config_for(FeatureSet::Data)), ValidationError);
}

TEST_CASE("svm: a duplicated column splits the weight") {
  // Symmetric data keeps the regularized bias at zero, so in the hard-margin
  // limit the duplicated pair must sum to the single-column weight.
  std::vector<std::vector<double>> one, two;
  std::vector<int> labels;
  for (double x : {-3.0, -2.0, -1.0, 1.0, 2.0, 3.0}) {
    one.push_back({x});
    two.push_back({x, x});
    labels.push_back(x > 0 ? 1 : 0);
  }
  auto cfg = config_for(FeatureSet::Data);
  cfg.svm_cost = 1000.0;
  cfg.tolerance = 1e-8;
  cfg.max_epochs = 100000;
  const auto m1 = train_linear_svm(one, labels, cfg);
  const auto m2 = train_linear_svm(two, labels, cfg);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(m2.weights[c][0] + m2.weights[c][1] == doctest::Approx(m1.weights[c][0]).epsilon(1e-3));
    CHECK(m2.weights[c][0] == doctest::Approx(m2.weights[c][1]).epsilon(1e-3));
  }
  CHECK(std::abs(m1.weights[1][0]) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("svm is deterministic for a fixed seed") {
  const auto s = toy_schema();
  const auto d = toy_data(s, 3, 60, true, 2);
  const auto m = features::encode(d.vectors, s);
  const auto a = train_linear_svm(m.rows, d.labels, config_for(FeatureSet::Data, 5));
  const auto b = train_linear_svm(m.rows, d.labels, config_for(FeatureSet::Data, 5));
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
}

TEST_CASE("feature importance examples") {
  const auto s = toy_schema();
  const std::vector<std::string> cols{"start_pitch", "end_pitch"};
  const std::vector<std::size_t> feats{s.index_of("start_pitch"), s.index_of("end_pitch")};
  LinearModel single{{0, 1}, {{2.0, 0.0}, {-3.0, 0.0}}, {0.0, 0.0}};
  const auto a = feature_importance(single, s, cols, feats);
  CHECK(a.per_column == std::vector<double>{1.0, 0.0});
  CHECK(a.per_feature.at("start_pitch") == 1.0);

  LinearModel equal{{0, 1}, {{1.0, -1.0}, {0.5, 0.5}}, {0.0, 0.0}};
  const auto b = feature_importance(equal, s, cols, feats);
  CHECK(b.per_column[0] == doctest::Approx(0.5));
  CHECK(b.per_column[1] == doctest::Approx(0.5));
  CHECK(b.per_domain.at("other") == doctest::Approx(1.0));
}

TEST_CASE("experiments: data beats mle, random sits at chance") {
  const auto s = toy_schema();
  const auto d = toy_data(s, 4, 250, true, 11);
  const auto data = run_experiment({1}, d.vectors, d.labels, s, config_for(FeatureSet::Data));
  const auto mle = run_experiment({1}, d.vectors, d.labels, s, config_for(FeatureSet::Mle));
  REQUIRE(data);
  REQUIRE(mle);
  CHECK(mle->test_accuracy == 0.25);
  CHECK(mle->class_count == 4);
  CHECK_FALSE(mle->importance.has_value());
  CHECK(data->test_accuracy >= mle->test_accuracy + 0.15);
  CHECK(data->test_size == 100);
  CHECK(data->train_size == 900);

  // start_pitch drives the labels, so it must rank first.
  const auto& imp = data->importance->per_feature;
  const auto top = std::max_element(imp.begin(), imp.end(), [](auto& x, auto& y) { return x.second < y.second; });
  CHECK(top->first == "start_pitch");
  double total = 0.0;
  for (const auto& [_, v] : imp) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total == doctest::Approx(1.0));

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto random = run_experiment({1}, d.vectors, d.labels, s, config_for(FeatureSet::Random, seed));
    REQUIRE(random);
    CHECK(random->class_count == 4);
    CHECK(std::abs(random->test_accuracy - 0.25) <= 0.1);
  }
}

TEST_CASE("labels independent of features give chance accuracy") {
  const auto s = toy_schema();
  const auto d = toy_data(s, 4, 500, false, 12);
  const auto r = run_experiment({2}, d.vectors, d.labels, s, config_for(FeatureSet::Data));
  REQUIRE(r);
  CHECK(std::abs(r->test_accuracy - 0.25) <= 0.1);
}

TEST_CASE("property: random equals the data pipeline on permuted labels") {
  const auto s = toy_schema();
  auto d = toy_data(s, 3, 80, true, 13);
  d.labels[5] = community::kPruned;
  d.labels[100] = community::kPruned;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto random = run_experiment({1}, d.vectors, d.labels, s, config_for(FeatureSet::Random, seed));
    std::vector<int> kept;
    for (int l : d.labels) {
      if (l != community::kPruned) kept.push_back(l);
    }
    const auto permuted = permute_labels(kept, derive_seed(seed, "permute"));
    std::vector<int> relabeled = d.labels;
    std::size_t k = 0;
    for (auto& l : relabeled) {
      if (l != community::kPruned) l = permuted[k++];
    }
    const auto data = run_experiment({1}, d.vectors, relabeled, s, config_for(FeatureSet::Data, seed));
    REQUIRE(random);
    REQUIRE(data);
    CHECK(random->test_accuracy == data->test_accuracy);
    CHECK(random->class_count == data->class_count);
  }
}

TEST_CASE("experiments skip sparse categories and are deterministic") {
  const auto s = toy_schema();
  const auto d = toy_data(s, 2, 15, true, 14);
  CHECK_FALSE(run_experiment({1}, d.vectors, d.labels, s, config_for(FeatureSet::Data)).has_value());

  const auto big = toy_data(s, 3, 60, true, 15);
  const auto a = run_experiment({1}, big.vectors, big.labels, s, config_for(FeatureSet::NoPitch, 3));
  const auto b = run_experiment({1}, big.vectors, big.labels, s, config_for(FeatureSet::NoPitch, 3));
  CHECK(a->test_accuracy == b->test_accuracy);
  CHECK(a->importance->per_column == b->importance->per_column);
  CHECK(experiment_seed(1, {1, 2}, FeatureSet::Dfp) == experiment_seed(1, {1, 2}, FeatureSet::Dfp));
  CHECK(experiment_seed(1, {1, 2}, FeatureSet::Dfp) != experiment_seed(1, {2, 1}, FeatureSet::Dfp));
}

TEST_CASE("five-number summaries and the report") {
  const auto f = five_number({4.0, 1.0, 3.0, 2.0, 5.0});
  CHECK(f.min == 1.0);
  CHECK(f.q1 == 2.0);
  CHECK(f.median == 3.0);
  CHECK(f.q3 == 4.0);
  CHECK(f.max == 5.0);
  CHECK(five_number({0.7}).median == 0.7);
  CHECK(five_number({1.0, 2.0}).median == 1.5);

  std::vector<CategoryResult> results;
  results.push_back({{1, 2}, 2, FeatureSet::NoSyn, 0.8, 3, 90, 10, std::nullopt});
  results.push_back({{1, 2}, 2, FeatureSet::Dfp, 0.5, 3, 90, 10, std::nullopt});
  results.push_back({{1, 2}, 2, FeatureSet::Mle, 1.0 / 3.0, 3, 0, 0, std::nullopt});
  const auto report = aggregate_report(results);
  CHECK(report.accuracy.at({2, FeatureSet::NoSyn}).count == 1);
  REQUIRE(report.deltas.size() == 1);
  CHECK(report.deltas[0].delta == doctest::Approx(0.3));

  std::stringstream csv;
  write_results_csv(csv, results);
  const auto back = read_results_csv(csv);
  REQUIRE(back.size() == 3);
  CHECK(back[2].test_accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(back[0].category == Category{1, 2});

  std::ostringstream deltas;
  write_deltas_csv(deltas, report);
  CHECK(deltas.str().find("n,category,delta_nosyn_dfp") != std::string::npos);
}
