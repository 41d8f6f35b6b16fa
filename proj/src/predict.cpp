#include "tonemine/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include <fmt/format.h>

#include "tonemine/community.hpp"
#include "tonemine/errors.hpp"
#include "tonemine/text_util.hpp"

namespace tonemine::predict {

using features::FeatureSchema;
using features::FeatureVector;
using features::Family;

std::string to_string(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::Data: return "data";
    case FeatureSet::Dfp: return "dfp";
    case FeatureSet::NoSyn: return "no_syn";
    case FeatureSet::NoNtone: return "no_Ntone";
    case FeatureSet::NoPitch: return "no_pitch";
    case FeatureSet::Random: return "random";
    case FeatureSet::Mle: return "mle";
  }
  return "data";
}

FeatureSet parse_feature_set(const std::string& s) {
  for (auto fs : all_feature_sets()) {
    if (to_string(fs) == s) return fs;
  }
  if (s == "MLE") return FeatureSet::Mle;
  throw ValidationError("unknown feature set '" + s + "'");
}

const std::vector<FeatureSet>& all_feature_sets() {
  static const std::vector<FeatureSet> sets{FeatureSet::Data,    FeatureSet::Dfp,    FeatureSet::NoSyn,
                                            FeatureSet::NoNtone, FeatureSet::NoPitch, FeatureSet::Random,
                                            FeatureSet::Mle};
  return sets;
}

std::vector<bool> feature_mask(const FeatureSchema& schema, FeatureSet fs) {
  std::vector<bool> mask(schema.raw_count(), true);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const Family f = schema.features[i].family;
    const bool pitch = f == Family::StartPitch || f == Family::EndPitch;
    switch (fs) {
      case FeatureSet::Data:
      case FeatureSet::Random: break;
      case FeatureSet::Dfp: mask[i] = pitch; break;
      case FeatureSet::NoSyn: mask[i] = f != Family::Pos && f != Family::Dep; break;
      case FeatureSet::NoNtone: mask[i] = f != Family::PrevTone && f != Family::NextTone; break;
      case FeatureSet::NoPitch: mask[i] = !pitch; break;
      case FeatureSet::Mle: mask[i] = false; break;
    }
  }
  return mask;
}

std::optional<std::vector<std::size_t>> balance_classes(std::span<const int> labels, std::uint64_t seed,
                                                        std::size_t min_class_size) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  if (by_class.size() < 2) return std::nullopt;
  std::size_t minority = labels.size();
  for (const auto& [_, members] : by_class) minority = std::min(minority, members.size());
  if (minority < min_class_size) return std::nullopt;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [_, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

Split stratified_split(std::span<const std::size_t> indices, std::span<const int> labels, double ratio,
                       std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must be in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (auto i : indices) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  Split s;
  for (auto& [_, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(members.size())));
    if (members.size() >= 2) n_train = std::min(n_train, members.size() - 1);
    s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<double> LinearModel::scores(std::span<const double> row) const {
  std::vector<double> out(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    double s = bias[c];
    for (std::size_t j = 0; j < row.size(); ++j) s += weights[c][j] * row[j];
    out[c] = s;
  }
  return out;
}

int LinearModel::predict(std::span<const double> row) const {
  const auto s = scores(row);
  return classes[static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin())];
}

namespace {

// Dual coordinate descent for one binary hinge-loss SVM with labels y in {-1,+1}.
// Returns weights with the bias appended.
std::vector<double> solve_binary(std::span<const std::vector<double>> rows, const std::vector<double>& y,
                                 double cost, double tol, std::size_t max_epochs, std::uint64_t seed) {
  const std::size_t n = rows.size();
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  std::vector<double> w(d + 1, 0.0);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;  // bias column
    for (double x : rows[i]) s += x * x;
    qii[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double pg_max = -INFINITY, pg_min = INFINITY;
    for (auto i : order) {
      const auto& x = rows[i];
      double wx = w[d];
      for (std::size_t j = 0; j < d; ++j) wx += w[j] * x[j];
      const double g = y[i] * wx - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[i] == cost) {
        pg = std::max(g, 0.0);
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) > 1e-12) {
        const double old = alpha[i];
        alpha[i] = std::clamp(old - g / qii[i], 0.0, cost);
        const double step = (alpha[i] - old) * y[i];
        for (std::size_t j = 0; j < d; ++j) w[j] += step * x[j];
        w[d] += step;
      }
    }
    if (pg_max - pg_min < tol) break;
  }
  return w;
}

}  // namespace

LinearModel train_linear_svm(std::span<const std::vector<double>> rows, std::span<const int> labels,
                             const ExperimentConfig& config) {
  if (rows.size() != labels.size() || rows.empty()) throw ValidationError("SVM: empty or mismatched training set");
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw ValidationError("SVM: ragged feature rows");
    for (double x : r) {
      if (!std::isfinite(x)) throw ValidationError("SVM: non-finite feature value");
    }
  }
  if (!(config.svm_cost > 0.0)) throw ValidationError("SVM cost must be positive");
  LinearModel model;
  const std::set<int> distinct(labels.begin(), labels.end());
  model.classes.assign(distinct.begin(), distinct.end());
  const std::size_t d = rows.front().size();
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    std::vector<double> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == model.classes[c] ? 1.0 : -1.0;
    auto w = solve_binary(rows, y, config.svm_cost, config.tolerance, config.max_epochs,
                          derive_seed(config.seed, fmt::format("ovr/{}", model.classes[c])));
    model.bias.push_back(w[d]);
    w.pop_back();
    model.weights.push_back(std::move(w));
  }
  return model;
}

double accuracy(const LinearModel& model, std::span<const std::vector<double>> rows, std::span<const int> labels) {
  if (rows.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) correct += model.predict(rows[i]) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

std::vector<int> permute_labels(std::span<const int> labels, std::uint64_t seed) {
  std::vector<int> out(labels.begin(), labels.end());
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

Importance feature_importance(const LinearModel& model, const FeatureSchema& schema,
                              std::span<const std::string> column_names, std::span<const std::size_t> column_feature) {
  Importance imp;
  imp.columns.assign(column_names.begin(), column_names.end());
  imp.per_column.assign(column_names.size(), 0.0);
  for (const auto& w : model.weights) {
    for (std::size_t j = 0; j < w.size(); ++j) imp.per_column[j] += std::abs(w[j]);
  }
  const double total = std::accumulate(imp.per_column.begin(), imp.per_column.end(), 0.0);
  for (auto& v : imp.per_column) {
    v = total > 0.0 ? v / total : 1.0 / static_cast<double>(imp.per_column.size());
  }
  for (std::size_t j = 0; j < imp.per_column.size(); ++j) {
    const auto& spec = schema.features[column_feature[j]];
    imp.per_feature[spec.name] += imp.per_column[j];
    imp.per_domain[features::to_string(spec.domain)] += imp.per_column[j];
  }
  return imp;
}

std::uint64_t experiment_seed(std::uint64_t global_seed, const Category& category, FeatureSet fs) {
  return derive_seed(global_seed, category_name(category) + "/" + to_string(fs));
}

std::optional<CategoryResult> run_experiment(const Category& category, std::span<const FeatureVector> vectors,
                                             std::span<const int> labels, const FeatureSchema& schema,
                                             const ExperimentConfig& config) {
  if (vectors.size() != labels.size()) throw std::invalid_argument("vectors/labels size mismatch");
  std::vector<std::size_t> rows;
  std::vector<int> y;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == community::kPruned) continue;
    rows.push_back(i);
    y.push_back(labels[i]);
  }
  if (config.feature_set == FeatureSet::Random) y = permute_labels(y, derive_seed(config.seed, "permute"));

  const auto kept = balance_classes(y, derive_seed(config.seed, "balance"), config.min_class_size);
  if (!kept) return std::nullopt;

  CategoryResult res;
  res.category = category;
  res.n = schema.n;
  res.feature_set = config.feature_set;
  res.class_count = std::set<int>(y.begin(), y.end()).size();
  if (config.feature_set == FeatureSet::Mle) {
    res.test_accuracy = 1.0 / static_cast<double>(res.class_count);
    return res;
  }

  const Split split = stratified_split(*kept, y, config.split_ratio, derive_seed(config.seed, "split"));
  std::vector<FeatureVector> train_v, test_v;
  std::vector<int> train_y, test_y;
  for (auto i : split.train) {
    train_v.push_back(vectors[rows[i]]);
    train_y.push_back(y[i]);
  }
  for (auto i : split.test) {
    test_v.push_back(vectors[rows[i]]);
    test_y.push_back(y[i]);
  }
  const auto encoder = features::Encoder::fit(schema, train_v, feature_mask(schema, config.feature_set));
  const auto train_m = encoder.transform(train_v);
  const auto test_m = encoder.transform(test_v);
  const auto model = train_linear_svm(train_m.rows, train_y, config);
  res.test_accuracy = accuracy(model, test_m.rows, test_y);
  res.train_size = train_y.size();
  res.test_size = test_y.size();
  res.importance = feature_importance(model, schema, train_m.column_names, train_m.column_feature);
  return res;
}

FiveNumber five_number(std::vector<double> values) {
  FiveNumber f;
  f.count = values.size();
  if (values.empty()) return f;
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  f.min = values.front();
  f.q1 = q(0.25);
  f.median = q(0.5);
  f.q3 = q(0.75);
  f.max = values.back();
  return f;
}

namespace {

features::Domain domain_of_feature(const std::string& name) {
  using features::Domain;
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  if (starts("pos_tag") || starts("dep_func")) return Domain::Syntactic;
  if (starts("tok_bound")) return Domain::Morphological;
  if (name == "is_entity" || name == "is_singleton") return Domain::Semantic;
  if (starts("is_")) return Domain::Phonological;
  return Domain::Other;
}

}  // namespace

Report aggregate_report(std::span<const CategoryResult> results) {
  Report r;
  std::map<std::pair<int, FeatureSet>, std::vector<double>> acc;
  std::map<std::pair<int, std::string>, std::vector<double>> weights, domains;
  std::map<std::pair<int, Category>, std::map<FeatureSet, double>> by_cat;
  for (const auto& res : results) {
    acc[{res.n, res.feature_set}].push_back(res.test_accuracy);
    by_cat[{res.n, res.category}][res.feature_set] = res.test_accuracy;
    if (res.feature_set == FeatureSet::Data && res.importance) {
      std::map<std::string, double> dom;
      for (const auto& [feat, v] : res.importance->per_feature) {
        weights[{res.n, feat}].push_back(v);
        dom[features::to_string(domain_of_feature(feat))] += v;
      }
      for (const auto& [d, v] : dom) domains[{res.n, d}].push_back(v);
    }
  }
  for (auto& [k, v] : acc) r.accuracy[k] = five_number(std::move(v));
  for (auto& [k, v] : weights) r.feature_weights[k] = five_number(std::move(v));
  for (auto& [k, v] : domains) r.domain_weights[k] = five_number(std::move(v));
  for (const auto& [key, m] : by_cat) {
    const auto a = m.find(FeatureSet::NoSyn);
    const auto b = m.find(FeatureSet::Dfp);
    if (a != m.end() && b != m.end()) r.deltas.push_back({key.first, key.second, a->second - b->second});
  }
  return r;
}

void write_results_csv(std::ostream& out, std::span<const CategoryResult> results) {
  out << "n,category,feature_set,d,test_accuracy\n";
  for (const auto& r : results) {
    out << fmt::format("{},{},{},{},{}\n", r.n, category_name(r.category), to_string(r.feature_set), r.class_count,
                       r.test_accuracy);
  }
}

void write_importance_csv(std::ostream& out, std::span<const CategoryResult> results) {
  out << "n,category,feature,importance\n";
  for (const auto& r : results) {
    if (r.feature_set != FeatureSet::Data || !r.importance) continue;
    for (const auto& [feat, v] : r.importance->per_feature) {
      out << fmt::format("{},{},{},{}\n", r.n, category_name(r.category), feat, v);
    }
  }
}

void write_deltas_csv(std::ostream& out, const Report& report) {
  out << "n,category,delta_nosyn_dfp\n";
  for (const auto& d : report.deltas) out << fmt::format("{},{},{}\n", d.n, category_name(d.category), d.delta);
}

namespace {

template <typename RowFn>
void read_csv(std::istream& in, const std::string& header, std::size_t columns, RowFn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (trim(line) != header) throw ParseError("expected header " + header, line_no);
      seen_header = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != columns) throw ParseError(fmt::format("expected {} columns", columns), line_no);
    fn(cols, line_no);
  }
  if (!seen_header) throw ParseError("missing header " + header);
}

}  // namespace

std::vector<CategoryResult> read_results_csv(std::istream& in) {
  std::vector<CategoryResult> out;
  read_csv(in, "n,category,feature_set,d,test_accuracy", 5, [&](const auto& cols, std::size_t line_no) {
    CategoryResult r;
    r.n = parse_number<int>(cols[0], line_no);
    r.category = parse_category(cols[1]);
    r.feature_set = parse_feature_set(cols[2]);
    r.class_count = parse_number<std::size_t>(cols[3], line_no);
    r.test_accuracy = parse_number<double>(cols[4], line_no);
    out.push_back(std::move(r));
  });
  return out;
}

void read_importance_csv(std::istream& in, std::vector<CategoryResult>& results) {
  read_csv(in, "n,category,feature,importance", 4, [&](const auto& cols, std::size_t line_no) {
    const int n = parse_number<int>(cols[0], line_no);
    const Category cat = parse_category(cols[1]);
    for (auto& r : results) {
      if (r.n == n && r.category == cat && r.feature_set == FeatureSet::Data) {
        if (!r.importance) r.importance.emplace();
        r.importance->per_feature[cols[2]] = parse_number<double>(cols[3], line_no);
        return;
      }
    }
  });
}

}  // namespace tonemine::predict
