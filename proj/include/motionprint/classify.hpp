#pragma once

// Device identification: labeled datasets, the per-class randomized split,
// bagged CART trees / k-NN / Gaussian naive Bayes, and precision / recall /
// F-score reporting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "features.hpp"

namespace motionprint {

// ---- dataset ---------------------------------------------------------------

struct LabeledDataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;               // class index per row
  std::vector<std::string> class_names;  // index -> device id
  std::vector<std::string> session_ids;

  std::size_t size() const { return rows.size(); }
  std::size_t num_features() const { return feature_names.size(); }
  std::size_t num_classes() const { return class_names.size(); }

  /// Column subset, in the given order.
  LabeledDataset select_features(std::span<const std::size_t> columns) const {
    LabeledDataset out{{}, {}, labels, class_names, session_ids};
    for (auto c : columns) out.feature_names.push_back(feature_names.at(c));
    out.rows.reserve(rows.size());
    for (const auto& r : rows) {
      std::vector<double> sub;
      sub.reserve(columns.size());
      for (auto c : columns) sub.push_back(r.at(c));
      out.rows.push_back(std::move(sub));
    }
    return out;
  }

  LabeledDataset select_features(std::span<const std::string> names) const {
    std::vector<std::size_t> cols;
    for (const auto& n : names) {
      auto it = std::find(feature_names.begin(), feature_names.end(), n);
      if (it == feature_names.end()) throw ValidationError("unknown feature '" + n + "'");
      cols.push_back(static_cast<std::size_t>(it - feature_names.begin()));
    }
    return select_features(std::span<const std::size_t>(cols));
  }

  /// Row subset; classes are re-indexed densely in first-seen order of the
  /// original class index.
  LabeledDataset select_rows(std::span<const std::size_t> idx) const {
    LabeledDataset out{feature_names, {}, {}, {}, {}};
    std::map<int, int> remap;
    std::vector<int> present;
    for (auto i : idx) present.push_back(labels.at(i));
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    for (int c : present) {
      remap[c] = static_cast<int>(out.class_names.size());
      out.class_names.push_back(class_names[static_cast<std::size_t>(c)]);
    }
    for (auto i : idx) {
      out.rows.push_back(rows[i]);
      out.labels.push_back(remap[labels[i]]);
      out.session_ids.push_back(i < session_ids.size() ? session_ids[i] : std::string{});
    }
    return out;
  }

  std::vector<std::vector<std::size_t>> rows_by_class() const {
    std::vector<std::vector<std::size_t>> by(num_classes());
    for (std::size_t i = 0; i < rows.size(); ++i) by[static_cast<std::size_t>(labels[i])].push_back(i);
    return by;
  }
};

/// Builds a dataset from feature vectors; class ids follow sorted device ids.
/// Column names come from the first vector's ids unless given.
inline LabeledDataset make_dataset(std::span<const FeatureVector> vectors, std::vector<std::string> names = {}) {
  LabeledDataset ds;
  ds.feature_names = std::move(names);
  if (vectors.empty()) return ds;
  if (ds.feature_names.empty())
    for (const auto& id : vectors.front().ids) ds.feature_names.push_back(id.str());
  std::vector<std::string> devices;
  for (const auto& v : vectors) devices.push_back(v.device_id);
  std::sort(devices.begin(), devices.end());
  devices.erase(std::unique(devices.begin(), devices.end()), devices.end());
  ds.class_names = devices;
  for (const auto& v : vectors) {
    if (v.values.size() != ds.feature_names.size())
      throw ValidationError("feature vectors have inconsistent lengths");
    for (double x : v.values)
      if (!std::isfinite(x)) throw ValidationError("non-finite feature value for " + v.device_id);
    ds.rows.push_back(v.values);
    ds.labels.push_back(static_cast<int>(std::lower_bound(devices.begin(), devices.end(), v.device_id) -
                                         devices.begin()));
    ds.session_ids.push_back(v.session_id);
  }
  return ds;
}

// Feature table: header `device_id,session_id,<feature ids...>`, one row per trace.
inline std::string dataset_to_csv(const LabeledDataset& ds) {
  std::string out = "device_id,session_id";
  for (const auto& n : ds.feature_names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += ds.class_names[static_cast<std::size_t>(ds.labels[i])] + "," +
           (i < ds.session_ids.size() ? ds.session_ids[i] : std::string{});
    for (double v : ds.rows[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

inline LabeledDataset dataset_from_csv(std::string_view csv) {
  auto split = [](std::string_view line) {
    std::vector<std::string_view> f;
    for (std::size_t start = 0;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return f;
  };
  std::vector<FeatureVector> vectors;
  std::vector<std::string> names;
  std::size_t line_no = 0;
  for (std::size_t pos = 0; pos < csv.size();) {
    auto nl = csv.find('\n', pos);
    if (nl == std::string_view::npos) nl = csv.size();
    auto line = csv.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto f = split(line);
    if (names.empty()) {
      if (f.size() < 3 || f[0] != "device_id" || f[1] != "session_id")
        throw ParseError("line 1: expected header device_id,session_id,<features>");
      names.assign(f.begin() + 2, f.end());
      continue;
    }
    if (f.size() != names.size() + 2)
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(names.size() + 2) +
                       " columns, got " + std::to_string(f.size()));
    FeatureVector v;
    v.device_id = std::string(f[0]);
    v.session_id = std::string(f[1]);
    for (std::size_t c = 2; c < f.size(); ++c) v.values.push_back(detail::parse_double_field(f[c], line_no, c + 1));
    vectors.push_back(std::move(v));
  }
  if (names.empty()) throw ParseError("feature table is empty");
  return make_dataset(vectors, std::vector<std::string>(names.begin(), names.end()));
}

// ---- split -----------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class random partition where each class puts `train_count(n)` rows in
/// training. Every class needs >= 2 rows; at least one row per class is held
/// out for testing.
template <typename TrainCount>
Split split_per_class(const LabeledDataset& ds, std::uint64_t seed, TrainCount train_count) {
  Split out;
  std::mt19937_64 rng(seed);
  const auto by = ds.rows_by_class();
  for (std::size_t c = 0; c < by.size(); ++c) {
    auto rows = by[c];
    if (rows.size() < 2)
      throw ValidationError("class '" + ds.class_names[c] + "' has " + std::to_string(rows.size()) +
                            " rows; at least 2 are needed to split");
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t n_train = std::clamp<std::size_t>(train_count(rows.size()), 1, rows.size() - 1);
    out.train.insert(out.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

/// Half of every class to training; odd counts give training the extra row.
inline Split split_50_50(const LabeledDataset& ds, std::uint64_t seed) {
  return split_per_class(ds, seed, [](std::size_t n) { return (n + 1) / 2; });
}

/// Splits a fixed number of rows per class into training, the rest to test.
inline Split split_fixed_train(const LabeledDataset& ds, std::size_t per_class, std::uint64_t seed) {
  return split_per_class(ds, seed, [per_class](std::size_t) { return per_class; });
}

// ---- classifiers -----------------------------------------------------------

enum class ClassifierKind { bagged, knn, gnb };

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::bagged: return "bagged";
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::gnb: return "gnb";
  }
  return "?";
}

inline ClassifierKind classifier_from_string(std::string_view s) {
  if (s == "bagged") return ClassifierKind::bagged;
  if (s == "knn") return ClassifierKind::knn;
  if (s == "gnb") return ClassifierKind::gnb;
  throw ValidationError("unknown classifier '" + std::string(s) + "'");
}

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::bagged;
  int n_trees = 100;
  int max_depth = -1;  // negative: unlimited
  int min_leaf = 1;
  int knn_k = 1;
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

namespace detail {

// Majority label; ties go to the smallest class id.
inline int argmax_vote(std::span<const int> counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

inline void require_two_classes(std::span<const int> labels, const char* who) {
  if (labels.empty()) throw ValidationError(std::string(who) + ": empty training set");
  const int first = labels.front();
  if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == first; }))
    throw ValidationError(std::string(who) + ": training data has a single class");
}

}  // namespace detail

/// CART tree, Gini impurity, thresholds at midpoints between sorted unique
/// feature values. Rows go left when value <= threshold.
class DecisionTree {
public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1, right = -1;
    int label = 0;
  };

  DecisionTree() = default;

  /// `sample` holds row indices into `rows`, repeats allowed (bootstrap).
  static DecisionTree fit(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                          std::span<const std::size_t> sample, int num_classes, int max_depth, int min_leaf) {
    DecisionTree tree;
    tree.num_classes_ = num_classes;
    if (sample.empty()) throw ValidationError("tree: empty sample");
    const std::size_t num_features = rows[sample[0]].size();

    // Presorted sample positions per feature, partitioned as the tree grows.
    std::vector<std::vector<std::uint32_t>> order(num_features);
    for (std::size_t f = 0; f < num_features; ++f) {
      auto& o = order[f];
      o.resize(sample.size());
      std::iota(o.begin(), o.end(), 0u);
      std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
        return rows[sample[a]][f] < rows[sample[b]][f];
      });
    }
    Builder b{rows, labels, sample, num_classes, max_depth, std::max(1, min_leaf), tree.nodes_,
              std::vector<char>(sample.size(), 0)};
    b.grow(order, 0);
    return tree;
  }

  int predict(std::span<const double> x) const {
    int i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes_[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)].label;
  }

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  int num_classes() const { return num_classes_; }

  static DecisionTree from_nodes(std::vector<Node> nodes, int num_classes) {
    DecisionTree t;
    t.nodes_ = std::move(nodes);
    t.num_classes_ = num_classes;
    return t;
  }

private:
  struct Builder {
    const std::vector<std::vector<double>>& rows;
    std::span<const int> labels;
    std::span<const std::size_t> sample;
    int num_classes;
    int max_depth;
    int min_leaf;
    std::vector<Node>& nodes;
    std::vector<char> goes_left;

    double value(std::uint32_t pos, std::size_t f) const { return rows[sample[pos]][f]; }
    int label(std::uint32_t pos) const { return labels[sample[pos]]; }

    static double gini_sum(std::span<const int> counts, double n) {
      // n * gini = n - sum(c^2)/n
      double sq = 0;
      for (int c : counts) sq += static_cast<double>(c) * c;
      return n - sq / n;
    }

    int grow(std::vector<std::vector<std::uint32_t>>& order, int depth) {
      const auto& any = order[0];
      const std::size_t n = any.size();
      std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
      for (auto p : any) ++counts[static_cast<std::size_t>(label(p))];
      const int idx = static_cast<int>(nodes.size());
      nodes.push_back({});
      nodes.back().label = detail::argmax_vote(counts);

      const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
      if (pure || (max_depth >= 0 && depth >= max_depth) || n < 2 * static_cast<std::size_t>(min_leaf)) return idx;

      const double parent = gini_sum(counts, static_cast<double>(n));
      double best_gain = 1e-12;
      int best_feature = -1;
      double best_threshold = 0;
      std::vector<int> left(counts.size());
      for (std::size_t f = 0; f < order.size(); ++f) {
        const auto& o = order[f];
        std::fill(left.begin(), left.end(), 0);
        std::vector<int> right = counts;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const int l = label(o[i]);
          ++left[static_cast<std::size_t>(l)];
          --right[static_cast<std::size_t>(l)];
          const double v0 = value(o[i], f), v1 = value(o[i + 1], f);
          if (!(v1 > v0)) continue;
          const std::size_t nl = i + 1, nr = n - nl;
          if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf)) continue;
          const double gain = parent - gini_sum(left, static_cast<double>(nl)) - gini_sum(right, static_cast<double>(nr));
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = static_cast<int>(f);
            best_threshold = v0 + (v1 - v0) / 2;
            if (!(best_threshold < v1)) best_threshold = v0;
          }
        }
      }
      if (best_feature < 0) return idx;

      for (auto p : any) goes_left[p] = 0;
      for (auto p : order[static_cast<std::size_t>(best_feature)])
        goes_left[p] = value(p, static_cast<std::size_t>(best_feature)) <= best_threshold ? 1 : 0;

      std::vector<std::vector<std::uint32_t>> lo(order.size()), hi(order.size());
      for (std::size_t f = 0; f < order.size(); ++f) {
        for (auto p : order[f]) (goes_left[p] ? lo[f] : hi[f]).push_back(p);
        std::vector<std::uint32_t>().swap(order[f]);
      }
      const int l = grow(lo, depth + 1);
      lo.clear();
      const int r = grow(hi, depth + 1);
      auto& node = nodes[static_cast<std::size_t>(idx)];
      node.feature = best_feature;
      node.threshold = best_threshold;
      node.left = l;
      node.right = r;
      return idx;
    }
  };

  std::vector<Node> nodes_;
  int num_classes_ = 0;
};

/// Bootstrap-aggregated CART trees with majority vote.
class BaggedTrees {
public:
  BaggedTrees() = default;

  static BaggedTrees fit(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                         int num_classes, const ClassifierConfig& cfg) {
    detail::require_two_classes(labels, "bagged trees");
    if (cfg.n_trees < 1) throw ValidationError("bagged trees: n_trees must be >= 1");
    BaggedTrees model;
    model.num_classes_ = num_classes;
    model.trees_.resize(static_cast<std::size_t>(cfg.n_trees));
    const std::size_t n = rows.size();
    parallel_for(model.trees_.size(), [&](std::size_t t) {
      std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<std::size_t> sample(n);
      for (auto& s : sample) s = pick(rng);
      model.trees_[t] = DecisionTree::fit(rows, labels, sample, num_classes, cfg.max_depth, cfg.min_leaf);
    }, cfg.workers);
    return model;
  }

  int predict(std::span<const double> x) const {
    std::vector<int> votes(static_cast<std::size_t>(num_classes_), 0);
    for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict(x))];
    return detail::argmax_vote(votes);
  }

  const std::vector<DecisionTree>& trees() const { return trees_; }
  int num_classes() const { return num_classes_; }

  static BaggedTrees from_trees(std::vector<DecisionTree> trees, int num_classes) {
    BaggedTrees b;
    b.trees_ = std::move(trees);
    b.num_classes_ = num_classes;
    return b;
  }

private:
  std::vector<DecisionTree> trees_;
  int num_classes_ = 0;
};

/// Per-feature z-score statistics from training rows; zero spread maps to 1.
struct Standardizer {
  std::vector<double> mean, scale;

  static Standardizer fit(const std::vector<std::vector<double>>& rows) {
    Standardizer s;
    const std::size_t d = rows.empty() ? 0 : rows[0].size();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows)
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j] / n;
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0;
      for (const auto& r : rows) v += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
      v = std::sqrt(v / n);
      s.scale[j] = v > 0 ? v : 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
    return z;
  }
};

class KnnClassifier {
public:
  static KnnClassifier fit(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                           int num_classes, int k) {
    detail::require_two_classes(labels, "k-NN");
    if (k < 1) throw ValidationError("k-NN: k must be >= 1");
    if (static_cast<std::size_t>(k) > rows.size())
      throw ValidationError("k-NN: k=" + std::to_string(k) + " exceeds training size " + std::to_string(rows.size()));
    KnnClassifier m;
    m.k_ = k;
    m.num_classes_ = num_classes;
    m.standardizer_ = Standardizer::fit(rows);
    for (const auto& r : rows) m.rows_.push_back(m.standardizer_.apply(r));
    m.labels_.assign(labels.begin(), labels.end());
    return m;
  }

  int predict(std::span<const double> x) const {
    const auto z = standardizer_.apply(x);
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double d = 0;
      for (std::size_t j = 0; j < z.size(); ++j) d += (rows_[i][j] - z[j]) * (rows_[i][j] - z[j]);
      dist.emplace_back(d, i);
    }
    std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
    std::vector<int> votes(static_cast<std::size_t>(num_classes_), 0);
    for (int i = 0; i < k_; ++i) ++votes[static_cast<std::size_t>(labels_[dist[static_cast<std::size_t>(i)].second])];
    return detail::argmax_vote(votes);
  }

  int k() const { return k_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  const std::vector<int>& labels() const { return labels_; }
  int num_classes() const { return num_classes_; }

  static KnnClassifier from_parts(int k, int num_classes, Standardizer s, std::vector<std::vector<double>> rows,
                                  std::vector<int> labels) {
    KnnClassifier m;
    m.k_ = k;
    m.num_classes_ = num_classes;
    m.standardizer_ = std::move(s);
    m.rows_ = std::move(rows);
    m.labels_ = std::move(labels);
    return m;
  }

private:
  int k_ = 1;
  int num_classes_ = 0;
  Standardizer standardizer_;
  std::vector<std::vector<double>> rows_;
  std::vector<int> labels_;
};

/// Gaussian naive Bayes on standardized features, variance floor 1e-9.
class GaussianNaiveBayes {
public:
  static constexpr double kVarianceFloor = 1e-9;

  static GaussianNaiveBayes fit(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                                int num_classes) {
    detail::require_two_classes(labels, "naive Bayes");
    GaussianNaiveBayes m;
    m.standardizer_ = Standardizer::fit(rows);
    const std::size_t d = rows[0].size();
    const auto nc = static_cast<std::size_t>(num_classes);
    m.mean_.assign(nc, std::vector<double>(d, 0.0));
    m.var_.assign(nc, std::vector<double>(d, 0.0));
    m.log_prior_.assign(nc, -std::numeric_limits<double>::infinity());
    std::vector<double> count(nc, 0.0);
    std::vector<std::vector<double>> z;
    for (const auto& r : rows) z.push_back(m.standardizer_.apply(r));
    for (std::size_t i = 0; i < z.size(); ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      count[c] += 1;
      for (std::size_t j = 0; j < d; ++j) m.mean_[c][j] += z[i][j];
    }
    for (std::size_t c = 0; c < nc; ++c)
      if (count[c] > 0)
        for (auto& v : m.mean_[c]) v /= count[c];
    for (std::size_t i = 0; i < z.size(); ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      for (std::size_t j = 0; j < d; ++j) m.var_[c][j] += (z[i][j] - m.mean_[c][j]) * (z[i][j] - m.mean_[c][j]);
    }
    for (std::size_t c = 0; c < nc; ++c) {
      for (auto& v : m.var_[c]) v = std::max(count[c] > 0 ? v / count[c] : 0.0, kVarianceFloor);
      if (count[c] > 0) m.log_prior_[c] = std::log(count[c] / static_cast<double>(rows.size()));
    }
    return m;
  }

  int predict(std::span<const double> x) const {
    const auto z = standardizer_.apply(x);
    int best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < mean_.size(); ++c) {
      if (!std::isfinite(log_prior_[c])) continue;
      double ll = log_prior_[c];
      for (std::size_t j = 0; j < z.size(); ++j) {
        const double d = z[j] - mean_[c][j];
        ll -= 0.5 * (std::log(2 * M_PI * var_[c][j]) + d * d / var_[c][j]);
      }
      if (ll > best_ll) {
        best_ll = ll;
        best = static_cast<int>(c);
      }
    }
    return best;
  }

private:
  Standardizer standardizer_;
  std::vector<std::vector<double>> mean_, var_;
  std::vector<double> log_prior_;
};

using Classifier = std::variant<BaggedTrees, KnnClassifier, GaussianNaiveBayes>;

inline Classifier train_classifier(const LabeledDataset& ds, std::span<const std::size_t> rows_idx,
                                   const ClassifierConfig& cfg) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  rows.reserve(rows_idx.size());
  for (auto i : rows_idx) {
    rows.push_back(ds.rows[i]);
    labels.push_back(ds.labels[i]);
  }
  const int nc = static_cast<int>(ds.num_classes());
  switch (cfg.kind) {
    case ClassifierKind::bagged: return BaggedTrees::fit(rows, labels, nc, cfg);
    case ClassifierKind::knn: return KnnClassifier::fit(rows, labels, nc, cfg.knn_k);
    case ClassifierKind::gnb: return GaussianNaiveBayes::fit(rows, labels, nc);
  }
  throw ValidationError("unknown classifier");
}

inline Classifier train_classifier(const LabeledDataset& ds, const ClassifierConfig& cfg) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  return train_classifier(ds, all, cfg);
}

inline int predict(const Classifier& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

// ---- metrics ---------------------------------------------------------------

struct ConfusionCounts {
  std::vector<long> tp, fp, fn;

  explicit ConfusionCounts(std::size_t classes = 0) : tp(classes, 0), fp(classes, 0), fn(classes, 0) {}

  void add(int truth, int predicted) {
    if (truth == predicted) {
      ++tp[static_cast<std::size_t>(truth)];
    } else {
      ++fn[static_cast<std::size_t>(truth)];
      ++fp[static_cast<std::size_t>(predicted)];
    }
  }

  std::size_t classes() const { return tp.size(); }
};

struct ClassMetrics {
  double precision = 0, recall = 0, f_score = 0;
};

inline ClassMetrics class_metrics(long tp, long fp, long fn) {
  ClassMetrics m;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f_score = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

inline double harmonic_f(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

/// Per-class metrics and class-averaged precision / recall with AvgF as
/// their harmonic mean.
struct RepetitionMetrics {
  std::vector<ClassMetrics> per_class;
  double avg_precision = 0, avg_recall = 0, avg_f = 0;
};

inline RepetitionMetrics compute_metrics(const ConfusionCounts& cc) {
  RepetitionMetrics r;
  for (std::size_t c = 0; c < cc.classes(); ++c) {
    r.per_class.push_back(class_metrics(cc.tp[c], cc.fp[c], cc.fn[c]));
    r.avg_precision += r.per_class.back().precision;
    r.avg_recall += r.per_class.back().recall;
  }
  if (cc.classes() > 0) {
    r.avg_precision /= static_cast<double>(cc.classes());
    r.avg_recall /= static_cast<double>(cc.classes());
  }
  r.avg_f = harmonic_f(r.avg_precision, r.avg_recall);
  return r;
}

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;  // averaged over repetitions
  double avg_precision = 0, avg_recall = 0, avg_f = 0;
  double avg_f_ci95 = 0;  // normal-approximation half-width over repetitions
  int repetitions = 0;
  std::vector<RepetitionMetrics> runs;

  nlohmann::json to_json() const {
    nlohmann::json pc = nlohmann::json::array();
    for (std::size_t c = 0; c < per_class.size(); ++c)
      pc.push_back({{"class", class_names[c]},
                    {"precision", per_class[c].precision},
                    {"recall", per_class[c].recall},
                    {"f_score", per_class[c].f_score}});
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : runs)
      reps.push_back({{"avg_precision", r.avg_precision}, {"avg_recall", r.avg_recall}, {"avg_f", r.avg_f}});
    return {{"avg_precision", avg_precision}, {"avg_recall", avg_recall}, {"avg_f", avg_f},
            {"avg_f_ci95", avg_f_ci95},       {"repetitions", repetitions}, {"per_class", pc},
            {"runs", reps}};
  }
};

/// Averages repetition metrics: AvgF is the mean of per-repetition AvgF.
inline EvalReport summarize(std::vector<RepetitionMetrics> runs, std::vector<std::string> class_names) {
  EvalReport rep;
  rep.class_names = std::move(class_names);
  rep.repetitions = static_cast<int>(runs.size());
  if (runs.empty()) return rep;
  const double n = static_cast<double>(runs.size());
  rep.per_class.assign(runs.front().per_class.size(), {});
  for (const auto& r : runs) {
    rep.avg_precision += r.avg_precision / n;
    rep.avg_recall += r.avg_recall / n;
    rep.avg_f += r.avg_f / n;
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
      rep.per_class[c].precision += r.per_class[c].precision / n;
      rep.per_class[c].recall += r.per_class[c].recall / n;
      rep.per_class[c].f_score += r.per_class[c].f_score / n;
    }
  }
  if (runs.size() > 1) {
    double var = 0;
    for (const auto& r : runs) var += (r.avg_f - rep.avg_f) * (r.avg_f - rep.avg_f);
    var /= n - 1;
    rep.avg_f_ci95 = 1.96 * std::sqrt(var / n);
  }
  rep.runs = std::move(runs);
  return rep;
}

/// Train on split.train, predict split.test.
inline RepetitionMetrics run_split(const LabeledDataset& ds, const Split& split, const ClassifierConfig& cfg) {
  const auto model = train_classifier(ds, split.train, cfg);
  ConfusionCounts cc(ds.num_classes());
  for (auto i : split.test) cc.add(ds.labels[i], predict(model, ds.rows[i]));
  return compute_metrics(cc);
}

/// How many rows per class go to training in each repetition.
struct SplitPolicy {
  enum class Mode { half, fixed_count } mode = Mode::half;
  std::size_t per_class = 0;

  Split apply(const LabeledDataset& ds, std::uint64_t seed) const {
    return mode == Mode::half ? split_50_50(ds, seed) : split_fixed_train(ds, per_class, seed);
  }
};

/// Repeated randomized split protocol. Deterministic for a fixed seed.
inline EvalReport evaluate(const LabeledDataset& ds, ClassifierConfig cfg, int repetitions = 10,
                           std::uint64_t seed = 1, SplitPolicy policy = {}) {
  if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
  if (ds.num_classes() < 2) throw ValidationError("evaluation needs at least 2 classes");
  std::vector<RepetitionMetrics> runs;
  for (int r = 0; r < repetitions; ++r) {
    const auto split = policy.apply(ds, derive_seed(seed, 2 * static_cast<std::uint64_t>(r)));
    auto c = cfg;
    c.seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(r) + 1);
    runs.push_back(run_split(ds, split, c));
  }
  return summarize(std::move(runs), ds.class_names);
}

// ---- model persistence -----------------------------------------------------

inline nlohmann::json classifier_to_json(const Classifier& model, const std::vector<std::string>& feature_names,
                                         const std::vector<std::string>& class_names) {
  nlohmann::json j{{"features", feature_names}, {"classes", class_names}};
  if (const auto* b = std::get_if<BaggedTrees>(&model)) {
    j["kind"] = "bagged";
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : b->trees()) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : t.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
      trees.push_back(nodes);
    }
    j["trees"] = trees;
  } else if (const auto* k = std::get_if<KnnClassifier>(&model)) {
    j["kind"] = "knn";
    j["k"] = k->k();
    j["mean"] = k->standardizer().mean;
    j["scale"] = k->standardizer().scale;
    j["rows"] = k->rows();
    j["labels"] = k->labels();
  } else {
    throw ValidationError("naive Bayes models are not persisted; use evaluate instead");
  }
  return j;
}

inline Classifier classifier_from_json(const nlohmann::json& j) {
  const int nc = static_cast<int>(j.at("classes").size());
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "bagged") {
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) {
      std::vector<DecisionTree::Node> nodes;
      for (const auto& n : t)
        nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<int>()});
      trees.push_back(DecisionTree::from_nodes(std::move(nodes), nc));
    }
    return BaggedTrees::from_trees(std::move(trees), nc);
  }
  if (kind == "knn") {
    Standardizer s{j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
    return KnnClassifier::from_parts(j.at("k").get<int>(), nc, std::move(s),
                                     j.at("rows").get<std::vector<std::vector<double>>>(),
                                     j.at("labels").get<std::vector<int>>());
  }
  throw ValidationError("unknown model kind '" + kind + "'");
}

}  // namespace motionprint
