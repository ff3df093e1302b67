#pragma once

// Joint Mutual Information feature ranking over equal-frequency binned
// features, plus the top-k evaluation sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "classify.hpp"

namespace motionprint {

inline constexpr int kDefaultBins = 10;

/// Column-major integer bins: columns[feature][row].
struct BinnedMatrix {
  std::vector<std::vector<int>> columns;
  int bins = kDefaultBins;

  std::size_t num_features() const { return columns.size(); }
  std::size_t num_rows() const { return columns.empty() ? 0 : columns[0].size(); }
};

/// Equal-frequency bin for every value: floor(rank * B / n), where rank is
/// the position of the value's first occurrence in sorted order. Ties share
/// a bin; a constant column lands entirely in bin 0.
inline std::vector<int> discretize_column(std::span<const double> values, int bins = kDefaultBins) {
  if (bins < 1) throw ValidationError("bin count must be >= 1");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<int> out(n);
  std::size_t first = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && values[order[i]] != values[order[i - 1]]) first = i;
    out[order[i]] = static_cast<int>(first * static_cast<std::size_t>(bins) / n);
  }
  return out;
}

/// rows[row][feature] -> column-major bins.
inline BinnedMatrix discretize(const std::vector<std::vector<double>>& rows, int bins = kDefaultBins) {
  BinnedMatrix m;
  m.bins = bins;
  if (rows.empty()) return m;
  const std::size_t d = rows[0].size();
  m.columns.resize(d);
  std::vector<double> col(rows.size());
  for (std::size_t f = 0; f < d; ++f) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!std::isfinite(rows[r][f])) throw ValidationError("discretize: non-finite value");
      col[r] = rows[r][f];
    }
    m.columns[f] = discretize_column(col, bins);
  }
  return m;
}

// ---- plug-in information measures (bits) -----------------------------------

/// Entropy of the joint variable formed by the given columns.
inline double joint_entropy(std::span<const std::span<const int>> vars) {
  if (vars.empty()) return 0.0;
  const std::size_t n = vars[0].size();
  if (n == 0) return 0.0;
  // Exact mixed-radix key over the (offset) symbol values.
  std::vector<int> lo(vars.size()), radix(vars.size());
  long double capacity = 1;
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const auto [mn, mx] = std::minmax_element(vars[j].begin(), vars[j].end());
    lo[j] = *mn;
    radix[j] = *mx - *mn + 1;
    capacity *= radix[j];
  }
  if (capacity > 1.8e19L) throw ValidationError("joint_entropy: alphabet too large");
  std::unordered_map<std::uint64_t, int> counts;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < vars.size(); ++j)
      key = key * static_cast<std::uint64_t>(radix[j]) + static_cast<std::uint64_t>(vars[j][i] - lo[j]);
    ++counts[key];
  }
  double h = 0;
  const double dn = static_cast<double>(n);
  for (const auto& [k, c] : counts) {
    const double p = c / dn;
    h -= p * std::log2(p);
  }
  return h;
}

inline double entropy(std::span<const int> x) {
  const std::span<const int> vars[] = {x};
  return joint_entropy(vars);
}

/// I(X;Y) = H(X) + H(Y) - H(X,Y).
inline double mutual_information(std::span<const int> x, std::span<const int> y) {
  const std::span<const int> xy[] = {x, y};
  return std::max(0.0, entropy(x) + entropy(y) - joint_entropy(xy));
}

/// I(X1,X2;Y).
inline double joint_mutual_information(std::span<const int> x1, std::span<const int> x2, std::span<const int> y) {
  const std::span<const int> xx[] = {x1, x2};
  const std::span<const int> xxy[] = {x1, x2, y};
  return std::max(0.0, joint_entropy(xx) + entropy(y) - joint_entropy(xxy));
}

struct FeatureRanking {
  std::vector<std::size_t> order;  // column indices, best first
  std::vector<double> scores;      // greedy score at each step
  int bins = kDefaultBins;
  std::vector<std::string> names;  // optional, aligned with order

  nlohmann::json to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < order.size(); ++i) {
      nlohmann::json e{{"index", order[i]}, {"score", scores[i]}};
      if (i < names.size()) e["id"] = names[i];
      list.push_back(e);
    }
    return {{"criterion", "jmi"}, {"bins", bins}, {"ranking", list}};
  }

  static FeatureRanking from_json(const nlohmann::json& j) {
    FeatureRanking r;
    r.bins = j.value("bins", kDefaultBins);
    for (const auto& e : j.at("ranking")) {
      r.order.push_back(e.at("index").get<std::size_t>());
      r.scores.push_back(e.at("score").get<double>());
      if (e.contains("id")) r.names.push_back(e.at("id").get<std::string>());
    }
    return r;
  }
};

// Score differences below this count as ties (resolved by feature index).
inline constexpr double kScoreTieTolerance = 1e-12;

/// Greedy JMI: first pick maximizes I(X;Y); each next pick maximizes
/// sum over selected s of I(X,s;Y). Ties go to the lowest feature index.
/// k larger than the feature count ranks everything.
inline FeatureRanking jmi_rank(const BinnedMatrix& m, std::span<const int> labels, std::size_t k,
                               unsigned workers = 0) {
  const std::size_t d = m.num_features();
  if (d < 2) throw ValidationError("JMI ranking needs at least 2 features");
  if (labels.size() != m.num_rows()) throw ValidationError("label count does not match row count");
  {
    auto l = std::vector<int>(labels.begin(), labels.end());
    std::sort(l.begin(), l.end());
    if (std::unique(l.begin(), l.end()) - l.begin() < 2) throw ValidationError("JMI ranking needs at least 2 classes");
  }
  k = std::min(k, d);
  FeatureRanking out;
  out.bins = m.bins;
  std::vector<double> accum(d, 0.0);
  std::vector<char> chosen(d, 0);

  std::vector<double> relevance(d);
  parallel_for(d, [&](std::size_t f) { relevance[f] = mutual_information(m.columns[f], labels); }, workers);

  auto pick = [&](const std::vector<double>& score) {
    std::size_t best = d;
    for (std::size_t f = 0; f < d; ++f) {
      if (chosen[f]) continue;
      if (best == d || score[f] > score[best] + kScoreTieTolerance) best = f;
    }
    return best;
  };

  std::size_t first = pick(relevance);
  chosen[first] = 1;
  out.order.push_back(first);
  out.scores.push_back(relevance[first]);
  while (out.order.size() < k) {
    const std::size_t last = out.order.back();
    std::vector<double> gain(d, 0.0);
    parallel_for(d, [&](std::size_t f) {
      if (!chosen[f]) gain[f] = joint_mutual_information(m.columns[f], m.columns[last], labels);
    }, workers);
    for (std::size_t f = 0; f < d; ++f) accum[f] += gain[f];
    const std::size_t next = pick(accum);
    chosen[next] = 1;
    out.order.push_back(next);
    out.scores.push_back(accum[next]);
  }
  return out;
}

inline FeatureRanking jmi_rank(const LabeledDataset& ds, std::size_t k, int bins = kDefaultBins,
                               unsigned workers = 0) {
  auto r = jmi_rank(discretize(ds.rows, bins), ds.labels, k, workers);
  for (auto i : r.order) r.names.push_back(ds.feature_names[i]);
  return r;
}

struct SweepPoint {
  std::size_t k = 0;
  double avg_f = 0;
  double ci95 = 0;
};

/// Evaluates the dataset restricted to the top-k ranked features for each k.
inline std::vector<SweepPoint> sweep_topk(const FeatureRanking& ranking, const LabeledDataset& ds,
                                          const ClassifierConfig& cfg, std::span<const std::size_t> ks,
                                          int repetitions = 10, std::uint64_t seed = 1) {
  std::vector<SweepPoint> out;
  for (auto k : ks) {
    const auto kk = std::min(k, ranking.order.size());
    std::vector<std::size_t> cols(ranking.order.begin(), ranking.order.begin() + static_cast<std::ptrdiff_t>(kk));
    const auto rep = evaluate(ds.select_features(std::span<const std::size_t>(cols)), cfg, repetitions, seed);
    out.push_back({k, rep.avg_f, rep.avg_f_ci95});
  }
  return out;
}

}  // namespace motionprint
