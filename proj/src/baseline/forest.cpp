#include "deepbeat/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "deepbeat/error.hpp"
#include "deepbeat/parallel.hpp"
#include "deepbeat/random.hpp"

namespace deepbeat::baseline {
namespace {

double gini(const std::vector<double>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

struct Split {
  bool valid = false;
  double impurity = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Lower weighted impurity wins; exact ties go to the lower feature index,
// then the lower threshold.
bool better(const Split& a, const Split& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  const double tol = 1e-12 * std::max(1.0, std::abs(b.impurity));
  if (a.impurity < b.impurity - tol) return true;
  if (a.impurity > b.impurity + tol) return false;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const std::vector<double>> rows, std::span<const int> labels, std::size_t n_classes,
              std::size_t max_features, Rng rng)
      : rows_(rows), labels_(labels), n_classes_(n_classes), max_features_(max_features), rng_(std::move(rng)) {
    tree_.n_classes = n_classes;
  }

  Tree build(std::vector<std::size_t> samples) {
    struct Task {
      int node;
      std::vector<std::size_t> samples;
    };
    std::vector<Task> stack;
    stack.push_back({new_node(samples), std::move(samples)});
    while (!stack.empty()) {
      Task task = std::move(stack.back());
      stack.pop_back();
      const std::size_t base = static_cast<std::size_t>(task.node) * n_classes_;
      const auto nonzero = std::count_if(tree_.counts.begin() + static_cast<std::ptrdiff_t>(base),
                                         tree_.counts.begin() + static_cast<std::ptrdiff_t>(base + n_classes_),
                                         [](double c) { return c > 0.0; });
      if (nonzero <= 1 || task.samples.size() < 2) continue;
      const Split split = find_split(task.samples);
      if (!split.valid) continue;

      std::vector<std::size_t> left, right;
      for (std::size_t s : task.samples) {
        if (rows_[s][static_cast<std::size_t>(split.feature)] <= split.threshold) left.push_back(s);
        else right.push_back(s);
      }
      const int l = new_node(left);
      const int r = new_node(right);
      tree_.feature[static_cast<std::size_t>(task.node)] = split.feature;
      tree_.threshold[static_cast<std::size_t>(task.node)] = split.threshold;
      tree_.left[static_cast<std::size_t>(task.node)] = l;
      tree_.right[static_cast<std::size_t>(task.node)] = r;
      stack.push_back({r, std::move(right)});
      stack.push_back({l, std::move(left)});
    }
    return std::move(tree_);
  }

 private:
  int new_node(const std::vector<std::size_t>& samples) {
    const int id = static_cast<int>(tree_.feature.size());
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    const std::size_t base = tree_.counts.size();
    tree_.counts.resize(base + n_classes_, 0.0);
    for (std::size_t s : samples) tree_.counts[base + static_cast<std::size_t>(labels_[s])] += 1.0;
    return id;
  }

  Split best_on_feature(const std::vector<std::size_t>& samples, int feature) const {
    const auto f = static_cast<std::size_t>(feature);
    std::vector<std::pair<double, int>> values;
    values.reserve(samples.size());
    for (std::size_t s : samples) values.emplace_back(rows_[s][f], labels_[s]);
    std::sort(values.begin(), values.end());

    std::vector<double> left(n_classes_, 0.0), right(n_classes_, 0.0);
    for (const auto& v : values) right[static_cast<std::size_t>(v.second)] += 1.0;
    const auto total = static_cast<double>(values.size());
    Split best;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const auto label = static_cast<std::size_t>(values[i].second);
      left[label] += 1.0;
      right[label] -= 1.0;
      if (!(values[i].first < values[i + 1].first)) continue;
      const auto nl = static_cast<double>(i + 1);
      const double nr = total - nl;
      Split cand;
      cand.valid = true;
      cand.impurity = nl * gini(left, nl) + nr * gini(right, nr);
      cand.feature = feature;
      cand.threshold = values[i].first + 0.5 * (values[i + 1].first - values[i].first);
      // Midpoint rounding can collapse onto the upper value for adjacent doubles.
      if (!(cand.threshold < values[i + 1].first)) cand.threshold = values[i].first;
      if (better(cand, best)) best = cand;
    }
    return best;
  }

  Split find_split(const std::vector<std::size_t>& samples) {
    const std::size_t d = rows_.front().size();
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    Split best;
    std::size_t visited = 0;
    for (int feature : order) {
      // Keep drawing features past max_features only while nothing splits.
      if (visited >= max_features_ && best.valid) break;
      const Split s = best_on_feature(samples, feature);
      if (better(s, best)) best = s;
      ++visited;
    }
    return best;
  }

  std::span<const std::vector<double>> rows_;
  std::span<const int> labels_;
  std::size_t n_classes_;
  std::size_t max_features_;
  Rng rng_;
  Tree tree_;
};

}  // namespace

std::vector<double> Tree::leaf_distribution(std::span<const double> x) const {
  std::size_t node = 0;
  while (feature[node] >= 0) {
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node]
                                                                                                    : right[node]);
  }
  std::vector<double> dist(counts.begin() + static_cast<std::ptrdiff_t>(node * n_classes),
                           counts.begin() + static_cast<std::ptrdiff_t>((node + 1) * n_classes));
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  for (double& v : dist) v /= total;
  return dist;
}

std::vector<double> Ensemble::predict_proba(std::span<const double> x) const {
  require(!trees.empty(), ErrorKind::State, "forest: ensemble is not fitted");
  std::vector<double> acc(n_classes, 0.0);
  for (const Tree& t : trees) {
    const auto d = t.leaf_distribution(x);
    for (std::size_t c = 0; c < n_classes; ++c) acc[c] += d[c];
  }
  for (double& v : acc) v /= static_cast<double>(trees.size());
  return acc;
}

Ensemble fit_ensemble(std::span<const std::vector<double>> rows, std::span<const int> labels,
                      std::size_t n_classes, const ForestConfig& config, std::uint64_t stream) {
  require(!rows.empty(), ErrorKind::Config, "forest: empty training set");
  require(rows.size() == labels.size(), ErrorKind::Config, "forest: rows and labels differ in length");
  require(config.n_estimators >= 1, ErrorKind::Config, "forest: n_estimators must be at least 1");
  const std::size_t d = rows.front().size();
  require(d > 0, ErrorKind::Config, "forest: rows must have at least one feature");
  for (const auto& r : rows) require(r.size() == d, ErrorKind::Shape, "forest: ragged design matrix");
  for (int l : labels)
    require(l >= 0 && static_cast<std::size_t>(l) < n_classes, ErrorKind::Data, "forest: label out of range");

  const std::size_t mtry =
      config.max_features > 0 ? std::min(config.max_features, d)
                              : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
  Ensemble e;
  e.n_classes = n_classes;
  e.trees.resize(config.n_estimators);
  const std::size_t n = rows.size();
  parallel_for(config.n_estimators, [&](std::size_t t) {
    Rng rng = make_rng(config.seed, {stream, t});
    std::vector<std::size_t> samples(n);
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& s : samples) s = pick(rng);
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    TreeBuilder builder(rows, labels, n_classes, mtry, std::move(rng));
    e.trees[t] = builder.build(std::move(samples));
  });
  return e;
}

Forest fit_forest(const FeatureMatrix& X, std::span<const Rhythm> rhythm, std::span<const Quality> qa,
                  const ForestConfig& config) {
  require(X.size() >= 2, ErrorKind::Config, "forest: at least two training rows are required");
  require(X.size() == rhythm.size() && X.size() == qa.size(), ErrorKind::Config,
          "forest: feature and label counts differ");
  std::vector<std::vector<double>> rows;
  rows.reserve(X.size());
  for (const auto& x : X) rows.emplace_back(x.begin(), x.end());
  std::vector<int> y_rhythm(rhythm.size()), y_qa(qa.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    y_rhythm[i] = static_cast<int>(rhythm[i]);
    y_qa[i] = static_cast<int>(qa[i]);
  }
  Forest f;
  f.config = config;
  f.n_features = kFeatureCount;
  f.rhythm = fit_ensemble(rows, y_rhythm, kRhythmClasses, config, 0);
  f.qa = fit_ensemble(rows, y_qa, kQualityClasses, config, 1);
  return f;
}

ForestPrediction predict_forest(const Forest& f, std::span<const double> x) {
  require(x.size() == f.n_features, ErrorKind::Shape, "forest: feature vector has the wrong length");
  ForestPrediction p;
  const auto r = f.rhythm.predict_proba(x);
  const auto q = f.qa.predict_proba(x);
  std::copy(r.begin(), r.end(), p.rhythm.begin());
  std::copy(q.begin(), q.end(), p.qa.begin());
  return p;
}

ForestPrediction predict_forest(const Forest& f, const FeatureVector& x) {
  const auto a = x.as_array();
  return predict_forest(f, std::span<const double>(a));
}

}  // namespace deepbeat::baseline
