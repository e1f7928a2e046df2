#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "deepbeat/dsp.hpp"
#include "deepbeat/error.hpp"
#include "deepbeat/features.hpp"
#include "deepbeat/forest.hpp"
#include "deepbeat/sim.hpp"
#include "oracles.hpp"

using namespace deepbeat;
using namespace deepbeat::baseline;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

double moment(const std::vector<double>& x, int k) {
  const double m = testutil::mean(x);
  double s = 0;
  for (double v : x) s += std::pow(v - m, k);
  return s / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("zero crossings of an alternating sequence") {
  std::vector<double> x(100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? -1.0 : 1.0;
  CHECK(zero_crossings(x) == 99);
  CHECK(zero_crossings(std::vector<double>(10, 0.4)) == 0);
}

TEST_CASE("hjorth mobility of a sine matches the difference oracle") {
  for (double f : {0.5, 1.0, 2.0, 4.0}) {
    const auto x = testutil::sine(3200, 32, f);
    CHECK(hjorth_mobility(x) == doctest::Approx(2 * std::sin(std::numbers::pi * f / 32)).epsilon(0.01));
  }
}

TEST_CASE("moments of standard-normal samples") {
  const auto x = gaussian(100000, 1);
  CHECK(std::abs(excess_kurtosis(x)) < 0.05);
  CHECK(std::abs(skewness(x)) < 0.05);
  const auto y = gaussian(500, 2);
  CHECK(excess_kurtosis(y) == doctest::Approx(moment(y, 4) / std::pow(moment(y, 2), 2) - 3).epsilon(1e-10));
  CHECK(skewness(y) == doctest::Approx(moment(y, 3) / std::pow(moment(y, 2), 1.5)).epsilon(1e-10));
}

TEST_CASE("constant windows have zero moment and hjorth features") {
  const std::vector<double> c(800, 0.0);
  const auto f = extract_features(c, 32);
  CHECK(f.kurtosis == 0);
  CHECK(f.skew == 0);
  CHECK(f.hjorth_mobility == 0);
  CHECK(f.hjorth_complexity == 0);
  CHECK(f.nrmssd == 0);
  for (double v : f.as_array()) CHECK(std::isfinite(v));
}

TEST_CASE("entropies") {
  // a pure tone on a bin has all its power in one bin: zero spectral entropy
  CHECK(spectral_entropy(testutil::sine(800, 32, 2.0)) == doctest::Approx(0).epsilon(1e-6).scale(1));
  // 16 equally filled bins: 4 bits
  std::vector<double> u(1600);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (static_cast<double>(i % 16) + 0.5) / 16;
  CHECK(histogram_entropy(u) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(spectral_entropy(gaussian(800, 3)) > 0);
}

TEST_CASE("nrmssd of perfectly regular beats is zero; needs three peaks") {
  CHECK(nrmssd(testutil::sine(800, 32, 1.0), 32) == doctest::Approx(0).scale(1));
  CHECK(nrmssd(testutil::sine(64, 32, 1.0), 32) == 0);
}

TEST_CASE("features are invariant to rescaling before normalization") {
  sim::SimConfig c;
  c.rhythm = Rhythm::AF;
  c.fm_cv = 0.2;
  c.noise_factor = 0.25;
  auto s = sim::simulate(c).noisy;
  const auto w1 = dsp::preprocess(s, dsp::kEvalStride).at(0);
  for (auto& v : s.samples) v *= 2;
  const auto w2 = dsp::preprocess(s, dsp::kEvalStride).at(0);
  const auto a = extract_features(w1).as_array(), b = extract_features(w2).as_array();
  for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9).scale(1));
}

TEST_CASE("forest: single-class data predicts that class") {
  FeatureMatrix X(20);
  for (std::size_t i = 0; i < X.size(); ++i) X[i].fill(static_cast<double>(i));
  const std::vector<Rhythm> r(20, Rhythm::AF);
  const std::vector<Quality> q(20, Quality::Poor);
  const Forest f = fit_forest(X, r, q, {10, 1});
  const auto p = predict_forest(f, std::vector<double>(kFeatureCount, 3.5));
  CHECK(p.rhythm[1] == 1.0);
  CHECK(p.qa[2] == 1.0);
}

TEST_CASE("forest: separable data is fit exactly, probabilities sum to one, determinism") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::vector<double>> rows(200, std::vector<double>(3));
  std::vector<int> y(200);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (auto& v : rows[i]) v = u(rng);
    y[i] = rows[i][0] + 0.5 * rows[i][1] > 0 ? 1 : 0;
  }
  const ForestConfig cfg{25, 1};
  const Ensemble e = fit_ensemble(rows, y, 2, cfg, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto p = e.predict_proba(rows[i]);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-9));
    correct += (p[1] > p[0]) == (y[i] == 1);
  }
  CHECK(correct == 200);
  const Ensemble again = fit_ensemble(rows, y, 2, cfg, 0);
  for (std::size_t t = 0; t < e.trees.size(); ++t) {
    CHECK(e.trees[t].feature == again.trees[t].feature);
    CHECK(e.trees[t].threshold == again.trees[t].threshold);
  }
}

TEST_CASE("forest: leaves store counts summing to their sample count") {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    rows.push_back({static_cast<double>(i % 7), static_cast<double>(i % 5)});
    y.push_back(i % 3);
  }
  const Ensemble e = fit_ensemble(rows, y, 3, {5, 2, 0, false}, 0);
  for (const Tree& t : e.trees) {
    // without bootstrap the root holds every sample
    double root = 0;
    for (std::size_t c = 0; c < 3; ++c) root += t.counts[c];
    CHECK(root == 60);
    for (std::size_t n = 0; n < t.node_count(); ++n) {
      if (t.feature[n] < 0) continue;
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(t.counts[n * 3 + c] == t.counts[static_cast<std::size_t>(t.left[n]) * 3 + c] +
                                         t.counts[static_cast<std::size_t>(t.right[n]) * 3 + c]);
    }
  }
}

TEST_CASE("forest: a single tree on a pure leaf gives a one-hot rhythm vector") {
  FeatureMatrix X(40);
  std::vector<Rhythm> r(40);
  std::vector<Quality> q(40, Quality::Excellent);
  for (std::size_t i = 0; i < 40; ++i) {
    X[i].fill(0);
    X[i][6] = i < 20 ? 0.01 : 0.3;
    r[i] = i < 20 ? Rhythm::Sinus : Rhythm::AF;
  }
  const Forest f = fit_forest(X, r, q, {1, 1, kFeatureCount, false});
  std::array<double, kFeatureCount> probe{};
  probe[6] = 0.5;
  const auto p = predict_forest(f, probe);
  CHECK(p.rhythm[0] == 0.0);
  CHECK(p.rhythm[1] == 1.0);
}

TEST_CASE("forest: more trees do not lower training accuracy on average") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  std::vector<std::vector<double>> rows(150, std::vector<double>(4));
  std::vector<int> y(150);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (auto& v : rows[i]) v = n(rng);
    y[i] = rows[i][0] + 0.8 * n(rng) > 0;
  }
  const auto accuracy = [&](std::size_t trees, std::uint64_t seed) {
    const Ensemble e = fit_ensemble(rows, y, 2, {trees, seed}, 0);
    double ok = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto p = e.predict_proba(rows[i]);
      ok += (p[1] > p[0]) == (y[i] == 1);
    }
    return ok / static_cast<double>(rows.size());
  };
  double one = 0, many = 0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    one += accuracy(1, s);
    many += accuracy(100, s);
  }
  CHECK(many >= one);
}

TEST_CASE("forest rejects empty training data") {
  CHECK_THROWS_AS(fit_forest({}, {}, {}), Error);
}
