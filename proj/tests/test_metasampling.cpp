#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mesa/learners.hpp"
#include "mesa/metasampling.hpp"

using namespace mesa;

namespace {

struct Lookup {
  // scores by first feature value (row id)
  std::vector<double> p;
  double predict_proba(std::span<const double> row) const { return p[static_cast<std::size_t>(row[0])]; }
};

LabeledDataset ids(const std::vector<Label>& y) {
  std::vector<double> x(y.size());
  std::iota(x.begin(), x.end(), 0.0);
  return LabeledDataset(1, x, y);
}

}  // namespace

TEST(ErrorHistogram, Examples) {
  EXPECT_EQ(error_histogram(std::vector<double>(7, 0.0), 5), (std::vector<double>{1, 0, 0, 0, 0}));
  EXPECT_EQ(error_histogram(std::vector<double>{0.05, 0.55, 0.95, 1.0}, 5),
            (std::vector<double>{0.25, 0, 0.25, 0, 0.5}));
  EXPECT_EQ(error_histogram(std::vector<double>{0.2, 0.4, 0.6, 0.8}, 5),
            (std::vector<double>{0, 0.25, 0.25, 0.25, 0.25}));
}

TEST(ErrorHistogram, TwoBinsReportAccuracy) {
  Rng rng(8);
  std::vector<double> scores(400);
  std::vector<Label> y(400);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    do {
      scores[i] = uniform01(rng);
    } while (scores[i] == 0.5);
    y[i] = uniform01(rng) < 0.3;
    correct += (scores[i] > 0.5) == (y[i] == 1);
  }
  const double acc = static_cast<double>(correct) / 400.0;
  const auto h = error_histogram(classification_errors(scores, y), 2);
  EXPECT_DOUBLE_EQ(h[0], acc);
  EXPECT_DOUBLE_EQ(h[1], 1.0 - acc);
}

TEST(ErrorHistogram, Errors) {
  EXPECT_THROW(error_histogram(std::vector<double>{}, 5), DataError);
  EXPECT_THROW(error_histogram(std::vector<double>{1.2}, 5), DataError);
  EXPECT_THROW(error_histogram(std::vector<double>{-0.1}, 5), DataError);
  EXPECT_THROW(error_histogram(std::vector<double>{0.1}, 1), ConfigError);
}

TEST(MetaState, PerfectModel) {
  const LabeledDataset tr = ids({0, 1, 0, 1}), va = ids({1, 0, 0, 0});
  const Lookup perfect{{0, 1, 0, 1}};
  const Lookup on_valid{{1, 0, 0, 0}};
  EXPECT_EQ(meta_state(perfect, tr, tr, 5), MetaState({1, 0, 0, 0, 0, 1, 0, 0, 0, 0}));
  EXPECT_EQ(meta_state(on_valid, va, va, 5).values().size(), 10u);
}

TEST(MetaState, OverfittedShapeAndSwap) {
  const LabeledDataset tr = ids({0, 1, 0, 1});
  const LabeledDataset va(1, {0, 1, 2, 3}, {1, 0, 1, 0});
  const Lookup f{{0, 1, 0, 1}};  // right on train, wrong on every validation row
  const MetaState s = meta_state(f, tr, va, 5);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_EQ(s[9], 1.0);
  const MetaState swapped = meta_state(f, va, tr, 5);
  EXPECT_TRUE(std::equal(s.train_half().begin(), s.train_half().end(), swapped.valid_half().begin()));
  EXPECT_TRUE(std::equal(s.valid_half().begin(), s.valid_half().end(), swapped.train_half().begin()));
}

TEST(MetaState, HalvesSumToOne) {
  const LabeledDataset ds = make_toy({200, 30, 0.6, 2});
  const DecisionTree t = DecisionTree::fit(ds.subset(random_balanced_indices(ds, 1)));
  const MetaState s = meta_state(t, ds, make_toy({100, 20, 0.6, 3}), 5);
  EXPECT_NEAR(std::accumulate(s.train_half().begin(), s.train_half().end(), 0.0), 1.0, 1e-9);
  EXPECT_NEAR(std::accumulate(s.valid_half().begin(), s.valid_half().end(), 0.0), 1.0, 1e-9);
}

TEST(GaussianWeight, Examples) {
  EXPECT_NEAR(gaussian_weight(0.3, {0.3, 0.2}), 1.994711, 1e-6);
  for (double d : {0.01, 0.1, 0.37}) EXPECT_EQ(gaussian_weight(0.4 + d, {0.4, 0.2}), gaussian_weight(0.4 - d, {0.4, 0.2}));
  EXPECT_LT(gaussian_weight(0.0 + 10 * 0.05, {0.0, 0.05}), 1e-20);
}

TEST(MetaSample, BalancedAndDeterministic) {
  const LabeledDataset ds = make_toy({300, 25, 0.5, 4});
  const Lookup f{std::vector<double>(ds.size(), 0.3)};
  std::vector<double> scores(ds.size());
  Rng rng(1);
  for (double& s : scores) s = uniform01(rng);
  const IndexList a = meta_sample_indices(ds, scores, {0.4, 0.2}, 10);
  EXPECT_EQ(a, meta_sample_indices(ds, scores, {0.4, 0.2}, 10));
  const LabeledDataset sub = ds.subset(a);
  EXPECT_EQ(sub.minority_count(), 25u);
  EXPECT_EQ(sub.majority_count(), 25u);
}

TEST(MetaSample, SmallMajorityKeepsEverything) {
  const LabeledDataset ds = ids({1, 1, 1, 0, 0});
  EXPECT_EQ(meta_sample_indices(ds, std::vector<double>(5, 0.5), {0.5, 0.2}, 1), (IndexList{0, 1, 2, 3, 4}));
}

TEST(MetaSample, ModelOverload) {
  const LabeledDataset ds = ids({1, 0, 0, 0, 1, 0});
  const LabeledDataset sub = meta_sample(ds, Lookup{{0.9, 0.1, 0.2, 0.9, 0.8, 0.5}}, {0.0, 0.2}, 3);
  EXPECT_EQ(sub.minority_count(), 2u);
  EXPECT_EQ(sub.majority_count(), 2u);
}

// Half the majority has error 0, the other half error 1; with mu = 0 each
// error-1 row carries exp(-12.5) of the weight of an error-0 row. The expected
// number of error-1 picks per call follows from the sequential draw.
TEST(MetaSample, FavoursLowErrorRowsAtMuZero) {
  std::vector<Label> y(25, 0);
  for (std::size_t i = 0; i < 5; ++i) y[i] = 1;
  const LabeledDataset ds = ids(y);
  std::vector<double> scores(25, 0.0);
  for (std::size_t i = 15; i < 25; ++i) scores[i] = 1.0;  // wrong on majority rows 15..24
  for (std::size_t i = 0; i < 5; ++i) scores[i] = 1.0;

  const double w0 = gaussian_weight(0.0, {0.0, 0.2}), w1 = gaussian_weight(1.0, {0.0, 0.2});
  EXPECT_NEAR(w1 / w0, 3.7e-6, 0.05e-6);
  double expected = 0;  // assuming (correctly, to first order) that only error-0 rows leave the urn
  for (int k = 0; k < 5; ++k) expected += 10 * w1 / ((10 - k) * w0 + 10 * w1);

  const int trials = 10000;
  std::size_t bad = 0;
  for (int t = 0; t < trials; ++t) {
    for (std::size_t i : meta_sample_indices(ds, scores, {0.0, 0.2}, derive_seed(91, t))) bad += i >= 15;
  }
  const double mean = expected * trials;  // about 0.2
  EXPECT_LE(static_cast<double>(bad), mean + 6 * std::sqrt(mean) + 1);
}

// Exact inclusion probabilities for two sequential weighted draws from five
// rows, against 10k sampled subsets.
TEST(MetaSample, InclusionMatchesSequentialDrawLaw) {
  std::vector<Label> y{1, 1, 0, 0, 0, 0, 0};
  const LabeledDataset ds = ids(y);
  const std::vector<double> scores{1, 1, 0.05, 0.3, 0.5, 0.7, 0.9};
  const SamplerParams params{0.3, 0.2};
  std::vector<double> w;
  for (std::size_t i = 2; i < 7; ++i) w.push_back(gaussian_weight(scores[i], params));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<double> incl(5, 0.0);
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = 0; b < 5; ++b) {
      if (a == b) continue;
      const double p = w[a] / total * w[b] / (total - w[a]);
      incl[a] += p;
      incl[b] += p;
    }
  }
  const int trials = 10000;
  std::vector<double> hits(5, 0.0);
  for (int t = 0; t < trials; ++t) {
    for (std::size_t i : meta_sample_indices(ds, scores, params, derive_seed(92, t))) {
      if (i >= 2) hits[i - 2] += 1;
    }
  }
  for (std::size_t k = 0; k < 5; ++k) {
    const double sd = std::sqrt(trials * incl[k] * (1 - incl[k]));
    EXPECT_NEAR(hits[k], trials * incl[k], 4 * sd) << k;
  }
}

TEST(RandomBalanced, UniformInclusion) {
  std::vector<Label> y(24, 0);
  for (std::size_t i = 0; i < 6; ++i) y[i] = 1;
  const LabeledDataset ds = ids(y);
  const int trials = 10000;
  std::vector<double> hits(24, 0.0);
  for (int t = 0; t < trials; ++t) {
    const IndexList idx = random_balanced_indices(ds, derive_seed(93, t));
    ASSERT_EQ(idx.size(), 12u);
    for (std::size_t i : idx) hits[i] += 1;
  }
  const double p = 6.0 / 18.0;
  const double sd = std::sqrt(trials * p * (1 - p));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(hits[i], trials);
  for (std::size_t i = 6; i < 24; ++i) EXPECT_NEAR(hits[i], trials * p, 3 * sd) << i;
  EXPECT_EQ(random_balanced_indices(ds, 5), random_balanced_indices(ds, 5));
}

TEST(WeightedUrn, DrawsEveryPositiveWeightOnce) {
  WeightedUrn urn(std::vector<double>{0.5, 0.0, 2.0, 1e-12});
  Rng rng(2);
  std::vector<std::size_t> got;
  for (int i = 0; i < 3; ++i) got.push_back(urn.draw(rng));
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_THROW(WeightedUrn(std::vector<double>{1.0, -1.0}), NumericalError);
}
