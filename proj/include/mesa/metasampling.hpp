#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mesa/dataset.hpp"
#include "mesa/error.hpp"
#include "mesa/metrics.hpp"
#include "mesa/random.hpp"

namespace mesa {

inline constexpr std::size_t default_bins = 5;
inline constexpr double default_sigma = 0.2;
inline constexpr double sampling_weight_floor = 1e-12;

inline void check_bins(std::size_t bins) {
  if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
}

// Fraction of errors per bin. Bin i covers [i/b, (i+1)/b); the last bin is
// closed so that an error of exactly 1 is counted.
inline std::vector<double> error_histogram(std::span<const double> errors, std::size_t bins) {
  check_bins(bins);
  if (errors.empty()) throw DataError(DataErrc::invalid_argument, "empty error vector");
  const double b = static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double e : errors) {
    if (!(e >= 0.0 && e <= 1.0)) throw DataError(DataErrc::invalid_argument, "error outside [0,1]");
    auto i = std::min(static_cast<std::size_t>(e * b), bins - 1);
    // Snap to the bin whose edges, computed as i/b, actually bracket e.
    while (i > 0 && e < static_cast<double>(i) / b) --i;
    while (i + 1 < bins && e >= static_cast<double>(i + 1) / b) ++i;
    ++counts[i];
  }
  std::vector<double> hist(bins);
  const double n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < bins; ++i) hist[i] = static_cast<double>(counts[i]) / n;
  return hist;
}

// Concatenated [train histogram : validation histogram], length 2b.
class MetaState {
 public:
  MetaState() = default;
  explicit MetaState(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 4 || values_.size() % 2 != 0) {
      throw DataError(DataErrc::dimension_mismatch, "meta-state length must be 2b with b >= 2");
    }
  }

  static MetaState from_halves(std::span<const double> train, std::span<const double> valid) {
    if (train.size() != valid.size()) {
      throw DataError(DataErrc::dimension_mismatch, "histogram halves differ in length");
    }
    std::vector<double> v(train.begin(), train.end());
    v.insert(v.end(), valid.begin(), valid.end());
    return MetaState(std::move(v));
  }

  std::size_t bins() const noexcept { return values_.size() / 2; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> train_half() const { return {values_.data(), bins()}; }
  std::span<const double> valid_half() const { return {values_.data() + bins(), bins()}; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const MetaState&, const MetaState&) = default;

 private:
  std::vector<double> values_;
};

inline MetaState meta_state_from_scores(std::span<const double> train_scores,
                                        std::span<const Label> train_labels,
                                        std::span<const double> valid_scores,
                                        std::span<const Label> valid_labels, std::size_t bins) {
  const auto et = classification_errors(train_scores, train_labels);
  const auto ev = classification_errors(valid_scores, valid_labels);
  return MetaState::from_halves(error_histogram(et, bins), error_histogram(ev, bins));
}

template <Scorer M>
MetaState meta_state(const M& model, const LabeledDataset& train, const LabeledDataset& valid,
                     std::size_t bins) {
  return meta_state_from_scores(predict_all(model, train), train.labels(), predict_all(model, valid),
                                valid.labels(), bins);
}

struct SamplerParams {
  double mu = 0.5;
  double sigma = default_sigma;

  void validate() const {
    if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("mu must lie in [0,1]");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be positive");
  }
};

// Gaussian density with mean mu and standard deviation sigma, evaluated at x.
inline double gaussian_weight(double x, const SamplerParams& p) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  const double z = (x - p.mu) / p.sigma;
  return inv_sqrt_2pi / p.sigma * std::exp(-0.5 * z * z);
}

// Weighted sampling without replacement, one draw at a time with the remaining
// weights renormalised after each draw. A Fenwick tree keeps each draw at
// O(log n).
class WeightedUrn {
 public:
  explicit WeightedUrn(std::span<const double> weights)
      : n_(weights.size()), tree_(weights.size() + 1, 0.0), weight_(weights.begin(), weights.end()) {
    for (std::size_t i = 0; i < n_; ++i) {
      if (!(weight_[i] >= 0.0) || !std::isfinite(weight_[i])) {
        throw NumericalError("sampling weight is negative or non-finite");
      }
      add(i, weight_[i]);
    }
    remaining_ = n_;
  }

  std::size_t remaining() const noexcept { return remaining_; }

  std::size_t draw(Rng& rng) {
    if (remaining_ == 0) throw DataError(DataErrc::invalid_argument, "urn is empty");
    const double total = prefix(n_);
    double target = uniform01(rng) * total;
    // Descend the Fenwick tree to the first index whose prefix sum exceeds target.
    std::size_t pos = 0;
    std::size_t step = 1;
    while ((step << 1) <= n_) step <<= 1;
    for (; step > 0; step >>= 1) {
      const std::size_t next = pos + step;
      if (next <= n_ && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    std::size_t idx = std::min(pos, n_ - 1);
    // Rounding can land on an exhausted slot; fall back to the nearest live one.
    if (weight_[idx] <= 0.0) idx = nearest_live(idx);
    add(idx, -weight_[idx]);
    weight_[idx] = 0.0;
    --remaining_;
    return idx;
  }

 private:
  void add(std::size_t i, double delta) {
    for (std::size_t k = i + 1; k <= n_; k += k & (~k + 1)) tree_[k] += delta;
  }
  double prefix(std::size_t count) const {
    double s = 0.0;
    for (std::size_t k = count; k > 0; k -= k & (~k + 1)) s += tree_[k];
    return s;
  }
  std::size_t nearest_live(std::size_t idx) const {
    for (std::size_t d = 1; d < n_; ++d) {
      if (idx >= d && weight_[idx - d] > 0.0) return idx - d;
      if (idx + d < n_ && weight_[idx + d] > 0.0) return idx + d;
    }
    throw NumericalError("no positive weight left in urn");
  }

  std::size_t n_;
  std::vector<double> tree_;
  std::vector<double> weight_;
  std::size_t remaining_ = 0;
};

// Normalised meta-sampling weights over the majority rows of `train`, given
// ensemble scores for every training row.
inline std::vector<double> meta_sampling_weights(std::span<const double> train_scores,
                                                 const LabeledDataset& train,
                                                 std::span<const std::size_t> majority,
                                                 const SamplerParams& params) {
  std::vector<double> w(majority.size());
  double total = 0.0;
  for (std::size_t k = 0; k < majority.size(); ++k) {
    const std::size_t i = majority[k];
    const double err = std::abs(train_scores[i] - static_cast<double>(train.label(i)));
    w[k] = std::max(gaussian_weight(err, params), sampling_weight_floor);
    total += w[k];
  }
  for (double& x : w) x /= total;
  return w;
}

namespace detail {
inline void check_sampling_input(const LabeledDataset& train) {
  if (!train.has_both_classes()) {
    throw DataError(DataErrc::empty_class, "sampling needs both classes in the training set");
  }
}
}  // namespace detail

// Row indices (sorted) of a balanced subset: |P| majority rows drawn by
// Gaussian-weighted sampling without replacement, plus every minority row.
inline IndexList meta_sample_indices(const LabeledDataset& train, std::span<const double> train_scores,
                                     const SamplerParams& params, Seed seed) {
  detail::check_sampling_input(train);
  params.validate();
  if (train_scores.size() != train.size()) {
    throw DataError(DataErrc::dimension_mismatch, "one score per training row required");
  }
  IndexList minority = train.minority_indices();
  IndexList majority = train.majority_indices();
  IndexList out = minority;
  if (majority.size() <= minority.size()) {
    out.insert(out.end(), majority.begin(), majority.end());
  } else {
    WeightedUrn urn(meta_sampling_weights(train_scores, train, majority, params));
    Rng rng(seed);
    for (std::size_t k = 0; k < minority.size(); ++k) out.push_back(majority[urn.draw(rng)]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <Scorer M>
LabeledDataset meta_sample(const LabeledDataset& train, const M& model, const SamplerParams& params,
                           Seed seed) {
  const auto idx = meta_sample_indices(train, predict_all(model, train), params, seed);
  return train.subset(idx);
}

// All minority rows plus a uniform draw (without replacement) of |P| majority rows.
inline IndexList random_balanced_indices(const LabeledDataset& train, Seed seed) {
  detail::check_sampling_input(train);
  IndexList minority = train.minority_indices();
  IndexList majority = train.majority_indices();
  IndexList out = minority;
  const std::size_t m = std::min(minority.size(), majority.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(majority[i], majority[i + uniform_index(rng, majority.size() - i)]);
    out.push_back(majority[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline LabeledDataset random_balanced_subset(const LabeledDataset& train, Seed seed) {
  return train.subset(random_balanced_indices(train, seed));
}

}  // namespace mesa
