#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "mesa/dataset.hpp"
#include "mesa/error.hpp"

namespace mesa {

template <typename M>
concept Scorer = requires(const M& m, std::span<const double> row) {
  { m.predict_proba(row) } -> std::convertible_to<double>;
};

template <Scorer M>
std::vector<double> predict_all(const M& model, const LabeledDataset& ds) {
  std::vector<double> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = model.predict_proba(ds.row(i));
  return out;
}

// e_i = |F(x_i) - y_i| from precomputed scores.
inline std::vector<double> classification_errors(std::span<const double> scores,
                                                 std::span<const Label> labels) {
  if (scores.size() != labels.size()) {
    throw DataError(DataErrc::dimension_mismatch, "scores and labels differ in length");
  }
  std::vector<double> e(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    e[i] = std::abs(scores[i] - static_cast<double>(labels[i]));
  }
  return e;
}

template <Scorer M>
std::vector<double> classification_errors(const M& model, const LabeledDataset& ds) {
  if (ds.empty()) throw DataError(DataErrc::invalid_argument, "empty dataset");
  return classification_errors(predict_all(model, ds), ds.labels());
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  double threshold = 0.0;
};

using PrCurve = std::vector<PrPoint>;

namespace detail {
inline void check_pr_inputs(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) {
    throw DataError(DataErrc::dimension_mismatch, "scores and labels differ in length");
  }
  std::size_t pos = 0;
  for (Label y : labels) pos += (y == 1);
  if (pos == 0 || pos == labels.size()) {
    throw DataError(DataErrc::single_class, "precision-recall needs both classes");
  }
}
}  // namespace detail

// One point per distinct score, in descending-score (ascending-recall) order.
// Rows with tied scores enter the positive set together.
inline PrCurve pr_curve(std::span<const double> scores, std::span<const Label> labels) {
  detail::check_pr_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t total_pos = 0;
  for (Label y : labels) total_pos += (y == 1);

  PrCurve curve;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      tp += labels[order[i]];
      ++seen;
      ++i;
    }
    curve.push_back({static_cast<double>(tp) / static_cast<double>(total_pos),
                     static_cast<double>(tp) / static_cast<double>(seen), s});
  }
  return curve;
}

// Average precision: sum over distinct thresholds of (R_n - R_{n-1}) * P_n with
// R_0 = 0.
inline double aucprc(std::span<const double> scores, std::span<const Label> labels) {
  const PrCurve curve = pr_curve(scores, labels);
  double ap = 0.0, prev_recall = 0.0;
  for (const PrPoint& p : curve) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

template <Scorer M>
double aucprc(const M& model, const LabeledDataset& ds) {
  return aucprc(predict_all(model, ds), ds.labels());
}

}  // namespace mesa
