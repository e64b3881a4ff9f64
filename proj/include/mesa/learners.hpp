#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mesa/dataset.hpp"
#include "mesa/error.hpp"

namespace mesa {

// A fitted binary classifier returning P(y = 1 | x) in [0, 1].
class ProbabilisticClassifier {
 public:
  virtual ~ProbabilisticClassifier() = default;
  virtual double predict_proba(std::span<const double> row) const = 0;
  virtual std::size_t dims() const = 0;

 protected:
  void check_dims(std::span<const double> row) const {
    if (row.size() != dims()) {
      throw DataError(DataErrc::dimension_mismatch,
                      "row has " + std::to_string(row.size()) + " features, model expects " +
                          std::to_string(dims()));
    }
  }
};

using ClassifierPtr = std::shared_ptr<const ProbabilisticClassifier>;
using LearnerFactory = std::function<ClassifierPtr(const LabeledDataset&)>;

// ---------------------------------------------------------------------------
// CART decision tree
// ---------------------------------------------------------------------------

// Depth-unlimited Gini CART. A node becomes a leaf when it is pure, holds fewer
// than two rows, or all rows share identical feature values. Otherwise the
// lowest weighted-Gini split is taken even when it does not reduce impurity
// (this is what lets axis splits solve XOR). Ties go to the lowest feature
// index, then the lowest threshold. Thresholds are midpoints between
// consecutive distinct values; rows with value < threshold go left.
class DecisionTree final : public ProbabilisticClassifier {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double positive_fraction = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
  };

  static DecisionTree fit(const LabeledDataset& ds) {
    if (ds.empty()) throw DataError(DataErrc::empty_class, "cannot fit a tree on an empty dataset");
    DecisionTree tree;
    tree.dims_ = ds.dims();
    IndexList rows(ds.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Builder builder{ds, tree.nodes_, {}};
    builder.build(rows);
    return tree;
  }

  double predict_proba(std::span<const double> row) const override {
    check_dims(row);
    return nodes_[leaf_index(row)].positive_fraction;
  }

  std::size_t leaf_index(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const Node& n = nodes_[i];
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                          : n.right);
    }
    return i;
  }

  std::size_t dims() const override { return dims_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  std::size_t depth() const { return nodes_.empty() ? 0 : depth_from(0); }

 private:
  struct Builder {
    const LabeledDataset& ds;
    std::vector<Node>& nodes;
    std::vector<std::pair<double, Label>> scratch;

    static double gini(double pos, double total) {
      if (total <= 0) return 0.0;
      const double p = pos / total;
      return 2.0 * p * (1.0 - p);
    }

    std::int32_t build(IndexList& rows) {
      const auto id = static_cast<std::int32_t>(nodes.size());
      nodes.emplace_back();
      std::size_t pos = 0;
      for (std::size_t r : rows) pos += ds.label(r);
      const double n = static_cast<double>(rows.size());
      nodes[id].positive_fraction = static_cast<double>(pos) / n;
      if (pos == 0 || pos == rows.size() || rows.size() < 2) return id;

      int best_feature = -1;
      double best_threshold = 0.0;
      double best_score = INFINITY;
      for (std::size_t j = 0; j < ds.dims(); ++j) {
        scratch.clear();
        for (std::size_t r : rows) scratch.emplace_back(ds.at(r, j), ds.label(r));
        std::sort(scratch.begin(), scratch.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double left_pos = 0;
        for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
          left_pos += scratch[i].second;
          if (!(scratch[i].first < scratch[i + 1].first)) continue;
          const double nl = static_cast<double>(i + 1);
          const double nr = n - nl;
          const double score =
              nl * gini(left_pos, nl) + nr * gini(static_cast<double>(pos) - left_pos, nr);
          // Strict comparison keeps the first (lowest feature, lowest threshold) among ties.
          if (score < best_score) {
            best_score = score;
            best_feature = static_cast<int>(j);
            double t = 0.5 * (scratch[i].first + scratch[i + 1].first);
            if (!(t < scratch[i + 1].first)) t = scratch[i].first;
            best_threshold = t;
          }
        }
      }
      if (best_feature < 0) return id;  // all rows identical

      IndexList left, right;
      for (std::size_t r : rows) {
        (ds.at(r, static_cast<std::size_t>(best_feature)) < best_threshold ? left : right).push_back(r);
      }
      rows.clear();
      rows.shrink_to_fit();
      nodes[id].feature = best_feature;
      nodes[id].threshold = best_threshold;
      const std::int32_t l = build(left);
      nodes[id].left = l;
      const std::int32_t r = build(right);
      nodes[id].right = r;
      return id;
    }
  };

  std::size_t depth_from(std::size_t i) const {
    const Node& n = nodes_[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)),
                        depth_from(static_cast<std::size_t>(n.right)));
  }

  std::size_t dims_ = 0;
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

class GaussianNB final : public ProbabilisticClassifier {
 public:
  static constexpr double var_smoothing = 1e-9;

  static GaussianNB fit(const LabeledDataset& ds) {
    if (!ds.has_both_classes()) {
      throw DataError(DataErrc::empty_class, "Gaussian NB needs rows of both classes");
    }
    const std::size_t d = ds.dims();
    GaussianNB m;
    m.dims_ = d;
    const double n = static_cast<double>(ds.size());

    // Overall feature variances set the smoothing floor.
    std::vector<double> mean_all(d, 0.0), var_all(d, 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) mean_all[j] += ds.at(i, j);
    }
    for (double& v : mean_all) v /= n;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double dv = ds.at(i, j) - mean_all[j];
        var_all[j] += dv * dv;
      }
    }
    double max_var = 0.0;
    for (double& v : var_all) max_var = std::max(max_var, v / n);
    m.floor_ = max_var > 0 ? var_smoothing * max_var : var_smoothing;

    for (Label y : {Label{0}, Label{1}}) {
      ClassStats& cs = m.classes_[y];
      const IndexList idx = ds.indices_of(y);
      const double nc = static_cast<double>(idx.size());
      cs.log_prior = std::log(nc / n);
      cs.mean.assign(d, 0.0);
      cs.var.assign(d, 0.0);
      for (std::size_t i : idx) {
        for (std::size_t j = 0; j < d; ++j) cs.mean[j] += ds.at(i, j);
      }
      for (double& v : cs.mean) v /= nc;
      for (std::size_t i : idx) {
        for (std::size_t j = 0; j < d; ++j) {
          const double dv = ds.at(i, j) - cs.mean[j];
          cs.var[j] += dv * dv;
        }
      }
      for (double& v : cs.var) v = std::max(v / nc, m.floor_);
    }
    return m;
  }

  double predict_proba(std::span<const double> row) const override {
    check_dims(row);
    const double l0 = joint_log_likelihood(classes_[0], row);
    const double l1 = joint_log_likelihood(classes_[1], row);
    // Posterior of class 1 via a numerically stable logistic of the log-odds.
    const double z = l1 - l0;
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  std::size_t dims() const override { return dims_; }
  double prior(Label y) const { return std::exp(classes_[y].log_prior); }
  double mean(Label y, std::size_t j) const { return classes_[y].mean[j]; }
  double variance(Label y, std::size_t j) const { return classes_[y].var[j]; }
  double variance_floor() const { return floor_; }

 private:
  struct ClassStats {
    double log_prior = 0.0;
    std::vector<double> mean, var;
  };

  static double joint_log_likelihood(const ClassStats& cs, std::span<const double> row) {
    constexpr double log_2pi = 1.83787706640934548356;
    double acc = cs.log_prior;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double dv = row[j] - cs.mean[j];
      acc -= 0.5 * (log_2pi + std::log(cs.var[j]) + dv * dv / cs.var[j]);
    }
    return acc;
  }

  std::size_t dims_ = 0;
  double floor_ = var_smoothing;
  ClassStats classes_[2];
};

enum class LearnerKind { tree, gnb };

inline LearnerKind parse_learner(const std::string& tag) {
  if (tag == "tree") return LearnerKind::tree;
  if (tag == "gnb") return LearnerKind::gnb;
  throw ConfigError("unknown base learner '" + tag + "' (expected tree or gnb)");
}

inline const char* to_string(LearnerKind kind) { return kind == LearnerKind::tree ? "tree" : "gnb"; }

inline LearnerFactory make_learner_factory(LearnerKind kind) {
  if (kind == LearnerKind::gnb) {
    return [](const LabeledDataset& ds) -> ClassifierPtr {
      return std::make_shared<GaussianNB>(GaussianNB::fit(ds));
    };
  }
  return [](const LabeledDataset& ds) -> ClassifierPtr {
    return std::make_shared<DecisionTree>(DecisionTree::fit(ds));
  };
}

}  // namespace mesa
