#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mesa/dataset.hpp"
#include "mesa/error.hpp"
#include "mesa/learners.hpp"
#include "mesa/metasampling.hpp"
#include "mesa/metrics.hpp"
#include "mesa/random.hpp"

namespace mesa {

// Cascade ensemble; prediction is the mean of member probabilities.
class EnsembleModel {
 public:
  EnsembleModel() = default;
  explicit EnsembleModel(std::vector<ClassifierPtr> members) : members_(std::move(members)) {}

  void add(ClassifierPtr member) { members_.push_back(std::move(member)); }

  // Running mean in member order, so k identical members reproduce the single
  // member's output bit for bit.
  double predict_proba(std::span<const double> row) const {
    if (members_.empty()) throw DataError(DataErrc::invalid_argument, "ensemble has no members");
    double mean = 0.0;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      mean += (members_[i]->predict_proba(row) - mean) / static_cast<double>(i + 1);
    }
    return mean;
  }

  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  const std::vector<ClassifierPtr>& members() const noexcept { return members_; }

 private:
  std::vector<ClassifierPtr> members_;
};

// Source of the Gaussian centre mu for each ensemble step.
class ActionSource {
 public:
  virtual ~ActionSource() = default;
  virtual double action(const MetaState& state) = 0;
};

class ConstantActionSource final : public ActionSource {
 public:
  explicit ConstantActionSource(double mu) : mu_(mu) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("constant action must lie in [0,1]");
  }
  double action(const MetaState&) override { return mu_; }

 private:
  double mu_;
};

class RandomActionSource final : public ActionSource {
 public:
  explicit RandomActionSource(Seed seed) : rng_(seed) {}
  double action(const MetaState&) override { return uniform01(rng_); }

 private:
  Rng rng_;
};

struct TrainingTask {
  LabeledDataset train;
  LabeledDataset valid;
};

struct EnsembleStep {
  MetaState state;
  double action = 0.0;
  double valid_aucprc_before = 0.0;
  double valid_aucprc_after = 0.0;
  MetaState next_state;

  double reward() const { return valid_aucprc_after - valid_aucprc_before; }
};

using EnsembleTrace = std::vector<EnsembleStep>;

// The ensemble-training process exposed one member at a time. reset() fits
// member 1 on a random balanced subset; each step(mu) fits the next member on a
// meta-sampled subset and reports the change in validation AUCPRC. Scores of
// the current ensemble on both sets are maintained incrementally.
class EnsembleEnvironment {
 public:
  EnsembleEnvironment(const TrainingTask& task, LearnerFactory learner, std::size_t bins, double sigma,
                      std::size_t ensemble_size)
      : task_(&task), learner_(std::move(learner)), bins_(bins), sigma_(sigma), k_(ensemble_size) {
    check_bins(bins_);
    if (k_ < 1) throw ConfigError("ensemble size must be at least 1");
    if (!(sigma_ > 0.0)) throw ConfigError("sigma must be positive");
    if (!task.train.has_both_classes() || !task.valid.has_both_classes()) {
      throw DataError(DataErrc::single_class, "train and validation sets need both classes");
    }
    if (task.train.dims() != task.valid.dims()) {
      throw DataError(DataErrc::dimension_mismatch, "train/validation feature counts differ");
    }
  }

  void reset(Seed seed) {
    seed_ = seed;
    model_ = EnsembleModel();
    train_scores_.assign(task_->train.size(), 0.0);
    valid_scores_.assign(task_->valid.size(), 0.0);
    add_member(task_->train.subset(random_balanced_indices(task_->train, member_seed(0))));
  }

  bool done() const noexcept { return model_.size() >= k_; }
  std::size_t members() const noexcept { return model_.size(); }
  std::size_t ensemble_size() const noexcept { return k_; }

  MetaState state() const {
    return meta_state_from_scores(train_scores_, task_->train.labels(), valid_scores_,
                                  task_->valid.labels(), bins_);
  }

  double valid_aucprc() const { return valid_aucprc_; }

  EnsembleStep step(double mu) {
    if (done()) throw ConfigError("environment step after the final member");
    if (!(mu >= 0.0 && mu <= 1.0)) throw NumericalError("action outside [0,1]");
    EnsembleStep out;
    out.state = state();
    out.action = mu;
    out.valid_aucprc_before = valid_aucprc_;
    const IndexList idx =
        meta_sample_indices(task_->train, train_scores_, {mu, sigma_}, member_seed(model_.size()));
    add_member(task_->train.subset(idx));
    out.valid_aucprc_after = valid_aucprc_;
    out.next_state = state();
    return out;
  }

  const EnsembleModel& model() const noexcept { return model_; }
  std::span<const double> train_scores() const noexcept { return train_scores_; }
  std::span<const double> valid_scores() const noexcept { return valid_scores_; }

 private:
  Seed member_seed(std::size_t t) const { return derive_seed(seed_, 0xe115u, t); }

  void add_member(const LabeledDataset& subset) {
    ClassifierPtr f = learner_(subset);
    model_.add(f);
    const double t = static_cast<double>(model_.size());
    for (std::size_t i = 0; i < train_scores_.size(); ++i) {
      train_scores_[i] += (f->predict_proba(task_->train.row(i)) - train_scores_[i]) / t;
    }
    for (std::size_t i = 0; i < valid_scores_.size(); ++i) {
      valid_scores_[i] += (f->predict_proba(task_->valid.row(i)) - valid_scores_[i]) / t;
    }
    valid_aucprc_ = aucprc(valid_scores_, task_->valid.labels());
  }

  const TrainingTask* task_;
  LearnerFactory learner_;
  std::size_t bins_;
  double sigma_;
  std::size_t k_;
  Seed seed_ = 0;
  EnsembleModel model_;
  std::vector<double> train_scores_, valid_scores_;
  double valid_aucprc_ = 0.0;
};

struct EnsembleConfig {
  std::size_t ensemble_size = 10;
  std::size_t bins = default_bins;
  double sigma = default_sigma;
};

struct TrainedEnsemble {
  EnsembleModel model;
  EnsembleTrace trace;
};

// Member 1 on a random balanced subset; member t+1 on a subset meta-sampled
// around the action chosen for the meta-state of F_t.
inline TrainedEnsemble train_ensemble(const TrainingTask& task, ActionSource& actions,
                                      const EnsembleConfig& cfg, const LearnerFactory& learner,
                                      Seed seed) {
  EnsembleEnvironment env(task, learner, cfg.bins, cfg.sigma, cfg.ensemble_size);
  env.reset(seed);
  EnsembleTrace trace;
  while (!env.done()) trace.push_back(env.step(actions.action(env.state())));
  return {env.model(), std::move(trace)};
}

// Uniform under-sampling bagging: every member on an independent random
// balanced subset.
inline EnsembleModel train_random_ensemble(const LabeledDataset& train, std::size_t ensemble_size,
                                           const LearnerFactory& learner, Seed seed) {
  if (ensemble_size < 1) throw ConfigError("ensemble size must be at least 1");
  EnsembleModel model;
  for (std::size_t t = 0; t < ensemble_size; ++t) {
    model.add(learner(random_balanced_subset(train, derive_seed(seed, 0xbadu, t))));
  }
  return model;
}

}  // namespace mesa
