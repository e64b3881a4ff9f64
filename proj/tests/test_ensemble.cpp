#include <gtest/gtest.h>

#include <memory>

#include "mesa/ensemble.hpp"

using namespace mesa;

namespace {

class Fixed final : public ProbabilisticClassifier {
 public:
  explicit Fixed(double p) : p_(p) {}
  double predict_proba(std::span<const double>) const override { return p_; }
  std::size_t dims() const override { return 2; }

 private:
  double p_;
};

class CountingSource final : public ActionSource {
 public:
  double action(const MetaState&) override {
    ++calls;
    return 0.5;
  }
  int calls = 0;
};

TrainingTask toy_task(double overlap, Seed seed) {
  Split sp = stratified_split(make_toy({600, 60, overlap, seed}), {0.6, 0.2, 0.2, seed});
  return {std::move(sp.train), std::move(sp.valid)};
}

const std::vector<double> any_row{0.1, 0.2};

}  // namespace

TEST(EnsembleModel, MeanOfMembers) {
  EnsembleModel m;
  m.add(std::make_shared<Fixed>(0.2));
  m.add(std::make_shared<Fixed>(0.8));
  EXPECT_DOUBLE_EQ(m.predict_proba(any_row), 0.5);
}

TEST(EnsembleModel, SingleAndRepeatedMembersAreExact) {
  for (double p : {0.1, 1.0 / 3.0, 0.7071, 0.99}) {
    const auto f = std::make_shared<Fixed>(p);
    EnsembleModel one({f});
    EXPECT_EQ(one.predict_proba(any_row), p);
    EnsembleModel many(std::vector<ClassifierPtr>(7, f));
    EXPECT_EQ(many.predict_proba(any_row), p);
  }
}

TEST(EnsembleModel, StaysInUnitInterval) {
  Rng rng(1);
  for (int it = 0; it < 50; ++it) {
    EnsembleModel m;
    for (int k = 0; k < 9; ++k) m.add(std::make_shared<Fixed>(uniform01(rng)));
    const double p = m.predict_proba(any_row);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  EXPECT_THROW(EnsembleModel().predict_proba(any_row), DataError);
}

TEST(ActionSources, Basics) {
  const MetaState s({0.5, 0.5, 0, 0, 1, 0, 0, 0, 0, 0});
  ConstantActionSource c(0.3);
  EXPECT_EQ(c.action(s), 0.3);
  EXPECT_EQ(c.action(s), 0.3);
  EXPECT_THROW(ConstantActionSource(1.2), ConfigError);
  RandomActionSource r1(4), r2(4);
  for (int i = 0; i < 100; ++i) {
    const double a = r1.action(s);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_EQ(a, r2.action(s));
  }
}

TEST(TrainEnsemble, OneMemberNeverAsksForAnAction) {
  const TrainingTask task = toy_task(0.5, 1);
  CountingSource src;
  const TrainedEnsemble out =
      train_ensemble(task, src, {1, 5, 0.2}, make_learner_factory(LearnerKind::tree), 3);
  EXPECT_EQ(out.model.size(), 1u);
  EXPECT_TRUE(out.trace.empty());
  EXPECT_EQ(src.calls, 0);
}

TEST(TrainEnsemble, TraceHasOneStepPerExtraMember) {
  const TrainingTask task = toy_task(0.5, 1);
  RandomActionSource src(2);
  const TrainedEnsemble out =
      train_ensemble(task, src, {6, 5, 0.2}, make_learner_factory(LearnerKind::tree), 3);
  EXPECT_EQ(out.model.size(), 6u);
  ASSERT_EQ(out.trace.size(), 5u);
  for (std::size_t i = 1; i < out.trace.size(); ++i) {
    EXPECT_EQ(out.trace[i].state, out.trace[i - 1].next_state);
    EXPECT_EQ(out.trace[i].valid_aucprc_before, out.trace[i - 1].valid_aucprc_after);
  }
  EXPECT_EQ(out.trace.back().valid_aucprc_after, aucprc(out.model, task.valid));
}

TEST(TrainEnsemble, Deterministic) {
  const TrainingTask task = toy_task(0.6, 2);
  auto run = [&] {
    ConstantActionSource src(0.4);
    const TrainedEnsemble out =
        train_ensemble(task, src, {4, 5, 0.2}, make_learner_factory(LearnerKind::tree), 8);
    return predict_all(out.model, task.valid);
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainEnsemble, IncrementalScoresMatchTheModel) {
  const TrainingTask task = toy_task(0.6, 3);
  EnsembleEnvironment env(task, make_learner_factory(LearnerKind::tree), 5, 0.2, 4);
  env.reset(11);
  while (!env.done()) env.step(0.6);
  const auto direct = predict_all(env.model(), task.train);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(env.train_scores()[i], direct[i], 1e-15);
  EXPECT_EQ(env.state(), meta_state(env.model(), task.train, task.valid, 5));
  EXPECT_THROW(env.step(0.5), ConfigError);
}

TEST(TrainEnsemble, SeparableToyReachesPerfectValidation) {
  const TrainingTask task = toy_task(0.0, 4);
  ConstantActionSource src(0.5);
  const TrainedEnsemble out =
      train_ensemble(task, src, {5, 5, 0.2}, make_learner_factory(LearnerKind::tree), 1);
  EXPECT_NEAR(out.trace.back().valid_aucprc_after, 1.0, 1e-9);
  EXPECT_NEAR(aucprc(train_random_ensemble(task.train, 5, make_learner_factory(LearnerKind::tree), 1), task.valid),
              1.0, 1e-9);
}

TEST(TrainRandomEnsemble, BalancedMembers) {
  const TrainingTask task = toy_task(0.5, 5);
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  LearnerFactory spy = [&](const LabeledDataset& ds) -> ClassifierPtr {
    seen.emplace_back(ds.minority_count(), ds.majority_count());
    return std::make_shared<Fixed>(0.5);
  };
  const EnsembleModel m = train_random_ensemble(task.train, 7, spy, 2);
  EXPECT_EQ(m.size(), 7u);
  ASSERT_EQ(seen.size(), 7u);
  for (const auto& [p, n] : seen) {
    EXPECT_EQ(p, task.train.minority_count());
    EXPECT_EQ(n, p);
  }
}

TEST(TrainEnsemble, MetaSampledMembersAreBalanced) {
  const TrainingTask task = toy_task(0.5, 6);
  std::size_t unbalanced = 0;
  LearnerFactory spy = [&](const LabeledDataset& ds) -> ClassifierPtr {
    unbalanced += ds.minority_count() != ds.majority_count();
    return std::make_shared<DecisionTree>(DecisionTree::fit(ds));
  };
  RandomActionSource src(3);
  train_ensemble(task, src, {5, 5, 0.2}, spy, 4);
  EXPECT_EQ(unbalanced, 0u);
}
