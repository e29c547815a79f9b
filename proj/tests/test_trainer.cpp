/*
 * Copyright 2026 The pathnas Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pathnas/task.hpp"
#include "pathnas/trainer.hpp"

namespace pathnas {
namespace {

std::vector<RelationalPath> random_paths(std::mt19937_64& rng, std::size_t n, std::size_t len,
                                         std::size_t n_ent, std::size_t n_rel) {
  std::vector<RelationalPath> out(n);
  for (auto& p : out) {
    EntityId s = static_cast<EntityId>(rng() % n_ent);
    for (std::size_t t = 0; t < len; ++t) {
      EntityId o = static_cast<EntityId>(rng() % n_ent);
      p.steps.push_back({s, static_cast<RelationId>(rng() % n_rel), o});
      s = o;
    }
  }
  return out;
}

PathCorpus corpus_of(std::vector<RelationalPath> paths, RelationId pad) {
  PathCorpus c;
  c.pad_relation = pad;
  c.paths = std::move(paths);
  return c;
}

TEST(PathLoss, ZeroEmbeddingsGiveLogE) {
  ParameterStore<double> s(9, 2, 4, 1);
  for (std::size_t k = 0; k < s.size(); ++k) s.value(k).fill(0);
  std::vector<RelationalPath> paths{{{{0, 0, 3}}}, {{{4, 0, 1}}}};
  EXPECT_NEAR(evaluate_loss(preset("transe"), s, all_paths(paths), 1), std::log(9.0), 1e-14);
}

TEST(PathLoss, DuplicatedPathHasTheSameMeanLoss) {
  std::mt19937_64 rng(3);
  auto s = testing::random_store<double>(7, 3, 4, 2);
  auto paths = random_paths(rng, 1, 3, 7, 2);
  const Genotype g = preset("chains");
  const double one = evaluate_loss(g, s, all_paths(paths), 2);
  std::vector<RelationalPath> dup(4, paths[0]);
  EXPECT_NEAR(evaluate_loss(g, s, all_paths(dup), 2), one, 1e-14);
}

TEST(PathLoss, MatchesScalarReference) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 40; ++i) {
    const Genotype g = i < 6 ? preset(kPresetNames[i]) : Genotype::from_index(rng() % Genotype::kCount);
    auto s = testing::random_store<double>(3, 3, 4, rng(), 0.4);
    auto paths = random_paths(rng, 4, 3, 3, 2);
    paths[1].steps[2].relation = 2;  // padded step
    const double got = evaluate_loss(g, s, all_paths(paths), 2);
    const double want = oracle::path_loss(g, s, paths, 2);
    EXPECT_NEAR(got, want, 1e-10) << to_string(g);
  }
}

TEST(PathLoss, MixedLengthsRejected) {
  auto s = testing::random_store<double>(3, 2, 4, 1);
  std::vector<RelationalPath> paths{{{{0, 0, 1}}}, {{{0, 0, 1}, {1, 0, 2}}}};
  EXPECT_THROW(evaluate_loss(preset("transe"), s, all_paths(paths), 1), ShapeError);
}

TEST(StepOnce, ZeroLearningRateLeavesValues) {
  std::mt19937_64 rng(4);
  auto s = testing::random_store<double>(6, 3, 4, 5);
  auto before = s;
  auto paths = random_paths(rng, 5, 3, 6, 2);
  TrainConfig cfg;
  Rng r(1);
  cfg.l2 = 0;
  step_once(preset("rsn"), s, all_paths(paths), 2, cfg, 0.0, r);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_EQ(s.value(k), before.value(k));
}

TEST(StepOnce, SmallStepReducesBatchLoss) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Genotype g = Genotype::from_index(rng() % Genotype::kCount);
    auto s = testing::random_store<double>(12, 4, 8, seed, 0.3);
    auto paths = random_paths(rng, 16, 3, 12, 3);
    auto batch = all_paths(paths);
    TrainConfig cfg;
    cfg.l2 = 0;
    Rng r(seed);
    const double before = step_once(g, s, batch, 3, cfg, 1e-4, r);
    const double after = evaluate_loss(g, s, batch, 3);
    if (std::abs(before - std::log(12.0)) < 1e-12)  // prediction identically zero
      EXPECT_EQ(after, before) << to_string(g);
    else
      EXPECT_LT(after, before) << to_string(g);
  }
}

TEST(Fit, ZeroEpochsReturnsInitialisation) {
  std::mt19937_64 rng(1);
  auto corpus = corpus_of(random_paths(rng, 10, 3, 8, 2), 2);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.dim = 4;
  cfg.rng_seed = 9;
  auto res = fit<double>(preset("transe"), corpus, 8, cfg);
  EXPECT_EQ(res.store, ParameterStore<double>(8, 3, 4, derive_seed(9, "params")));
  EXPECT_TRUE(res.history.empty());
}

TEST(Fit, RepeatedStepOnceEqualsUnshuffledFit) {
  std::mt19937_64 rng(2);
  auto corpus = corpus_of(random_paths(rng, 10, 3, 8, 2), 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.dim = 4;
  cfg.batch_size = 4;
  cfg.shuffle = false;
  cfg.rng_seed = 5;
  const Genotype g = preset("ptranse_mul");
  auto res = fit<double>(g, corpus, 8, cfg);
  ParameterStore<double> s(8, 3, 4, derive_seed(5, "params"));
  Rng r(derive_seed(5, "dropout"));
  for (int e = 0; e < 3; ++e)
    for (std::size_t start = 0; start < 10; start += 4) {
      std::vector<const RelationalPath*> b;
      for (std::size_t i = start; i < std::min<std::size_t>(10, start + 4); ++i)
        b.push_back(&corpus.paths[i]);
      step_once(g, s, b, 2, cfg, cfg.lr, r);
    }
  EXPECT_EQ(res.store, s);
}

TEST(Fit, EarlyStoppingKeepsBestStore) {
  std::mt19937_64 rng(2);
  auto corpus = corpus_of(random_paths(rng, 10, 3, 8, 2), 2);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.dim = 4;
  cfg.patience = 2;
  int calls = 0;
  std::optional<ParameterStore<double>> at_best;
  ValidHook<double> hook = [&](const ParameterStore<double>& s) {
    ++calls;
    if (calls == 3) at_best = s;
    return calls == 3 ? 1.0 : 0.0;
  };
  auto res = fit<double>(preset("transe"), corpus, 8, cfg, hook);
  EXPECT_EQ(calls, 5);
  EXPECT_EQ(res.history.size(), 5u);
  EXPECT_EQ(res.best_epoch, 3u);
  EXPECT_EQ(*res.best_metric, 1.0);
  EXPECT_EQ(res.store, *at_best);
}

TEST(Fit, EvalEveryAndFinalEpoch) {
  std::mt19937_64 rng(2);
  auto corpus = corpus_of(random_paths(rng, 10, 3, 8, 2), 2);
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.dim = 4;
  cfg.eval_every = 3;
  std::vector<std::size_t> seen;
  std::size_t epoch = 0;
  ValidHook<double> hook = [&](const ParameterStore<double>&) { return double(++epoch); };
  auto res = fit<double>(preset("transe"), corpus, 8, cfg, hook);
  for (const auto& r : res.history)
    if (r.valid_metric) seen.push_back(r.epoch);
  EXPECT_EQ(seen, (std::vector<std::size_t>{3, 6, 7}));
}

TEST(Fit, LearningRateDecays) {
  std::mt19937_64 rng(2);
  auto corpus = corpus_of(random_paths(rng, 6, 2, 5, 2), 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.dim = 4;
  cfg.decay = 0.5;
  auto res = fit<double>(preset("transe"), corpus, 5, cfg);
  EXPECT_EQ(res.history[0].lr, 1e-3);
  EXPECT_EQ(res.history[2].lr, 2.5e-4);
}

TEST(Fit, NonFiniteValuesRaiseTrainingFault) {
  std::mt19937_64 rng(2);
  auto corpus = corpus_of(random_paths(rng, 6, 2, 5, 2), 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.dim = 4;
  ParameterStore<double> s(5, 3, 4, 1);
  s.value(kEntity)(0, 0) = std::numeric_limits<double>::infinity();
  const Genotype g = preset("complex");
  try {
    fit_from(g, s, corpus, cfg);
    FAIL() << "expected a training fault";
  } catch (const TrainingFault& f) {
    EXPECT_EQ(f.genotype(), to_string(g));
    EXPECT_EQ(f.epoch(), 1u);
  }
}

TEST(TrainConfig, RangeValidation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate_ranges());
  c.batch_size = 100;
  EXPECT_THROW(c.validate_ranges(), ConfigError);
  c = {};
  c.lr = 0.01;
  EXPECT_THROW(c.validate_ranges(), ConfigError);
  c = {};
  c.dropout = 0.7;
  EXPECT_THROW(c.validate_ranges(), ConfigError);
  c = {};
  c.dim = 7;
  EXPECT_THROW(c.validate(), ConfigError);
}

class CountriesTraining : public ::testing::Test {
 protected:
  static TaskData& task() {
    static TaskData t = [] {
      WalkConfig wc;
      wc.rng_seed = 1;
      return prepare_task(load_countries(testing::data_dir() / "countries", CountriesTask::S1), wc);
    }();
    return t;
  }
};

TEST_F(CountriesTraining, LossDecreasesOverFirstFiveEpochs) {
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig cfg;
    cfg.dim = 32;
    cfg.epochs = 5;
    cfg.batch_size = 128;
    cfg.rng_seed = seed;
    auto res = fit<double>(preset("ptranse_add"), task().corpus, task().num_entities(), cfg);
    ASSERT_EQ(res.history.size(), 5u);
    for (std::size_t e = 1; e < 5; ++e)
      EXPECT_LT(res.history[e].mean_loss, res.history[e - 1].mean_loss) << "seed " << seed;
  }
}

TEST_F(CountriesTraining, SameSeedGivesIdenticalHistory) {
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 3;
  cfg.dropout = 0.2;
  cfg.rng_seed = 4;
  ValidHook<double> hook = [&](const ParameterStore<double>& s) {
    return validation_metric(task(), preset("complex"), s);
  };
  auto a = fit<double>(preset("complex"), task().corpus, task().num_entities(), cfg, hook);
  auto b = fit<double>(preset("complex"), task().corpus, task().num_entities(), cfg, hook);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.store, b.store);
}

TEST_F(CountriesTraining, SinglePrecisionTrains) {
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 3;
  auto res = fit<float>(preset("transe"), task().corpus, task().num_entities(), cfg);
  EXPECT_LT(res.history.back().mean_loss, res.history.front().mean_loss);
}

}  // namespace
}  // namespace pathnas
