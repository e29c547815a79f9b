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

#include <numeric>

#include "oracles.hpp"
#include "pathnas/controller.hpp"

namespace pathnas {
namespace {

double total(const std::vector<double>& p) { return std::accumulate(p.begin(), p.end(), 0.0); }

TEST(Sample, DegenerateComponentAlwaysPicksItsCategory) {
  Controller c;
  c.set_component(0, {1, 0, 0, 0});
  for (int i = 0; i < 500; ++i) EXPECT_EQ(c.sample().macro.in_r, Connection(0));
}

TEST(Sample, UniformFrequencies) {
  ControllerConfig cfg;
  cfg.rng_seed = 3;
  Controller c(cfg);
  const int n = 100000;
  std::array<std::vector<double>, kNumComponents> counts;
  for (std::size_t k = 0; k < kNumComponents; ++k) counts[k].assign(kComponentSizes[k], 0);
  for (int i = 0; i < n; ++i) {
    auto ch = components(c.sample());
    for (std::size_t k = 0; k < kNumComponents; ++k) counts[k][ch[k]] += 1;
  }
  for (std::size_t k = 0; k < kNumComponents; ++k)
    for (double x : counts[k]) EXPECT_NEAR(x / n, 1.0 / kComponentSizes[k], 0.01);
}

TEST(Sample, PinnedGenotypeIsReturnedUnchanged) {
  Controller c;
  const Genotype g = preset("rsn");
  EXPECT_EQ(c.sample(g.macro, g.micro), g);
  EXPECT_EQ(c.sample(g.macro).macro, g.macro);
  EXPECT_EQ(c.sample(std::nullopt, g.micro).micro, g.micro);
}

TEST(Update, HandDerivedSingleStep) {
  // K = 2 through a single link component: theta = (0.5, 0.5), m = 1,
  // category 0 sampled with reward 1, no baseline, rho = 0.1.
  ControllerConfig cfg;
  cfg.m_samples = 1;
  cfg.baseline = Baseline::None;
  cfg.rho_micro = 0.1;
  Controller c(cfg);
  Genotype g;
  g.micro.links[0] = LinkKind::Weight;  // category 0 of the first link component
  ASSERT_EQ(components(g)[7], 0u);
  const ControllerSample s[] = {{g, 1.0}};
  c.update(s, ComponentGroup::Micro);
  EXPECT_NEAR(c.component(7).probs[0], 0.5 + 0.1 * (1 - 0.5) * (1 - 0.5) * 1.0, 1e-12);
  EXPECT_NEAR(c.component(7).probs[0], 0.525, 1e-12);
  EXPECT_NEAR(c.component(7).probs[1], 0.475, 1e-12);
}

TEST(Update, ZeroRewardsLeaveThetaUnchanged) {
  ControllerConfig cfg;
  cfg.baseline = Baseline::None;
  Controller c(cfg), before(cfg);
  const ControllerSample s[] = {{c.sample(), 0.0}, {c.sample(), 0.0}};
  c.update(s, ComponentGroup::All);
  for (std::size_t k = 0; k < kNumComponents; ++k)
    EXPECT_EQ(c.component(k).probs, before.component(k).probs);
}

TEST(Update, EqualRewardsCancelUnderBatchMean) {
  Controller c;
  std::vector<std::vector<double>> before;
  for (std::size_t k = 0; k < kNumComponents; ++k) before.push_back(c.component(k).probs);
  const ControllerSample s[] = {{c.sample(), 0.7}, {c.sample(), 0.7}};
  c.update(s, ComponentGroup::All);
  for (std::size_t k = 0; k < kNumComponents; ++k) EXPECT_EQ(c.component(k).probs, before[k]);
}

TEST(Update, DegenerateControllerDoesNotMove) {
  Controller c;
  for (std::size_t k = 0; k < kNumComponents; ++k) {
    std::vector<double> p(kComponentSizes[k], 0.0);
    p[0] = 1.0;
    c.set_component(k, p);
  }
  Genotype a = c.sample(), b = c.sample();
  EXPECT_EQ(a, b);
  const ControllerSample s[] = {{a, 0.2}, {b, 0.9}};
  c.update(s, ComponentGroup::All);
  for (std::size_t k = 0; k < kNumComponents; ++k) {
    std::vector<double> want(kComponentSizes[k], 0.0);
    want[0] = 1.0;
    project_to_simplex(want, ControllerConfig{}.floor);
    EXPECT_EQ(c.component(k).probs, want);
  }
}

TEST(Update, GroupRestrictsComponents) {
  Controller c;
  const ControllerSample s[] = {{preset("transe"), 1.0}, {preset("rsn"), 0.0}};
  c.update(s, ComponentGroup::Macro);
  for (std::size_t k = kNumMacroComponents; k < kNumComponents; ++k)
    for (double x : c.component(k).probs) EXPECT_EQ(x, 1.0 / kComponentSizes[k]);
  EXPECT_NE(c.component(1).probs[0], 0.25);
}

TEST(Update, WrongSampleCountAndNonFiniteReward) {
  Controller c;
  const ControllerSample one[] = {{c.sample(), 1.0}};
  EXPECT_THROW(c.update(one, ComponentGroup::All), Error);
  const ControllerSample bad[] = {{c.sample(), std::nan("")}, {c.sample(), 1.0}};
  EXPECT_THROW(c.update(bad, ComponentGroup::All), NumericFault);
}

TEST(Simplex, FloorAndSum) {
  std::vector<double> p{1.2, -0.1, -0.1, 0.0};
  project_to_simplex(p, 1e-3);
  EXPECT_NEAR(total(p), 1.0, 1e-12);
  for (double x : p) EXPECT_GE(x, 1e-3 - 1e-15);
  EXPECT_GT(p[0], 0.99);
}

TEST(Simplex, UpdatesStayOnTheSimplex) {
  ControllerConfig cfg;
  cfg.rho_macro = 5.0;
  cfg.rho_micro = 5.0;
  Controller c(cfg);
  for (int i = 0; i < 200; ++i) {
    Genotype a = c.sample(), b = c.sample();
    const ControllerSample s[] = {{a, double(i % 3)}, {b, -1.0}};
    c.update(s, ComponentGroup::All);
    for (std::size_t k = 0; k < kNumComponents; ++k) {
      EXPECT_NEAR(total(c.component(k).probs), 1.0, 1e-9);
      for (double x : c.component(k).probs) EXPECT_GE(x, cfg.floor - 1e-12);
    }
  }
}

TEST(Bandit, ConcentratesOnTheBestArm) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto run = oracle::run_bandit(seed);
    ASSERT_TRUE(run.first_hit.has_value()) << "seed " << seed << " final " << run.final_mass;
    EXPECT_LE(*run.first_hit, 200u);
  }
}

TEST(State, JsonRoundTripContinuesTheStream) {
  ControllerConfig cfg;
  cfg.rng_seed = 12;
  Controller a(cfg);
  const ControllerSample s[] = {{a.sample(), 1.0}, {a.sample(), 0.0}};
  a.update(s, ComponentGroup::All);
  Controller b = Controller::from_json(nlohmann::json::parse(a.to_json().dump()));
  EXPECT_TRUE(a == b);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.sample(), b.sample());
}

TEST(Config, Validation) {
  ControllerConfig c;
  c.rho_macro = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.m_samples = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_baseline("ema"), ConfigError);
}

}  // namespace
}  // namespace pathnas
