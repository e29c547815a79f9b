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

// Random-search tuning of training hyper-parameters for a fixed genotype.

#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pathnas/search.hpp"
#include "pathnas/task.hpp"
#include "pathnas/trainer.hpp"

namespace pathnas {

struct TrialSpec {
  std::size_t trial_id = 0;
  std::uint64_t seed = 0;
  TrainConfig cfg;
};

struct TrialResult {
  TrialSpec spec;
  std::optional<double> valid_metric;
  nlohmann::json test;
  double wall_time = 0;
  std::string fault;
};

inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

/// lr and l2 log-uniform, decay and dropout uniform, batch size uniform over
/// the allowed set. Dimension and epoch cap come from `base`.
inline TrialSpec sample_trial(const TrainConfig& base, std::uint64_t tuner_seed,
                              std::size_t trial_id) {
  Rng rng(derive_seed(tuner_seed, "trial", trial_id));
  TrialSpec t;
  t.trial_id = trial_id;
  t.seed = derive_seed(tuner_seed, "trial-train", trial_id);
  t.cfg = base;
  t.cfg.lr = std::clamp(log_uniform(rng, 1e-5, 1e-3), 1e-5, 1e-3);
  t.cfg.l2 = std::clamp(log_uniform(rng, 1e-5, 1e-2), 1e-5, 1e-2);
  t.cfg.decay = uniform(rng, 0.98, 1.0);
  t.cfg.dropout = uniform(rng, 0.0, 0.6);
  t.cfg.batch_size = TrainConfig::kBatchSizes[uniform_index(rng, std::size(TrainConfig::kBatchSizes))];
  t.cfg.rng_seed = t.seed;
  return t;
}

inline std::vector<TrialSpec> sample_trials(const TrainConfig& base, std::size_t n,
                                            std::uint64_t tuner_seed) {
  std::vector<TrialSpec> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_trial(base, tuner_seed, i));
  return out;
}

inline nlohmann::json config_json(const TrainConfig& c) {
  return {{"lr", c.lr},           {"l2", c.l2},         {"decay", c.decay},
          {"batch_size", c.batch_size}, {"dropout", c.dropout}, {"dim", c.dim},
          {"epochs", c.epochs},   {"patience", c.patience}, {"rng_seed", c.rng_seed}};
}

inline nlohmann::json record_json(const TrialResult& r) {
  nlohmann::json j{{"trial_id", r.spec.trial_id},
                   {"config", config_json(r.spec.cfg)},
                   {"wall_time", r.wall_time}};
  j["validation_metric"] = r.valid_metric ? nlohmann::json(*r.valid_metric) : nlohmann::json();
  j["test_metric"] = r.test;
  if (!r.fault.empty()) j["fault"] = r.fault;
  return j;
}

/// Trains each spec and scores it on validation and test. Results are in
/// trial_id order whatever the worker count.
template <class T>
std::vector<TrialResult> run_trials(const TaskData& task, const Genotype& g,
                                    const std::vector<TrialSpec>& specs, std::size_t workers = 1) {
  std::vector<TrialResult> out(specs.size());
  run_parallel(workers, specs.size(), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    TrialResult& r = out[i];
    r.spec = specs[i];
    try {
      ValidHook<T> hook = [&](const ParameterStore<T>& s) { return validation_metric(task, g, s); };
      auto fr = fit<T>(g, task.corpus, task.num_entities(), specs[i].cfg, hook);
      r.valid_metric = fr.best_metric ? *fr.best_metric : validation_metric(task, g, fr.store);
      r.test = test_report(task, g, fr.store);
    } catch (const NumericFault& f) {
      r.fault = f.what();
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Evaluation{};
  });
  return out;
}

struct TuneResult {
  TrialSpec best;
  std::vector<TrialResult> trials;
};

/// Best trial by validation metric; ties keep the lower trial id.
inline TuneResult pick_best(std::vector<TrialResult> trials) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!trials[i].valid_metric) continue;
    if (!best || *trials[i].valid_metric > *trials[*best].valid_metric) best = i;
  }
  if (!best) throw Error("every tuning trial failed");
  return {trials[*best].spec, std::move(trials)};
}

template <class T>
TuneResult tune(const TaskData& task, const Genotype& g, const TrainConfig& base,
                std::size_t n_trials, std::uint64_t tuner_seed, std::size_t workers = 1) {
  if (n_trials == 0) throw ConfigError("tune.trials must be >= 1");
  return pick_best(run_trials<T>(task, g, sample_trials(base, n_trials, tuner_seed), workers));
}

}  // namespace pathnas
