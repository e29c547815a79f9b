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

// Categorical distributions over genotype components and their natural
// policy-gradient update.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pathnas/common.hpp"
#include "pathnas/genotype.hpp"

namespace pathnas {

enum class Baseline { None, BatchMean };

inline Baseline parse_baseline(const std::string& s) {
  if (s == "none") return Baseline::None;
  if (s == "batch-mean") return Baseline::BatchMean;
  throw ConfigError("unknown reward baseline '" + s + "' (none|batch-mean)");
}

inline const char* to_string(Baseline b) {
  return b == Baseline::None ? "none" : "batch-mean";
}

enum class ComponentGroup { Macro, Micro, All };

struct ControllerConfig {
  double rho_macro = 0.1;
  double rho_micro = 0.05;
  std::size_t m_samples = 2;
  Baseline baseline = Baseline::BatchMean;
  double floor = 1e-3;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(rho_macro > 0) || !std::isfinite(rho_macro))
      throw ConfigError("controller.rho_macro must be positive");
    if (!(rho_micro > 0) || !std::isfinite(rho_micro))
      throw ConfigError("controller.rho_micro must be positive");
    if (m_samples < 1) throw ConfigError("controller.m_samples must be >= 1");
    if (!(floor >= 0 && floor < 0.25)) throw ConfigError("controller.floor must lie in [0, 0.25)");
  }
};

/// Clamps every entry to at least `floor` and rescales the rest so the vector
/// sums to one, repeating until no free entry falls below the floor.
inline void project_to_simplex(std::vector<double>& p, double floor) {
  const std::size_t K = p.size();
  if (K == 0) return;
  if (floor * static_cast<double>(K) > 1.0) throw Error("simplex floor too large");
  std::vector<bool> pinned(K, false);
  for (std::size_t iter = 0; iter <= K; ++iter) {
    std::size_t n_pinned = 0;
    double free_sum = 0;
    for (std::size_t i = 0; i < K; ++i) {
      if (pinned[i]) {
        ++n_pinned;
      } else {
        p[i] = std::max(p[i], 0.0);
        free_sum += p[i];
      }
    }
    const double free_mass = 1.0 - floor * static_cast<double>(n_pinned);
    const std::size_t n_free = K - n_pinned;
    bool changed = false;
    for (std::size_t i = 0; i < K; ++i) {
      if (pinned[i]) {
        p[i] = floor;
        continue;
      }
      p[i] = free_sum > 0 ? p[i] * free_mass / free_sum : free_mass / static_cast<double>(n_free);
    }
    for (std::size_t i = 0; i < K; ++i)
      if (!pinned[i] && p[i] < floor) {
        pinned[i] = true;
        changed = true;
      }
    if (!changed) break;
  }
  std::size_t top = 0;
  double rest = 0;
  for (std::size_t i = 0; i < K; ++i)
    if (p[i] > p[top]) top = i;
  for (std::size_t i = 0; i < K; ++i)
    if (i != top) rest += p[i];
  p[top] = 1.0 - rest;
}

struct CategoricalParam {
  std::vector<double> probs;

  static CategoricalParam uniform(std::size_t K) {
    return {std::vector<double>(K, 1.0 / static_cast<double>(K))};
  }
  std::size_t size() const { return probs.size(); }
};

struct ControllerSample {
  Genotype genotype;
  double reward = 0;
};

class Controller {
 public:
  explicit Controller(ControllerConfig cfg = {}) : cfg_(cfg), rng_(derive_seed(cfg.rng_seed, "controller")) {
    cfg_.validate();
    for (std::size_t c = 0; c < kNumComponents; ++c)
      comps_[c] = CategoricalParam::uniform(kComponentSizes[c]);
  }

  const ControllerConfig& config() const { return cfg_; }
  const CategoricalParam& component(std::size_t c) const { return comps_.at(c); }

  /// Replaces a component's distribution; the probabilities must sum to one.
  void set_component(std::size_t c, std::vector<double> probs) {
    if (probs.size() != kComponentSizes.at(c)) throw Error("component size mismatch");
    double s = 0;
    for (double x : probs) {
      if (!(x >= 0)) throw Error("negative probability");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw Error("probabilities must sum to one");
    comps_[c].probs = std::move(probs);
  }

  /// Draws unpinned components independently, in component order.
  Genotype sample(const std::optional<MacroGenotype>& fixed_macro = std::nullopt,
                  const std::optional<MicroGenotype>& fixed_micro = std::nullopt) {
    ComponentChoice ch{};
    for (std::size_t c = 0; c < kNumComponents; ++c) {
      const bool pinned = is_macro_component(c) ? fixed_macro.has_value() : fixed_micro.has_value();
      if (!pinned) ch[c] = sample_categorical(rng_, comps_[c].probs);
    }
    Genotype g = from_components(ch);
    if (fixed_macro) g.macro = *fixed_macro;
    if (fixed_micro) g.micro = *fixed_micro;
    return g;
  }

  /// Per component with K categories and theta the first K-1 probabilities:
  ///   theta += rho/m * sum_i M_i |T_i - theta| (T_i - theta),
  /// T_i the one-hot of sample i without its K-th entry and M_i the
  /// (optionally batch-mean-centred) reward. theta_K = 1 - sum(theta), then
  /// the vector is projected back onto the floored simplex.
  void update(std::span<const ControllerSample> samples, ComponentGroup group) {
    if (samples.size() != cfg_.m_samples)
      throw Error("npg update expects " + std::to_string(cfg_.m_samples) + " samples, got " +
                  std::to_string(samples.size()));
    std::vector<double> M;
    for (const auto& s : samples) {
      if (!std::isfinite(s.reward)) throw NumericFault("non-finite reward");
      M.push_back(s.reward);
    }
    if (cfg_.baseline == Baseline::BatchMean) {
      double mean = 0;
      for (double x : M) mean += x;
      mean /= static_cast<double>(M.size());
      for (double& x : M) x -= mean;
    }
    std::vector<ComponentChoice> choices;
    for (const auto& s : samples) choices.push_back(components(s.genotype));
    const double m = static_cast<double>(samples.size());
    for (std::size_t c = 0; c < kNumComponents; ++c) {
      const bool macro = is_macro_component(c);
      if ((group == ComponentGroup::Macro && !macro) || (group == ComponentGroup::Micro && macro))
        continue;
      const double rho = macro ? cfg_.rho_macro : cfg_.rho_micro;
      auto& p = comps_[c].probs;
      const std::size_t K = p.size();
      std::vector<double> delta(K - 1, 0.0), u(K - 1);
      bool any = false;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (M[i] == 0) continue;
        double norm2 = 0;
        for (std::size_t k = 0; k + 1 < K; ++k) {
          u[k] = (choices[i][c] == k ? 1.0 : 0.0) - p[k];
          norm2 += u[k] * u[k];
        }
        const double scale = M[i] * std::sqrt(norm2);
        for (std::size_t k = 0; k + 1 < K; ++k) delta[k] += scale * u[k];
        any = true;
      }
      if (!any) continue;
      double head = 0;
      for (std::size_t k = 0; k + 1 < K; ++k) {
        p[k] += rho / m * delta[k];
        head += p[k];
      }
      p[K - 1] = 1.0 - head;
      project_to_simplex(p, cfg_.floor);
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["rho_macro"] = cfg_.rho_macro;
    j["rho_micro"] = cfg_.rho_micro;
    j["m_samples"] = cfg_.m_samples;
    j["baseline"] = to_string(cfg_.baseline);
    j["floor"] = cfg_.floor;
    j["rng_seed"] = cfg_.rng_seed;
    j["rng_state"] = rng_state(rng_);
    auto& comps = j["components"];
    for (std::size_t c = 0; c < kNumComponents; ++c) comps[kComponentNames[c]] = comps_[c].probs;
    return j;
  }

  static Controller from_json(const nlohmann::json& j) {
    ControllerConfig cfg;
    cfg.rho_macro = j.at("rho_macro").get<double>();
    cfg.rho_micro = j.at("rho_micro").get<double>();
    cfg.m_samples = j.at("m_samples").get<std::size_t>();
    cfg.baseline = parse_baseline(j.at("baseline").get<std::string>());
    cfg.floor = j.at("floor").get<double>();
    cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    Controller ctrl(cfg);
    set_rng_state(ctrl.rng_, j.at("rng_state").get<std::string>());
    for (std::size_t c = 0; c < kNumComponents; ++c) {
      auto probs = j.at("components").at(kComponentNames[c]).get<std::vector<double>>();
      if (probs.size() != kComponentSizes[c]) throw IntegrityError("controller state shape");
      ctrl.comps_[c].probs = std::move(probs);
    }
    return ctrl;
  }

  friend bool operator==(const Controller& a, const Controller& b) {
    for (std::size_t c = 0; c < kNumComponents; ++c)
      if (a.comps_[c].probs != b.comps_[c].probs) return false;
    return a.rng_ == b.rng_;
  }

 private:
  ControllerConfig cfg_;
  Rng rng_;
  std::array<CategoricalParam, kNumComponents> comps_;
};

inline Genotype sample_genotype(Controller& ctrl,
                                const std::optional<MacroGenotype>& fixed_macro = std::nullopt,
                                const std::optional<MicroGenotype>& fixed_micro = std::nullopt) {
  return ctrl.sample(fixed_macro, fixed_micro);
}

inline void npg_update(Controller& ctrl, std::span<const ControllerSample> samples,
                       ComponentGroup group = ComponentGroup::All) {
  ctrl.update(samples, group);
}

}  // namespace pathnas
