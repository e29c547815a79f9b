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

// Run configuration: an INI file with one section per module.
//
//   [run]        seed, output_dir, precision (64|32), workers
//   [task]       kind, data, countries_task, kg1, kg2, train_pairs, valid_pairs,
//                test_pairs, lp_metric
//   [walk]       depth_bias, cross_kg_bias, path_length, paths_per_triplet,
//                max_restarts
//   [train]      lr, l2, decay, batch_size, dropout, dim, epochs, patience,
//                eval_every
//   [search]     outer_iterations, k1, k2, top_k, lp_valid_batch
//   [controller] rho_macro, rho_micro, m_samples, baseline, floor
//   [tune]       trials
//   [countries]  mode, samples, repeats

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "pathnas/common.hpp"
#include "pathnas/controller.hpp"
#include "pathnas/genotype.hpp"
#include "pathnas/kg.hpp"
#include "pathnas/search.hpp"
#include "pathnas/task.hpp"
#include "pathnas/trainer.hpp"
#include "pathnas/walk.hpp"

namespace pathnas {

enum class Precision { F64, F32 };

struct CountriesConfig {
  std::string mode = "full";  // P1..P4 or full
  std::size_t samples = 20;
  std::size_t repeats = 3;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  Precision precision = Precision::F64;
  std::size_t workers = 1;

  TaskKind kind = TaskKind::LinkPrediction;
  std::filesystem::path data;
  CountriesTask countries_task = CountriesTask::S1;
  std::filesystem::path kg1, kg2, train_pairs, valid_pairs, test_pairs;
  LpMetric lp_metric = LpMetric::Hit1;

  WalkConfig walk = WalkConfig::link_prediction_defaults();
  TrainConfig train;
  SearchBudget budget;
  std::size_t lp_valid_batch = 500;
  ControllerConfig controller;
  std::size_t tune_trials = 50;
  CountriesConfig countries;

  /// Per-module seeds derived from the global one.
  std::uint64_t module_seed(std::string_view module) const { return derive_seed(seed, module); }

  /// Re-checks every module constraint and that referenced files exist.
  void validate() const {
    walk.validate();
    train.validate_ranges();
    budget.validate();
    controller.validate();
    if (workers == 0) throw ConfigError("run.workers must be >= 1");
    if (tune_trials == 0) throw ConfigError("tune.trials must be >= 1");
    if (lp_valid_batch == 0) throw ConfigError("search.lp_valid_batch must be >= 1");
    if (countries.samples == 0) throw ConfigError("countries.samples must be >= 1");
    if (countries.repeats == 0) throw ConfigError("countries.repeats must be >= 1");
    if (countries.mode != "full") parse_subspace(countries.mode);
    auto need = [](const std::filesystem::path& p, const char* field) {
      if (p.empty()) throw ConfigError(std::string(field) + " is required");
      if (!std::filesystem::exists(p))
        throw ConfigError(std::string(field) + ": no such file or directory '" + p.string() + "'");
    };
    if (kind == TaskKind::EntityAlignment) {
      need(kg1, "task.kg1");
      need(kg2, "task.kg2");
      need(train_pairs, "task.train_pairs");
      need(valid_pairs, "task.valid_pairs");
      need(test_pairs, "task.test_pairs");
    } else {
      need(data, "task.data");
    }
  }
};

namespace detail {

template <class V>
V parse_number(const std::string& field, const std::string& text) {
  V v{};
  const char* b = text.data();
  const char* e = b + text.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<V>) {
    r = std::from_chars(b, e, v, std::chars_format::general);
  } else {
    r = std::from_chars(b, e, v);
  }
  if (r.ec != std::errc() || r.ptr != e)
    throw ConfigError(field + ": cannot parse '" + text + "' as a number");
  return v;
}

}  // namespace detail

/// Field table shared by the parser and the snapshot writer.
class ConfigSchema {
 public:
  struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
  };

  static const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = build();
    return table;
  }

 private:
  template <class V>
  static Field number(V RunConfig::*outer) {
    return {[outer](RunConfig& c, const std::string& s) { c.*outer = detail::parse_number<V>("", s); },
            [outer](const RunConfig& c) { return fmt(c.*outer); }};
  }

  template <class V>
  static std::string fmt(V v) {
    if constexpr (std::is_floating_point_v<V>) {
      char buf[64];
      auto r = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, r.ptr);
    } else {
      return std::to_string(v);
    }
  }

  template <class S, class V>
  static Field member(S RunConfig::*sub, V S::*field) {
    return {[sub, field](RunConfig& c, const std::string& s) {
              (c.*sub).*field = detail::parse_number<V>("", s);
            },
            [sub, field](const RunConfig& c) { return fmt((c.*sub).*field); }};
  }

  static std::map<std::string, Field> build() {
    std::map<std::string, Field> f;
    auto path_field = [](std::filesystem::path RunConfig::*m) {
      return Field{[m](RunConfig& c, const std::string& s) { c.*m = s; },
                   [m](const RunConfig& c) { return (c.*m).string(); }};
    };
    f["run.seed"] = number(&RunConfig::seed);
    f["run.output_dir"] = path_field(&RunConfig::output_dir);
    f["run.precision"] = {[](RunConfig& c, const std::string& s) {
                            if (s == "64") c.precision = Precision::F64;
                            else if (s == "32") c.precision = Precision::F32;
                            else throw ConfigError("expected 64 or 32, got '" + s + "'");
                          },
                          [](const RunConfig& c) {
                            return std::string(c.precision == Precision::F64 ? "64" : "32");
                          }};
    f["run.workers"] = number(&RunConfig::workers);

    f["task.kind"] = {[](RunConfig& c, const std::string& s) { c.kind = parse_task_kind(s); },
                      [](const RunConfig& c) { return std::string(to_string(c.kind)); }};
    f["task.data"] = path_field(&RunConfig::data);
    f["task.countries_task"] = {
        [](RunConfig& c, const std::string& s) { c.countries_task = parse_countries_task(s); },
        [](const RunConfig& c) { return std::string(to_string(c.countries_task)); }};
    f["task.kg1"] = path_field(&RunConfig::kg1);
    f["task.kg2"] = path_field(&RunConfig::kg2);
    f["task.train_pairs"] = path_field(&RunConfig::train_pairs);
    f["task.valid_pairs"] = path_field(&RunConfig::valid_pairs);
    f["task.test_pairs"] = path_field(&RunConfig::test_pairs);
    f["task.lp_metric"] = {
        [](RunConfig& c, const std::string& s) { c.lp_metric = parse_lp_metric(s); },
        [](const RunConfig& c) { return std::string(c.lp_metric == LpMetric::Hit1 ? "hit1" : "mrr"); }};

    auto walk_num = [](auto WalkConfig::*m) {
      using V = std::remove_reference_t<decltype(std::declval<WalkConfig&>().*m)>;
      return Field{[m](RunConfig& c, const std::string& s) {
                     c.walk.*m = detail::parse_number<V>("", s);
                   },
                   [m](const RunConfig& c) { return fmt(c.walk.*m); }};
    };
    f["walk.depth_bias"] = walk_num(&WalkConfig::depth_bias);
    f["walk.path_length"] = walk_num(&WalkConfig::path_length);
    f["walk.paths_per_triplet"] = walk_num(&WalkConfig::paths_per_triplet);
    f["walk.max_restarts"] = walk_num(&WalkConfig::max_restarts);
    f["walk.cross_kg_bias"] = {[](RunConfig& c, const std::string& s) {
                                 if (s == "none") c.walk.cross_kg_bias.reset();
                                 else c.walk.cross_kg_bias = detail::parse_number<double>("", s);
                               },
                               [](const RunConfig& c) {
                                 return c.walk.cross_kg_bias ? fmt(*c.walk.cross_kg_bias)
                                                             : std::string("none");
                               }};

    f["train.lr"] = member(&RunConfig::train, &TrainConfig::lr);
    f["train.l2"] = member(&RunConfig::train, &TrainConfig::l2);
    f["train.decay"] = member(&RunConfig::train, &TrainConfig::decay);
    f["train.batch_size"] = member(&RunConfig::train, &TrainConfig::batch_size);
    f["train.dropout"] = member(&RunConfig::train, &TrainConfig::dropout);
    f["train.dim"] = member(&RunConfig::train, &TrainConfig::dim);
    f["train.epochs"] = member(&RunConfig::train, &TrainConfig::epochs);
    f["train.patience"] = member(&RunConfig::train, &TrainConfig::patience);
    f["train.eval_every"] = member(&RunConfig::train, &TrainConfig::eval_every);

    f["search.outer_iterations"] = member(&RunConfig::budget, &SearchBudget::outer_iterations);
    f["search.k1"] = member(&RunConfig::budget, &SearchBudget::k1);
    f["search.k2"] = member(&RunConfig::budget, &SearchBudget::k2);
    f["search.top_k"] = member(&RunConfig::budget, &SearchBudget::top_k);
    f["search.standalone_epochs"] = member(&RunConfig::budget, &SearchBudget::standalone_epochs);
    f["search.lp_valid_batch"] = number(&RunConfig::lp_valid_batch);

    f["controller.rho_macro"] = member(&RunConfig::controller, &ControllerConfig::rho_macro);
    f["controller.rho_micro"] = member(&RunConfig::controller, &ControllerConfig::rho_micro);
    f["controller.m_samples"] = member(&RunConfig::controller, &ControllerConfig::m_samples);
    f["controller.floor"] = member(&RunConfig::controller, &ControllerConfig::floor);
    f["controller.baseline"] = {
        [](RunConfig& c, const std::string& s) { c.controller.baseline = parse_baseline(s); },
        [](const RunConfig& c) { return std::string(to_string(c.controller.baseline)); }};

    f["tune.trials"] = number(&RunConfig::tune_trials);

    f["countries.mode"] = {[](RunConfig& c, const std::string& s) {
                             if (s != "full") parse_subspace(s);
                             c.countries.mode = s;
                           },
                           [](const RunConfig& c) { return c.countries.mode; }};
    f["countries.samples"] = member(&RunConfig::countries, &CountriesConfig::samples);
    f["countries.repeats"] = member(&RunConfig::countries, &CountriesConfig::repeats);
    return f;
  }
};

/// Sets one `section.key` field from text; errors name the field.
inline void set_config_field(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& fields = ConfigSchema::fields();
  auto it = fields.find(key);
  if (it == fields.end()) throw ConfigError("unknown configuration key '" + key + "'");
  try {
    it->second.set(cfg, value);
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    if (msg.rfind(": ", 0) == 0) msg = msg.substr(2);
    throw ConfigError(key + ": " + msg);
  }
}

/// Walk fields start from the task kind's defaults; explicit walk keys
/// override them.
inline RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  std::vector<std::pair<std::string, std::string>> walk_items;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string key = item.fullname();
    if (item.parents.size() != 1)
      throw ConfigError("configuration key '" + key + "' must sit in a [section]");
    if (item.inputs.size() > 1) throw ConfigError(key + ": expected a single value");
    const std::string value = item.inputs.empty() ? std::string() : item.inputs.front();
    if (item.parents.front() == "walk") {
      walk_items.emplace_back(key, value);
    } else {
      set_config_field(cfg, key, value);
    }
  }
  cfg.walk = cfg.kind == TaskKind::EntityAlignment ? WalkConfig::entity_alignment_defaults()
                                                   : WalkConfig::link_prediction_defaults();
  for (const auto& [k, v] : walk_items) set_config_field(cfg, k, v);
  return cfg;
}

/// Relative data paths resolve against the config file's directory.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  RunConfig cfg = parse_run_config(in);
  const auto base = std::filesystem::absolute(path).parent_path();
  for (auto* p : {&cfg.data, &cfg.kg1, &cfg.kg2, &cfg.train_pairs, &cfg.valid_pairs,
                  &cfg.test_pairs, &cfg.output_dir})
    if (!p->empty() && p->is_relative()) *p = (base / *p).lexically_normal();
  return cfg;
}

/// Fully resolved INI text; parsing it yields an equal configuration.
inline std::string config_snapshot(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, field] : ConfigSchema::fields()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    std::string v = field.get(cfg);
    if (v.empty() || v.find_first_of(" #;\"'") != std::string::npos) v = '"' + v + '"';
    out << key.substr(dot + 1) << " = " << v << '\n';
  }
  return out.str();
}

/// Seeds of each module, derived from the global seed.
inline void fan_out_seeds(RunConfig& cfg) {
  cfg.walk.rng_seed = cfg.module_seed("walk");
  cfg.train.rng_seed = cfg.module_seed("train");
  cfg.controller.rng_seed = cfg.module_seed("controller");
}

}  // namespace pathnas
