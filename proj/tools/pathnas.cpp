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

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "pathnas/commands.hpp"

namespace {

using namespace pathnas;

struct Common {
  std::string config;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "run config file")->required()->check(CLI::ExistingFile);
  sub->add_option("--workers", c.workers, "parallel trainings");
  sub->add_option("--seed", c.seed, "global seed (overrides run.seed)");
  sub->add_option("--out", c.out, "run directory");
  sub->add_flag("--quiet", c.quiet, "no progress output");
}

RunConfig load(const Common& c) {
  RunConfig cfg = load_run_config(c.config);
  if (c.workers) cfg.workers = *c.workers;
  if (c.seed) cfg.seed = *c.seed;
  fan_out_seeds(cfg);
  return cfg;
}

std::optional<fs::path> out_dir(const Common& c) {
  if (c.out) return fs::path(*c.out);
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"pathnas: relational path architecture search for knowledge graph embedding"};
  app.require_subcommand(1);

  Common c;
  std::string genotype;
  std::string resume;
  std::string checkpoint;
  std::optional<std::string> countries_task, mode;
  std::optional<std::size_t> n_samples, repeats;

  auto* sp = app.add_subcommand("sample-paths", "sample the relational path corpus");
  add_common(sp, c);

  auto* tr = app.add_subcommand("train", "train one genotype or preset");
  add_common(tr, c);
  tr->add_option("--genotype", genotype, "genotype string or preset name")->required();

  auto* se = app.add_subcommand("search", "hybrid architecture search");
  add_common(se, c);
  se->add_option("--resume", resume, "resume the search in this run directory");

  auto* tu = app.add_subcommand("tune", "random-search training hyper-parameters");
  add_common(tu, c);
  tu->add_option("--genotype", genotype, "genotype string or preset name")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(ev, c);
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  auto* co = app.add_subcommand("countries", "Countries S1/S2/S3 experiment");
  add_common(co, c);
  co->add_option("--task", countries_task, "S1, S2 or S3");
  co->add_option("--mode", mode, "P1..P4 or full");
  co->add_option("-N,--samples", n_samples, "genotypes sampled per repeat");
  co->add_option("-R,--repeats", repeats, "repeats");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load(c);
    std::ostream* progress = c.quiet ? nullptr : &std::cerr;
    if (*sp) {
      const auto dir = resolve_run_dir(cfg, "sample-paths", out_dir(c));
      auto o = cmd_sample_paths(cfg, dir, progress);
      std::cout << o.num_paths << " paths written to " << dir.string() << '\n';
    } else if (*tr) {
      const auto dir = resolve_run_dir(cfg, "train", out_dir(c));
      auto o = cmd_train(cfg, genotype, dir, progress);
      std::cout << report_table(o.genotype, o.test) << "run directory " << dir.string() << '\n';
    } else if (*se) {
      const bool resuming = !resume.empty();
      const auto dir = resuming ? fs::path(resume) : resolve_run_dir(cfg, "search", out_dir(c));
      auto o = cmd_search(cfg, dir, resuming, progress);
      std::cout << report_table(o.best.genotype, o.best.test) << "run directory " << dir.string()
                << '\n';
    } else if (*tu) {
      const auto dir = resolve_run_dir(cfg, "tune", out_dir(c));
      auto o = cmd_tune(cfg, genotype, dir, progress);
      std::cout << "best trial " << o.best.trial_id << " " << config_json(o.best.cfg).dump()
                << "\nrun directory " << dir.string() << '\n';
    } else if (*ev) {
      const auto dir = resolve_run_dir(cfg, "eval", out_dir(c));
      auto o = cmd_eval(cfg, checkpoint, dir, progress);
      std::cout << report_table(o.genotype, o.test);
    } else if (*co) {
      if (countries_task) cfg.countries_task = parse_countries_task(*countries_task);
      if (mode) cfg.countries.mode = *mode;
      if (n_samples) cfg.countries.samples = *n_samples;
      if (repeats) cfg.countries.repeats = *repeats;
      cfg.kind = TaskKind::Countries;
      const auto dir = resolve_run_dir(cfg, "countries", out_dir(c));
      auto o = cmd_countries(cfg, dir, progress);
      std::cout << to_string(cfg.countries_task) << " | " << o.mode << " | "
                << format_mean_std(o.mean, o.std) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
