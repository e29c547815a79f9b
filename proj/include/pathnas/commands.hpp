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

// Pipeline commands. Each writes a self-contained run directory holding the
// resolved config, logs, checkpoints and reports.

#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "json.hpp"

#include "pathnas/config.hpp"
#include "pathnas/controller.hpp"
#include "pathnas/search.hpp"
#include "pathnas/task.hpp"
#include "pathnas/trainer.hpp"
#include "pathnas/tuner.hpp"
#include "pathnas/walk.hpp"

namespace pathnas {

namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "PATHNAS_OUTPUT_ROOT";

/// `--out` wins; otherwise run.output_dir; otherwise
/// $PATHNAS_OUTPUT_ROOT (or ./runs) / <command>-<task>-seed<N>.
inline fs::path resolve_run_dir(const RunConfig& cfg, const std::string& command,
                                const std::optional<fs::path>& out = std::nullopt) {
  if (out) return *out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const char* root = std::getenv(kOutputRootEnv);
  std::string name = command + "-" + to_string(cfg.kind);
  if (cfg.kind == TaskKind::Countries) name += std::string("-") + to_string(cfg.countries_task);
  name += "-seed" + std::to_string(cfg.seed);
  return fs::path(root && *root ? root : "runs") / name;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline void write_jsonl(const fs::path& path, const std::vector<nlohmann::json>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) out << r.dump() << '\n';
  write_text(path, out.str());
}

inline std::string file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto c = ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                         static_cast<uInt>(bytes.size()));
  std::ostringstream s;
  s << std::hex << std::setw(8) << std::setfill('0') << c;
  return s.str();
}

/// Creates the run directory and writes the resolved config snapshot.
inline fs::path open_run(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "config.ini", config_snapshot(cfg));
  return dir;
}

inline DatasetBundle load_dataset(const RunConfig& cfg) {
  switch (cfg.kind) {
    case TaskKind::LinkPrediction: return load_link_prediction(cfg.data);
    case TaskKind::Countries: return load_countries(cfg.data, cfg.countries_task);
    case TaskKind::EntityAlignment:
      return load_entity_alignment(cfg.kg1, cfg.kg2, cfg.train_pairs, cfg.valid_pairs,
                                   cfg.test_pairs);
  }
  throw Error("bad task kind");
}

/// Loads the dataset and samples its path corpus with the walk seed.
inline TaskData prepare_run_task(const RunConfig& cfg, std::ostream* progress = nullptr) {
  DatasetBundle b = load_dataset(cfg);
  if (progress)
    for (const auto& w : b.warnings) *progress << "warning: " << w << '\n';
  TaskData t = prepare_task(std::move(b), cfg.walk);
  t.lp_metric = cfg.lp_metric;
  return t;
}

inline std::string precision_name(Precision p) { return p == Precision::F64 ? "64" : "32"; }

inline std::string format_mean_std(double mean, double sd) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << mean << " +- " << sd;
  return s.str();
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0, 0};
  double m = 0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {m, 0};
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size() - 1))};
}

/// Headline number of a test report: AUC-PR for Countries, MRR otherwise.
inline double headline_metric(const nlohmann::json& report) {
  if (report.contains("auc_pr")) return report.at("auc_pr").get<double>();
  return report.at("mrr").get<double>();
}

inline std::string report_table(const std::string& genotype, const nlohmann::json& report) {
  std::ostringstream s;
  s << "genotype  " << genotype << '\n';
  for (const auto& [k, v] : report.items()) s << std::left << std::setw(10) << k << v.dump() << '\n';
  return s.str();
}

// ---------------------------------------------------------------------------

struct SamplePathsOutcome {
  fs::path run_dir;
  std::size_t num_paths = 0;
};

inline SamplePathsOutcome cmd_sample_paths(const RunConfig& cfg, const fs::path& run_dir,
                                           std::ostream* progress = nullptr) {
  cfg.validate();
  open_run(cfg, run_dir);
  DatasetBundle b = load_dataset(cfg);
  if (progress)
    for (const auto& w : b.warnings) *progress << "warning: " << w << '\n';
  KnowledgeGraph wg = walk_graph(b);
  PathCorpus corpus = sample_paths(wg, cfg.walk);
  write_paths(corpus, run_dir / "paths.bin");
  dump_paths_tsv(corpus, wg, run_dir / "paths.tsv");
  write_json(run_dir / "summary.json", {{"num_paths", corpus.paths.size()},
                                        {"path_length", cfg.walk.path_length},
                                        {"pad_relation", corpus.pad_relation},
                                        {"walk_seed", cfg.walk.rng_seed},
                                        {"warnings", b.warnings}});
  return {run_dir, corpus.paths.size()};
}

struct TrainOutcome {
  fs::path run_dir;
  std::string genotype;
  std::optional<double> valid_metric;
  nlohmann::json test;
  std::string checkpoint_hash;
};

/// Trains one genotype with early stopping and evaluates the best checkpoint.
template <class T>
TrainOutcome train_and_report(const TaskData& task, const Genotype& g, const TrainConfig& tc,
                              const fs::path& run_dir, std::ostream* progress = nullptr) {
  ValidHook<T> hook = [&](const ParameterStore<T>& s) { return validation_metric(task, g, s); };
  auto res = fit<T>(g, task.corpus, task.num_entities(), tc, hook);
  std::vector<nlohmann::json> hist;
  for (const auto& r : res.history) {
    hist.push_back(record_json(r));
    if (progress)
      *progress << "epoch " << r.epoch << " loss " << r.mean_loss
                << (r.valid_metric ? " valid " + std::to_string(*r.valid_metric) : "") << '\n';
  }
  write_jsonl(run_dir / "history.jsonl", hist);
  TrainOutcome out;
  out.run_dir = run_dir;
  out.genotype = to_string(g);
  save_checkpoint(res.store, out.genotype, run_dir / "model.ckpt");
  out.checkpoint_hash = file_crc32(run_dir / "model.ckpt");
  out.valid_metric = res.best_metric;
  out.test = test_report(task, g, res.store);
  nlohmann::json rec{{"genotype", out.genotype},
                     {"checkpoint_hash", out.checkpoint_hash},
                     {"split", "test"},
                     {"metrics", out.test}};
  rec["valid_metric"] = res.best_metric ? nlohmann::json(*res.best_metric) : nlohmann::json();
  write_jsonl(run_dir / "report.jsonl", {rec});
  write_text(run_dir / "report.txt", report_table(out.genotype, out.test));
  return out;
}

template <class T>
TrainOutcome cmd_train_t(const RunConfig& cfg, const std::string& genotype,
                         const fs::path& run_dir, std::ostream* progress) {
  cfg.validate();
  const Genotype g = resolve_genotype(genotype);
  open_run(cfg, run_dir);
  TaskData task = prepare_run_task(cfg, progress);
  return train_and_report<T>(task, g, cfg.train, run_dir, progress);
}

inline TrainOutcome cmd_train(const RunConfig& cfg, const std::string& genotype,
                              const fs::path& run_dir, std::ostream* progress = nullptr) {
  return cfg.precision == Precision::F64 ? cmd_train_t<double>(cfg, genotype, run_dir, progress)
                                         : cmd_train_t<float>(cfg, genotype, run_dir, progress);
}

struct EvalOutcome {
  std::string genotype;
  nlohmann::json test;
};

template <class T>
EvalOutcome cmd_eval_t(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& run_dir,
                       std::ostream* progress) {
  cfg.validate();
  Checkpoint<T> ck = load_checkpoint<T>(checkpoint);
  const Genotype g = parse_genotype(ck.genotype);
  open_run(cfg, run_dir);
  TaskData task = prepare_run_task(cfg, progress);
  if (ck.store.size() != kNumSlots || ck.store.value(kEntity).rows() != task.num_entities() ||
      ck.store.value(kRelation).rows() != task.relation_rows())
    throw IntegrityError("checkpoint does not match the configured dataset");
  EvalOutcome out{ck.genotype, test_report(task, g, ck.store)};
  write_jsonl(run_dir / "report.jsonl", {{{"genotype", ck.genotype},
                                          {"checkpoint_hash", file_crc32(checkpoint)},
                                          {"split", "test"},
                                          {"metrics", out.test}}});
  write_text(run_dir / "report.txt", report_table(ck.genotype, out.test));
  return out;
}

inline EvalOutcome cmd_eval(const RunConfig& cfg, const fs::path& checkpoint,
                            const fs::path& run_dir, std::ostream* progress = nullptr) {
  return cfg.precision == Precision::F64 ? cmd_eval_t<double>(cfg, checkpoint, run_dir, progress)
                                         : cmd_eval_t<float>(cfg, checkpoint, run_dir, progress);
}

struct SearchOutcome {
  fs::path run_dir;
  SearchResult result;
  TrainOutcome best;
};

/// Hybrid search in `run_dir`, then the best stand-alone candidate is
/// retrained with its logged seed and evaluated on test.
template <class T>
SearchOutcome run_search(const RunConfig& cfg, const TaskData& task, const fs::path& run_dir,
                         std::uint64_t search_seed, std::uint64_t controller_seed, bool resume,
                         std::ostream* progress) {
  TrainConfig tc = cfg.train;
  tc.rng_seed = derive_seed(search_seed, "one-shot");
  if (cfg.budget.standalone_epochs > 0) tc.epochs = cfg.budget.standalone_epochs;
  SearchServices<T> svc = task_services<T>(task, tc, cfg.lp_valid_batch);
  ControllerConfig cc = cfg.controller;
  cc.rng_seed = controller_seed;
  Controller ctrl(cc);
  SearchOptions opt;
  opt.seed = search_seed;
  opt.workers = cfg.workers;
  opt.state_dir = run_dir;
  opt.resume = resume;
  SearchOutcome out;
  out.run_dir = run_dir;
  out.result = hybrid_search(cfg.budget, ctrl, svc, opt);
  std::vector<nlohmann::json> top;
  for (const auto& r : out.result.top) top.push_back(record_json(r));
  write_jsonl(run_dir / "top_k.jsonl", top);
  const LogRecord& best = out.result.best();
  if (progress) *progress << "best " << best.genotype << " reward " << best.reward << '\n';
  TrainConfig btc = cfg.train;
  btc.rng_seed = best.seed;
  fs::create_directories(run_dir / "best");
  out.best = train_and_report<T>(task, parse_genotype(best.genotype), btc, run_dir / "best");
  return out;
}

template <class T>
SearchOutcome cmd_search_t(const RunConfig& cfg, const fs::path& run_dir, bool resume,
                           std::ostream* progress) {
  cfg.validate();
  if (!resume) open_run(cfg, run_dir);
  TaskData task = prepare_run_task(cfg, progress);
  return run_search<T>(cfg, task, run_dir, cfg.module_seed("search"), cfg.controller.rng_seed,
                       resume, progress);
}

inline SearchOutcome cmd_search(const RunConfig& cfg, const fs::path& run_dir, bool resume = false,
                                std::ostream* progress = nullptr) {
  return cfg.precision == Precision::F64 ? cmd_search_t<double>(cfg, run_dir, resume, progress)
                                         : cmd_search_t<float>(cfg, run_dir, resume, progress);
}

template <class T>
TuneResult cmd_tune_t(const RunConfig& cfg, const std::string& genotype, const fs::path& run_dir,
                      std::ostream* progress) {
  cfg.validate();
  const Genotype g = resolve_genotype(genotype);
  open_run(cfg, run_dir);
  TaskData task = prepare_run_task(cfg, progress);
  TuneResult res = tune<T>(task, g, cfg.train, cfg.tune_trials, cfg.module_seed("tuner"),
                           cfg.workers);
  std::vector<nlohmann::json> rows;
  for (const auto& t : res.trials) rows.push_back(record_json(t));
  write_jsonl(run_dir / "trials.jsonl", rows);
  write_json(run_dir / "best_config.json",
             {{"trial_id", res.best.trial_id}, {"genotype", to_string(g)},
              {"config", config_json(res.best.cfg)}});
  return res;
}

inline TuneResult cmd_tune(const RunConfig& cfg, const std::string& genotype,
                           const fs::path& run_dir, std::ostream* progress = nullptr) {
  return cfg.precision == Precision::F64 ? cmd_tune_t<double>(cfg, genotype, run_dir, progress)
                                         : cmd_tune_t<float>(cfg, genotype, run_dir, progress);
}

struct CountriesOutcome {
  fs::path run_dir;
  std::string mode;
  std::vector<double> test_auc;
  std::vector<double> valid_auc;
  std::vector<std::string> best_genotypes;
  std::vector<std::vector<LogRecord>> search_logs;  // full-search mode
  double mean = 0;
  double std = 0;
};

/// Subspace mode: R repeats of N random genotypes (macro uniform in the
/// subspace, micro uniform), each trained stand-alone; the validation-best
/// one is scored on test. Full mode: R repeats of the hybrid search.
template <class T>
CountriesOutcome cmd_countries_t(const RunConfig& cfg, const fs::path& run_dir,
                                 std::ostream* progress) {
  cfg.validate();
  if (cfg.kind != TaskKind::Countries) throw ConfigError("task.kind must be countries");
  open_run(cfg, run_dir);
  TaskData task = prepare_run_task(cfg, progress);
  CountriesOutcome out;
  out.run_dir = run_dir;
  out.mode = cfg.countries.mode;
  std::vector<nlohmann::json> samples;
  for (std::size_t r = 0; r < cfg.countries.repeats; ++r) {
    if (out.mode == "full") {
      const fs::path dir = run_dir / ("repeat_" + std::to_string(r));
      auto so = run_search<T>(cfg, task, dir, derive_seed(cfg.seed, "countries-search", r),
                              derive_seed(cfg.seed, "countries-controller", r), false, progress);
      out.best_genotypes.push_back(so.best.genotype);
      out.valid_auc.push_back(so.best.valid_metric.value_or(0.0));
      out.test_auc.push_back(headline_metric(so.best.test));
      out.search_logs.push_back(so.result.log);
    } else {
      const auto members = subspace_members(parse_subspace(out.mode));
      Rng rng(derive_seed(cfg.seed, "countries-sample", r));
      std::optional<double> best_valid;
      Genotype best_g;
      for (std::size_t i = 0; i < cfg.countries.samples; ++i) {
        Genotype g;
        g.macro = members[uniform_index(rng, members.size())];
        g.micro = MicroGenotype::from_index(uniform_index(rng, MicroGenotype::kCount));
        TrainConfig tc = cfg.train;
        tc.rng_seed = derive_seed(cfg.seed, "countries-train", r * cfg.countries.samples + i);
        ValidHook<T> hook = [&](const ParameterStore<T>& s) { return validation_metric(task, g, s); };
        nlohmann::json rec{{"repeat", r}, {"sample", i}, {"genotype", to_string(g)},
                           {"seed", tc.rng_seed}};
        try {
          auto res = fit<T>(g, task.corpus, task.num_entities(), tc, hook);
          const double v = res.best_metric.value_or(0.0);
          rec["valid_auc_pr"] = v;
          if (!best_valid || v > *best_valid) {
            best_valid = v;
            best_g = g;
            out.test_auc.resize(r + 1);
            out.test_auc[r] = countries_auc_pr(g, res.store,
                                               std::span<const Triplet>(task.test_queries),
                                               task.bundle.candidates);
          }
        } catch (const TrainingFault& f) {
          rec["fault"] = f.what();
        }
        if (progress)
          *progress << "repeat " << r << " sample " << i << " " << rec.dump() << '\n';
        samples.push_back(rec);
      }
      if (!best_valid) throw Error("every sampled model failed to train");
      out.valid_auc.push_back(*best_valid);
      out.best_genotypes.push_back(to_string(best_g));
    }
  }
  if (!samples.empty()) write_jsonl(run_dir / "samples.jsonl", samples);
  std::tie(out.mean, out.std) = mean_std(out.test_auc);
  const std::string row = std::string(to_string(cfg.countries_task)) + " | " + out.mode + " | " +
                          format_mean_std(out.mean, out.std);
  write_text(run_dir / "countries_table.txt", "task | mode | test AUC-PR (mean +- std)\n" + row + "\n");
  write_json(run_dir / "countries.json", {{"task", to_string(cfg.countries_task)},
                                          {"mode", out.mode},
                                          {"test_auc_pr", out.test_auc},
                                          {"valid_auc_pr", out.valid_auc},
                                          {"best_genotypes", out.best_genotypes},
                                          {"mean", out.mean},
                                          {"std", out.std}});
  return out;
}

inline CountriesOutcome cmd_countries(const RunConfig& cfg, const fs::path& run_dir,
                                      std::ostream* progress = nullptr) {
  return cfg.precision == Precision::F64 ? cmd_countries_t<double>(cfg, run_dir, progress)
                                         : cmd_countries_t<float>(cfg, run_dir, progress);
}

}  // namespace pathnas
