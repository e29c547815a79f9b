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

// Hybrid search: stand-alone macro rounds and one-shot micro rounds driving
// one controller, with an append-only log and resumable state.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pathnas/controller.hpp"
#include "pathnas/params.hpp"
#include "pathnas/task.hpp"
#include "pathnas/trainer.hpp"

namespace pathnas {

struct SearchBudget {
  std::size_t outer_iterations = 20;
  std::size_t k1 = 1;
  std::size_t k2 = 1;
  std::size_t top_k = 5;
  /// Epoch cap of stand-alone trainings inside the search; 0 keeps train.epochs.
  std::size_t standalone_epochs = 0;

  void validate() const {
    if (k1 == 0) throw ConfigError("search.k1 must be positive");
    if (k2 == 0) throw ConfigError("search.k2 must be positive");
    if (top_k == 0) throw ConfigError("search.top_k must be positive");
  }
};

struct LogRecord {
  std::string phase;  // "macro" or "micro"
  std::string genotype;
  double reward = 0;
  double wall_time = 0;
  std::uint64_t seed = 0;
  std::string fault;

  /// Equality ignores wall time.
  friend bool operator==(const LogRecord& a, const LogRecord& b) {
    return a.phase == b.phase && a.genotype == b.genotype && a.reward == b.reward &&
           a.seed == b.seed && a.fault == b.fault;
  }
};

inline nlohmann::json record_json(const LogRecord& r) {
  nlohmann::json j{{"phase", r.phase},         {"genotype", r.genotype},
                   {"reward", r.reward},       {"wall_time", r.wall_time},
                   {"seed", r.seed}};
  if (!r.fault.empty()) j["fault"] = r.fault;
  return j;
}

inline LogRecord log_record_from_json(const nlohmann::json& j) {
  LogRecord r;
  r.phase = j.at("phase").get<std::string>();
  r.genotype = j.at("genotype").get<std::string>();
  r.reward = j.at("reward").get<double>();
  r.wall_time = j.at("wall_time").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("fault")) r.fault = j.at("fault").get<std::string>();
  return r;
}

/// Append-only record list, mirrored line by line to a file when attached.
class SearchLog {
 public:
  SearchLog() = default;

  /// Attaches `path`, keeping its first `keep` records (all of them when
  /// omitted) and discarding anything after.
  void attach(const std::filesystem::path& path, std::optional<std::size_t> keep = std::nullopt) {
    records_.clear();
    if (std::filesystem::exists(path)) records_ = read(path);
    if (keep) {
      if (*keep > records_.size()) throw IntegrityError("search log shorter than its checkpoint");
      records_.resize(*keep);
    }
    std::ofstream out(path, std::ios::trunc);
    for (const auto& r : records_) out << record_json(r).dump() << '\n';
    out.close();
    file_ = path;
  }

  void append(const LogRecord& r) {
    records_.push_back(r);
    if (file_) {
      std::ofstream out(*file_, std::ios::app);
      out << record_json(r).dump() << '\n';
    }
  }

  const std::vector<LogRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  static std::vector<LogRecord> read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<LogRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        out.push_back(log_record_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("search log: ") + e.what(), line_no);
      }
    }
    return out;
  }

 private:
  std::vector<LogRecord> records_;
  std::optional<std::filesystem::path> file_;
};

/// Reward substituted for a failed evaluation: the worst reward logged in the
/// same phase minus one standard deviation of those rewards.
inline double failure_reward(const SearchLog& log, const std::string& phase) {
  std::vector<double> xs;
  for (const auto& r : log.records())
    if (r.phase == phase && r.fault.empty()) xs.push_back(r.reward);
  if (xs.empty()) return -1.0;
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(xs.size()));
  return *std::min_element(xs.begin(), xs.end()) - sd;
}

struct Evaluation {
  std::optional<double> reward;  // empty on failure
  std::string fault;
};

/// What the search needs from a task: stand-alone training of one genotype,
/// and one-shot steps on a shared store.
template <class T>
struct SearchServices {
  std::function<Evaluation(const Genotype&, std::uint64_t seed)> standalone;
  std::function<ParameterStore<T>(std::uint64_t seed)> make_shared;
  std::function<std::size_t()> micro_batches;
  /// step_once on batch `batch` of one-shot epoch `epoch`, then measure.
  std::function<Evaluation(const Genotype&, ParameterStore<T>&, std::size_t epoch,
                           std::size_t batch)>
      micro_trial;
};

struct SearchOptions {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::optional<std::filesystem::path> state_dir;
  bool resume = false;
  /// Stop after this many outer iterations in this call (state is kept).
  std::optional<std::size_t> stop_after;
};

struct SearchCounters {
  std::size_t iteration = 0;
  std::size_t standalone = 0;
  std::size_t micro_epoch = 0;
};

inline std::vector<Evaluation> run_parallel(
    std::size_t workers, std::size_t n, const std::function<Evaluation(std::size_t)>& job) {
  std::vector<Evaluation> out(n);
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = job(i);
    return out;
  }
  for (std::size_t start = 0; start < n; start += workers) {
    std::vector<std::future<Evaluation>> fs;
    for (std::size_t i = start; i < std::min(n, start + workers); ++i)
      fs.push_back(std::async(std::launch::async, job, i));
    for (std::size_t i = 0; i < fs.size(); ++i) out[start + i] = fs[i].get();
  }
  return out;
}

/// Samples m macro genotypes with `micro` pinned, trains each from scratch,
/// logs them in sampled order and updates the macro components.
template <class T>
void macro_round(Controller& ctrl, const MicroGenotype& micro, SearchServices<T>& svc,
                 SearchLog& log, SearchCounters& counters, const SearchOptions& opt) {
  const std::size_t m = ctrl.config().m_samples;
  std::vector<Genotype> gs;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < m; ++i) {
    gs.push_back(ctrl.sample(std::nullopt, micro));
    seeds.push_back(derive_seed(opt.seed, "standalone", counters.standalone++));
  }
  std::vector<double> walls(m);
  auto evals = run_parallel(opt.workers, m, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    Evaluation e;
    try {
      e = svc.standalone(gs[i], seeds[i]);
    } catch (const NumericFault& f) {
      e.fault = f.what();
    }
    walls[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return e;
  });
  std::vector<ControllerSample> samples;
  for (std::size_t i = 0; i < m; ++i) {
    LogRecord r{"macro", to_string(gs[i]), 0, walls[i], seeds[i], evals[i].fault};
    r.reward = evals[i].reward ? *evals[i].reward : failure_reward(log, "macro");
    if (!evals[i].reward && r.fault.empty()) r.fault = "evaluation failed";
    log.append(r);
    samples.push_back({gs[i], r.reward});
  }
  ctrl.update(samples, ComponentGroup::Macro);
}

/// One one-shot epoch over the shared store with `macro` pinned: each batch
/// trains and measures one sampled micro genotype; every m batches update
/// the micro components. A trailing incomplete group is dropped.
template <class T>
void micro_round(Controller& ctrl, const MacroGenotype& macro, ParameterStore<T>& shared,
                 SearchServices<T>& svc, SearchLog& log, SearchCounters& counters) {
  const std::size_t m = ctrl.config().m_samples;
  const std::size_t epoch = counters.micro_epoch++;
  const std::size_t n = svc.micro_batches();
  std::vector<ControllerSample> pending;
  for (std::size_t b = 0; b < n; ++b) {
    Genotype g = ctrl.sample(macro, std::nullopt);
    const auto t0 = std::chrono::steady_clock::now();
    Evaluation e;
    try {
      e = svc.micro_trial(g, shared, epoch, b);
    } catch (const NumericFault& f) {
      e.fault = f.what();
    }
    LogRecord r{"micro", to_string(g), 0,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
                static_cast<std::uint64_t>(epoch * n + b), e.fault};
    r.reward = e.reward ? *e.reward : failure_reward(log, "micro");
    if (!e.reward && r.fault.empty()) r.fault = "evaluation failed";
    log.append(r);
    pending.push_back({g, r.reward});
    if (pending.size() == m) {
      ctrl.update(pending, ComponentGroup::Micro);
      pending.clear();
    }
  }
}

/// Best reward per genotype among stand-alone records, descending; ties keep
/// first-logged order.
inline std::vector<LogRecord> top_candidates(const std::vector<LogRecord>& records,
                                             std::size_t k) {
  std::vector<LogRecord> best;
  std::map<std::string, std::size_t> pos;
  for (const auto& r : records) {
    if (r.phase != "macro" || !r.fault.empty()) continue;
    auto it = pos.find(r.genotype);
    if (it == pos.end()) {
      pos[r.genotype] = best.size();
      best.push_back(r);
    } else if (r.reward > best[it->second].reward) {
      best[it->second] = r;
    }
  }
  std::stable_sort(best.begin(), best.end(),
                   [](const LogRecord& a, const LogRecord& b) { return a.reward > b.reward; });
  if (best.size() > k) best.resize(k);
  return best;
}

struct SearchResult {
  std::vector<LogRecord> log;
  std::vector<LogRecord> top;
  bool finished = false;

  const LogRecord& best() const {
    if (top.empty()) throw Error("search produced no stand-alone evaluation");
    return top.front();
  }
};

inline constexpr const char* kSearchLogFile = "search_log.jsonl";
inline constexpr const char* kSearchStateFile = "search_state.json";
inline constexpr const char* kSharedStoreFile = "shared.ckpt";

/// Outer loop: sample a micro genotype, k1 macro rounds with it pinned,
/// sample a macro genotype, k2 one-shot epochs with it pinned. State is
/// written after every outer iteration when a state directory is given.
template <class T>
SearchResult hybrid_search(const SearchBudget& budget, Controller& ctrl, SearchServices<T>& svc,
                           const SearchOptions& opt = {}) {
  budget.validate();
  SearchLog log;
  SearchCounters counters;
  ParameterStore<T> shared;
  bool have_shared = false;
  namespace fs = std::filesystem;
  if (opt.state_dir) {
    fs::create_directories(*opt.state_dir);
    const fs::path state_path = *opt.state_dir / kSearchStateFile;
    if (opt.resume && fs::exists(state_path)) {
      std::ifstream in(state_path);
      nlohmann::json st = nlohmann::json::parse(in);
      if (st.at("seed").get<std::uint64_t>() != opt.seed)
        throw IntegrityError("resume seed differs from the checkpointed search");
      ctrl = Controller::from_json(st.at("controller"));
      counters.iteration = st.at("iteration").get<std::size_t>();
      counters.standalone = st.at("standalone").get<std::size_t>();
      counters.micro_epoch = st.at("micro_epoch").get<std::size_t>();
      log.attach(*opt.state_dir / kSearchLogFile, st.at("log_offset").get<std::size_t>());
      if (fs::exists(*opt.state_dir / kSharedStoreFile)) {
        shared = load_checkpoint<T>(*opt.state_dir / kSharedStoreFile).store;
        have_shared = true;
      }
    } else {
      log.attach(*opt.state_dir / kSearchLogFile, std::size_t{0});
    }
  }
  if (!have_shared && budget.outer_iterations > 0) shared = svc.make_shared(opt.seed);

  std::size_t ran = 0;
  while (counters.iteration < budget.outer_iterations) {
    if (opt.stop_after && ran >= *opt.stop_after) break;
    const MicroGenotype micro = ctrl.sample().micro;
    for (std::size_t k = 0; k < budget.k1; ++k)
      macro_round(ctrl, micro, svc, log, counters, opt);
    const MacroGenotype macro = ctrl.sample().macro;
    for (std::size_t k = 0; k < budget.k2; ++k)
      micro_round(ctrl, macro, shared, svc, log, counters);
    ++counters.iteration;
    ++ran;
    if (opt.state_dir) {
      save_checkpoint(shared, "shared", *opt.state_dir / kSharedStoreFile);
      nlohmann::json st{{"seed", opt.seed},
                        {"iteration", counters.iteration},
                        {"standalone", counters.standalone},
                        {"micro_epoch", counters.micro_epoch},
                        {"log_offset", log.size()},
                        {"controller", ctrl.to_json()}};
      const fs::path tmp = *opt.state_dir / (std::string(kSearchStateFile) + ".tmp");
      {
        std::ofstream out(tmp);
        out << st.dump(2) << '\n';
      }
      fs::rename(tmp, *opt.state_dir / kSearchStateFile);
    }
  }
  SearchResult res;
  res.log = log.records();
  res.top = top_candidates(res.log, budget.top_k);
  res.finished = counters.iteration >= budget.outer_iterations;
  return res;
}

// ---------------------------------------------------------------------------
// Services backed by a knowledge-graph task.

/// Stand-alone training returns the best validation metric; one-shot trials
/// step the shared store on a corpus batch and take search_measurement.
template <class T>
SearchServices<T> task_services(const TaskData& task, const TrainConfig& cfg,
                                 std::size_t lp_valid_batch = 500) {
  SearchServices<T> svc;
  svc.standalone = [&task, cfg](const Genotype& g, std::uint64_t seed) {
    TrainConfig c = cfg;
    c.rng_seed = seed;
    ValidHook<T> hook = [&task, &g](const ParameterStore<T>& s) {
      return validation_metric(task, g, s);
    };
    Evaluation e;
    try {
      auto res = fit<T>(g, task.corpus, task.num_entities(), c, hook);
      e.reward = res.best_metric.value_or(validation_metric(task, g, res.store));
    } catch (const TrainingFault& f) {
      e.fault = f.what();
    }
    return e;
  };
  svc.make_shared = [&task, cfg](std::uint64_t seed) {
    return ParameterStore<T>(task.num_entities(), task.relation_rows(), cfg.dim,
                             derive_seed(seed, "shared"));
  };
  const std::size_t n_batches = (task.corpus.paths.size() + cfg.batch_size - 1) / cfg.batch_size;
  svc.micro_batches = [n_batches] { return n_batches; };
  svc.micro_trial = [&task, cfg, lp_valid_batch](const Genotype& g, ParameterStore<T>& shared,
                                                 std::size_t epoch, std::size_t b) {
    const std::uint64_t seed = derive_seed(cfg.rng_seed, "one-shot", epoch);
    auto order = epoch_order(task.corpus.paths.size(), true, seed, 0);
    std::vector<const RelationalPath*> batch;
    for (std::size_t i = b * cfg.batch_size;
         i < std::min(order.size(), (b + 1) * cfg.batch_size); ++i)
      batch.push_back(&task.corpus.paths[order[i]]);
    Rng drop(derive_seed(seed, "dropout", b));
    Evaluation e;
    try {
      step_once(g, shared, batch, task.corpus.pad_relation, cfg, cfg.lr, drop);
    } catch (const NumericFault& f) {
      e.fault = f.what();
      return e;
    }
    std::vector<Triplet> vb;
    if (task.kind() == TaskKind::LinkPrediction) {
      Rng pick(derive_seed(seed, "valid-batch", b));
      const auto& vq = task.valid_queries;
      const std::size_t n = std::min(lp_valid_batch, vq.size());
      std::vector<std::size_t> idx(vq.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      shuffle(idx.begin(), idx.end(), pick);
      for (std::size_t i = 0; i < n; ++i) vb.push_back(vq[idx[i]]);
    }
    e.reward = search_measurement(task, g, shared, vb, batch);
    return e;
  };
  return svc;
}

}  // namespace pathnas
