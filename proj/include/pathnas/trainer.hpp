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

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pathnas/cell.hpp"
#include "pathnas/genotype.hpp"
#include "pathnas/params.hpp"
#include "pathnas/walk.hpp"

namespace pathnas {

struct TrainConfig {
  double lr = 1e-3;
  double l2 = 1e-5;
  double decay = 1.0;
  std::size_t batch_size = 256;
  double dropout = 0.0;
  std::size_t dim = 64;
  std::size_t epochs = 30;
  std::size_t patience = 5;
  /// Epochs between validation evaluations.
  std::size_t eval_every = 1;
  std::uint64_t rng_seed = 0;
  bool shuffle = true;

  /// Structural checks used by every training entry point.
  void validate() const {
    if (dim == 0 || dim % 2 != 0) throw ConfigError("train.dim must be a positive even integer");
    if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train.dropout must lie in [0, 1)");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be finite and >= 0");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("train.l2 must be finite and >= 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("train.decay must lie in (0, 1]");
    if (patience == 0) throw ConfigError("train.patience must be positive");
    if (eval_every == 0) throw ConfigError("train.eval_every must be positive");
  }

  /// The tunable ranges: lr in [1e-5, 1e-3], l2 in [1e-5, 1e-2],
  /// decay in [0.98, 1], batch in {128..2048}, dropout in [0, 0.6].
  void validate_ranges() const {
    validate();
    if (lr < 1e-5 || lr > 1e-3) throw ConfigError("train.lr must lie in [1e-5, 1e-3]");
    if (l2 < 1e-5 || l2 > 1e-2) throw ConfigError("train.l2 must lie in [1e-5, 1e-2]");
    if (decay < 0.98 || decay > 1.0) throw ConfigError("train.decay must lie in [0.98, 1]");
    if (!is_allowed_batch(batch_size))
      throw ConfigError("train.batch_size must be one of 128, 256, 512, 1024, 2048");
    if (dropout > 0.6) throw ConfigError("train.dropout must lie in [0, 0.6]");
  }

  static constexpr std::size_t kBatchSizes[] = {128, 256, 512, 1024, 2048};
  static bool is_allowed_batch(std::size_t b) {
    for (auto x : kBatchSizes)
      if (x == b) return true;
    return false;
  }
};

/// Raised when a loss or gradient turns non-finite during training.
class TrainingFault : public NumericFault {
 public:
  TrainingFault(const std::string& genotype, std::size_t epoch, std::size_t batch,
                const std::string& cause)
      : NumericFault("training fault [" + genotype + "] epoch " + std::to_string(epoch) +
                     " batch " + std::to_string(batch) + ": " + cause),
        genotype_(genotype), epoch_(epoch), batch_(batch) {}
  const std::string& genotype() const { return genotype_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::string genotype_;
  std::size_t epoch_;
  std::size_t batch_;
};

using PathBatch = std::span<const RelationalPath* const>;

inline std::vector<const RelationalPath*> all_paths(const std::vector<RelationalPath>& paths) {
  std::vector<const RelationalPath*> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(&p);
  return out;
}

/// Mean multi-class log-loss over all unpadded steps of the batch:
///   sum_paths sum_t [ -v_t . o_t + log sum_e exp(v_t . e) ] / (|batch| L).
/// h_0 is the (dropped-out) first subject. Dropout is applied when `rng` is
/// given and cfg.dropout > 0.
template <class T>
Var path_loss(Tape<T>& tape, const Genotype& g, const ParameterStore<T>& store,
              PathBatch batch, RelationId pad_relation, double dropout = 0.0,
              Rng* rng = nullptr, bool trainable = true) {
  if (batch.empty()) throw ShapeError("path_loss: empty batch");
  const std::size_t L = batch[0]->steps.size();
  if (L == 0) throw ShapeError("path_loss: empty path");
  for (const auto* p : batch)
    if (p->steps.size() != L) throw ShapeError("path_loss: mixed path lengths");
  const std::size_t B = batch.size();
  CellContext<T> ctx{tape, store, trainable};
  Var E = ctx.param(kEntity);
  Var R = ctx.param(kRelation);
  const T w_step = T(1) / static_cast<T>(B * L);

  std::vector<std::uint32_t> s_ids(B), r_ids(B), o_ids(B);
  std::vector<T> weights(B);
  std::optional<Var> h, total;
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      const Triplet& st = batch[b]->steps[t];
      s_ids[b] = st.subject;
      r_ids[b] = st.relation;
      o_ids[b] = st.object;
      weights[b] = st.relation == pad_relation ? T(0) : w_step;
    }
    Var s = tape.lookup(E, s_ids);
    Var r = tape.lookup(R, r_ids);
    if (rng && dropout > 0.0) {
      s = tape.dropout(s, dropout, *rng);
      r = tape.dropout(r, dropout, *rng);
    }
    if (!h) h = s;
    CellOutput<T> out = forward_cell(ctx, g, s, r, *h);
    Var loss = tape.softmax_xent(tape.dot_scores(out.v, E), o_ids, weights);
    total = total ? tape.add(*total, loss) : loss;
    h = out.h;
  }
  return *total;
}

/// Loss value of a batch without building gradients or dropout.
template <class T>
double evaluate_loss(const Genotype& g, const ParameterStore<T>& store, PathBatch batch,
                     RelationId pad_relation) {
  Tape<T> tape;
  Var l = path_loss(tape, g, store, batch, pad_relation, 0.0, nullptr, false);
  return static_cast<double>(tape.value(l).item());
}

/// One forward/backward/Adam cycle on `batch`. Returns the batch loss
/// measured before the update.
template <class T>
double step_once(const Genotype& g, ParameterStore<T>& store, PathBatch batch,
                 RelationId pad_relation, const TrainConfig& cfg, double lr, Rng& rng) {
  Tape<T> tape;
  Var l = path_loss(tape, g, store, batch, pad_relation, cfg.dropout, &rng, true);
  const double loss = static_cast<double>(tape.value(l).item());
  tape.backward(l);
  adam_step(store, tape.take_param_grads(store.size()), lr, cfg.l2);
  return loss;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0;
  double lr = 0;
  std::optional<double> valid_metric;
  double wall_seconds = 0;

  /// Equality ignores wall time.
  friend bool operator==(const EpochRecord& a, const EpochRecord& b) {
    return a.epoch == b.epoch && a.mean_loss == b.mean_loss && a.lr == b.lr &&
           a.valid_metric == b.valid_metric;
  }
};

inline nlohmann::json record_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"loss", r.mean_loss}, {"lr", r.lr},
                   {"wall_time", r.wall_seconds}};
  j["valid_metric"] = r.valid_metric ? nlohmann::json(*r.valid_metric) : nlohmann::json();
  return j;
}

template <class T>
struct FitResult {
  ParameterStore<T> store;
  std::vector<EpochRecord> history;
  std::optional<double> best_metric;
  std::size_t best_epoch = 0;
};

/// Validation hook: higher is better.
template <class T>
using ValidHook = std::function<double(const ParameterStore<T>&)>;

/// Batch order of one epoch: identity, or a seeded shuffle.
inline std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle_paths,
                                            std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_paths) {
    Rng rng(derive_seed(seed, "shuffle", epoch));
    shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

/// Trains `store` in place. With a hook, stops after `patience` evaluations
/// without improvement and returns the best-validation parameters.
template <class T>
FitResult<T> fit_from(const Genotype& g, ParameterStore<T> store, const PathCorpus& corpus,
                      const TrainConfig& cfg, const ValidHook<T>& hook = {}) {
  cfg.validate();
  if (corpus.paths.empty() && cfg.epochs > 0) throw Error("fit: empty path corpus");
  const std::string gname = to_string(g);
  FitResult<T> res;
  Rng drop_rng(derive_seed(cfg.rng_seed, "dropout"));
  double lr = cfg.lr;
  std::size_t bad = 0;
  std::optional<ParameterStore<T>> best;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = epoch_order(corpus.paths.size(), cfg.shuffle, cfg.rng_seed, epoch);
    std::vector<const RelationalPath*> batch;
    double loss_sum = 0;
    std::size_t bi = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++bi) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
        batch.push_back(&corpus.paths[order[i]]);
      try {
        loss_sum += step_once(g, store, batch, corpus.pad_relation, cfg, lr, drop_rng) *
                    static_cast<double>(batch.size());
      } catch (const NumericFault& e) {
        throw TrainingFault(gname, epoch, bi, e.what());
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(order.size());
    rec.lr = lr;
    if (!std::isfinite(rec.mean_loss)) throw TrainingFault(gname, epoch, bi, "non-finite loss");
    lr *= cfg.decay;
    bool stop = false;
    if (hook && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const double m = hook(store);
      rec.valid_metric = m;
      if (!res.best_metric || m > *res.best_metric) {
        res.best_metric = m;
        res.best_epoch = epoch;
        best = store;
        bad = 0;
      } else if (++bad >= cfg.patience) {
        stop = true;
      }
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(rec);
    if (stop) break;
  }
  res.store = best ? std::move(*best) : std::move(store);
  return res;
}

template <class T>
FitResult<T> fit(const Genotype& g, const PathCorpus& corpus, std::size_t num_entities,
                 const TrainConfig& cfg, const ValidHook<T>& hook = {}) {
  cfg.validate();
  ParameterStore<T> store(num_entities, corpus.pad_relation + 1, cfg.dim,
                          derive_seed(cfg.rng_seed, "params"));
  return fit_from(g, std::move(store), corpus, cfg, hook);
}

}  // namespace pathnas
