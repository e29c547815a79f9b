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

// A loaded dataset with its walk corpus, query sets and filters, and the
// task-specific validation and search signals.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pathnas/evaluator.hpp"
#include "pathnas/trainer.hpp"
#include "pathnas/walk.hpp"

namespace pathnas {

enum class LpMetric { Hit1, Mrr };

inline LpMetric parse_lp_metric(const std::string& s) {
  if (s == "hit1") return LpMetric::Hit1;
  if (s == "mrr") return LpMetric::Mrr;
  throw ConfigError("unknown link-prediction metric '" + s + "' (hit1|mrr)");
}

struct TaskData {
  DatasetBundle bundle;
  KnowledgeGraph walk;
  PathCorpus corpus;
  /// LP: tail queries plus inverse head queries. Countries: the raw
  /// (country, locatedin, region) queries.
  std::vector<Triplet> valid_queries, test_queries;
  FilterIndex filters;
  FilterIndex align_filter;
  std::vector<EntityId> kg2_candidates;
  LpMetric lp_metric = LpMetric::Hit1;

  TaskKind kind() const { return bundle.kind; }
  std::size_t num_entities() const { return bundle.graph.num_entities(); }
  std::size_t relation_rows() const { return corpus.pad_relation + std::size_t{1}; }
};

inline TaskData prepare_task(DatasetBundle b, PathCorpus corpus) {
  TaskData t;
  t.walk = walk_graph(b);
  t.corpus = std::move(corpus);
  if (t.corpus.pad_relation != t.walk.num_relations())
    throw IntegrityError("path corpus does not belong to this dataset");
  const std::size_t nrel = b.graph.num_relations();
  if (b.kind == TaskKind::LinkPrediction) {
    t.valid_queries = with_head_queries(b.valid, nrel);
    t.test_queries = with_head_queries(b.test, nrel);
    auto tr = with_head_queries(b.train, nrel);
    t.filters = filter_sets({&tr, &t.valid_queries, &t.test_queries});
  } else if (b.kind == TaskKind::Countries) {
    t.valid_queries = b.valid;
    t.test_queries = b.test;
  } else {
    t.align_filter = alignment_filter({&b.train_pairs, &b.valid_pairs, &b.test_pairs});
    for (EntityId e = 0; e < b.graph.num_entities(); ++e)
      if (b.graph.kg_tag(e) == 2) t.kg2_candidates.push_back(e);
  }
  t.bundle = std::move(b);
  return t;
}

inline TaskData prepare_task(DatasetBundle b, const WalkConfig& wc) {
  KnowledgeGraph wg = walk_graph(b);
  PathCorpus corpus = sample_paths(wg, wc);
  return prepare_task(std::move(b), std::move(corpus));
}

/// Validation signal used for early stopping and stand-alone search rewards:
/// LP Hit@1 (or MRR), alignment Hit@1, Countries AUC-PR.
template <class T>
double validation_metric(const TaskData& t, const Genotype& g, const ParameterStore<T>& store) {
  switch (t.kind()) {
    case TaskKind::LinkPrediction: {
      auto r = lp_rank(g, store, std::span<const Triplet>(t.valid_queries), &t.filters);
      return t.lp_metric == LpMetric::Hit1 ? r.hit1 : r.mrr;
    }
    case TaskKind::Countries:
      return countries_auc_pr(g, store, std::span<const Triplet>(t.valid_queries),
                              t.bundle.candidates);
    case TaskKind::EntityAlignment:
      return ea_rank(store, std::span<const EntityPair>(t.bundle.valid_pairs), t.kg2_candidates,
                     &t.align_filter)
          .hit1;
  }
  throw Error("bad task kind");
}

/// Test-split report as a JSON object.
template <class T>
nlohmann::json test_report(const TaskData& t, const Genotype& g, const ParameterStore<T>& store) {
  nlohmann::json j;
  auto rank_json = [](const RankReport& r) {
    return nlohmann::json{
        {"mrr", r.mrr}, {"hit1", r.hit1}, {"hit10", r.hit10}, {"n_queries", r.n_queries}};
  };
  switch (t.kind()) {
    case TaskKind::LinkPrediction:
      j = rank_json(lp_rank(g, store, std::span<const Triplet>(t.test_queries), &t.filters));
      break;
    case TaskKind::Countries:
      j["auc_pr"] = countries_auc_pr(g, store, std::span<const Triplet>(t.test_queries),
                                     t.bundle.candidates);
      j["n_queries"] = t.test_queries.size();
      break;
    case TaskKind::EntityAlignment:
      j = rank_json(ea_rank(store, std::span<const EntityPair>(t.bundle.test_pairs),
                            t.kg2_candidates, &t.align_filter));
      break;
  }
  return j;
}

/// Mini-batch reward for one-shot search: -loss on a training batch for
/// alignment, Hit@1 (or MRR) on a validation query batch for LP, and
/// AUC-PR on the validation queries for Countries.
template <class T>
double search_measurement(const TaskData& t, const Genotype& g, const ParameterStore<T>& store,
                          std::span<const Triplet> valid_batch, PathBatch train_batch) {
  switch (t.kind()) {
    case TaskKind::EntityAlignment:
      return -evaluate_loss(g, store, train_batch, t.corpus.pad_relation);
    case TaskKind::LinkPrediction: {
      if (valid_batch.empty()) throw Error("search measurement: empty batch");
      auto r = lp_rank(g, store, valid_batch, &t.filters);
      return t.lp_metric == LpMetric::Hit1 ? r.hit1 : r.mrr;
    }
    case TaskKind::Countries:
      return countries_auc_pr(g, store, std::span<const Triplet>(t.valid_queries),
                              t.bundle.candidates);
  }
  throw Error("bad task kind");
}

}  // namespace pathnas
