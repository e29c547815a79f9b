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

// Filtered ranking, cosine alignment ranking and average precision.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pathnas/cell.hpp"
#include "pathnas/kg.hpp"
#include "pathnas/params.hpp"

namespace pathnas {

struct RankReport {
  double mrr = 0;
  double hit1 = 0;
  double hit10 = 0;
  std::size_t n_queries = 0;
};

inline RankReport summarize_ranks(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw Error("rank report over zero queries");
  RankReport r;
  for (std::size_t k : ranks) {
    r.mrr += 1.0 / static_cast<double>(k);
    r.hit1 += k <= 1 ? 1.0 : 0.0;
    r.hit10 += k <= 10 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(ranks.size());
  r.mrr /= n;
  r.hit1 /= n;
  r.hit10 /= n;
  r.n_queries = ranks.size();
  return r;
}

/// 1 + number of competitors scoring >= the target. Competitors are all
/// indices (or `candidates` when given) other than the target and outside
/// the sorted `filter`.
template <class T>
std::size_t pessimistic_rank(std::span<const T> scores, std::size_t target,
                             const std::vector<EntityId>* filter = nullptr,
                             const std::vector<EntityId>* candidates = nullptr) {
  const T ts = scores[target];
  auto filtered = [&](std::size_t e) {
    return filter && std::binary_search(filter->begin(), filter->end(),
                                        static_cast<EntityId>(e));
  };
  std::size_t rank = 1;
  auto visit = [&](std::size_t e) {
    if (e == target || scores[e] < ts || filtered(e)) return;
    ++rank;
  };
  if (candidates) {
    for (EntityId e : *candidates) visit(e);
  } else {
    for (std::size_t e = 0; e < scores.size(); ++e) visit(e);
  }
  return rank;
}

/// Object scores v_1 . e for every entity, one row per query, where v_1 is a
/// single recurrent step with h_0 = s.
template <class T>
Tensor<T> lp_scores(const Genotype& g, const ParameterStore<T>& store,
                    std::span<const Triplet> queries) {
  const auto& E = store.value(kEntity);
  const auto& R = store.value(kRelation);
  std::vector<std::uint32_t> s_ids, r_ids;
  for (const Triplet& q : queries) {
    if (q.subject >= E.rows() || q.object >= E.rows())
      throw VocabularyError("query entity outside the vocabulary");
    if (q.relation >= R.rows()) throw VocabularyError("query relation outside the vocabulary");
    s_ids.push_back(q.subject);
    r_ids.push_back(q.relation);
  }
  Tape<T> tape;
  CellContext<T> ctx{tape, store, false};
  Var Ev = ctx.param(kEntity);
  Var s = tape.lookup(Ev, s_ids);
  Var r = tape.lookup(ctx.param(kRelation), r_ids);
  CellOutput<T> out = forward_cell(ctx, g, s, r, s);
  return tape.value(tape.dot_scores(out.v, Ev));
}

inline constexpr std::size_t kEvalChunk = 512;

/// Filtered pessimistic ranks of each query's object.
template <class T>
std::vector<std::size_t> lp_ranks(const Genotype& g, const ParameterStore<T>& store,
                                  std::span<const Triplet> queries,
                                  const FilterIndex* filters = nullptr,
                                  const std::vector<EntityId>* candidates = nullptr) {
  std::vector<std::size_t> ranks;
  ranks.reserve(queries.size());
  for (std::size_t start = 0; start < queries.size(); start += kEvalChunk) {
    auto chunk = queries.subspan(start, std::min(kEvalChunk, queries.size() - start));
    Tensor<T> S = lp_scores(g, store, chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const std::vector<EntityId>* f = nullptr;
      if (filters) {
        auto it = filters->find(query_key(chunk[i].subject, chunk[i].relation));
        if (it != filters->end()) f = &it->second;
      }
      ranks.push_back(pessimistic_rank<T>(S.row_span(i), chunk[i].object, f, candidates));
    }
  }
  return ranks;
}

template <class T>
RankReport lp_rank(const Genotype& g, const ParameterStore<T>& store,
                   std::span<const Triplet> queries, const FilterIndex* filters = nullptr) {
  auto ranks = lp_ranks(g, store, queries, filters);
  return summarize_ranks(ranks);
}

/// Tail queries followed by head queries phrased through inverse relations.
inline std::vector<Triplet> with_head_queries(const std::vector<Triplet>& ts,
                                              std::size_t num_relations) {
  std::vector<Triplet> out = ts;
  auto inv = inverse_triplets(ts, num_relations);
  out.insert(out.end(), inv.begin(), inv.end());
  return out;
}

template <class T>
double cosine(std::span<const T> a, std::span<const T> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += static_cast<double>(a[k]) * b[k];
    aa += static_cast<double>(a[k]) * a[k];
    bb += static_cast<double>(b[k]) * b[k];
  }
  if (aa == 0 || bb == 0) return 0;
  return ab / std::sqrt(aa * bb);
}

/// Ranks e2 among `candidates` by cosine similarity to e1, removing the other
/// gold counterparts of e1.
template <class T>
std::vector<std::size_t> ea_ranks(const ParameterStore<T>& store,
                                  std::span<const EntityPair> pairs,
                                  const std::vector<EntityId>& candidates,
                                  const FilterIndex* filter = nullptr) {
  if (candidates.empty()) throw Error("entity alignment: empty candidate set");
  const auto& E = store.value(kEntity);
  std::vector<std::size_t> ranks;
  ranks.reserve(pairs.size());
  std::vector<double> sims(E.rows(), 0.0);
  for (const auto& [e1, e2] : pairs) {
    if (e1 >= E.rows() || e2 >= E.rows())
      throw VocabularyError("alignment entity outside the vocabulary");
    for (EntityId c : candidates) sims[c] = cosine<T>(E.row_span(e1), E.row_span(c));
    sims[e2] = cosine<T>(E.row_span(e1), E.row_span(e2));
    const std::vector<EntityId>* f = nullptr;
    if (filter) {
      auto it = filter->find(e1);
      if (it != filter->end()) f = &it->second;
    }
    ranks.push_back(pessimistic_rank<double>(sims, e2, f, &candidates));
  }
  return ranks;
}

template <class T>
RankReport ea_rank(const ParameterStore<T>& store, std::span<const EntityPair> pairs,
                   const std::vector<EntityId>& candidates,
                   const FilterIndex* filter = nullptr) {
  auto ranks = ea_ranks(store, pairs, candidates, filter);
  return summarize_ranks(ranks);
}

/// Average precision: sum_k (R_k - R_{k-1}) P_k over descending distinct
/// score thresholds. Tied scores enter together.
inline double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc_pr: scores/labels length");
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; });
  if (positives == 0) throw Error("auc_pr: no positive labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double tp = 0, fp = 0, prev_recall = 0, ap = 0;
  const double P = static_cast<double>(positives);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1;
      ++j;
    }
    const double recall = tp / P;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

/// Pooled AUC-PR of (country, locatedin, region) queries over the region
/// candidates: every (query, candidate) pair is one scored example.
template <class T>
double countries_auc_pr(const Genotype& g, const ParameterStore<T>& store,
                        std::span<const Triplet> queries,
                        const std::vector<EntityId>& candidates) {
  if (queries.empty()) throw Error("countries evaluation: no queries");
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t start = 0; start < queries.size(); start += kEvalChunk) {
    auto chunk = queries.subspan(start, std::min(kEvalChunk, queries.size() - start));
    Tensor<T> S = lp_scores(g, store, chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i)
      for (EntityId c : candidates) {
        scores.push_back(static_cast<double>(S(i, c)));
        labels.push_back(c == chunk[i].object ? 1 : 0);
      }
  }
  return auc_pr(scores, labels);
}

}  // namespace pathnas
