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

// Biased random walks producing fixed-length relational paths, and the
// binary path-corpus format.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pathnas/common.hpp"
#include "pathnas/kg.hpp"

namespace pathnas {

/// Triplets chained head to tail: steps[t].object == steps[t+1].subject.
struct RelationalPath {
  std::vector<Triplet> steps;
  friend bool operator==(const RelationalPath&, const RelationalPath&) = default;
};

struct WalkConfig {
  double depth_bias = 0.7;
  std::optional<double> cross_kg_bias;
  std::uint32_t path_length = 3;
  std::uint32_t paths_per_triplet = 2;
  std::uint64_t rng_seed = 0;
  /// Restarts from the seed triplet before a dead-end walk is padded.
  std::uint32_t max_restarts = 8;

  void validate() const {
    if (!(depth_bias > 0.5 && depth_bias < 1.0))
      throw ConfigError("walk.depth_bias must lie in (0.5, 1)");
    if (cross_kg_bias && !(*cross_kg_bias > 0.5 && *cross_kg_bias < 1.0))
      throw ConfigError("walk.cross_kg_bias must lie in (0.5, 1)");
    if (path_length < 1) throw ConfigError("walk.path_length must be >= 1");
    if (paths_per_triplet < 1)
      throw ConfigError("walk.paths_per_triplet must be >= 1");
  }

  static WalkConfig entity_alignment_defaults() {
    WalkConfig c;
    c.depth_bias = 0.9;
    c.cross_kg_bias = 0.9;
    c.path_length = 7;
    return c;
  }
  static WalkConfig link_prediction_defaults() {
    WalkConfig c;
    c.depth_bias = 0.7;
    c.path_length = 3;
    return c;
  }
};

/// Next-step probabilities over `graph.out_edges(cur)`, in edge order.
/// Returns an empty vector when `cur` is a dead end.
///
/// A candidate that is neither `prev` nor an undirected neighbor of `prev`
/// moves the walk deeper and is weighted by depth_bias, others by
/// 1 - depth_bias. With a cross-KG bias, candidates in the other partition
/// are weighted by it and the rest by its complement.
inline std::vector<double> step_distribution(const KnowledgeGraph& graph,
                                             std::optional<EntityId> prev,
                                             EntityId cur, const WalkConfig& cfg) {
  const auto& edges = graph.out_edges(cur);
  std::vector<double> w(edges.size(), 1.0);
  if (edges.empty()) return w;
  double total = 0.0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const EntityId next = edges[i].target;
    if (prev) {
      bool deeper = next != *prev && !graph.adjacent_undirected(*prev, next);
      w[i] *= deeper ? cfg.depth_bias : 1.0 - cfg.depth_bias;
    }
    if (cfg.cross_kg_bias) {
      bool crosses = graph.kg_tag(next) != graph.kg_tag(cur);
      w[i] *= crosses ? *cfg.cross_kg_bias : 1.0 - *cfg.cross_kg_bias;
    }
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

struct PathCorpus {
  WalkConfig config;
  /// Relation id used for padded steps after an unrecoverable dead end.
  RelationId pad_relation = 0;
  std::vector<RelationalPath> paths;
};

namespace detail {

/// Extends `path` (holding its seed triplet) to `length` steps; false on a
/// dead end, with the partial walk left in place.
inline bool extend_walk(const KnowledgeGraph& g, const WalkConfig& cfg,
                        RelationalPath& path, Rng& rng) {
  while (path.steps.size() < cfg.path_length) {
    const Triplet& last = path.steps.back();
    auto probs = step_distribution(g, last.subject, last.object, cfg);
    if (probs.empty()) return false;
    const Edge& e = g.out_edges(last.object)[sample_categorical(rng, probs)];
    path.steps.push_back({last.object, e.relation, e.target});
  }
  return true;
}

}  // namespace detail

/// Walks `paths_per_triplet` paths from every triplet of `graph`. Each seed
/// triplet owns an RNG stream derived from (rng_seed, triplet index), so the
/// corpus depends only on (graph, cfg).
inline PathCorpus sample_paths(const KnowledgeGraph& graph, const WalkConfig& cfg) {
  cfg.validate();
  if (graph.triplets().empty()) throw Error("cannot walk an empty graph");
  PathCorpus corpus;
  corpus.config = cfg;
  corpus.pad_relation = static_cast<RelationId>(graph.num_relations());
  corpus.paths.reserve(graph.triplets().size() * cfg.paths_per_triplet);
  const auto& seeds = graph.triplets();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Rng rng(derive_seed(cfg.rng_seed, "walk", i));
    for (std::uint32_t k = 0; k < cfg.paths_per_triplet; ++k) {
      RelationalPath path;
      for (std::uint32_t attempt = 0;; ++attempt) {
        path.steps.assign(1, seeds[i]);
        if (detail::extend_walk(graph, cfg, path, rng)) break;
        if (attempt >= cfg.max_restarts) {
          while (path.steps.size() < cfg.path_length) {
            EntityId end = path.steps.back().object;
            path.steps.push_back({end, corpus.pad_relation, end});
          }
          break;
        }
      }
      corpus.paths.push_back(std::move(path));
    }
  }
  return corpus;
}

inline bool is_chained(const RelationalPath& p) {
  for (std::size_t t = 1; t < p.steps.size(); ++t)
    if (p.steps[t - 1].object != p.steps[t].subject) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Corpus file: "PNPC", version, walk config, seed, pad relation, path count,
// L, then per path s1 r1 o1 r2 o2 ... rL oL as uint32, then a CRC32 trailer.

inline constexpr char kCorpusMagic[4] = {'P', 'N', 'P', 'C'};
inline constexpr std::uint32_t kCorpusVersion = 1;

inline void write_paths(const PathCorpus& corpus, const fs::path& path) {
  BinaryWriter w;
  for (char c : kCorpusMagic) w.put(c);
  w.put(kCorpusVersion);
  const WalkConfig& c = corpus.config;
  w.put(c.depth_bias);
  w.put<std::uint8_t>(c.cross_kg_bias.has_value());
  w.put(c.cross_kg_bias.value_or(0.0));
  w.put(c.paths_per_triplet);
  w.put(c.max_restarts);
  w.put(c.rng_seed);
  w.put(corpus.pad_relation);
  w.put<std::uint64_t>(corpus.paths.size());
  w.put(c.path_length);
  for (const auto& p : corpus.paths) {
    if (p.steps.size() != c.path_length)
      throw ShapeError("path length differs from corpus length");
    w.put(p.steps.front().subject);
    for (const Triplet& t : p.steps) {
      w.put(t.relation);
      w.put(t.object);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  w.finish(out);
}

/// Reads a corpus; if `expected_seed` is given the header seed must match.
inline PathCorpus read_paths(const fs::path& path,
                             std::optional<std::uint64_t> expected_seed = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  BinaryReader r(in);
  for (char c : kCorpusMagic)
    if (r.get<char>() != c) throw IntegrityError("not a path corpus file");
  if (r.get<std::uint32_t>() != kCorpusVersion)
    throw IntegrityError("unsupported corpus version");
  PathCorpus corpus;
  WalkConfig& c = corpus.config;
  c.depth_bias = r.get<double>();
  bool has_cross = r.get<std::uint8_t>() != 0;
  double cross = r.get<double>();
  if (has_cross) c.cross_kg_bias = cross;
  c.paths_per_triplet = r.get<std::uint32_t>();
  c.max_restarts = r.get<std::uint32_t>();
  c.rng_seed = r.get<std::uint64_t>();
  corpus.pad_relation = r.get<RelationId>();
  auto count = r.get<std::uint64_t>();
  c.path_length = r.get<std::uint32_t>();
  if (expected_seed && *expected_seed != c.rng_seed)
    throw IntegrityError("corpus seed " + std::to_string(c.rng_seed) +
                         " differs from requested seed " +
                         std::to_string(*expected_seed));
  corpus.paths.resize(count);
  for (auto& p : corpus.paths) {
    p.steps.resize(c.path_length);
    EntityId subject = r.get<EntityId>();
    for (auto& t : p.steps) {
      t.subject = subject;
      t.relation = r.get<RelationId>();
      t.object = r.get<EntityId>();
      subject = t.object;
    }
  }
  if (!r.at_end()) throw IntegrityError("trailing bytes in corpus");
  return corpus;
}

/// Human-readable dump: one path per line, labels separated by tabs.
inline void dump_paths_tsv(const PathCorpus& corpus, const KnowledgeGraph& graph,
                           const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  auto rel = [&](RelationId r) -> std::string {
    return r == corpus.pad_relation ? "<pad>" : graph.relations().label(r);
  };
  for (const auto& p : corpus.paths) {
    out << graph.entities().label(p.steps.front().subject);
    for (const Triplet& t : p.steps)
      out << '\t' << rel(t.relation) << '\t' << graph.entities().label(t.object);
    out << '\n';
  }
}

}  // namespace pathnas
