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

// Knowledge graphs: vocabularies, triplet store, adjacency indexes, dataset
// splits and the filter index used by ranking evaluation.

#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pathnas/common.hpp"

namespace pathnas {

namespace fs = std::filesystem;

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triplet {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const {
    return splitmix64((std::uint64_t{t.subject} << 32) ^ t.object ^
                      (std::uint64_t{t.relation} << 48));
  }
};

using EntityPair = std::pair<EntityId, EntityId>;

/// Label <-> id bijection; ids follow first-insertion order.
class Vocabulary {
 public:
  std::uint32_t add(const std::string& label) {
    auto [it, inserted] =
        index_.try_emplace(label, static_cast<std::uint32_t>(labels_.size()));
    if (inserted) labels_.push_back(label);
    return it->second;
  }
  std::optional<std::uint32_t> find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::uint32_t at(const std::string& label) const {
    auto id = find(label);
    if (!id) throw VocabularyError("unknown label '" + label + "'");
    return *id;
  }
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Edge {
  RelationId relation = 0;
  EntityId target = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable once constructed; safe to share between readers.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  /// Builds the indexes. Duplicate triplets are dropped (first occurrence
  /// kept); `duplicates`, if given, receives the number removed.
  KnowledgeGraph(Vocabulary entities, Vocabulary relations,
                 std::vector<Triplet> triplets,
                 std::vector<std::uint8_t> kg_tags = {},
                 std::size_t* duplicates = nullptr)
      : entities_(std::move(entities)),
        relations_(std::move(relations)),
        kg_tags_(std::move(kg_tags)) {
    if (!kg_tags_.empty() && kg_tags_.size() != entities_.size())
      throw PartitionError("kg_tag table size differs from entity count");
    std::unordered_set<Triplet, TripletHash> seen;
    std::size_t dup = 0;
    triplets_.reserve(triplets.size());
    for (const Triplet& t : triplets) {
      if (t.subject >= entities_.size() || t.object >= entities_.size() ||
          t.relation >= relations_.size())
        throw VocabularyError("triplet id outside vocabulary");
      if (seen.insert(t).second)
        triplets_.push_back(t);
      else
        ++dup;
    }
    if (duplicates) *duplicates = dup;
    build_indexes();
  }

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  const std::vector<Triplet>& triplets() const { return triplets_; }
  const std::vector<Edge>& out_edges(EntityId e) const { return out_.at(e); }

  /// Sorted undirected neighbor set (excluding `e` unless it has a self-loop).
  const std::vector<EntityId>& undirected_neighbors(EntityId e) const {
    return undirected_.at(e);
  }
  bool adjacent_undirected(EntityId a, EntityId b) const {
    const auto& n = undirected_.at(a);
    return std::binary_search(n.begin(), n.end(), b);
  }

  bool has_partitions() const { return !kg_tags_.empty(); }
  /// 1 or 2 for two-KG datasets, 0 when the graph is not partitioned.
  std::uint8_t kg_tag(EntityId e) const {
    return kg_tags_.empty() ? 0 : kg_tags_.at(e);
  }
  const std::vector<std::uint8_t>& kg_tags() const { return kg_tags_; }

  bool contains(const Triplet& t) const {
    if (t.subject >= out_.size()) return false;
    for (const Edge& e : out_[t.subject])
      if (e.relation == t.relation && e.target == t.object) return true;
    return false;
  }

 private:
  void build_indexes() {
    out_.assign(entities_.size(), {});
    undirected_.assign(entities_.size(), {});
    for (const Triplet& t : triplets_) {
      out_[t.subject].push_back({t.relation, t.object});
      undirected_[t.subject].push_back(t.object);
      undirected_[t.object].push_back(t.subject);
    }
    for (auto& n : undirected_) {
      std::sort(n.begin(), n.end());
      n.erase(std::unique(n.begin(), n.end()), n.end());
    }
  }

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triplet> triplets_;
  std::vector<std::uint8_t> kg_tags_;
  std::vector<std::vector<Edge>> out_;
  std::vector<std::vector<EntityId>> undirected_;
};

// ---------------------------------------------------------------------------
// Loading.

enum class VocabMode { Build, Reuse };

struct LoadResult {
  std::vector<Triplet> triplets;  // file order, duplicates removed
  std::size_t duplicates = 0;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

/// Reads a tab-separated triplet file against (and, in build mode, into) the
/// given vocabularies.
inline LoadResult read_triplet_file(const fs::path& path, VocabMode mode,
                                    Vocabulary& entities,
                                    Vocabulary& relations) {
  auto in = detail::open_input(path);
  LoadResult result;
  std::unordered_set<Triplet, TripletHash> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 3)
      throw ParseError(path.string() + ": expected 3 tab-separated fields, got " +
                           std::to_string(f.size()),
                       line_no);
    Triplet t;
    if (mode == VocabMode::Build) {
      t = {entities.add(f[0]), relations.add(f[1]), entities.add(f[2])};
    } else {
      auto s = entities.find(f[0]), o = entities.find(f[2]);
      auto r = relations.find(f[1]);
      if (!s || !o || !r)
        throw VocabularyError(path.string() + ": unknown label on line " +
                              std::to_string(line_no));
      t = {*s, *r, *o};
    }
    if (seen.insert(t).second)
      result.triplets.push_back(t);
    else
      ++result.duplicates;
  }
  return result;
}

/// Loads a single triplet file as a graph. In reuse mode, `vocab_source`
/// supplies the vocabularies and unknown labels are an error; in build mode
/// it optionally seeds the vocabularies, which are then extended.
inline KnowledgeGraph load_triplets(const fs::path& path, VocabMode mode,
                                    const KnowledgeGraph* vocab_source = nullptr,
                                    std::size_t* duplicates = nullptr) {
  Vocabulary ent, rel;
  if (vocab_source) {
    ent = vocab_source->entities();
    rel = vocab_source->relations();
  } else if (mode == VocabMode::Reuse) {
    throw VocabularyError("reuse mode requires a vocabulary source");
  }
  auto res = read_triplet_file(path, mode, ent, rel);
  if (duplicates) *duplicates = res.duplicates;
  std::vector<std::uint8_t> tags;
  if (vocab_source && vocab_source->has_partitions()) {
    tags = vocab_source->kg_tags();
    tags.resize(ent.size(), 0);
  }
  return KnowledgeGraph(std::move(ent), std::move(rel),
                        std::move(res.triplets), std::move(tags));
}

/// Reads "left<TAB>right" entity-label pairs; left must lie in KG1 and right
/// in KG2.
inline std::vector<EntityPair> load_alignment_pairs(const fs::path& path,
                                                    const KnowledgeGraph& graph) {
  if (!graph.has_partitions())
    throw PartitionError("alignment pairs need a two-partition graph");
  auto in = detail::open_input(path);
  std::vector<EntityPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 2)
      throw ParseError(path.string() + ": expected 2 tab-separated fields",
                       line_no);
    auto a = graph.entities().find(f[0]), b = graph.entities().find(f[1]);
    if (!a || !b)
      throw VocabularyError(path.string() + ": unknown entity on line " +
                            std::to_string(line_no));
    if (graph.kg_tag(*a) != 1 || graph.kg_tag(*b) != 2)
      throw PartitionError(path.string() + ": pair on line " +
                           std::to_string(line_no) +
                           " does not span KG1 -> KG2");
    pairs.emplace_back(*a, *b);
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Datasets.

enum class TaskKind { LinkPrediction, EntityAlignment, Countries };

inline const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::LinkPrediction: return "link-prediction";
    case TaskKind::EntityAlignment: return "entity-alignment";
    case TaskKind::Countries: return "countries";
  }
  return "?";
}

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "link-prediction") return TaskKind::LinkPrediction;
  if (s == "entity-alignment") return TaskKind::EntityAlignment;
  if (s == "countries") return TaskKind::Countries;
  throw ConfigError("unknown task kind '" + s + "'");
}

struct DatasetBundle {
  TaskKind kind = TaskKind::LinkPrediction;
  /// All entities and relations; triplets are the observed (training) facts.
  KnowledgeGraph graph;
  std::vector<Triplet> train, valid, test;
  std::vector<EntityPair> train_pairs, valid_pairs, test_pairs;
  /// Countries: the region entities. Entity alignment: the KG2 entities.
  std::vector<EntityId> candidates;
  std::vector<std::string> warnings;
};

namespace detail {

template <class T, class Hash>
void check_disjoint(const std::vector<T>& a, const std::vector<T>& b,
                    const char* what) {
  std::unordered_set<T, Hash> sa(a.begin(), a.end());
  for (const T& x : b)
    if (sa.count(x)) throw IntegrityError(std::string("splits overlap: ") + what);
}

struct PairHash {
  std::size_t operator()(const EntityPair& p) const {
    return splitmix64((std::uint64_t{p.first} << 32) | p.second);
  }
};

}  // namespace detail

inline void validate_splits(const DatasetBundle& b) {
  using detail::check_disjoint;
  check_disjoint<Triplet, TripletHash>(b.train, b.valid, "train/valid");
  check_disjoint<Triplet, TripletHash>(b.train, b.test, "train/test");
  check_disjoint<Triplet, TripletHash>(b.valid, b.test, "valid/test");
  check_disjoint<EntityPair, detail::PairHash>(b.train_pairs, b.valid_pairs,
                                               "train/valid pairs");
  check_disjoint<EntityPair, detail::PairHash>(b.train_pairs, b.test_pairs,
                                               "train/test pairs");
  check_disjoint<EntityPair, detail::PairHash>(b.valid_pairs, b.test_pairs,
                                               "valid/test pairs");
}

/// Loads dir/{train,valid,test}.txt with one vocabulary grown in that order.
inline DatasetBundle load_link_prediction(const fs::path& dir,
                                          TaskKind kind = TaskKind::LinkPrediction) {
  for (const char* f : {"train.txt", "valid.txt", "test.txt"})
    if (!fs::exists(dir / f))
      throw Error("missing dataset file " + (dir / f).string());
  Vocabulary ent, rel;
  DatasetBundle b;
  b.kind = kind;
  auto tr = read_triplet_file(dir / "train.txt", VocabMode::Build, ent, rel);
  auto va = read_triplet_file(dir / "valid.txt", VocabMode::Build, ent, rel);
  auto te = read_triplet_file(dir / "test.txt", VocabMode::Build, ent, rel);
  for (auto* r : {&tr, &va, &te})
    if (r->duplicates)
      b.warnings.push_back(std::to_string(r->duplicates) +
                           " duplicate triplets removed");
  b.train = tr.triplets;
  b.valid = std::move(va.triplets);
  b.test = std::move(te.triplets);
  b.graph = KnowledgeGraph(std::move(ent), std::move(rel), std::move(tr.triplets));
  validate_splits(b);
  return b;
}

enum class CountriesTask { S1, S2, S3 };

inline CountriesTask parse_countries_task(const std::string& s) {
  if (s == "S1") return CountriesTask::S1;
  if (s == "S2") return CountriesTask::S2;
  if (s == "S3") return CountriesTask::S3;
  throw ConfigError("unknown Countries task '" + s + "'");
}

inline const char* to_string(CountriesTask t) {
  switch (t) {
    case CountriesTask::S1: return "S1";
    case CountriesTask::S2: return "S2";
    case CountriesTask::S3: return "S3";
  }
  return "?";
}

inline constexpr std::size_t kCountriesEntityCount = 271;

/// Loads one Countries task. Accepts `dir/S1/` or `dir/countries_S1/`
/// layouts, each holding train/valid/test.txt. Queries are
/// (country, locatedin, region); the candidates are the region entities,
/// i.e. objects of `locatedin` that have no outgoing `locatedin` edge.
inline DatasetBundle load_countries(const fs::path& dir, CountriesTask task) {
  if (!fs::is_directory(dir)) throw Error("no such directory " + dir.string());
  const std::string name = to_string(task);
  fs::path sub = dir / name;
  if (!fs::is_directory(sub)) sub = dir / ("countries_" + name);
  if (!fs::is_directory(sub))
    throw Error("no " + name + " split under " + dir.string());
  DatasetBundle b = load_link_prediction(sub, TaskKind::Countries);

  auto located = b.graph.relations().find("locatedin");
  if (!located) throw IntegrityError("Countries data lacks relation 'locatedin'");
  std::set<EntityId> objects;
  std::unordered_set<EntityId> has_out;
  auto scan = [&](const std::vector<Triplet>& ts) {
    for (const Triplet& t : ts) {
      if (t.relation != *located) continue;
      objects.insert(t.object);
      has_out.insert(t.subject);
    }
  };
  scan(b.train);
  scan(b.valid);
  scan(b.test);
  for (EntityId e : objects)
    if (!has_out.count(e)) b.candidates.push_back(e);
  if (b.graph.num_entities() != kCountriesEntityCount)
    b.warnings.push_back("Countries entity count is " +
                         std::to_string(b.graph.num_entities()) + ", expected " +
                         std::to_string(kCountriesEntityCount));
  return b;
}

/// Two-KG alignment dataset. Entity labels must be distinct across KGs.
inline DatasetBundle load_entity_alignment(const fs::path& kg1,
                                           const fs::path& kg2,
                                           const fs::path& train_pairs,
                                           const fs::path& valid_pairs,
                                           const fs::path& test_pairs) {
  Vocabulary ent, rel;
  auto r1 = read_triplet_file(kg1, VocabMode::Build, ent, rel);
  const std::size_t n1 = ent.size();
  auto r2 = read_triplet_file(kg2, VocabMode::Build, ent, rel);
  std::vector<std::uint8_t> tags(ent.size(), 2);
  std::fill(tags.begin(), tags.begin() + static_cast<std::ptrdiff_t>(n1), 1);
  for (const Triplet& t : r2.triplets)
    if (t.subject < n1 || t.object < n1)
      throw PartitionError("entity label shared by both KGs");
  DatasetBundle b;
  b.kind = TaskKind::EntityAlignment;
  b.train = r1.triplets;
  b.train.insert(b.train.end(), r2.triplets.begin(), r2.triplets.end());
  b.graph = KnowledgeGraph(std::move(ent), std::move(rel), b.train, std::move(tags));
  b.train_pairs = load_alignment_pairs(train_pairs, b.graph);
  b.valid_pairs = load_alignment_pairs(valid_pairs, b.graph);
  b.test_pairs = load_alignment_pairs(test_pairs, b.graph);
  for (EntityId e = 0; e < b.graph.num_entities(); ++e)
    if (b.graph.kg_tag(e) == 2) b.candidates.push_back(e);
  validate_splits(b);
  return b;
}

// ---------------------------------------------------------------------------
// Filter index and derived graphs.

inline std::uint64_t query_key(EntityId s, RelationId r) {
  return (std::uint64_t{s} << 32) | r;
}

/// (subject, relation) -> sorted set of every known true object.
using FilterIndex = std::unordered_map<std::uint64_t, std::vector<EntityId>>;

inline FilterIndex filter_sets(
    std::initializer_list<const std::vector<Triplet>*> splits) {
  FilterIndex idx;
  for (const auto* split : splits)
    for (const Triplet& t : *split)
      idx[query_key(t.subject, t.relation)].push_back(t.object);
  for (auto& [k, v] : idx) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return idx;
}

/// Entity -> sorted gold counterparts, over all given pair lists.
inline FilterIndex alignment_filter(
    std::initializer_list<const std::vector<EntityPair>*> splits) {
  FilterIndex idx;
  for (const auto* split : splits)
    for (const auto& [a, b] : *split) idx[a].push_back(b);
  for (auto& [k, v] : idx) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return idx;
}

inline std::string inverse_label(const std::string& label) {
  return label + "_inv";
}

/// (o, r + |R|, s) for every triplet; relation r + |R| is the inverse of r.
inline std::vector<Triplet> inverse_triplets(const std::vector<Triplet>& ts,
                                             std::size_t num_relations) {
  std::vector<Triplet> out;
  out.reserve(ts.size());
  for (const Triplet& t : ts)
    out.push_back({t.object, static_cast<RelationId>(t.relation + num_relations),
                   t.subject});
  return out;
}

/// Relation vocabulary followed by one inverse per relation.
inline Vocabulary with_inverse_relations(const Vocabulary& rel) {
  Vocabulary out = rel;
  for (const auto& l : rel.labels()) {
    if (out.find(inverse_label(l)))
      throw VocabularyError("inverse label collides with '" + inverse_label(l) + "'");
    out.add(inverse_label(l));
  }
  return out;
}

/// Graph used for walking: training facts plus their inverses. For entity
/// alignment, every training fact touching an aligned entity is also copied
/// with the entity replaced by its counterpart, which links the two KGs.
inline KnowledgeGraph walk_graph(const DatasetBundle& b) {
  std::vector<Triplet> facts = b.train;
  if (b.kind == TaskKind::EntityAlignment && !b.train_pairs.empty()) {
    std::unordered_map<EntityId, EntityId> counterpart;
    for (const auto& [x, y] : b.train_pairs) {
      counterpart.emplace(x, y);
      counterpart.emplace(y, x);
    }
    const std::size_t n = facts.size();
    for (std::size_t i = 0; i < n; ++i) {
      Triplet t = facts[i];
      auto s = counterpart.find(t.subject), o = counterpart.find(t.object);
      if (s != counterpart.end()) facts.push_back({s->second, t.relation, t.object});
      if (o != counterpart.end()) facts.push_back({t.subject, t.relation, o->second});
    }
  }
  const std::size_t nrel = b.graph.num_relations();
  auto inv = inverse_triplets(facts, nrel);
  facts.insert(facts.end(), inv.begin(), inv.end());
  return KnowledgeGraph(b.graph.entities(), with_inverse_relations(b.graph.relations()),
                        std::move(facts), b.graph.kg_tags());
}

// ---------------------------------------------------------------------------
// Serialization: entities.txt / relations.txt (line number = id),
// triples.tsv (ids), partitions.txt (one kg tag per entity, optional).

inline void save_graph(const KnowledgeGraph& g, const fs::path& dir) {
  fs::create_directories(dir);
  auto write_lines = [&](const fs::path& p, const std::vector<std::string>& v) {
    std::ofstream out(p, std::ios::binary);
    for (const auto& s : v) out << s << '\n';
    if (!out) throw Error("cannot write " + p.string());
  };
  write_lines(dir / "entities.txt", g.entities().labels());
  write_lines(dir / "relations.txt", g.relations().labels());
  std::ofstream tr(dir / "triples.tsv", std::ios::binary);
  for (const Triplet& t : g.triplets())
    tr << t.subject << '\t' << t.relation << '\t' << t.object << '\n';
  if (g.has_partitions()) {
    std::ofstream pt(dir / "partitions.txt", std::ios::binary);
    for (auto tag : g.kg_tags()) pt << int(tag) << '\n';
  }
}

inline KnowledgeGraph load_graph(const fs::path& dir) {
  auto read_vocab = [&](const fs::path& p) {
    auto in = detail::open_input(p);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
      if (v.find(line)) throw VocabularyError("duplicate label in " + p.string());
      v.add(line);
    }
    return v;
  };
  Vocabulary ent = read_vocab(dir / "entities.txt");
  Vocabulary rel = read_vocab(dir / "relations.txt");
  auto in = detail::open_input(dir / "triples.tsv");
  std::vector<Triplet> ts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = detail::split_tabs(line);
    if (f.size() != 3) throw ParseError("triples.tsv: expected 3 ids", line_no);
    try {
      ts.push_back({static_cast<EntityId>(std::stoul(f[0])),
                    static_cast<RelationId>(std::stoul(f[1])),
                    static_cast<EntityId>(std::stoul(f[2]))});
    } catch (const std::logic_error&) {
      throw ParseError("triples.tsv: non-numeric id", line_no);
    }
  }
  std::vector<std::uint8_t> tags;
  if (fs::exists(dir / "partitions.txt")) {
    auto pin = detail::open_input(dir / "partitions.txt");
    int tag;
    while (pin >> tag) tags.push_back(static_cast<std::uint8_t>(tag));
  }
  return KnowledgeGraph(std::move(ent), std::move(rel), std::move(ts), std::move(tags));
}

}  // namespace pathnas
