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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "pathnas/kg.hpp"

namespace pathnas {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(LoadTriplets, CountsEntitiesRelationsAndFacts) {
  TempDir tmp;
  write_file(tmp / "g.txt", "a\tR\tb\nb\tR\tc\n");
  auto g = load_triplets(tmp / "g.txt", VocabMode::Build);
  EXPECT_EQ(g.num_entities(), 3u);
  EXPECT_EQ(g.num_relations(), 1u);
  EXPECT_EQ(g.triplets().size(), 2u);
}

TEST(LoadTriplets, EmptyFileGivesEmptyGraph) {
  TempDir tmp;
  write_file(tmp / "g.txt", "");
  auto g = load_triplets(tmp / "g.txt", VocabMode::Build);
  EXPECT_EQ(g.num_entities(), 0u);
  EXPECT_EQ(g.num_relations(), 0u);
  EXPECT_TRUE(g.triplets().empty());
}

TEST(LoadTriplets, DuplicatesAreDroppedAndCounted) {
  TempDir tmp;
  write_file(tmp / "g.txt", "a\tR\tb\na\tR\tb\n");
  std::size_t dup = 0;
  auto g = load_triplets(tmp / "g.txt", VocabMode::Build, nullptr, &dup);
  EXPECT_EQ(g.triplets().size(), 1u);
  EXPECT_EQ(dup, 1u);
}

TEST(LoadTriplets, MalformedLineNamesTheLine) {
  TempDir tmp;
  write_file(tmp / "g.txt", "a\tR\tb\nbroken line\n");
  try {
    load_triplets(tmp / "g.txt", VocabMode::Build);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadTriplets, ReuseModeRejectsUnknownLabels) {
  TempDir tmp;
  write_file(tmp / "a.txt", "a\tR\tb\n");
  write_file(tmp / "b.txt", "a\tR\tz\n");
  auto g = load_triplets(tmp / "a.txt", VocabMode::Build);
  EXPECT_THROW(load_triplets(tmp / "b.txt", VocabMode::Reuse, &g), VocabularyError);
}

TEST(LoadTriplets, MissingFileIsAnIoError) {
  EXPECT_THROW(load_triplets("/nonexistent/file.txt", VocabMode::Build), Error);
}

TEST(KnowledgeGraph, IndexesAndUndirectedNeighbours) {
  auto g = testing::five_node_graph();
  EXPECT_EQ(g.out_edges(1).size(), 4u);
  EXPECT_TRUE(g.adjacent_undirected(0, 3));
  EXPECT_TRUE(g.adjacent_undirected(3, 0));
  EXPECT_FALSE(g.adjacent_undirected(0, 2));
  EXPECT_TRUE(g.contains({1, 2, 3}));
  EXPECT_FALSE(g.contains({3, 2, 1}));
}

TEST(KnowledgeGraph, SaveLoadRoundTrip) {
  TempDir tmp;
  auto g = testing::make_graph(4, 2, {{0, 0, 1}, {1, 1, 2}, {3, 0, 0}}, {1, 1, 2, 2});
  save_graph(g, tmp.path());
  auto h = load_graph(tmp.path());
  EXPECT_EQ(h.entities(), g.entities());
  EXPECT_EQ(h.relations(), g.relations());
  EXPECT_EQ(h.triplets(), g.triplets());
  EXPECT_EQ(h.kg_tags(), g.kg_tags());
}

class AlignmentPairs : public ::testing::Test {
 protected:
  void SetUp() override {
    write_file(tmp / "kg1.txt", "e1\tp\te2\n");
    write_file(tmp / "kg2.txt", "f1\tq\tf2\n");
    write_file(tmp / "empty.txt", "");
  }
  KnowledgeGraph two_kgs() {
    Vocabulary ent, rel;
    auto r1 = read_triplet_file(tmp / "kg1.txt", VocabMode::Build, ent, rel);
    const auto n1 = ent.size();
    auto r2 = read_triplet_file(tmp / "kg2.txt", VocabMode::Build, ent, rel);
    std::vector<std::uint8_t> tags(ent.size(), 2);
    std::fill(tags.begin(), tags.begin() + static_cast<long>(n1), 1);
    auto ts = r1.triplets;
    ts.insert(ts.end(), r2.triplets.begin(), r2.triplets.end());
    return KnowledgeGraph(ent, rel, ts, tags);
  }
  TempDir tmp;
};

TEST_F(AlignmentPairs, MapsLabelsToIds) {
  write_file(tmp / "pairs.txt", "e1\tf1\n");
  auto g = two_kgs();
  auto pairs = load_alignment_pairs(tmp / "pairs.txt", g);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], EntityPair(g.entities().at("e1"), g.entities().at("f1")));
}

TEST_F(AlignmentPairs, SameSidePairIsAPartitionError) {
  write_file(tmp / "pairs.txt", "e1\te2\n");
  EXPECT_THROW(load_alignment_pairs(tmp / "pairs.txt", two_kgs()), PartitionError);
}

TEST_F(AlignmentPairs, EmptyFileGivesNoPairs) {
  EXPECT_TRUE(load_alignment_pairs(tmp / "empty.txt", two_kgs()).empty());
}

TEST(EntityAlignment, BundleTagsBothSides) {
  TempDir tmp;
  write_file(tmp / "kg1.txt", "e1\tp\te2\ne2\tp\te3\n");
  write_file(tmp / "kg2.txt", "f1\tq\tf2\nf2\tq\tf3\n");
  write_file(tmp / "train.txt", "e1\tf1\n");
  write_file(tmp / "valid.txt", "e2\tf2\n");
  write_file(tmp / "test.txt", "e3\tf3\n");
  auto b = load_entity_alignment(tmp / "kg1.txt", tmp / "kg2.txt", tmp / "train.txt",
                                 tmp / "valid.txt", tmp / "test.txt");
  EXPECT_EQ(b.candidates.size(), 3u);
  for (auto c : b.candidates) EXPECT_EQ(b.graph.kg_tag(c), 2);
  // The walk graph links the KGs through the training pair.
  auto wg = walk_graph(b);
  const auto e1 = b.graph.entities().at("e1"), f2 = b.graph.entities().at("f2");
  const auto q = b.graph.relations().at("q");
  EXPECT_TRUE(wg.contains({e1, q, f2}));
}

TEST(Countries, SyntheticFixtureHas271EntitiesAnd2Relations) {
  TempDir tmp;
  testing::write_countries_fixture(tmp.path());
  for (auto task : {CountriesTask::S1, CountriesTask::S3}) {
    auto b = load_countries(tmp.path(), task);
    EXPECT_EQ(b.graph.num_entities(), kCountriesEntityCount);
    EXPECT_EQ(b.graph.num_relations(), 2u);
    EXPECT_EQ(b.candidates.size(), 5u);
    EXPECT_TRUE(b.warnings.empty());
  }
}

TEST(Countries, BundledDataLoads) {
  auto b = load_countries(testing::data_dir() / "countries", CountriesTask::S1);
  EXPECT_EQ(b.graph.num_relations(), 2u);
  EXPECT_EQ(b.candidates.size(), 5u);
  EXPECT_EQ(b.valid.size(), 24u);
  EXPECT_EQ(b.test.size(), 24u);
  auto s3 = load_countries(testing::data_dir() / "countries", CountriesTask::S3);
  EXPECT_LT(s3.train.size(), b.train.size());
}

TEST(Countries, NonexistentDirectoryIsAnError) {
  EXPECT_THROW(load_countries("/nonexistent/countries", CountriesTask::S1), Error);
}

TEST(Splits, OverlapIsRejected) {
  TempDir tmp;
  write_file(tmp / "train.txt", "a\tR\tb\n");
  write_file(tmp / "valid.txt", "a\tR\tb\n");
  write_file(tmp / "test.txt", "a\tR\tc\n");
  EXPECT_THROW(load_link_prediction(tmp.path()), IntegrityError);
}

TEST(FilterSets, UnionOverSplits) {
  std::vector<Triplet> train{{0, 0, 1}}, test{{0, 0, 2}};
  auto f = filter_sets({&train, &test});
  EXPECT_EQ(f.at(query_key(0, 0)), (std::vector<EntityId>{1, 2}));
}

TEST(FilterSets, DisjointKeysGiveSingletons) {
  std::vector<Triplet> train{{0, 0, 1}, {1, 0, 2}, {0, 1, 3}};
  auto f = filter_sets({&train});
  EXPECT_EQ(f.size(), 3u);
  for (const auto& [k, v] : f) EXPECT_EQ(v.size(), 1u);
}

TEST(FilterSets, TripletInTwoSplitsAppearsOnce) {
  std::vector<Triplet> a{{0, 0, 1}}, b{{0, 0, 1}};
  auto f = filter_sets({&a, &b});
  EXPECT_EQ(f.at(query_key(0, 0)), (std::vector<EntityId>{1}));
}

TEST(InverseTriplets, OffsetsRelationsAndSwapsEnds) {
  std::vector<Triplet> ts{{0, 1, 2}};
  auto inv = inverse_triplets(ts, 3);
  EXPECT_EQ(inv[0], (Triplet{2, 4, 0}));
}

}  // namespace
}  // namespace pathnas
