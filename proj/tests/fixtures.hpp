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

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "pathnas/kg.hpp"
#include "pathnas/params.hpp"
#include "pathnas/tensor.hpp"

namespace pathnas::testing {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("pathnas_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Graph over entities e0..e{n-1} and relations r0..r{k-1}.
inline KnowledgeGraph make_graph(std::size_t n_entities, std::size_t n_relations,
                                 std::vector<Triplet> triplets,
                                 std::vector<std::uint8_t> tags = {}) {
  Vocabulary ents, rels;
  for (std::size_t i = 0; i < n_entities; ++i) ents.add("e" + std::to_string(i));
  for (std::size_t i = 0; i < n_relations; ++i) rels.add("r" + std::to_string(i));
  return KnowledgeGraph(std::move(ents), std::move(rels), std::move(triplets), std::move(tags));
}

/// Five nodes around e1. e0 -> e1, and e1 points back to e0 and on to e3,
/// e2 and e4. e3 is also a neighbour of e0, so from e1 only e2 and e4 lead
/// away from e0.
inline KnowledgeGraph five_node_graph() {
  return make_graph(5, 3,
                    {{0, 0, 1}, {1, 1, 0}, {1, 2, 3}, {1, 0, 2}, {1, 1, 4}, {0, 1, 3}});
}

/// Synthetic Countries-shaped data: 5 regions, 20 subregions, 246 countries
/// (271 entities), relations `neighbor` and `locatedin`. Countries are
/// located in their subregion; held-out countries keep only the subregion
/// fact (S1 style) and are asked for their region.
inline void write_countries_fixture(const fs::path& dir, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const int n_regions = 5, n_sub = 20, n_countries = 246;
  auto region = [](int i) { return "region" + std::to_string(i); };
  auto sub = [](int i) { return "sub" + std::to_string(i); };
  auto country = [](int i) { return "country" + std::to_string(i); };
  std::string train, valid, test;
  auto fact = [](std::string& out, const std::string& a, const char* r, const std::string& b) {
    out += a + "\t" + r + "\t" + b + "\n";
  };
  for (int s = 0; s < n_sub; ++s) fact(train, sub(s), "locatedin", region(s % n_regions));
  for (int c = 0; c < n_countries; ++c) {
    const int s = c % n_sub;
    fact(train, country(c), "locatedin", sub(s));
    const int other = static_cast<int>((c + n_sub * (1 + rng() % 3)) % n_countries);
    fact(train, country(c), "neighbor", country(other));
    fact(train, country(other), "neighbor", country(c));
    const std::string target = region(s % n_regions);
    if (c % 10 == 0)
      fact(valid, country(c), "locatedin", target);
    else if (c % 10 == 5)
      fact(test, country(c), "locatedin", target);
    else
      fact(train, country(c), "locatedin", target);
  }
  for (const char* task : {"S1", "S2", "S3"}) {
    write_file(dir / task / "train.txt", train);
    write_file(dir / task / "valid.txt", valid);
    write_file(dir / task / "test.txt", test);
  }
}

/// Store with entries drawn from N(0, scale^2).
template <class T>
ParameterStore<T> random_store(std::size_t n_entities, std::size_t n_relations, std::size_t dim,
                               std::uint64_t seed, double scale = 0.5) {
  ParameterStore<T> s(n_entities, n_relations, dim, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> nd(0.0, scale);
  for (std::size_t k = 0; k < s.size(); ++k)
    for (auto& x : s.value(k).data()) x = static_cast<T>(nd(rng));
  return s;
}

template <class T>
Tensor<T> random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                        double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Tensor<T> t(rows, cols);
  for (auto& x : t.data()) x = static_cast<T>(nd(rng));
  return t;
}

inline fs::path data_dir() { return fs::path(PATHNAS_DATA_DIR); }

}  // namespace pathnas::testing
