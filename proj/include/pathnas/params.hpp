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

// Named parameter tensors with Adam moments, the sparse Adam update and the
// checkpoint container.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pathnas/common.hpp"
#include "pathnas/tape.hpp"
#include "pathnas/tensor.hpp"

namespace pathnas {

/// Fixed slot layout of a cell's parameters. The six link transforms are
/// tied across time steps; every combinator site owns a private gate pair.
enum Slot : std::size_t {
  kEntity = 0,
  kRelation,
  kW1, kW2, kW3, kW4, kW5, kW6,
  kGateAs, kGateBs,  // O_s
  kGateAr, kGateBr,  // O_r
  kGateAv, kGateBv,  // O_v
  kNumSlots
};

inline const char* slot_name(std::size_t s) {
  static const char* names[kNumSlots] = {
      "entity", "relation", "W1", "W2", "W3", "W4", "W5", "W6",
      "gate_a_s", "gate_b_s", "gate_a_r", "gate_b_r", "gate_a_v", "gate_b_v"};
  return s < kNumSlots ? names[s] : "?";
}

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> m;  // first moment
  Tensor<T> v;  // second moment
};

template <class T>
class ParameterStore {
 public:
  ParameterStore() = default;

  /// Allocates every slot (entity table, relation table, all link and gate
  /// matrices), each entry drawn from uniform(-b, b) with b = sqrt(6 / 2d).
  ParameterStore(std::size_t num_entities, std::size_t num_relations,
                 std::size_t dim, std::uint64_t seed) {
    if (dim == 0 || dim % 2 != 0) throw ShapeError("embedding dimension must be even");
    Rng rng(derive_seed(seed, "init"));
    const double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(dim)));
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      std::size_t rows = s == kEntity ? num_entities : s == kRelation ? num_relations : dim;
      Parameter<T> p;
      p.name = slot_name(s);
      p.value = Tensor<T>(rows, dim);
      for (auto& x : p.value.data()) x = static_cast<T>(uniform(rng, -bound, bound));
      p.m = Tensor<T>(rows, dim);
      p.v = Tensor<T>(rows, dim);
      params_.push_back(std::move(p));
    }
  }

  std::size_t size() const { return params_.size(); }
  std::size_t dim() const { return params_.empty() ? 0 : params_[0].value.cols(); }
  Parameter<T>& operator[](std::size_t s) { return params_.at(s); }
  const Parameter<T>& operator[](std::size_t s) const { return params_.at(s); }
  Tensor<T>& value(std::size_t s) { return params_.at(s).value; }
  const Tensor<T>& value(std::size_t s) const { return params_.at(s).value; }

  std::uint64_t adam_steps() const { return steps_; }
  void set_adam_steps(std::uint64_t t) { steps_ = t; }

  void add(Parameter<T> p) { params_.push_back(std::move(p)); }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.steps_ != b.steps_ || a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
      const auto &x = a.params_[i], &y = b.params_[i];
      if (x.name != y.name || x.value != y.value || x.m != y.m || x.v != y.v)
        return false;
    }
    return true;
  }

 private:
  std::vector<Parameter<T>> params_;
  std::uint64_t steps_ = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam step over the parameters that received gradients. The L2 term
/// lambda * w is added to the gradient before the moment updates. Only
/// touched rows change; moments of untouched rows stay as they were.
template <class T>
void adam_step(ParameterStore<T>& store, const Gradients<T>& grads, double lr,
               double l2, const AdamConfig& cfg = {}) {
  for (std::size_t s = 0; s < grads.size(); ++s) {
    if (!grads[s]) continue;
    if (!grads[s]->grad.all_finite())
      throw NumericFault(std::string("non-finite gradient for ") + store[s].name);
    if (grads[s]->grad.shape() != store[s].value.shape())
      throw ShapeError(std::string("gradient shape for ") + store[s].name);
  }
  store.set_adam_steps(store.adam_steps() + 1);
  const double t = static_cast<double>(store.adam_steps());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t s = 0; s < grads.size() && s < store.size(); ++s) {
    if (!grads[s]) continue;
    const ParamGrad<T>& pg = *grads[s];
    Parameter<T>& p = store[s];
    const std::size_t cols = p.value.cols();
    for (std::size_t r = 0; r < p.value.rows(); ++r) {
      if (!pg.row_touched(r)) continue;
      T* w = p.value.row_ptr(r);
      T* m = p.m.row_ptr(r);
      T* v = p.v.row_ptr(r);
      const T* g = pg.grad.row_ptr(r);
      for (std::size_t k = 0; k < cols; ++k) {
        const double gk = static_cast<double>(g[k]) + l2 * static_cast<double>(w[k]);
        const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
        const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
        m[k] = static_cast<T>(mk);
        v[k] = static_cast<T>(vk);
        w[k] = static_cast<T>(w[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + cfg.eps));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint: "PNCK", version, scalar width, genotype string and its hash,
// Adam step counter, then per tensor name/rows/cols/value/m/v (raw
// little-endian), then a CRC32 trailer.

inline constexpr char kCheckpointMagic[4] = {'P', 'N', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint64_t text_hash(std::string_view s) { return derive_seed(0, s); }

template <class T>
struct Checkpoint {
  ParameterStore<T> store;
  std::string genotype;
  std::uint64_t genotype_hash = 0;
};

template <class T>
void save_checkpoint(const ParameterStore<T>& store, const std::string& genotype,
                     const std::filesystem::path& path) {
  BinaryWriter w;
  for (char c : kCheckpointMagic) w.put(c);
  w.put(kCheckpointVersion);
  w.put<std::uint32_t>(sizeof(T));
  w.put_string(genotype);
  w.put(text_hash(genotype));
  w.put(store.adam_steps());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.size()));
  for (std::size_t s = 0; s < store.size(); ++s) {
    const auto& p = store[s];
    w.put_string(p.name);
    w.put<std::uint64_t>(p.value.rows());
    w.put<std::uint64_t>(p.value.cols());
    w.put_span(p.value.data());
    w.put_span(p.m.data());
    w.put_span(p.v.data());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  w.finish(out);
}

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  BinaryReader r(in);
  for (char c : kCheckpointMagic)
    if (r.get<char>() != c) throw IntegrityError("not a checkpoint file");
  if (r.get<std::uint32_t>() != kCheckpointVersion)
    throw IntegrityError("unsupported checkpoint version");
  if (r.get<std::uint32_t>() != sizeof(T))
    throw IntegrityError("checkpoint scalar width differs from requested precision");
  Checkpoint<T> ck;
  ck.genotype = r.get_string();
  ck.genotype_hash = r.get<std::uint64_t>();
  if (ck.genotype_hash != text_hash(ck.genotype))
    throw IntegrityError("genotype hash mismatch");
  ck.store.set_adam_steps(r.get<std::uint64_t>());
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    Parameter<T> p;
    p.name = r.get_string();
    const auto rows = r.get<std::uint64_t>(), cols = r.get<std::uint64_t>();
    p.value = Tensor<T>(rows, cols);
    p.m = Tensor<T>(rows, cols);
    p.v = Tensor<T>(rows, cols);
    r.get_span(p.value.data());
    r.get_span(p.m.data());
    r.get_span(p.v.data());
    ck.store.add(std::move(p));
  }
  if (!r.at_end()) throw IntegrityError("trailing bytes in checkpoint");
  return ck;
}

}  // namespace pathnas
