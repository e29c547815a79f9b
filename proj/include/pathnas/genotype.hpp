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

// Architecture encoding of the recurrent path cell.
//
// The cell has three operators. O_s always combines (h_{t-1}, s_t); O_r
// combines a searched input with r_t; O_v combines a searched input with O_r
// and yields v_t. The hidden state h_t is the output of O_r.
//
// Macro part: the searched inputs of O_r and O_v and the three combinators.
// Micro part: activations after O_s and O_r, and whether each of the six
// links carries a weight matrix. Links, in order:
//   0: h_{t-1} -> O_s    1: s_t -> O_s
//   2: input -> O_r      3: r_t -> O_r
//   4: input -> O_v      5: O_r -> O_v

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "pathnas/common.hpp"

namespace pathnas {

enum class Connection : std::uint8_t { HPrev, OsOut, Zero, SCur };
enum class Combinator : std::uint8_t { Add, Mul, Hermitian, Gated };
enum class Activation : std::uint8_t { Identity, Tanh, Sigmoid };
enum class LinkKind : std::uint8_t { Weight, Identity };

inline constexpr std::size_t kNumConnections = 4;
inline constexpr std::size_t kNumCombinators = 4;
inline constexpr std::size_t kNumActivations = 3;
inline constexpr std::size_t kNumLinks = 6;

struct MacroGenotype {
  Connection in_r = Connection::SCur;
  Connection in_v = Connection::Zero;
  Combinator comb_s = Combinator::Add;
  Combinator comb_r = Combinator::Add;
  Combinator comb_v = Combinator::Add;

  friend auto operator<=>(const MacroGenotype&, const MacroGenotype&) = default;

  static constexpr std::size_t kCount = 16 * 64;  // 4^2 connections x 4^3 combinators

  std::size_t index() const {
    return ((((std::size_t(in_r) * 4 + std::size_t(in_v)) * 4 + std::size_t(comb_s)) * 4 +
             std::size_t(comb_r)) * 4) + std::size_t(comb_v);
  }
  static MacroGenotype from_index(std::size_t i) {
    if (i >= kCount) throw Error("macro index out of range");
    MacroGenotype g;
    g.comb_v = Combinator(i % 4); i /= 4;
    g.comb_r = Combinator(i % 4); i /= 4;
    g.comb_s = Combinator(i % 4); i /= 4;
    g.in_v = Connection(i % 4); i /= 4;
    g.in_r = Connection(i);
    return g;
  }
};

struct MicroGenotype {
  Activation act_s = Activation::Identity;
  Activation act_r = Activation::Identity;
  std::array<LinkKind, kNumLinks> links{LinkKind::Identity, LinkKind::Identity,
                                        LinkKind::Identity, LinkKind::Identity,
                                        LinkKind::Identity, LinkKind::Identity};

  friend auto operator<=>(const MicroGenotype&, const MicroGenotype&) = default;

  static constexpr std::size_t kCount = 9 * 64;  // 3^2 activations x 2^6 links

  std::size_t index() const {
    std::size_t i = std::size_t(act_s) * 3 + std::size_t(act_r);
    for (auto l : links) i = i * 2 + std::size_t(l);
    return i;
  }
  static MicroGenotype from_index(std::size_t i) {
    if (i >= kCount) throw Error("micro index out of range");
    MicroGenotype g;
    for (std::size_t k = kNumLinks; k-- > 0;) {
      g.links[k] = LinkKind(i % 2);
      i /= 2;
    }
    g.act_r = Activation(i % 3);
    g.act_s = Activation(i / 3);
    return g;
  }
};

struct Genotype {
  MacroGenotype macro;
  MicroGenotype micro;

  friend auto operator<=>(const Genotype&, const Genotype&) = default;

  static constexpr std::size_t kCount = MacroGenotype::kCount * MicroGenotype::kCount;

  std::size_t index() const { return macro.index() * MicroGenotype::kCount + micro.index(); }
  static Genotype from_index(std::size_t i) {
    return {MacroGenotype::from_index(i / MicroGenotype::kCount),
            MicroGenotype::from_index(i % MicroGenotype::kCount)};
  }
};

// ---------------------------------------------------------------------------
// Text encoding, e.g.
//   inR=OS;inV=ZERO;cS=GATED;cR=GATED;cV=ADD;aS=TANH;aR=IDENTITY;links=WIWIWW

inline const char* token(Connection c) {
  switch (c) {
    case Connection::HPrev: return "HPREV";
    case Connection::OsOut: return "OS";
    case Connection::Zero: return "ZERO";
    case Connection::SCur: return "SCUR";
  }
  return "?";
}
inline const char* token(Combinator c) {
  switch (c) {
    case Combinator::Add: return "ADD";
    case Combinator::Mul: return "MUL";
    case Combinator::Hermitian: return "HERMITIAN";
    case Combinator::Gated: return "GATED";
  }
  return "?";
}
inline const char* token(Activation a) {
  switch (a) {
    case Activation::Identity: return "IDENTITY";
    case Activation::Tanh: return "TANH";
    case Activation::Sigmoid: return "SIGMOID";
  }
  return "?";
}

inline std::string to_string(const Genotype& g) {
  std::string links;
  for (auto l : g.micro.links) links += l == LinkKind::Weight ? 'W' : 'I';
  return std::string("inR=") + token(g.macro.in_r) + ";inV=" + token(g.macro.in_v) +
         ";cS=" + token(g.macro.comb_s) + ";cR=" + token(g.macro.comb_r) +
         ";cV=" + token(g.macro.comb_v) + ";aS=" + token(g.micro.act_s) +
         ";aR=" + token(g.micro.act_r) + ";links=" + links;
}

namespace detail {

template <class E, std::size_t N>
E parse_token(std::string_view v, std::string_view field) {
  for (std::size_t i = 0; i < N; ++i)
    if (v == token(E(i))) return E(i);
  throw ConfigError("bad value '" + std::string(v) + "' for genotype field " +
                    std::string(field));
}

}  // namespace detail

/// Parses the text encoding; all eight fields must appear in the fixed order.
inline Genotype parse_genotype(std::string_view text) {
  static constexpr std::array<std::string_view, 8> keys = {
      "inR", "inV", "cS", "cR", "cV", "aS", "aR", "links"};
  std::array<std::string_view, 8> vals;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    auto end = text.find(';', pos);
    if ((end == std::string_view::npos) != (k + 1 == keys.size()))
      throw ConfigError("genotype string must have 8 ';'-separated fields");
    auto item = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    auto eq = item.find('=');
    if (eq == item.npos || item.substr(0, eq) != keys[k])
      throw ConfigError("genotype field " + std::to_string(k + 1) + " must be '" +
                        std::string(keys[k]) + "='");
    vals[k] = item.substr(eq + 1);
    pos = end + 1;
  }
  Genotype g;
  g.macro.in_r = detail::parse_token<Connection, 4>(vals[0], "inR");
  g.macro.in_v = detail::parse_token<Connection, 4>(vals[1], "inV");
  g.macro.comb_s = detail::parse_token<Combinator, 4>(vals[2], "cS");
  g.macro.comb_r = detail::parse_token<Combinator, 4>(vals[3], "cR");
  g.macro.comb_v = detail::parse_token<Combinator, 4>(vals[4], "cV");
  g.micro.act_s = detail::parse_token<Activation, 3>(vals[5], "aS");
  g.micro.act_r = detail::parse_token<Activation, 3>(vals[6], "aR");
  if (vals[7].size() != kNumLinks) throw ConfigError("links must have 6 characters");
  for (std::size_t i = 0; i < kNumLinks; ++i) {
    if (vals[7][i] == 'W')
      g.micro.links[i] = LinkKind::Weight;
    else if (vals[7][i] == 'I')
      g.micro.links[i] = LinkKind::Identity;
    else
      throw ConfigError("links characters must be W or I");
  }
  return g;
}

// ---------------------------------------------------------------------------
// Flat component view, shared with the controller: five macro components
// followed by eight micro components.

inline constexpr std::size_t kNumMacroComponents = 5;
inline constexpr std::size_t kNumMicroComponents = 2 + kNumLinks;
inline constexpr std::size_t kNumComponents = kNumMacroComponents + kNumMicroComponents;

inline constexpr std::array<std::size_t, kNumComponents> kComponentSizes = {
    4, 4, 4, 4, 4, 3, 3, 2, 2, 2, 2, 2, 2};

inline constexpr std::array<const char*, kNumComponents> kComponentNames = {
    "inR", "inV", "cS", "cR", "cV", "aS", "aR",
    "link0", "link1", "link2", "link3", "link4", "link5"};

inline bool is_macro_component(std::size_t c) { return c < kNumMacroComponents; }

using ComponentChoice = std::array<std::size_t, kNumComponents>;

inline ComponentChoice components(const Genotype& g) {
  ComponentChoice c{};
  c[0] = std::size_t(g.macro.in_r);
  c[1] = std::size_t(g.macro.in_v);
  c[2] = std::size_t(g.macro.comb_s);
  c[3] = std::size_t(g.macro.comb_r);
  c[4] = std::size_t(g.macro.comb_v);
  c[5] = std::size_t(g.micro.act_s);
  c[6] = std::size_t(g.micro.act_r);
  for (std::size_t i = 0; i < kNumLinks; ++i) c[7 + i] = std::size_t(g.micro.links[i]);
  return c;
}

inline Genotype from_components(const ComponentChoice& c) {
  for (std::size_t i = 0; i < kNumComponents; ++i)
    if (c[i] >= kComponentSizes[i]) throw Error("component choice out of range");
  Genotype g;
  g.macro.in_r = Connection(c[0]);
  g.macro.in_v = Connection(c[1]);
  g.macro.comb_s = Combinator(c[2]);
  g.macro.comb_r = Combinator(c[3]);
  g.macro.comb_v = Combinator(c[4]);
  g.micro.act_s = Activation(c[5]);
  g.micro.act_r = Activation(c[6]);
  for (std::size_t i = 0; i < kNumLinks; ++i) g.micro.links[i] = LinkKind(c[7 + i]);
  return g;
}

// ---------------------------------------------------------------------------
// Enumeration.

enum class Space { Macro, Micro, Full };

inline std::size_t space_size(Space s) {
  switch (s) {
    case Space::Macro: return MacroGenotype::kCount;
    case Space::Micro: return MicroGenotype::kCount;
    case Space::Full: return Genotype::kCount;
  }
  return 0;
}

template <class G>
inline constexpr Space space_of = std::is_same_v<G, MacroGenotype>   ? Space::Macro
                                  : std::is_same_v<G, MicroGenotype> ? Space::Micro
                                                                     : Space::Full;

/// Visits every element of a space once, in index order. G is one of
/// MacroGenotype, MicroGenotype or Genotype.
template <class G, class F>
void enumerate(F&& visit) {
  for (std::size_t i = 0; i < G::kCount; ++i) visit(G::from_index(i));
}

// ---------------------------------------------------------------------------
// Presets reproducing models from the literature.

inline Genotype preset(std::string_view name) {
  Genotype g;  // identity links and activations
  auto& m = g.macro;
  if (name == "transe") {
    m = {Connection::SCur, Connection::Zero, Combinator::Add, Combinator::Add, Combinator::Add};
  } else if (name == "complex") {
    m = {Connection::SCur, Connection::Zero, Combinator::Add, Combinator::Hermitian,
         Combinator::Add};
  } else if (name == "ptranse_add") {
    m = {Connection::HPrev, Connection::Zero, Combinator::Add, Combinator::Add, Combinator::Add};
  } else if (name == "ptranse_mul") {
    m = {Connection::HPrev, Connection::Zero, Combinator::Add, Combinator::Mul, Combinator::Add};
  } else if (name == "chains") {
    m = {Connection::OsOut, Connection::Zero, Combinator::Add, Combinator::Gated,
         Combinator::Add};
  } else if (name == "rsn") {
    m = {Connection::OsOut, Connection::SCur, Combinator::Gated, Combinator::Gated,
         Combinator::Add};
    g.micro.links[4] = LinkKind::Weight;
    g.micro.links[5] = LinkKind::Weight;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return g;
}

inline constexpr std::array<std::string_view, 6> kPresetNames = {
    "transe", "complex", "ptranse_add", "ptranse_mul", "chains", "rsn"};

/// Accepts either a preset name or a genotype string.
inline Genotype resolve_genotype(std::string_view text) {
  for (auto p : kPresetNames)
    if (text == p) return preset(p);
  return parse_genotype(text);
}

// ---------------------------------------------------------------------------
// Connection subspaces.
//
//   P1  no recurrence: neither O_r nor O_v reads h_{t-1} or O_s.
//   P2  two successive steps: O_v reads O_s (so h_{t-1}, the previous O_r),
//       while O_r reads only the current step.
//   P3  relation-only recurrence: O_r reads h_{t-1}; v_t does not read the
//       current entity (O_v input is ZERO or h_{t-1}).
//   P4  entity and relation recurrence: O_r reads O_s, which combines
//       h_{t-1} and s_t.
//   FULL everything.

enum class Subspace { P1, P2, P3, P4, Full };

inline Subspace parse_subspace(std::string_view s) {
  if (s == "P1") return Subspace::P1;
  if (s == "P2") return Subspace::P2;
  if (s == "P3") return Subspace::P3;
  if (s == "P4") return Subspace::P4;
  if (s == "FULL" || s == "full") return Subspace::Full;
  throw ConfigError("unknown subspace '" + std::string(s) + "'");
}

inline const char* to_string(Subspace s) {
  switch (s) {
    case Subspace::P1: return "P1";
    case Subspace::P2: return "P2";
    case Subspace::P3: return "P3";
    case Subspace::P4: return "P4";
    case Subspace::Full: return "FULL";
  }
  return "?";
}

inline std::function<bool(const MacroGenotype&)> subspace_mask(Subspace s) {
  auto local = [](Connection c) { return c == Connection::SCur || c == Connection::Zero; };
  switch (s) {
    case Subspace::P1:
      return [=](const MacroGenotype& m) { return local(m.in_r) && local(m.in_v); };
    case Subspace::P2:
      return [=](const MacroGenotype& m) {
        return local(m.in_r) && m.in_v == Connection::OsOut;
      };
    case Subspace::P3:
      return [](const MacroGenotype& m) {
        return m.in_r == Connection::HPrev &&
               (m.in_v == Connection::Zero || m.in_v == Connection::HPrev);
      };
    case Subspace::P4:
      return [](const MacroGenotype& m) { return m.in_r == Connection::OsOut; };
    case Subspace::Full:
      return [](const MacroGenotype&) { return true; };
  }
  throw ConfigError("unknown subspace");
}

inline std::vector<MacroGenotype> subspace_members(Subspace s) {
  auto pred = subspace_mask(s);
  std::vector<MacroGenotype> out;
  enumerate<MacroGenotype>([&](const MacroGenotype& m) {
    if (pred(m)) out.push_back(m);
  });
  return out;
}

}  // namespace pathnas
