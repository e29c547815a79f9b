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

#include <optional>

#include "pathnas/genotype.hpp"
#include "pathnas/params.hpp"
#include "pathnas/tape.hpp"

namespace pathnas {

/// Binds a parameter store to a tape for one forward pass.
template <class T>
struct CellContext {
  Tape<T>& tape;
  const ParameterStore<T>& store;
  bool trainable = true;

  Var param(std::size_t slot) const {
    return tape.parameter(store.value(slot), slot, trainable);
  }
};

template <class T>
struct CellOutput {
  Var v;  // prediction for the step's object
  Var h;  // hidden state passed to the next step
};

namespace detail {

template <class T>
Var link(const CellContext<T>& ctx, const Genotype& g, std::size_t i, Var x) {
  if (g.micro.links[i] == LinkKind::Identity) return x;
  return ctx.tape.matmul(x, ctx.param(kW1 + i));
}

template <class T>
Var combine(const CellContext<T>& ctx, Combinator c, Var a, Var b, std::size_t gate_a) {
  switch (c) {
    case Combinator::Add: return ctx.tape.add(a, b);
    case Combinator::Mul: return ctx.tape.mul(a, b);
    case Combinator::Hermitian: return ctx.tape.hermitian(a, b);
    case Combinator::Gated:
      return ctx.tape.gated(a, b, ctx.param(gate_a), ctx.param(gate_a + 1));
  }
  throw Error("bad combinator");
}

template <class T>
Var activate(Tape<T>& tape, Activation a, Var x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Tanh: return tape.tanh(x);
    case Activation::Sigmoid: return tape.sigmoid(x);
  }
  throw Error("bad activation");
}

}  // namespace detail

/// One recurrent step on a batch of rows:
///   O_s = act_s(comb_s(T1 h_prev, T2 s_t))
///   O_r = act_r(comb_r(T3 pick(in_r), T4 r_t))
///   v_t = comb_v(T5 pick(in_v), T6 O_r),   h_t = O_r.
/// O_s is only built when some connection reads it.
template <class T>
CellOutput<T> forward_cell(const CellContext<T>& ctx, const Genotype& g, Var s, Var r,
                           Var h_prev) {
  Tape<T>& tape = ctx.tape;
  // copied: node storage may move as the step records new nodes
  const auto rows = tape.value(s).rows(), cols = tape.value(s).cols();
  if (tape.value(s).shape() != tape.value(r).shape() ||
      tape.value(s).shape() != tape.value(h_prev).shape())
    throw ShapeError("forward_cell: s, r and h must share one shape");
  std::optional<Var> os;
  auto pick = [&](Connection c) -> Var {
    switch (c) {
      case Connection::HPrev: return h_prev;
      case Connection::SCur: return s;
      case Connection::Zero: return tape.zeros(rows, cols);
      case Connection::OsOut:
        if (!os) {
          Var a = detail::link(ctx, g, 0, h_prev);
          Var b = detail::link(ctx, g, 1, s);
          os = detail::activate(tape, g.micro.act_s,
                                detail::combine(ctx, g.macro.comb_s, a, b, kGateAs));
        }
        return *os;
    }
    throw Error("bad connection");
  };
  Var r_in = detail::link(ctx, g, 2, pick(g.macro.in_r));
  Var r_cur = detail::link(ctx, g, 3, r);
  Var o_r = detail::activate(tape, g.micro.act_r,
                             detail::combine(ctx, g.macro.comb_r, r_in, r_cur, kGateAr));
  Var v_in = detail::link(ctx, g, 4, pick(g.macro.in_v));
  Var v_r = detail::link(ctx, g, 5, o_r);
  Var v = detail::combine(ctx, g.macro.comb_v, v_in, v_r, kGateAv);
  return {v, o_r};
}

}  // namespace pathnas
