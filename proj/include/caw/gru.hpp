// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "caw/autodiff.hpp"
#include "caw/rng.hpp"

namespace caw {

inline void xavier_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng,
                        double gain = 1.0) {
  const double r = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : t.v) x = rng.uniform(-r, r);
}

// Gated recurrent unit:
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   h~ = tanh(Wh x + Uh (r . h) + bh)
//   h' = z . h + (1 - z) . h~
struct GruCell {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter wz, uz, bz, wr, ur, br, wh, uh, bh;

  GruCell() = default;

  GruCell(const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng,
          double gain = 1.0)
      : input_dim(in),
        hidden_dim(hidden),
        wz(prefix + ".wz", Tensor({hidden, in})),
        uz(prefix + ".uz", Tensor({hidden, hidden})),
        bz(prefix + ".bz", Tensor({hidden})),
        wr(prefix + ".wr", Tensor({hidden, in})),
        ur(prefix + ".ur", Tensor({hidden, hidden})),
        br(prefix + ".br", Tensor({hidden})),
        wh(prefix + ".wh", Tensor({hidden, in})),
        uh(prefix + ".uh", Tensor({hidden, hidden})),
        bh(prefix + ".bh", Tensor({hidden})) {
    xavier_init(wz.value, in, hidden, rng, gain);
    xavier_init(uz.value, hidden, hidden, rng, gain);
    xavier_init(wr.value, in, hidden, rng, gain);
    xavier_init(ur.value, hidden, hidden, rng, gain);
    xavier_init(wh.value, in, hidden, rng, gain);
    xavier_init(uh.value, hidden, hidden, rng, gain);
  }

  NodeId step(Tape& t, NodeId x, NodeId h_prev) {
    NodeId z = t.sigmoid_op(t.add(t.add(t.matmul(t.param(wz), x), t.matmul(t.param(uz), h_prev)), t.param(bz)));
    NodeId r = t.sigmoid_op(t.add(t.add(t.matmul(t.param(wr), x), t.matmul(t.param(ur), h_prev)), t.param(br)));
    NodeId cand = t.tanh_op(t.add(
        t.add(t.matmul(t.param(wh), x), t.matmul(t.param(uh), t.mul(r, h_prev))), t.param(bh)));
    // h' = cand + z . (h - cand)
    return t.add(cand, t.mul(z, t.sub(h_prev, cand)));
  }

  // All hidden states for the given input sequence, h_0 = 0.
  std::vector<NodeId> run(Tape& t, const std::vector<NodeId>& inputs) {
    std::vector<NodeId> states;
    states.reserve(inputs.size());
    NodeId h = t.zeros({hidden_dim});
    for (NodeId x : inputs) {
      h = step(t, x, h);
      states.push_back(h);
    }
    return states;
  }

  void collect(std::vector<Parameter*>& out) {
    for (Parameter* p : {&wz, &uz, &bz, &wr, &ur, &br, &wh, &uh, &bh}) out.push_back(p);
  }
};

// Forward GRU over the sequence plus backward GRU over the reversed
// sequence. Per-position output is fwd_state(t) || bwd_state(t), dim 2h.
struct BiGru {
  GruCell fwd, bwd;

  BiGru() = default;
  BiGru(const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng, double gain = 1.0)
      : fwd(prefix + ".fwd", in, hidden, rng, gain), bwd(prefix + ".bwd", in, hidden, rng, gain) {}

  std::size_t output_dim() const { return 2 * fwd.hidden_dim; }

  std::vector<NodeId> run(Tape& t, const std::vector<NodeId>& inputs) {
    std::vector<NodeId> f = fwd.run(t, inputs);
    std::vector<NodeId> rev(inputs.rbegin(), inputs.rend());
    std::vector<NodeId> b = bwd.run(t, rev);
    std::vector<NodeId> out;
    out.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i)
      out.push_back(t.concat({f[i], b[inputs.size() - 1 - i]}));
    return out;
  }

  // Final forward state concatenated with final backward state.
  NodeId final_state(Tape& t, const std::vector<NodeId>& inputs) {
    std::vector<NodeId> f = fwd.run(t, inputs);
    std::vector<NodeId> rev(inputs.rbegin(), inputs.rend());
    std::vector<NodeId> b = bwd.run(t, rev);
    return t.concat({f.back(), b.back()});
  }

  void collect(std::vector<Parameter*>& out) {
    fwd.collect(out);
    bwd.collect(out);
  }
};

}  // namespace caw
