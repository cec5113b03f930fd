// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "caw/error.hpp"
#include "caw/tensor.hpp"

namespace caw {

// Reverse-mode tape. One Tape records one forward pass; backward() replays
// the recorded nodes in reverse creation order exactly once each. Gradients
// accumulate additively across fan-out; parameter gradients persist outside
// the tape and are zeroed explicitly by the caller.
//
// All ops reject mismatched shapes before computing.

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor t) : name(std::move(n)), value(std::move(t)), grad(value.shape) {}

  void zero_grad() { grad.fill(0.0); }
};

class Tape;
using NodeId = std::size_t;

struct Node {
  Tensor value;
  Tensor grad;                                // same shape, zero-initialized
  Parameter* param = nullptr;                 // set on parameter leaves
  std::function<void(Tape&, NodeId)> backward;  // empty on constants
};

using Mask = std::vector<std::uint8_t>;  // 1 = active, 0 = masked out

class Tape {
 public:
  Tape() { nodes_.reserve(1024); }

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // ---- leaves ----

  NodeId constant(Tensor t) {
    return push(std::move(t), nullptr, {});
  }

  NodeId zeros(std::vector<std::size_t> shape) { return constant(Tensor(std::move(shape))); }

  // Whole-parameter leaf; memoized so one pass shares a single node per
  // parameter. Backward folds the node gradient into Parameter::grad.
  NodeId param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return it->second;
    NodeId id = push(p.value, &p, [](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad.v[i] += n.grad.v[i];
    });
    param_nodes_.emplace(&p, id);
    return id;
  }

  // Row lookup straight from a parameter table; backward scatter-adds into
  // the table gradient without materializing the full table on the tape.
  NodeId gather_param(Parameter& p, std::vector<std::size_t> ids) {
    check_gather(p.value, ids, p.name);
    Tensor out({ids.size(), p.value.cols()});
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) = p.value.at(ids[r], c);
    return push(std::move(out), &p, [ids = std::move(ids)](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      const std::size_t d = n.grad.cols();
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) n.param->grad.at(ids[r], c) += n.grad.at(r, c);
    });
  }

  // ---- structural ops ----

  NodeId gather(NodeId table, std::vector<std::size_t> ids) {
    const Tensor& tv = nodes_[table].value;
    check_gather(tv, ids, "node");
    Tensor out({ids.size(), tv.cols()});
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) = tv.at(ids[r], c);
    return push(std::move(out), nullptr, [table, ids = std::move(ids)](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& pg = t.nodes_[table].grad;
      const std::size_t d = n.grad.cols();
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) pg.at(ids[r], c) += n.grad.at(r, c);
    });
  }

  NodeId reshape(NodeId a, std::vector<std::size_t> shape) {
    const Tensor& av = nodes_[a].value;
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (n != av.size())
      throw ShapeError("reshape: " + av.shape_str() + " to " + Tensor(shape).shape_str());
    Tensor out;
    out.shape = std::move(shape);
    out.v = av.v;
    return push(std::move(out), nullptr, [a](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& pg = t.nodes_[a].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i) pg.v[i] += n.grad.v[i];
    });
  }

  NodeId transpose(NodeId a) {
    const Tensor& av = nodes_[a].value;
    if (av.ndim() != 2) throw ShapeError("transpose: need 2-D, got " + av.shape_str());
    Tensor out({av.cols(), av.rows()});
    for (std::size_t r = 0; r < av.rows(); ++r)
      for (std::size_t c = 0; c < av.cols(); ++c) out.at(c, r) = av.at(r, c);
    return push(std::move(out), nullptr, [a](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& pg = t.nodes_[a].grad;
      const std::size_t rows = pg.rows(), cols = pg.cols();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) pg.at(r, c) += n.grad.at(c, r);
    });
  }

  // Concatenate along axis 0 (stack rows / join vectors) or axis 1 (features).
  NodeId concat(const std::vector<NodeId>& parts, int axis = 0) {
    if (parts.empty()) throw ShapeError("concat: no parts");
    if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
    const Tensor& first = nodes_[parts[0]].value;
    if (first.ndim() == 1 || axis == 0) {
      if (first.ndim() == 1) {
        std::size_t total = 0;
        for (NodeId p : parts) {
          const Tensor& pv = nodes_[p].value;
          if (pv.ndim() != 1)
            throw ShapeError("concat: mixed ranks " + first.shape_str() + " vs " + pv.shape_str());
          total += pv.size();
        }
        Tensor out({total});
        std::size_t off = 0;
        for (NodeId p : parts) {
          const Tensor& pv = nodes_[p].value;
          std::copy(pv.v.begin(), pv.v.end(), out.v.begin() + off);
          off += pv.size();
        }
        return push(std::move(out), nullptr, [parts](Tape& t, NodeId self) {
          Node& n = t.nodes_[self];
          std::size_t off = 0;
          for (NodeId p : parts) {
            Tensor& pg = t.nodes_[p].grad;
            for (std::size_t i = 0; i < pg.size(); ++i) pg.v[i] += n.grad.v[off + i];
            off += pg.size();
          }
        });
      }
      // 2-D rows
      const std::size_t cols = first.cols();
      std::size_t rows = 0;
      for (NodeId p : parts) {
        const Tensor& pv = nodes_[p].value;
        if (pv.ndim() != 2 || pv.cols() != cols)
          throw ShapeError("concat axis 0: " + first.shape_str() + " vs " + pv.shape_str());
        rows += pv.rows();
      }
      Tensor out({rows, cols});
      std::size_t off = 0;
      for (NodeId p : parts) {
        const Tensor& pv = nodes_[p].value;
        std::copy(pv.v.begin(), pv.v.end(), out.v.begin() + off);
        off += pv.size();
      }
      return push(std::move(out), nullptr, [parts](Tape& t, NodeId self) {
        Node& n = t.nodes_[self];
        std::size_t off = 0;
        for (NodeId p : parts) {
          Tensor& pg = t.nodes_[p].grad;
          for (std::size_t i = 0; i < pg.size(); ++i) pg.v[i] += n.grad.v[off + i];
          off += pg.size();
        }
      });
    }
    // axis 1: same row count, widen columns
    const std::size_t rows = first.rows();
    std::size_t cols = 0;
    for (NodeId p : parts) {
      const Tensor& pv = nodes_[p].value;
      if (pv.ndim() != 2 || pv.rows() != rows)
        throw ShapeError("concat axis 1: " + first.shape_str() + " vs " + pv.shape_str());
      cols += pv.cols();
    }
    Tensor out({rows, cols});
    std::size_t coff = 0;
    for (NodeId p : parts) {
      const Tensor& pv = nodes_[p].value;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < pv.cols(); ++c) out.at(r, coff + c) = pv.at(r, c);
      coff += pv.cols();
    }
    return push(std::move(out), nullptr, [parts, rows](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      std::size_t coff = 0;
      for (NodeId p : parts) {
        Tensor& pg = t.nodes_[p].grad;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < pg.cols(); ++c) pg.at(r, c) += n.grad.at(r, coff + c);
        coff += pg.cols();
      }
    });
  }

  // ---- linear algebra ----

  // [m x n] x [n x p] -> [m x p]; a 1-D rhs [n] is treated as a column and
  // yields a 1-D result [m].
  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.ndim() != 2) throw ShapeError("matmul: lhs must be 2-D, got " + av.shape_str());
    const bool vec = bv.ndim() == 1;
    const std::size_t m = av.rows(), n = av.cols();
    const std::size_t bn = vec ? bv.size() : bv.rows();
    const std::size_t p = vec ? 1 : bv.cols();
    if (n != bn) throw ShapeError("matmul: " + av.shape_str() + " x " + bv.shape_str());
    Tensor out(vec ? std::vector<std::size_t>{m} : std::vector<std::size_t>{m, p});
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = av.v.data() + i * n;
      for (std::size_t k = 0; k < n; ++k) {
        const double aik = arow[k];
        if (aik == 0.0) continue;
        const double* brow = bv.v.data() + k * p;
        double* orow = out.v.data() + i * p;
        for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
      }
    }
    return push(std::move(out), nullptr, [a, b, m, n, p](Tape& t, NodeId self) {
      Node& node = t.nodes_[self];
      const Tensor& av = t.nodes_[a].value;
      const Tensor& bv = t.nodes_[b].value;
      Tensor& ga = t.nodes_[a].grad;
      Tensor& gb = t.nodes_[b].grad;
      // dA = G * B^T ; dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          double s = 0.0;
          const double* grow = node.grad.v.data() + i * p;
          const double* brow = bv.v.data() + k * p;
          for (std::size_t j = 0; j < p; ++j) s += grow[j] * brow[j];
          ga.v[i * n + k] += s;
        }
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < p; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < m; ++i) s += av.v[i * n + k] * node.grad.v[i * p + j];
          gb.v[k * p + j] += s;
        }
    });
  }

  // ---- elementwise ----

  NodeId add(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    require_same(av, bv, "add");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += bv.v[i];
    return push(std::move(out), nullptr, [a, b](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& ga = t.nodes_[a].grad;
      Tensor& gb = t.nodes_[b].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        ga.v[i] += n.grad.v[i];
        gb.v[i] += n.grad.v[i];
      }
    });
  }

  NodeId sub(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    require_same(av, bv, "sub");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= bv.v[i];
    return push(std::move(out), nullptr, [a, b](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& ga = t.nodes_[a].grad;
      Tensor& gb = t.nodes_[b].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        ga.v[i] += n.grad.v[i];
        gb.v[i] -= n.grad.v[i];
      }
    });
  }

  NodeId mul(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    require_same(av, bv, "mul");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= bv.v[i];
    return push(std::move(out), nullptr, [a, b](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      const Tensor& av = t.nodes_[a].value;
      const Tensor& bv = t.nodes_[b].value;
      Tensor& ga = t.nodes_[a].grad;
      Tensor& gb = t.nodes_[b].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        ga.v[i] += n.grad.v[i] * bv.v[i];
        gb.v[i] += n.grad.v[i] * av.v[i];
      }
    });
  }

  NodeId neg(NodeId a) {
    Tensor out = nodes_[a].value;
    for (double& e : out.v) e = -e;
    return push(std::move(out), nullptr, [a](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i) ga.v[i] -= n.grad.v[i];
    });
  }

  NodeId scale(NodeId a, double c) {
    Tensor out = nodes_[a].value;
    for (double& e : out.v) e *= c;
    return push(std::move(out), nullptr, [a, c](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i) ga.v[i] += c * n.grad.v[i];
    });
  }

  NodeId tanh_op(NodeId a) {
    Tensor out = nodes_[a].value;
    for (double& e : out.v) e = std::tanh(e);
    return push(std::move(out), nullptr, [a](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        ga.v[i] += n.grad.v[i] * (1.0 - n.value.v[i] * n.value.v[i]);
    });
  }

  NodeId sigmoid_op(NodeId a) {
    Tensor out = nodes_[a].value;
    for (double& e : out.v) e = e >= 0.0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
    return push(std::move(out), nullptr, [a](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        ga.v[i] += n.grad.v[i] * n.value.v[i] * (1.0 - n.value.v[i]);
    });
  }

  NodeId log_op(NodeId a) {
    Tensor out = nodes_[a].value;
    for (double& e : out.v) e = std::log(e);
    return push(std::move(out), nullptr, [a](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      const Tensor& av = t.nodes_[a].value;
      Tensor& ga = t.nodes_[a].grad;
      for (std::size_t i = 0; i < n.grad.size(); ++i) ga.v[i] += n.grad.v[i] / av.v[i];
    });
  }

  // ---- reductions / probability ----

  // Max-subtracted softmax. 1-D input: one distribution over active entries.
  // 2-D input: row-wise, sharing one column mask. Masked outputs are exactly
  // zero; a null mask means everything is active.
  NodeId softmax(NodeId logits, const Mask* mask = nullptr) {
    const Tensor& lv = nodes_[logits].value;
    const std::size_t cols = lv.ndim() == 1 ? lv.size() : lv.cols();
    const std::size_t rows = lv.ndim() == 1 ? 1 : lv.rows();
    if (lv.ndim() > 2) throw ShapeError("softmax: need 1-D or 2-D, got " + lv.shape_str());
    if (cols == 0) throw MaskError("softmax: empty input");
    if (mask) {
      if (mask->size() != cols)
        throw ShapeError("softmax: mask size " + std::to_string(mask->size()) + " vs " + lv.shape_str());
      bool any = false;
      for (auto m : *mask) any = any || m;
      if (!any) throw MaskError("softmax: all positions masked");
    }
    Tensor out(lv.shape);
    Mask local = mask ? *mask : Mask(cols, 1);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* in = lv.v.data() + r * cols;
      double* o = out.v.data() + r * cols;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < cols; ++c)
        if (local[c] && in[c] > mx) mx = in[c];
      double z = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        o[c] = local[c] ? std::exp(in[c] - mx) : 0.0;
        z += o[c];
      }
      for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
    }
    return push(std::move(out), nullptr, [logits, rows, cols](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& ga = t.nodes_[logits].grad;
      // dx = y * (g - <g, y>) per row; masked entries have y = 0.
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = n.value.v.data() + r * cols;
        const double* g = n.grad.v.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
        double* d = ga.v.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) d[c] += y[c] * (g[c] - dot);
      }
    });
  }

  // Columnwise max over rows: [t x f] -> [f]. Gradient routes only to the
  // argmax row; ties go to the lowest index.
  NodeId max_over_time(NodeId seq) {
    const Tensor& sv = nodes_[seq].value;
    if (sv.ndim() != 2 || sv.rows() == 0)
      throw ShapeError("max_over_time: need non-empty 2-D, got " + sv.shape_str());
    const std::size_t t_ = sv.rows(), f = sv.cols();
    Tensor out({f});
    std::vector<std::size_t> arg(f, 0);
    for (std::size_t c = 0; c < f; ++c) {
      double best = sv.at(0, c);
      for (std::size_t r = 1; r < t_; ++r)
        if (sv.at(r, c) > best) {
          best = sv.at(r, c);
          arg[c] = r;
        }
      out.v[c] = best;
    }
    return push(std::move(out), nullptr, [seq, arg = std::move(arg)](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& pg = t.nodes_[seq].grad;
      for (std::size_t c = 0; c < n.grad.size(); ++c) pg.at(arg[c], c) += n.grad.v[c];
    });
  }

  // Sum of the entries of a 1-D vector at the given positions -> scalar.
  NodeId select_sum(NodeId a, std::vector<std::size_t> indices) {
    const Tensor& av = nodes_[a].value;
    if (av.ndim() != 1) throw ShapeError("select_sum: need 1-D, got " + av.shape_str());
    for (std::size_t i : indices)
      if (i >= av.size())
        throw IndexError("select_sum: index " + std::to_string(i) + " out of " + av.shape_str());
    double s = 0.0;
    for (std::size_t i : indices) s += av.v[i];
    return push(Tensor::scalar(s), nullptr, [a, indices = std::move(indices)](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& pg = t.nodes_[a].grad;
      for (std::size_t i : indices) pg.v[i] += n.grad.v[0];
    });
  }

  NodeId sum_all(NodeId a) {
    const Tensor& av = nodes_[a].value;
    double s = 0.0;
    for (double e : av.v) s += e;
    return push(Tensor::scalar(s), nullptr, [a](Tape& t, NodeId self) {
      Node& n = t.nodes_[self];
      Tensor& pg = t.nodes_[a].grad;
      for (std::size_t i = 0; i < pg.size(); ++i) pg.v[i] += n.grad.v[0];
    });
  }

  // W x + b
  NodeId affine(NodeId w, NodeId x, NodeId b) { return add(matmul(w, x), b); }

  // ---- backward ----

  void backward(NodeId loss) {
    if (nodes_[loss].value.size() != 1)
      throw ContractError("backward: loss must be scalar, got " + nodes_[loss].value.shape_str());
    nodes_[loss].grad.v[0] = 1.0;
    for (std::size_t i = loss + 1; i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
  }

 private:
  friend struct Node;

  NodeId push(Tensor value, Parameter* p, std::function<void(Tape&, NodeId)> bw) {
    Node n;
    n.grad = Tensor(value.shape);
    n.value = std::move(value);
    n.param = p;
    if (p && !bw) {
      // plain param leaf handled by caller-provided lambda; nothing here
    }
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  static void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
      throw ShapeError(std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
  }

  static void check_gather(const Tensor& table, const std::vector<std::size_t>& ids,
                           const std::string& name) {
    if (table.ndim() != 2) throw ShapeError("gather: table must be 2-D, got " + table.shape_str());
    for (std::size_t id : ids)
      if (id >= table.rows())
        throw IndexError("gather(" + name + "): id " + std::to_string(id) + " out of range [0, " +
                         std::to_string(table.rows()) + ")");
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

}  // namespace caw
