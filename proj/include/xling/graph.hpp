// Reverse-mode autodiff over Tensor values. A Graph is a tape built per
// example; backward() walks it once in reverse and accumulates parameter
// gradients into caller-owned buffers.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "xling/rng.hpp"
#include "xling/tensor.hpp"

namespace xling {

// C (m x n) += or = op(A) * op(B), row-major
inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const double* a, const double* b, double* c,
                 bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = trans_b ? b + p : b + p * n;
      double* crow = c + i * n;
      if (trans_b)
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j * k];
      else
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

using Var = int;

class Graph {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Graph&)> backward;  // may be empty for leaves
    Tensor* grad_sink = nullptr;           // parameter leaves accumulate here
  };

  const Tensor& value(Var v) const { return nodes_[v].value; }
  const Tensor& grad(Var v) const { return nodes_[v].grad; }

  Var input(Tensor t) { return push(std::move(t), nullptr, {}); }

  // Parameter leaf: value copied in, gradient accumulated into *grad_sink.
  Var param(const Tensor& value, Tensor* grad_sink) {
    return push(value, grad_sink, {});
  }

  Var matmul(Var a, Var b) { return matmul_impl(a, b, false, false); }
  // a * b^T
  Var matmul_nt(Var a, Var b) { return matmul_impl(a, b, false, true); }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Tensor out = nodes_[a].value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += nodes_[b].value[i];
    return push(std::move(out), nullptr, [a, b](Graph& g) {
      Var self = g.current_;
      for (std::size_t i = 0; i < g.nodes_[self].grad.size(); ++i) {
        double d = g.nodes_[self].grad[i];
        g.nodes_[a].grad[i] += d;
        g.nodes_[b].grad[i] += d;
      }
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Tensor out = nodes_[a].value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= nodes_[b].value[i];
    return push(std::move(out), nullptr, [a, b](Graph& g) {
      Var self = g.current_;
      for (std::size_t i = 0; i < g.nodes_[self].grad.size(); ++i) {
        double d = g.nodes_[self].grad[i];
        g.nodes_[a].grad[i] += d;
        g.nodes_[b].grad[i] -= d;
      }
    });
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Tensor out = nodes_[a].value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= nodes_[b].value[i];
    return push(std::move(out), nullptr, [a, b](Graph& g) {
      Var self = g.current_;
      for (std::size_t i = 0; i < g.nodes_[self].grad.size(); ++i) {
        double d = g.nodes_[self].grad[i];
        g.nodes_[a].grad[i] += d * g.nodes_[b].value[i];
        g.nodes_[b].grad[i] += d * g.nodes_[a].value[i];
      }
    });
  }

  // broadcast row vector b [1 x n] over every row of a [m x n]
  Var add_row(Var a, Var b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (ta.cols() != tb.size())
      throw std::invalid_argument("add_row: width mismatch");
    Tensor out = ta;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += tb[c];
    return push(std::move(out), nullptr, [a, b](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t r = 0; r < d.rows(); ++r)
        for (std::size_t c = 0; c < d.cols(); ++c) {
          g.nodes_[a].grad.at(r, c) += d.at(r, c);
          g.nodes_[b].grad[c] += d.at(r, c);
        }
    });
  }

  Var scale(Var a, double c) {
    Tensor out = nodes_[a].value;
    for (auto& v : out.values) v *= c;
    return push(std::move(out), nullptr, [a, c](Graph& g) {
      Var self = g.current_;
      for (std::size_t i = 0; i < g.nodes_[self].grad.size(); ++i)
        g.nodes_[a].grad[i] += c * g.nodes_[self].grad[i];
    });
  }

  // multiply every element of a by the scalar node s ([1x1])
  Var scale_by(Var a, Var s) {
    double c = nodes_[s].value[0];
    Tensor out = nodes_[a].value;
    for (auto& v : out.values) v *= c;
    return push(std::move(out), nullptr, [a, s, c](Graph& g) {
      Var self = g.current_;
      double acc = 0.0;
      for (std::size_t i = 0; i < g.nodes_[self].grad.size(); ++i) {
        double d = g.nodes_[self].grad[i];
        g.nodes_[a].grad[i] += c * d;
        acc += d * g.nodes_[a].value[i];
      }
      g.nodes_[s].grad[0] += acc;
    });
  }

  Var tanh(Var a) {
    Tensor out = nodes_[a].value;
    for (auto& v : out.values) v = std::tanh(v);
    return unary_from_output(a, std::move(out),
                             [](double y) { return 1.0 - y * y; });
  }

  Var sigmoid(Var a) {
    Tensor out = nodes_[a].value;
    for (auto& v : out.values) v = 1.0 / (1.0 + std::exp(-v));
    return unary_from_output(a, std::move(out),
                             [](double y) { return y * (1.0 - y); });
  }

  Var relu(Var a) {
    Tensor out = nodes_[a].value;
    for (auto& v : out.values) v = v > 0.0 ? v : 0.0;
    return unary_from_output(a, std::move(out),
                             [](double y) { return y > 0.0 ? 1.0 : 0.0; });
  }

  Var concat_cols(Var a, Var b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (ta.rows() != tb.rows())
      throw std::invalid_argument("concat_cols: row mismatch");
    std::size_t na = ta.cols(), nb = tb.cols();
    Tensor out({ta.rows(), na + nb});
    for (std::size_t r = 0; r < ta.rows(); ++r) {
      for (std::size_t c = 0; c < na; ++c) out.at(r, c) = ta.at(r, c);
      for (std::size_t c = 0; c < nb; ++c) out.at(r, na + c) = tb.at(r, c);
    }
    return push(std::move(out), nullptr, [a, b, na, nb](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t c = 0; c < na; ++c)
          g.nodes_[a].grad.at(r, c) += d.at(r, c);
        for (std::size_t c = 0; c < nb; ++c)
          g.nodes_[b].grad.at(r, c) += d.at(r, na + c);
      }
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    std::size_t cols = nodes_[parts[0]].value.cols(), rows = 0;
    for (Var p : parts) rows += nodes_[p].value.rows();
    Tensor out({rows, cols});
    std::size_t r0 = 0;
    for (Var p : parts) {
      const Tensor& t = nodes_[p].value;
      std::copy(t.values.begin(), t.values.end(),
                out.values.begin() + r0 * cols);
      r0 += t.rows();
    }
    return push(std::move(out), nullptr, [parts, cols](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      std::size_t r0 = 0;
      for (Var p : parts) {
        Tensor& pg = g.nodes_[p].grad;
        for (std::size_t i = 0; i < pg.size(); ++i)
          pg[i] += d.values[r0 * cols + i];
        r0 += pg.rows();
      }
    });
  }

  Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    const Tensor& ta = nodes_[a].value;
    if (r1 > ta.rows() || r0 >= r1)
      throw std::invalid_argument("slice_rows: bad range");
    std::size_t cols = ta.cols();
    Tensor out({r1 - r0, cols});
    std::copy(ta.values.begin() + r0 * cols, ta.values.begin() + r1 * cols,
              out.values.begin());
    return push(std::move(out), nullptr, [a, r0, cols](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t i = 0; i < d.size(); ++i)
        g.nodes_[a].grad.values[r0 * cols + i] += d.values[i];
    });
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& ta = nodes_[a].value;
    if (c1 > ta.cols() || c0 >= c1)
      throw std::invalid_argument("slice_cols: bad range");
    std::size_t cols = ta.cols();
    Tensor out({ta.rows(), c1 - c0});
    for (std::size_t r = 0; r < ta.rows(); ++r)
      for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = ta.at(r, c);
    return push(std::move(out), nullptr, [a, c0, cols](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t r = 0; r < d.rows(); ++r)
        for (std::size_t c = 0; c < d.cols(); ++c)
          g.nodes_[a].grad.values[r * cols + c0 + c] += d.at(r, c);
    });
  }

  Var softmax_rows(Var a) {
    Tensor out = nodes_[a].value;
    softmax_inplace(out);
    Tensor saved = out;
    return push(std::move(out), nullptr, [a, saved](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t r = 0; r < d.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d.cols(); ++c)
          dot += d.at(r, c) * saved.at(r, c);
        for (std::size_t c = 0; c < d.cols(); ++c)
          g.nodes_[a].grad.at(r, c) += saved.at(r, c) * (d.at(r, c) - dot);
      }
    });
  }

  // sum over rows r of -log softmax(a)_{r, targets[r]}, skipping target < 0
  Var cross_entropy_rows(Var a, const std::vector<int>& targets) {
    const Tensor& ta = nodes_[a].value;
    if (targets.size() != ta.rows())
      throw std::invalid_argument("cross_entropy_rows: target count mismatch");
    Tensor probs = ta;
    softmax_inplace(probs);
    double loss = 0.0;
    for (std::size_t r = 0; r < ta.rows(); ++r)
      if (targets[r] >= 0)
        loss -= std::log(std::max(probs.at(r, targets[r]), 1e-300));
    Tensor out({1, 1});
    out[0] = loss;
    return push(std::move(out), nullptr, [a, targets, probs](Graph& g) {
      Var self = g.current_;
      double d = g.nodes_[self].grad[0];
      for (std::size_t r = 0; r < probs.rows(); ++r) {
        if (targets[r] < 0) continue;
        for (std::size_t c = 0; c < probs.cols(); ++c)
          g.nodes_[a].grad.at(r, c) +=
              d * (probs.at(r, c) - (static_cast<int>(c) == targets[r] ? 1.0 : 0.0));
      }
    });
  }

  // column-wise max over rows; ties route gradient to the earliest row
  Var max_over_rows(Var a) {
    const Tensor& ta = nodes_[a].value;
    if (ta.rows() == 0) throw std::invalid_argument("max_over_rows: empty input");
    std::size_t cols = ta.cols();
    Tensor out({1, cols});
    std::vector<std::size_t> arg(cols, 0);
    for (std::size_t c = 0; c < cols; ++c) {
      double best = ta.at(0, c);
      for (std::size_t r = 1; r < ta.rows(); ++r)
        if (ta.at(r, c) > best) {
          best = ta.at(r, c);
          arg[c] = r;
        }
      out[c] = best;
    }
    return push(std::move(out), nullptr, [a, arg](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t c = 0; c < d.size(); ++c)
        g.nodes_[a].grad.at(arg[c], c) += d[c];
    });
  }

  // elementwise max of two same-shape tensors; ties favor a
  Var vmax(Var a, Var b) {
    check_same(a, b, "vmax");
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    Tensor out = ta;
    std::vector<char> from_a(ta.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
      from_a[i] = ta[i] >= tb[i];
      if (!from_a[i]) out[i] = tb[i];
    }
    return push(std::move(out), nullptr, [a, b, from_a](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t i = 0; i < d.size(); ++i)
        (from_a[i] ? g.nodes_[a].grad[i] : g.nodes_[b].grad[i]) += d[i];
    });
  }

  Var sum_all(Var a) {
    double s = 0.0;
    for (double v : nodes_[a].value.values) s += v;
    Tensor out({1, 1});
    out[0] = s;
    return push(std::move(out), nullptr, [a](Graph& g) {
      Var self = g.current_;
      double d = g.nodes_[self].grad[0];
      for (auto& gv : g.nodes_[a].grad.values) gv += d;
    });
  }

  // rows of the embedding matrix param selected by id; backward scatter-adds
  Var rows_lookup(Var table, const std::vector<int>& ids) {
    const Tensor& tt = nodes_[table].value;
    std::size_t cols = tt.cols();
    Tensor out({ids.size(), cols});
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= tt.rows())
        throw std::out_of_range("rows_lookup: id " + std::to_string(ids[r]) +
                                " outside table " + tt.shape_str());
      std::copy(tt.values.begin() + ids[r] * cols,
                tt.values.begin() + (ids[r] + 1) * cols,
                out.values.begin() + r * cols);
    }
    return push(std::move(out), nullptr, [table, ids, cols](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c)
          g.nodes_[table].grad.values[ids[r] * cols + c] += d.at(r, c);
    });
  }

  // layer normalization per row with learnable gain/bias ([1 x D] each)
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
    const Tensor& tx = nodes_[x].value;
    std::size_t cols = tx.cols();
    Tensor out = tx;
    Tensor xhat = tx;
    std::vector<double> inv_std(tx.rows());
    for (std::size_t r = 0; r < tx.rows(); ++r) {
      double mean = 0.0;
      for (std::size_t c = 0; c < cols; ++c) mean += tx.at(r, c);
      mean /= cols;
      double var = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        double dv = tx.at(r, c) - mean;
        var += dv * dv;
      }
      var /= cols;
      inv_std[r] = 1.0 / std::sqrt(var + eps);
      for (std::size_t c = 0; c < cols; ++c) {
        xhat.at(r, c) = (tx.at(r, c) - mean) * inv_std[r];
        out.at(r, c) =
            xhat.at(r, c) * nodes_[gain].value[c] + nodes_[bias].value[c];
      }
    }
    return push(std::move(out), nullptr,
                [x, gain, bias, xhat, inv_std, cols](Graph& g) {
      Var self = g.current_;
      const Tensor& d = g.nodes_[self].grad;
      for (std::size_t r = 0; r < d.rows(); ++r) {
        double sum_dh = 0.0, sum_dh_xhat = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          double dh = d.at(r, c) * g.nodes_[gain].value[c];
          g.nodes_[gain].grad[c] += d.at(r, c) * xhat.at(r, c);
          g.nodes_[bias].grad[c] += d.at(r, c);
          sum_dh += dh;
          sum_dh_xhat += dh * xhat.at(r, c);
        }
        for (std::size_t c = 0; c < cols; ++c) {
          double dh = d.at(r, c) * g.nodes_[gain].value[c];
          g.nodes_[x].grad.at(r, c) +=
              inv_std[r] * (dh - sum_dh / cols -
                            xhat.at(r, c) * sum_dh_xhat / cols);
        }
      }
    });
  }

  // inverted dropout; identity when rate == 0 or train == false
  Var dropout(Var a, double rate, bool train, Rng& rng) {
    if (!train || rate <= 0.0) return a;
    const Tensor& ta = nodes_[a].value;
    double keep = 1.0 - rate;
    std::vector<double> mask(ta.size());
    for (auto& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return push(std::move(out), nullptr, [a, mask](Graph& g) {
      Var self = g.current_;
      for (std::size_t i = 0; i < mask.size(); ++i)
        g.nodes_[a].grad[i] += g.nodes_[self].grad[i] * mask[i];
    });
  }

  // custom node: caller supplies precomputed output and backward
  Var custom(Tensor out, std::function<void(Graph&)> backward) {
    return push(std::move(out), nullptr, std::move(backward));
  }

  void backward(Var loss) {
    if (nodes_[loss].value.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar");
    nodes_[loss].grad[0] = 1.0;
    for (int i = loss; i >= 0; --i) {
      current_ = i;
      if (nodes_[i].backward) nodes_[i].backward(*this);
      if (nodes_[i].grad_sink) {
        Tensor& sink = *nodes_[i].grad_sink;
        for (std::size_t j = 0; j < sink.size(); ++j)
          sink[j] += nodes_[i].grad[j];
      }
    }
  }

  Node& node(Var v) { return nodes_[v]; }
  Var current() const { return current_; }

  static void softmax_inplace(Tensor& t) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double mx = t.at(r, 0);
      for (std::size_t c = 1; c < t.cols(); ++c) mx = std::max(mx, t.at(r, c));
      double z = 0.0;
      for (std::size_t c = 0; c < t.cols(); ++c) {
        t.at(r, c) = std::exp(t.at(r, c) - mx);
        z += t.at(r, c);
      }
      for (std::size_t c = 0; c < t.cols(); ++c) t.at(r, c) /= z;
    }
  }

 private:
  std::vector<Node> nodes_;
  Var current_ = -1;

  Var push(Tensor value, Tensor* sink, std::function<void(Graph&)> bw) {
    Node n;
    n.grad = Tensor(value.shape);
    n.value = std::move(value);
    n.backward = std::move(bw);
    n.grad_sink = sink;
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  void check_same(Var a, Var b, const char* op) const {
    if (!nodes_[a].value.same_shape(nodes_[b].value))
      throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                  nodes_[a].value.shape_str() + " vs " +
                                  nodes_[b].value.shape_str());
  }

  template <typename DyDx>
  Var unary_from_output(Var a, Tensor out, DyDx dydx) {
    Tensor saved = out;
    return push(std::move(out), nullptr, [a, saved, dydx](Graph& g) {
      Var self = g.current_;
      for (std::size_t i = 0; i < saved.size(); ++i)
        g.nodes_[a].grad[i] += g.nodes_[self].grad[i] * dydx(saved[i]);
    });
  }

  Var matmul_impl(Var a, Var b, bool ta, bool tb) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    std::size_t m = ta ? va.cols() : va.rows();
    std::size_t k = ta ? va.rows() : va.cols();
    std::size_t kb = tb ? vb.cols() : vb.rows();
    std::size_t n = tb ? vb.rows() : vb.cols();
    if (k != kb)
      throw std::invalid_argument("matmul: inner dim mismatch " +
                                  va.shape_str() + " vs " + vb.shape_str());
    Tensor out({m, n});
    gemm(ta, tb, m, n, k, va.values.data(), vb.values.data(),
         out.values.data(), false);
    return push(std::move(out), nullptr, [a, b, ta, tb, m, n, k](Graph& g) {
      Var self = g.current_;
      const double* d = g.nodes_[self].grad.values.data();
      const double* pa = g.nodes_[a].value.values.data();
      const double* pb = g.nodes_[b].value.values.data();
      double* ga = g.nodes_[a].grad.values.data();
      double* gb = g.nodes_[b].grad.values.data();
      // only the (ta, tb) combinations actually used are supported
      if (!ta && !tb) {
        gemm(false, true, m, k, n, d, pb, ga, true);   // dA = D B^T
        gemm(true, false, k, n, m, pa, d, gb, true);   // dB = A^T D
      } else if (!ta && tb) {
        gemm(false, false, m, k, n, d, pb, ga, true);  // dA = D B
        gemm(true, false, n, k, m, d, pa, gb, true);   // dB = D^T A
      } else {
        throw std::logic_error("matmul: unsupported transpose combination");
      }
    });
  }
};

}  // namespace xling
