// Layer definitions on top of the tape: dense, LSTM, GRU, multi-head
// attention and the transformer block. Parameters live in a ParamSet so
// optimizers and checkpoints see one flat, stably ordered list.
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "xling/graph.hpp"
#include "xling/rng.hpp"
#include "xling/tensor.hpp"

namespace xling {

class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  std::size_t add(const std::string& name, Tensor value) {
    if (index_.count(name))
      throw std::invalid_argument("duplicate parameter: " + name);
    index_[name] = entries_.size();
    Entry e;
    e.name = name;
    e.grad = Tensor(value.shape);
    e.value = std::move(value);
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
  }

  Entry& at(std::size_t i) { return entries_[i]; }
  const Entry& at(std::size_t i) const { return entries_[i]; }
  Entry& by_name(const std::string& name) { return entries_[index_.at(name)]; }
  const Entry& by_name(const std::string& name) const {
    return entries_[index_.at(name)];
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t size() const { return entries_.size(); }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void zero_grad() {
    for (auto& e : entries_) e.grad.fill(0.0);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

// uniform in +-sqrt(6 / (fan_in + fan_out))
inline Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  double a = std::sqrt(6.0 / (rows + cols));
  for (auto& v : t.values) v = rng.uniform(-a, a);
  return t;
}

// uniform in +-sqrt(1 / fan_in), used for recurrent matrices
inline Tensor recurrent_init(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  double a = std::sqrt(1.0 / rows);
  for (auto& v : t.values) v = rng.uniform(-a, a);
  return t;
}

inline Tensor zeros(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols});
}

inline Tensor ones(std::size_t rows, std::size_t cols) {
  Tensor t({rows, cols});
  t.fill(1.0);
  return t;
}

class Linear {
 public:
  Linear() = default;
  Linear(ParamSet& ps, const std::string& prefix, std::size_t in,
         std::size_t out, Rng& rng)
      : w_(ps.add(prefix + ".w", glorot(in, out, rng))),
        b_(ps.add(prefix + ".b", zeros(1, out))) {}

  Var operator()(Graph& g, ParamSet& ps, Var x) const {
    Var w = g.param(ps.at(w_).value, &ps.at(w_).grad);
    Var b = g.param(ps.at(b_).value, &ps.at(b_).grad);
    return g.add_row(g.matmul(x, w), b);
  }

 private:
  std::size_t w_ = 0, b_ = 0;
};

// one direction of an LSTM layer; gate order i, f, g, o
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParamSet& ps, const std::string& prefix, std::size_t in,
           std::size_t hidden, Rng& rng)
      : hidden_(hidden) {
    static const char* gates[] = {"i", "f", "g", "o"};
    for (int k = 0; k < 4; ++k) {
      std::string gp = prefix + "." + gates[k];
      wx_[k] = ps.add(gp + ".wx", glorot(in, hidden, rng));
      wh_[k] = ps.add(gp + ".wh", recurrent_init(hidden, hidden, rng));
      Tensor bias = zeros(1, hidden);
      if (k == 1) bias.fill(1.0);  // forget gate
      b_[k] = ps.add(gp + ".b", std::move(bias));
    }
  }

  std::size_t hidden() const { return hidden_; }

  // inputs: [T x in]; returns hidden states [T x H], time order matching
  // `order` (pass reversed indices for the backward direction)
  Var run(Graph& g, ParamSet& ps, Var inputs,
          const std::vector<std::size_t>& order) const {
    Var pw[4], ph[4], pb[4];
    for (int k = 0; k < 4; ++k) {
      pw[k] = g.param(ps.at(wx_[k]).value, &ps.at(wx_[k]).grad);
      ph[k] = g.param(ps.at(wh_[k]).value, &ps.at(wh_[k]).grad);
      pb[k] = g.param(ps.at(b_[k]).value, &ps.at(b_[k]).grad);
    }
    Var h = g.input(zeros(1, hidden_));
    Var c = g.input(zeros(1, hidden_));
    std::vector<Var> states(order.size());
    for (std::size_t t : order) {
      Var x = g.slice_rows(inputs, t, t + 1);
      Var gate_i = g.sigmoid(pre(g, x, h, pw[0], ph[0], pb[0]));
      Var gate_f = g.sigmoid(pre(g, x, h, pw[1], ph[1], pb[1]));
      Var gate_g = g.tanh(pre(g, x, h, pw[2], ph[2], pb[2]));
      Var gate_o = g.sigmoid(pre(g, x, h, pw[3], ph[3], pb[3]));
      c = g.add(g.mul(gate_f, c), g.mul(gate_i, gate_g));
      h = g.mul(gate_o, g.tanh(c));
      states[t] = h;
    }
    std::vector<Var> in_time_order(states.begin(), states.end());
    return g.concat_rows(in_time_order);
  }

 private:
  std::size_t hidden_ = 0;
  std::size_t wx_[4] = {}, wh_[4] = {}, b_[4] = {};

  static Var pre(Graph& g, Var x, Var h, Var wx, Var wh, Var b) {
    return g.add_row(g.add(g.matmul(x, wx), g.matmul(h, wh)), b);
  }
};

// gates: r = sig(x Wxr + h Whr + br), z = sig(x Wxz + h Whz + bz),
// n = tanh(x Wxn + r*(h Whn) + bn), h' = (1-z)*n + z*h
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParamSet& ps, const std::string& prefix, std::size_t in,
          std::size_t hidden, Rng& rng)
      : hidden_(hidden) {
    static const char* gates[] = {"r", "z", "n"};
    for (int k = 0; k < 3; ++k) {
      std::string gp = prefix + "." + gates[k];
      wx_[k] = ps.add(gp + ".wx", glorot(in, hidden, rng));
      wh_[k] = ps.add(gp + ".wh", recurrent_init(hidden, hidden, rng));
      b_[k] = ps.add(gp + ".b", zeros(1, hidden));
    }
  }

  std::size_t hidden() const { return hidden_; }

  // inputs: [T x in] -> states [T x H], forward time order
  Var run(Graph& g, ParamSet& ps, Var inputs) const {
    Var pw[3], ph[3], pb[3];
    for (int k = 0; k < 3; ++k) {
      pw[k] = g.param(ps.at(wx_[k]).value, &ps.at(wx_[k]).grad);
      ph[k] = g.param(ps.at(wh_[k]).value, &ps.at(wh_[k]).grad);
      pb[k] = g.param(ps.at(b_[k]).value, &ps.at(b_[k]).grad);
    }
    std::size_t t_count = g.value(inputs).rows();
    Var h = g.input(zeros(1, hidden_));
    std::vector<Var> states;
    states.reserve(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      Var x = g.slice_rows(inputs, t, t + 1);
      Var r = g.sigmoid(g.add_row(
          g.add(g.matmul(x, pw[0]), g.matmul(h, ph[0])), pb[0]));
      Var z = g.sigmoid(g.add_row(
          g.add(g.matmul(x, pw[1]), g.matmul(h, ph[1])), pb[1]));
      Var n = g.tanh(g.add_row(
          g.add(g.matmul(x, pw[2]), g.mul(r, g.matmul(h, ph[2]))), pb[2]));
      Var one_minus_z = g.sub(g.input(ones(1, hidden_)), z);
      h = g.add(g.mul(one_minus_z, n), g.mul(z, h));
      states.push_back(h);
    }
    return g.concat_rows(states);
  }

 private:
  std::size_t hidden_ = 0;
  std::size_t wx_[3] = {}, wh_[3] = {}, b_[3] = {};
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamSet& ps, const std::string& prefix, std::size_t dim,
                     std::size_t heads, Rng& rng)
      : dim_(dim), heads_(heads) {
    if (dim % heads != 0)
      throw std::invalid_argument("attention: dim " + std::to_string(dim) +
                                  " not divisible by " + std::to_string(heads) +
                                  " heads");
    std::size_t dk = dim / heads;
    for (std::size_t h = 0; h < heads; ++h) {
      std::string hp = prefix + ".h" + std::to_string(h);
      wq_.push_back(ps.add(hp + ".wq", glorot(dim, dk, rng)));
      wk_.push_back(ps.add(hp + ".wk", glorot(dim, dk, rng)));
      wv_.push_back(ps.add(hp + ".wv", glorot(dim, dk, rng)));
    }
    wo_ = ps.add(prefix + ".wo", glorot(dim, dim, rng));
  }

  // self-attention over x [T x D]; attn_out, when non-null, receives the
  // per-head softmax weight matrices
  Var operator()(Graph& g, ParamSet& ps, Var x,
                 std::vector<Tensor>* attn_out = nullptr) const {
    std::size_t dk = dim_ / heads_;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<Var> head_outs;
    for (std::size_t h = 0; h < heads_; ++h) {
      Var q = g.matmul(x, g.param(ps.at(wq_[h]).value, &ps.at(wq_[h]).grad));
      Var k = g.matmul(x, g.param(ps.at(wk_[h]).value, &ps.at(wk_[h]).grad));
      Var v = g.matmul(x, g.param(ps.at(wv_[h]).value, &ps.at(wv_[h]).grad));
      Var scores = g.scale(g.matmul_nt(q, k), inv_sqrt);
      Var weights = g.softmax_rows(scores);
      if (attn_out) attn_out->push_back(g.value(weights));
      head_outs.push_back(g.matmul(weights, v));
    }
    Var cat = head_outs[0];
    for (std::size_t h = 1; h < heads_; ++h)
      cat = g.concat_cols(cat, head_outs[h]);
    return g.matmul(cat, g.param(ps.at(wo_).value, &ps.at(wo_).grad));
  }

 private:
  std::size_t dim_ = 0, heads_ = 0;
  std::vector<std::size_t> wq_, wk_, wv_;
  std::size_t wo_ = 0;
};

// post-LN transformer encoder block: LN(x + MHA(x)), then LN(x + FFN(x))
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParamSet& ps, const std::string& prefix, std::size_t dim,
                   std::size_t heads, Rng& rng)
      : attn_(ps, prefix + ".attn", dim, heads, rng),
        ff1_(ps, prefix + ".ff1", dim, dim, rng),
        ff2_(ps, prefix + ".ff2", dim, dim, rng),
        ln1_gain_(ps.add(prefix + ".ln1.gain", ones(1, dim))),
        ln1_bias_(ps.add(prefix + ".ln1.bias", zeros(1, dim))),
        ln2_gain_(ps.add(prefix + ".ln2.gain", ones(1, dim))),
        ln2_bias_(ps.add(prefix + ".ln2.bias", zeros(1, dim))) {}

  Var operator()(Graph& g, ParamSet& ps, Var x, double dropout_rate,
                 bool train, Rng& rng,
                 std::vector<Tensor>* attn_out = nullptr) const {
    Var a = attn_(g, ps, x, attn_out);
    a = g.dropout(a, dropout_rate, train, rng);
    Var h = g.layer_norm(g.add(x, a),
                         g.param(ps.at(ln1_gain_).value, &ps.at(ln1_gain_).grad),
                         g.param(ps.at(ln1_bias_).value, &ps.at(ln1_bias_).grad));
    Var f = ff2_(g, ps, g.relu(ff1_(g, ps, h)));
    f = g.dropout(f, dropout_rate, train, rng);
    return g.layer_norm(g.add(h, f),
                        g.param(ps.at(ln2_gain_).value, &ps.at(ln2_gain_).grad),
                        g.param(ps.at(ln2_bias_).value, &ps.at(ln2_bias_).grad));
  }

 private:
  MultiHeadAttention attn_;
  Linear ff1_, ff2_;
  std::size_t ln1_gain_ = 0, ln1_bias_ = 0, ln2_gain_ = 0, ln2_bias_ = 0;
};

// fixed sinusoidal positional encodings, [T x D]
inline Tensor sinusoidal_positions(std::size_t t_count, std::size_t dim) {
  Tensor pe({t_count, dim});
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t i = 0; i < dim; ++i) {
      double rate = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(dim));
      pe.at(t, i) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  return pe;
}

}  // namespace xling
