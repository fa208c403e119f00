// Sequence tagging head: transformer encoder over word embeddings with an
// emission projection, topped by a linear-chain CRF (exact forward /
// Viterbi inference) or a plain per-position argmax.
#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "xling/graph.hpp"
#include "xling/nn.hpp"

namespace xling {

inline double log_sum_exp(const std::vector<double>& xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double z = 0.0;
  for (double x : xs) z += std::exp(x - mx);
  return mx + std::log(z);
}

// transition/start/stop scores over K labels
struct CrfScores {
  Tensor transitions;  // [K x K], from -> to
  Tensor start;        // [1 x K]
  Tensor stop;         // [1 x K]

  explicit CrfScores(std::size_t k = 0)
      : transitions({k, k}), start({1, k}), stop({1, k}) {}

  std::size_t label_count() const { return start.cols(); }
};

// log of the sum over all K^T paths of exp(path score), computed by the
// forward recursion in log space
inline double crf_log_partition(const Tensor& em, const CrfScores& crf) {
  std::size_t t_count = em.rows(), k_count = em.cols();
  if (t_count == 0) throw std::invalid_argument("crf: empty input");
  std::vector<double> alpha(k_count), next(k_count), terms(k_count);
  for (std::size_t k = 0; k < k_count; ++k)
    alpha[k] = crf.start[k] + em.at(0, k);
  for (std::size_t t = 1; t < t_count; ++t) {
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t j = 0; j < k_count; ++j)
        terms[j] = alpha[j] + crf.transitions.at(j, k);
      next[k] = log_sum_exp(terms) + em.at(t, k);
    }
    alpha = next;
  }
  for (std::size_t k = 0; k < k_count; ++k) terms[k] = alpha[k] + crf.stop[k];
  return log_sum_exp(terms);
}

inline double crf_path_score(const Tensor& em, const CrfScores& crf,
                             const std::vector<int>& path) {
  if (path.size() != em.rows())
    throw std::invalid_argument("crf: path length mismatch");
  for (int l : path)
    if (l < 0 || static_cast<std::size_t>(l) >= em.cols())
      throw std::out_of_range("crf: label id out of range");
  double s = crf.start[path[0]] + em.at(0, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t)
    s += crf.transitions.at(path[t - 1], path[t]) + em.at(t, path[t]);
  return s + crf.stop[path.back()];
}

// argmax path and its unnormalized score; ties resolve to the lowest label id
inline std::pair<std::vector<int>, double> viterbi(const Tensor& em,
                                                   const CrfScores& crf) {
  std::size_t t_count = em.rows(), k_count = em.cols();
  if (t_count == 0) throw std::invalid_argument("crf: empty input");
  std::vector<std::vector<double>> score(t_count, std::vector<double>(k_count));
  std::vector<std::vector<int>> back(t_count, std::vector<int>(k_count, -1));
  for (std::size_t k = 0; k < k_count; ++k)
    score[0][k] = crf.start[k] + em.at(0, k);
  for (std::size_t t = 1; t < t_count; ++t)
    for (std::size_t k = 0; k < k_count; ++k) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t j = 0; j < k_count; ++j) {
        double cand = score[t - 1][j] + crf.transitions.at(j, k);
        if (cand > best) {
          best = cand;
          arg = static_cast<int>(j);
        }
      }
      score[t][k] = best + em.at(t, k);
      back[t][k] = arg;
    }
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (std::size_t k = 0; k < k_count; ++k) {
    double cand = score[t_count - 1][k] + crf.stop[k];
    if (cand > best) {
      best = cand;
      arg = static_cast<int>(k);
    }
  }
  std::vector<int> path(t_count);
  path[t_count - 1] = arg;
  for (std::size_t t = t_count - 1; t > 0; --t)
    path[t - 1] = back[t][path[t]];
  return {path, best};
}

inline std::vector<int> predict_linear(const Tensor& em) {
  if (em.rows() == 0) throw std::invalid_argument("predict_linear: empty input");
  std::vector<int> out(em.rows());
  for (std::size_t t = 0; t < em.rows(); ++t) {
    int arg = 0;
    for (std::size_t k = 1; k < em.cols(); ++k)
      if (em.at(t, k) > em.at(t, arg)) arg = static_cast<int>(k);
    out[t] = arg;
  }
  return out;
}

// Tape node for the CRF negative log likelihood. The gradient comes from
// forward-backward marginals rather than differentiating the recursion
// node by node.
inline Var crf_nll_op(Graph& g, Var em, Var transitions, Var start, Var stop,
                      const std::vector<int>& gold) {
  const Tensor& tem = g.value(em);
  std::size_t t_count = tem.rows(), k_count = tem.cols();
  if (gold.size() != t_count)
    throw std::invalid_argument("crf_nll: gold length mismatch");
  CrfScores crf(k_count);
  crf.transitions = g.value(transitions);
  crf.start = g.value(start);
  crf.stop = g.value(stop);
  double log_z = crf_log_partition(tem, crf);
  double nll = log_z - crf_path_score(tem, crf, gold);

  // alpha/beta in log space, saved for the backward pass
  std::vector<std::vector<double>> alpha(t_count, std::vector<double>(k_count));
  std::vector<std::vector<double>> beta(t_count, std::vector<double>(k_count));
  std::vector<double> terms(k_count);
  for (std::size_t k = 0; k < k_count; ++k)
    alpha[0][k] = crf.start[k] + tem.at(0, k);
  for (std::size_t t = 1; t < t_count; ++t)
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t j = 0; j < k_count; ++j)
        terms[j] = alpha[t - 1][j] + crf.transitions.at(j, k);
      alpha[t][k] = log_sum_exp(terms) + tem.at(t, k);
    }
  for (std::size_t k = 0; k < k_count; ++k)
    beta[t_count - 1][k] = crf.stop[k];
  for (std::size_t t = t_count - 1; t > 0; --t)
    for (std::size_t j = 0; j < k_count; ++j) {
      for (std::size_t k = 0; k < k_count; ++k)
        terms[k] = crf.transitions.at(j, k) + tem.at(t, k) + beta[t][k];
      beta[t - 1][j] = log_sum_exp(terms);
    }

  Tensor out({1, 1});
  out[0] = nll;
  Tensor em_val = tem;
  CrfScores saved = crf;
  return g.custom(std::move(out), [=](Graph& gg) {
    Var self = gg.current();
    double d = gg.node(self).grad[0];
    Tensor& dem = gg.node(em).grad;
    Tensor& dtr = gg.node(transitions).grad;
    Tensor& dst = gg.node(start).grad;
    Tensor& dsp = gg.node(stop).grad;
    for (std::size_t t = 0; t < t_count; ++t)
      for (std::size_t k = 0; k < k_count; ++k) {
        double mu = std::exp(alpha[t][k] + beta[t][k] - log_z);
        double grad = mu - (gold[t] == static_cast<int>(k) ? 1.0 : 0.0);
        dem.at(t, k) += d * grad;
        if (t == 0) dst[k] += d * grad;
        if (t == t_count - 1) dsp[k] += d * grad;
      }
    for (std::size_t t = 0; t + 1 < t_count; ++t)
      for (std::size_t j = 0; j < k_count; ++j)
        for (std::size_t k = 0; k < k_count; ++k) {
          double p = std::exp(alpha[t][j] + saved.transitions.at(j, k) +
                              em_val.at(t + 1, k) + beta[t + 1][k] - log_z);
          double gold_pair =
              (gold[t] == static_cast<int>(j) &&
               gold[t + 1] == static_cast<int>(k))
                  ? 1.0
                  : 0.0;
          dtr.at(j, k) += d * (p - gold_pair);
        }
  });
}

// ---------------------------------------------------------------------------
// transformer tagger

struct TaggerConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t model_dim = 300;
  bool crf_head = true;
  std::vector<std::string> labels;
  std::size_t input_dim = 0;
  double dropout_embed = 0.25;   // on embeddings entering the tagger
  double dropout_block = 0.15;   // inside transformer blocks
  bool bio_transition_mask = false;  // forbid O -> I-X etc. at decode time
};

// additive mask: -1e30 on transitions that break the BIO scheme
inline Tensor bio_mask(const std::vector<std::string>& labels) {
  std::size_t k = labels.size();
  Tensor mask({k, k});
  for (std::size_t from = 0; from < k; ++from)
    for (std::size_t to = 0; to < k; ++to) {
      const std::string& t = labels[to];
      if (t.size() > 2 && t[0] == 'I') {
        const std::string& f = labels[from];
        bool ok = f.size() > 2 && f.substr(2) == t.substr(2);
        if (!ok) mask.at(from, to) = -1e30;
      }
    }
  return mask;
}

class Tagger {
 public:
  Tagger(const TaggerConfig& cfg, ParamSet& ps, Rng& rng) : cfg_(cfg) {
    if (cfg.labels.empty()) throw std::invalid_argument("tagger: no labels");
    if (cfg.input_dim == 0) throw std::invalid_argument("tagger: input_dim unset");
    std::size_t k = cfg.labels.size();
    in_proj_ = Linear(ps, "tagger.in", cfg.input_dim, cfg.model_dim, rng);
    for (std::size_t l = 0; l < cfg.layers; ++l)
      blocks_.emplace_back(ps, "tagger.blk" + std::to_string(l), cfg.model_dim,
                           cfg.heads, rng);
    emit_ = Linear(ps, "tagger.emit", cfg.model_dim, k, rng);
    if (cfg.crf_head) {
      trans_ = ps.add("tagger.crf.transitions", zeros(k, k));
      start_ = ps.add("tagger.crf.start", zeros(1, k));
      stop_ = ps.add("tagger.crf.stop", zeros(1, k));
    }
  }

  const TaggerConfig& config() const { return cfg_; }

  // word embeddings [T x input_dim] -> emission scores [T x K]
  Var emissions(Graph& g, ParamSet& ps, Var words, bool train, Rng& rng) const {
    // note: grabbing a Tensor reference from g across op calls would dangle
    // when the node vector grows, so copy the dims out first
    std::size_t t_count = g.value(words).rows();
    std::size_t width = g.value(words).cols();
    if (width != cfg_.input_dim)
      throw std::invalid_argument("tagger: input dim " + std::to_string(width) +
                                  " != " + std::to_string(cfg_.input_dim));
    Var x = g.dropout(words, cfg_.dropout_embed, train, rng);
    x = in_proj_(g, ps, x);
    x = g.add(x, g.input(sinusoidal_positions(t_count, cfg_.model_dim)));
    for (const auto& blk : blocks_)
      x = blk(g, ps, x, cfg_.dropout_block, train, rng);
    return emit_(g, ps, x);
  }

  // training loss (sum over positions / the sequence)
  Var loss(Graph& g, ParamSet& ps, Var words, const std::vector<int>& gold,
           bool train, Rng& rng) const {
    Var em = emissions(g, ps, words, train, rng);
    if (cfg_.crf_head) {
      Var tr = g.param(ps.at(trans_).value, &ps.at(trans_).grad);
      Var st = g.param(ps.at(start_).value, &ps.at(start_).grad);
      Var sp = g.param(ps.at(stop_).value, &ps.at(stop_).grad);
      return crf_nll_op(g, em, tr, st, sp, gold);
    }
    return g.cross_entropy_rows(em, gold);
  }

  std::vector<int> predict(ParamSet& ps, const Tensor& word_vectors,
                           Rng& rng) const {
    Graph g;
    Var em = emissions(g, ps, g.input(word_vectors), false, rng);
    return decode(ps, g.value(em));
  }

  // decoding from already-computed emission scores
  std::vector<int> decode(ParamSet& ps, const Tensor& scores) const {
    if (!cfg_.crf_head) return predict_linear(scores);
    CrfScores crf(cfg_.labels.size());
    crf.transitions = ps.at(trans_).value;
    crf.start = ps.at(start_).value;
    crf.stop = ps.at(stop_).value;
    if (cfg_.bio_transition_mask) {
      Tensor mask = bio_mask(cfg_.labels);
      for (std::size_t i = 0; i < mask.size(); ++i)
        crf.transitions[i] += mask[i];
    }
    return viterbi(scores, crf).first;
  }

 private:
  TaggerConfig cfg_;
  Linear in_proj_, emit_;
  std::vector<TransformerBlock> blocks_;
  std::size_t trans_ = 0, start_ = 0, stop_ = 0;
};

}  // namespace xling
