// Word-embedding extraction: BPE bag-of-words, BPE GRU, static lookup,
// LASER-top (final layer, direction max-pool, learnable rescale) and
// LASER-elmo (softmax-weighted layer combination).
#pragma once

#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "xling/corpus.hpp"
#include "xling/encoder.hpp"
#include "xling/nn.hpp"
#include "xling/subword.hpp"

namespace xling {

enum class Strategy { bpe_bow, bpe_gru, static_table, laser_top, laser_elmo, control };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::bpe_bow: return "bpe_bow";
    case Strategy::bpe_gru: return "bpe_gru";
    case Strategy::static_table: return "static";
    case Strategy::laser_top: return "laser_top";
    case Strategy::laser_elmo: return "laser_elmo";
    case Strategy::control: return "control";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : {Strategy::bpe_bow, Strategy::bpe_gru,
                     Strategy::static_table, Strategy::laser_top,
                     Strategy::laser_elmo, Strategy::control})
    if (name == strategy_name(s)) return s;
  throw std::invalid_argument("unknown strategy: " + name);
}

// ---------------------------------------------------------------------------
// BPE BOW: word vector = arithmetic mean of its SU embeddings

inline Var bpe_bow(Graph& g, const SubwordSegmentation& seg, Var su_embeds) {
  seg.validate();
  std::size_t t_count = g.value(su_embeds).rows();
  if (t_count != seg.su_ids.size())
    throw std::invalid_argument("bpe_bow: embedding rows != SU count");
  // averaging matrix [W x T]: constant, so the mean stays differentiable
  Tensor avg({seg.word_spans.size(), t_count});
  for (std::size_t w = 0; w < seg.word_spans.size(); ++w) {
    auto [s, e] = seg.word_spans[w];
    for (std::size_t t = s; t < e; ++t)
      avg.at(w, t) = 1.0 / static_cast<double>(e - s);
  }
  return g.matmul(g.input(std::move(avg)), su_embeds);
}

// ---------------------------------------------------------------------------
// BPE GRU: run each word's SUs through a GRU, max-pool its real timesteps

inline Var bpe_gru(Graph& g, ParamSet& ps, const GruCell& gru,
                   const SubwordSegmentation& seg, Var su_embeds) {
  seg.validate();
  std::vector<Var> word_vecs;
  for (auto [s, e] : seg.word_spans) {
    Var span = g.slice_rows(su_embeds, s, e);
    Var states = gru.run(g, ps, span);
    word_vecs.push_back(g.max_over_rows(states));
  }
  return g.concat_rows(word_vecs);
}

// ---------------------------------------------------------------------------
// static lookup (MUSE-style embedding files)

struct StaticTable {
  std::map<std::string, Tensor> vectors;  // word -> [1 x D]
  std::size_t dim = 0;
  enum class OovPolicy { zero, mean } oov_policy = OovPolicy::zero;
  Tensor mean_vector;  // corpus mean, used by the mean policy

  // format: "<count> <dim>" header, then "<word> <v1> ... <vdim>" per line
  static StaticTable load(std::istream& is,
                          OovPolicy policy = OovPolicy::zero) {
    StaticTable table;
    table.oov_policy = policy;
    std::size_t count = 0;
    std::string line;
    if (!std::getline(is, line))
      throw std::runtime_error("static table: empty stream");
    {
      std::istringstream ss(line);
      if (!(ss >> count >> table.dim))
        throw std::runtime_error("static table: bad header: " + line);
    }
    table.mean_vector = Tensor({1, table.dim});
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string word;
      ss >> word;
      Tensor v({1, table.dim});
      for (std::size_t i = 0; i < table.dim; ++i)
        if (!(ss >> v[i]))
          throw std::runtime_error("static table: short row for " + word);
      for (std::size_t i = 0; i < table.dim; ++i)
        table.mean_vector[i] += v[i];
      table.vectors[word] = std::move(v);
    }
    if (table.vectors.size() != count)
      throw std::runtime_error("static table: header count " +
                               std::to_string(count) + " != rows " +
                               std::to_string(table.vectors.size()));
    if (!table.vectors.empty())
      for (auto& v : table.mean_vector.values) v /= table.vectors.size();
    return table;
  }
};

struct StaticLookupResult {
  Tensor vectors;  // [W x D]
  std::size_t oov_count = 0;
};

inline StaticLookupResult static_lookup(const std::vector<std::string>& words,
                                        const StaticTable& table) {
  StaticLookupResult out;
  out.vectors = Tensor({words.size(), table.dim});
  for (std::size_t w = 0; w < words.size(); ++w) {
    auto it = table.vectors.find(normalize(words[w]));
    const Tensor* v = nullptr;
    if (it != table.vectors.end()) {
      v = &it->second;
    } else {
      ++out.oov_count;
      if (table.oov_policy == StaticTable::OovPolicy::mean)
        v = &table.mean_vector;
    }
    if (v)
      for (std::size_t c = 0; c < table.dim; ++c)
        out.vectors.at(w, c) = (*v)[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// LASER-top / LASER-elmo

// learnable extraction parameters; gamma starts at 1, layer logits at 0
// (uniform weights after softmax)
struct ExtractorParams {
  std::size_t gamma = 0;
  std::size_t layer_logits = 0;  // used by laser_elmo / control only
  bool has_logits = false;

  static ExtractorParams create(ParamSet& ps, std::size_t num_layers,
                                bool with_logits) {
    ExtractorParams p;
    p.gamma = ps.add("extract.gamma", ones(1, 1));
    if (with_logits) {
      p.layer_logits = ps.add("extract.layer_logits", zeros(1, num_layers));
      p.has_logits = true;
    }
    return p;
  }
};

// per-SU direction max-pool of one layer: elementwise max(h_fwd, h_bwd)
inline Var direction_maxpool(Graph& g, Var fwd_states, Var bwd_states) {
  return g.vmax(fwd_states, bwd_states);
}

// per-word max-pool over each word's SU rows
inline Var per_word_maxpool(Graph& g, Var su_vectors,
                            const SubwordSegmentation& seg) {
  std::vector<Var> words;
  for (auto [s, e] : seg.word_spans)
    words.push_back(g.max_over_rows(g.slice_rows(su_vectors, s, e)));
  return g.concat_rows(words);
}

// final layer only: m(t) = gamma * max(h_fwd, h_bwd), then per-word max
inline Var laser_top(Graph& g, ParamSet& ps,
                     const SentenceEncoder::GraphStates& states,
                     const SubwordSegmentation& seg,
                     const ExtractorParams& extract) {
  seg.validate();
  auto [hf, hb] = states.per_layer.back();
  Var gamma = g.param(ps.at(extract.gamma).value, &ps.at(extract.gamma).grad);
  Var m = g.scale_by(direction_maxpool(g, hf, hb), gamma);
  return per_word_maxpool(g, m, seg);
}

// all layers: e(t) = sum_l softmax(logits)_l * m_l(t), shared gamma, then
// the same per-word max-pool
inline Var laser_elmo(Graph& g, ParamSet& ps,
                      const SentenceEncoder::GraphStates& states,
                      const SubwordSegmentation& seg,
                      const ExtractorParams& extract) {
  seg.validate();
  if (!extract.has_logits)
    throw std::invalid_argument("laser_elmo: extractor has no layer logits");
  std::size_t n_layers = states.per_layer.size();
  Var logits = g.param(ps.at(extract.layer_logits).value,
                       &ps.at(extract.layer_logits).grad);
  if (g.value(logits).cols() != n_layers)
    throw std::invalid_argument("laser_elmo: logit count != layer count");
  Var weights = g.softmax_rows(logits);
  Var combined = -1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto [hf, hb] = states.per_layer[l];
    Var m = direction_maxpool(g, hf, hb);
    Var w_l = g.slice_cols(weights, l, l + 1);  // [1 x 1] scalar node
    Var term = g.scale_by(m, w_l);
    combined = l == 0 ? term : g.add(combined, term);
  }
  Var gamma = g.param(ps.at(extract.gamma).value, &ps.at(extract.gamma).grad);
  return per_word_maxpool(g, g.scale_by(combined, gamma), seg);
}

}  // namespace xling
