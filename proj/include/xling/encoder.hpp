// The shared multilingual sentence encoder (stacked biLSTM over subword
// units with max-pooled sentence embeddings) and its three pretraining
// objectives: encoder-decoder translation, MLM and TLM.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xling/nn.hpp"
#include "xling/subword.hpp"
#include "xling/train.hpp"

namespace xling {

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t hidden = 64;       // per direction
  std::size_t su_embed_dim = 32;
  std::size_t vocab = 500;
  std::string preset = "desk";

  static EncoderConfig desk(std::size_t vocab_size) {
    EncoderConfig c;
    c.vocab = vocab_size;
    return c;
  }

  static EncoderConfig full() {
    EncoderConfig c;
    c.num_layers = 5;
    c.hidden = 512;
    c.su_embed_dim = 320;
    c.vocab = 50000;
    c.preset = "full";
    return c;
  }
};

struct EncoderStates {
  // per_layer[l] = {forward [T x H], backward [T x H]}
  std::vector<std::pair<Tensor, Tensor>> per_layer;
  Tensor sentence_embedding;  // [1 x 2H], max-pool over final-layer concat
};

class SentenceEncoder {
 public:
  SentenceEncoder(const EncoderConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), objective_("none") {
    Rng rng(seed);
    embed_ = params_.add("enc.embed", glorot(cfg.vocab, cfg.su_embed_dim, rng));
    std::size_t in = cfg.su_embed_dim;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      fwd_.emplace_back(params_, "enc.l" + std::to_string(l) + ".fwd", in,
                        cfg.hidden, rng);
      bwd_.emplace_back(params_, "enc.l" + std::to_string(l) + ".bwd", in,
                        cfg.hidden, rng);
      in = 2 * cfg.hidden;
    }
  }

  const EncoderConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const std::string& objective() const { return objective_; }
  void set_objective(std::string obj) { objective_ = std::move(obj); }

  struct GraphStates {
    std::vector<std::pair<Var, Var>> per_layer;  // (fwd, bwd) per layer
    Var sentence_embedding = -1;                 // [1 x 2H]
    Var final_concat = -1;                       // [T x 2H]
  };

  // builds the tape for a SU id sequence; gradients flow into params_
  GraphStates run(Graph& g, const std::vector<int>& su_ids) {
    for (int id : su_ids)
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab)
        throw std::out_of_range("encoder: su id " + std::to_string(id) +
                                " outside vocab " + std::to_string(cfg_.vocab));
    std::size_t t_count = su_ids.size();
    std::vector<std::size_t> fwd_order(t_count), bwd_order(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      fwd_order[t] = t;
      bwd_order[t] = t_count - 1 - t;
    }
    Var table = g.param(params_.at(embed_).value, &params_.at(embed_).grad);
    Var x = g.rows_lookup(table, su_ids);
    GraphStates out;
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      Var hf = fwd_[l].run(g, params_, x, fwd_order);
      Var hb = bwd_[l].run(g, params_, x, bwd_order);
      out.per_layer.emplace_back(hf, hb);
      x = g.concat_cols(hf, hb);
    }
    out.final_concat = x;
    out.sentence_embedding = g.max_over_rows(x);
    return out;
  }

  // eval-mode encoding to plain tensors
  EncoderStates encode(const SubwordSegmentation& seg) {
    Graph g;
    GraphStates st = run(g, seg.su_ids);
    EncoderStates out;
    for (auto [hf, hb] : st.per_layer)
      out.per_layer.emplace_back(g.value(hf), g.value(hb));
    out.sentence_embedding = g.value(st.sentence_embedding);
    return out;
  }

 private:
  EncoderConfig cfg_;
  ParamSet params_;
  std::string objective_;
  std::size_t embed_ = 0;
  std::vector<LstmCell> fwd_, bwd_;
};

// the randomly initialized 2-layer control encoder ("no pretraining"),
// trained only through the downstream task
inline SentenceEncoder make_control_encoder(EncoderConfig cfg,
                                            std::uint64_t seed) {
  cfg.num_layers = 2;
  SentenceEncoder enc(cfg, seed);
  enc.set_objective("none");
  return enc;
}

// ---------------------------------------------------------------------------
// pretraining

struct PretrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr = 0.002;
  double mask_prob = 0.15;
  std::uint64_t seed = 0;
  bool mask_target_only = false;  // TLM: restrict masks to the target half
  bool fixed_masks = false;       // reuse the same mask draw every epoch
};

struct PretrainReport {
  double initial_loss_per_token = 0.0;
  double final_loss_per_token = 0.0;
  std::vector<double> epoch_losses;
};

struct EncodedPair {
  std::vector<int> source;  // SU ids
  std::vector<int> target;
  int target_lang = 0;
};

// Teacher-forced translation decoder: a single-layer unidirectional LSTM
// whose step input is [previous-token embedding; sentence embedding;
// target-language embedding]. It never sees the source language.
class TranslationDecoder {
 public:
  TranslationDecoder(const EncoderConfig& enc_cfg, std::size_t n_target_langs,
                     std::uint64_t seed)
      : hidden_(enc_cfg.hidden), vocab_(enc_cfg.vocab) {
    Rng rng(seed);
    std::size_t lang_dim = 8;
    std::size_t in = enc_cfg.su_embed_dim + 2 * enc_cfg.hidden + lang_dim;
    embed_ = params_.add("dec.embed",
                         glorot(enc_cfg.vocab, enc_cfg.su_embed_dim, rng));
    lang_embed_ =
        params_.add("dec.lang", glorot(std::max<std::size_t>(1, n_target_langs),
                                       lang_dim, rng));
    cell_ = LstmCell(params_, "dec.lstm", in, enc_cfg.hidden, rng);
    out_proj_ = Linear(params_, "dec.out", enc_cfg.hidden, enc_cfg.vocab, rng);
  }

  ParamSet& params() { return params_; }

  // cross-entropy of teacher-forced decoding; returns (loss Var, token count)
  std::pair<Var, std::size_t> loss(Graph& g, Var sentence_embedding,
                                   const std::vector<int>& target, int lang) {
    std::vector<int> in_ids = {SU_BOS};
    in_ids.insert(in_ids.end(), target.begin(), target.end());
    std::vector<int> out_ids = target;
    out_ids.push_back(SU_EOS);

    Var table = g.param(params_.at(embed_).value, &params_.at(embed_).grad);
    Var tok = g.rows_lookup(table, in_ids);
    Var langs = g.param(params_.at(lang_embed_).value,
                        &params_.at(lang_embed_).grad);
    Var lang_row = g.rows_lookup(langs, std::vector<int>(in_ids.size(), lang));
    // sentence embedding repeated at every step
    std::vector<Var> rep(in_ids.size(), sentence_embedding);
    Var sent = g.concat_rows(rep);
    Var x = g.concat_cols(g.concat_cols(tok, sent), lang_row);
    std::vector<std::size_t> order(in_ids.size());
    for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
    Var h = cell_.run(g, params_, x, order);
    Var logits = out_proj_(g, params_, h);
    return {g.cross_entropy_rows(logits, out_ids), out_ids.size()};
  }

  // greedy decode, for the memorization oracle
  std::vector<int> greedy_decode(SentenceEncoder& enc,
                                 const std::vector<int>& source, int lang,
                                 std::size_t max_len = 64) {
    std::vector<int> out;
    for (std::size_t step = 0; step < max_len; ++step) {
      Graph g;
      auto st = enc.run(g, source);
      std::vector<int> in_ids = {SU_BOS};
      in_ids.insert(in_ids.end(), out.begin(), out.end());
      Var table = g.param(params_.at(embed_).value, &params_.at(embed_).grad);
      Var tok = g.rows_lookup(table, in_ids);
      Var langs = g.param(params_.at(lang_embed_).value,
                          &params_.at(lang_embed_).grad);
      Var lang_row =
          g.rows_lookup(langs, std::vector<int>(in_ids.size(), lang));
      std::vector<Var> rep(in_ids.size(), st.sentence_embedding);
      Var x = g.concat_cols(g.concat_cols(tok, g.concat_rows(rep)), lang_row);
      std::vector<std::size_t> order(in_ids.size());
      for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
      Var h = cell_.run(g, params_, x, order);
      Var logits = out_proj_(g, params_, h);
      const Tensor& lg = g.value(logits);
      std::size_t last = lg.rows() - 1;
      int best = 0;
      for (std::size_t v = 1; v < lg.cols(); ++v)
        if (lg.at(last, v) > lg.at(last, best)) best = static_cast<int>(v);
      if (best == SU_EOS) break;
      out.push_back(best);
    }
    return out;
  }

 private:
  std::size_t hidden_, vocab_;
  ParamSet params_;
  std::size_t embed_ = 0, lang_embed_ = 0;
  LstmCell cell_;
  Linear out_proj_;
};

inline PretrainReport train_translation(const std::vector<EncodedPair>& corpus,
                                        SentenceEncoder& enc,
                                        TranslationDecoder& dec,
                                        const PretrainConfig& cfg) {
  if (corpus.empty())
    throw std::invalid_argument("train_translation: empty corpus");
  AdamOptimizer opt_enc(cfg.lr), opt_dec(cfg.lr);
  Rng rng(cfg.seed);
  PretrainReport report;
  auto epoch_loss = [&](bool update) {
    double total_loss = 0.0;
    std::size_t total_tokens = 0, in_batch = 0;
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (update) rng.shuffle(order);
    enc.params().zero_grad();
    dec.params().zero_grad();
    for (std::size_t i : order) {
      Graph g;
      auto st = enc.run(g, corpus[i].source);
      auto [loss, n_tok] =
          dec.loss(g, st.sentence_embedding, corpus[i].target,
                   corpus[i].target_lang);
      total_loss += g.value(loss)[0];
      total_tokens += n_tok;
      if (!update) continue;
      g.backward(loss);
      if (!std::isfinite(g.value(loss)[0]))
        throw std::runtime_error("divergence at pair " + std::to_string(i));
      if (++in_batch == cfg.batch_size) {
        opt_enc.step(enc.params());
        opt_dec.step(dec.params());
        enc.params().zero_grad();
        dec.params().zero_grad();
        in_batch = 0;
      }
    }
    if (update && in_batch) {
      opt_enc.step(enc.params());
      opt_dec.step(dec.params());
    }
    return total_loss / total_tokens;
  };
  report.initial_loss_per_token = epoch_loss(false);
  for (std::size_t e = 0; e < cfg.epochs; ++e)
    report.epoch_losses.push_back(epoch_loss(true));
  report.final_loss_per_token = epoch_loss(false);
  enc.set_objective("translation");
  return report;
}

// ---------------------------------------------------------------------------
// masked language modeling

struct MaskedInstance {
  std::vector<int> input;       // SU ids after corruption
  std::vector<int> targets;     // original id at selected positions, -1 else
  std::size_t n_selected = 0;
};

// BERT-style corruption: each position selected with mask_prob; selected
// positions become MASK (80%), a random SU (10%) or stay (10%)
inline MaskedInstance apply_masking(const std::vector<int>& su_ids,
                                    double mask_prob, std::size_t vocab,
                                    Rng& rng, std::size_t from = 0) {
  MaskedInstance inst;
  inst.input = su_ids;
  inst.targets.assign(su_ids.size(), -1);
  for (std::size_t i = from; i < su_ids.size(); ++i) {
    if (su_ids[i] < SU_RESERVED_COUNT) continue;  // never mask reserved SUs
    if (rng.uniform() >= mask_prob) continue;
    inst.targets[i] = su_ids[i];
    ++inst.n_selected;
    double roll = rng.uniform();
    if (roll < 0.8)
      inst.input[i] = SU_MASK;
    else if (roll < 0.9)
      inst.input[i] = SU_RESERVED_COUNT +
                      static_cast<int>(rng.below(vocab - SU_RESERVED_COUNT));
    // else keep
  }
  return inst;
}

// shared output head for MLM/TLM: projects final-layer states to the vocab
class MlmHead {
 public:
  MlmHead(const EncoderConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    proj_ = Linear(params_, "mlm.out", 2 * cfg.hidden, cfg.vocab, rng);
  }
  ParamSet& params() { return params_; }

  // loss at selected positions only; zero-selection sentences contribute 0
  Var loss(Graph& g, Var final_concat, const std::vector<int>& targets) {
    Var logits = proj_(g, params_, final_concat);
    return g.cross_entropy_rows(logits, targets);
  }

 private:
  ParamSet params_;
  Linear proj_;
};

inline PretrainReport train_mlm_like(
    const std::vector<std::vector<int>>& sequences,
    const std::vector<std::size_t>& mask_from, SentenceEncoder& enc,
    MlmHead& head, const PretrainConfig& cfg, const char* objective_name) {
  if (sequences.empty()) throw std::invalid_argument("mlm: empty corpus");
  if (!(cfg.mask_prob > 0.0 && cfg.mask_prob < 1.0))
    throw std::invalid_argument("mlm: mask_prob must be in (0,1)");
  AdamOptimizer opt_enc(cfg.lr), opt_head(cfg.lr);
  PretrainReport report;
  std::size_t vocab = enc.config().vocab;
  auto epoch_loss = [&](bool update, std::uint64_t mask_seed) {
    Rng mask_rng(mask_seed);
    double total_loss = 0.0;
    std::size_t total_selected = 0, in_batch = 0;
    enc.params().zero_grad();
    head.params().zero_grad();
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      MaskedInstance inst = apply_masking(sequences[i], cfg.mask_prob, vocab,
                                          mask_rng, mask_from[i]);
      if (inst.n_selected == 0) continue;
      Graph g;
      auto st = enc.run(g, inst.input);
      Var loss = head.loss(g, st.final_concat, inst.targets);
      total_loss += g.value(loss)[0];
      total_selected += inst.n_selected;
      if (!update) continue;
      g.backward(loss);
      if (++in_batch == cfg.batch_size) {
        opt_enc.step(enc.params());
        opt_head.step(head.params());
        enc.params().zero_grad();
        head.params().zero_grad();
        in_batch = 0;
      }
    }
    if (update && in_batch) {
      opt_enc.step(enc.params());
      opt_head.step(head.params());
    }
    return total_selected ? total_loss / total_selected : 0.0;
  };
  // fixed mask stream per epoch index keeps runs reproducible
  report.initial_loss_per_token = epoch_loss(false, cfg.seed);
  for (std::size_t e = 0; e < cfg.epochs; ++e)
    report.epoch_losses.push_back(
        epoch_loss(true, cfg.fixed_masks ? cfg.seed : cfg.seed + e));
  report.final_loss_per_token = epoch_loss(false, cfg.seed);
  enc.set_objective(objective_name);
  return report;
}

inline PretrainReport train_mlm(const std::vector<std::vector<int>>& sentences,
                                SentenceEncoder& enc, MlmHead& head,
                                const PretrainConfig& cfg) {
  std::vector<std::size_t> from(sentences.size(), 0);
  return train_mlm_like(sentences, from, enc, head, cfg, "mlm");
}

// source and target SU sequences concatenated around a separator; masked
// positions in either half (or the target half only) are predicted from
// the whole concatenation
inline PretrainReport train_tlm(const std::vector<EncodedPair>& corpus,
                                SentenceEncoder& enc, MlmHead& head,
                                const PretrainConfig& cfg) {
  std::vector<std::vector<int>> seqs;
  std::vector<std::size_t> from;
  for (const auto& pair : corpus) {
    std::vector<int> seq = pair.source;
    seq.push_back(SU_SEP);
    std::size_t sep_index = seq.size();
    seq.insert(seq.end(), pair.target.begin(), pair.target.end());
    seqs.push_back(std::move(seq));
    from.push_back(cfg.mask_target_only ? sep_index : 0);
  }
  return train_mlm_like(seqs, from, enc, head, cfg, "tlm");
}

}  // namespace xling
