// Experiment harness: tagger training over the extraction strategies,
// zero-shot transfer and joint-training protocols, result tables, reports
// and run manifests.
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xling/checkpoint.hpp"
#include "xling/corpus.hpp"
#include "xling/embed.hpp"
#include "xling/encoder.hpp"
#include "xling/eval.hpp"
#include "xling/subword.hpp"
#include "xling/tagger.hpp"
#include "xling/train.hpp"

namespace xling {

enum class Task { ner, pos };

inline const char* task_name(Task t) { return t == Task::ner ? "ner" : "pos"; }

inline Task task_from_name(const std::string& name) {
  if (name == "ner") return Task::ner;
  if (name == "pos") return Task::pos;
  throw std::invalid_argument("unknown task: " + name);
}

struct LanguageSet {
  std::string language;
  TaggedDataset train, dev, test;
};

struct PipelineConfig {
  Task task = Task::ner;
  Strategy strategy = Strategy::laser_top;
  TaggerConfig tagger;  // labels and input_dim are filled by make_model
  TrainConfig train;
  std::size_t gru_hidden = 64;       // bpe_gru word-GRU width
  std::size_t control_hidden = 64;   // control encoder, trained in-task
  std::size_t control_su_dim = 32;
};

inline std::vector<std::string> label_set(Task task,
                                          const TaggedDataset& train_ds) {
  if (task == Task::pos) {
    const auto& tags = universal_pos_tags();
    return {tags.begin(), tags.end()};
  }
  std::set<std::string> labels = {"O"};
  for (const auto& s : train_ds.sentences)
    for (const auto& t : s.tokens)
      if (t.ner != kUntagged) labels.insert(t.ner);
  return {labels.begin(), labels.end()};
}

inline const std::string& token_label(Task task, const Token& tok) {
  return task == Task::ner ? tok.ner : tok.upos;
}

// shared, frozen inputs to tagger training
struct Resources {
  MergeTable merges;
  std::optional<SentenceEncoder> encoder;  // pretrained, never updated here
  std::optional<StaticTable> static_lex;
};

// one sentence with everything precomputed that the frozen parts of the
// pipeline allow, so the per-epoch graphs stay small
struct Prepared {
  SubwordSegmentation seg;
  std::vector<int> gold;
  std::vector<std::string> gold_labels;
  Tensor direct;                 // bpe_bow / static: finished word vectors
  Tensor su_embeds;              // bpe_gru: frozen SU embedding rows
  std::vector<Tensor> m_bases;   // laser_*: per-layer max(h_fwd, h_bwd)
};

struct TagModel {
  PipelineConfig cfg;
  std::vector<std::string> labels;
  std::map<std::string, int> label_ids;
  ParamSet ps;
  std::optional<Tagger> tagger;
  ExtractorParams extract;
  std::optional<GruCell> gru;
  std::optional<SentenceEncoder> control_enc;  // trained through the task
};

inline std::size_t strategy_input_dim(const Resources& res,
                                      const PipelineConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::bpe_bow:
      if (!res.encoder) throw std::invalid_argument("bpe_bow needs an encoder");
      return res.encoder->config().su_embed_dim;
    case Strategy::bpe_gru:
      return cfg.gru_hidden;
    case Strategy::static_table:
      if (!res.static_lex)
        throw std::invalid_argument("static strategy needs an embedding table");
      return res.static_lex->dim;
    case Strategy::laser_top:
    case Strategy::laser_elmo:
      if (!res.encoder)
        throw std::invalid_argument(std::string(strategy_name(cfg.strategy)) +
                                    " needs an encoder");
      return res.encoder->config().hidden;
    case Strategy::control:
      return cfg.control_hidden;
  }
  throw std::logic_error("unreachable");
}

inline TagModel make_model(const Resources& res, const PipelineConfig& cfg,
                           const std::vector<std::string>& labels) {
  TagModel m;
  m.cfg = cfg;
  m.labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i)
    m.label_ids[labels[i]] = int(i);
  Rng rng(cfg.train.seed * 7919 + 13);

  TaggerConfig tc = cfg.tagger;
  tc.labels = labels;
  tc.input_dim = strategy_input_dim(res, cfg);
  tc.dropout_embed = cfg.train.dropout_embed;
  tc.dropout_block = cfg.train.dropout_tagger;
  m.cfg.tagger = tc;

  switch (cfg.strategy) {
    case Strategy::bpe_gru:
      m.gru.emplace(m.ps, "wordgru",
                    res.encoder ? res.encoder->config().su_embed_dim
                                : cfg.control_su_dim,
                    cfg.gru_hidden, rng);
      break;
    case Strategy::laser_top:
      m.extract =
          ExtractorParams::create(m.ps, res.encoder->config().num_layers, false);
      break;
    case Strategy::laser_elmo:
      m.extract =
          ExtractorParams::create(m.ps, res.encoder->config().num_layers, true);
      break;
    case Strategy::control: {
      EncoderConfig ec;
      ec.num_layers = 2;
      ec.hidden = cfg.control_hidden;
      ec.su_embed_dim = cfg.control_su_dim;
      ec.vocab = res.merges.vocab_size();
      m.control_enc.emplace(ec, cfg.train.seed * 104729 + 7);
      m.extract = ExtractorParams::create(m.ps, 2, true);
      break;
    }
    default:
      break;
  }
  m.tagger.emplace(tc, m.ps, rng);
  return m;
}

inline Prepared prepare_sentence(const Resources& res, const TagModel& m,
                                 const Sentence& sent) {
  Prepared p;
  std::vector<std::string> words;
  for (const auto& tok : sent.tokens) words.push_back(normalize(tok.surface));
  p.seg = encode(words, res.merges);
  for (const auto& tok : sent.tokens) {
    const std::string& label = token_label(m.cfg.task, tok);
    auto it = m.label_ids.find(label);
    if (it == m.label_ids.end())
      throw std::invalid_argument("label outside training label set: " + label);
    p.gold.push_back(it->second);
    p.gold_labels.push_back(label);
  }

  switch (m.cfg.strategy) {
    case Strategy::bpe_bow: {
      const Tensor& table = res.encoder->params().by_name("enc.embed").value;
      std::size_t d = table.cols();
      p.direct = Tensor({p.seg.word_spans.size(), d});
      for (std::size_t w = 0; w < p.seg.word_spans.size(); ++w) {
        auto [s, e] = p.seg.word_spans[w];
        for (std::size_t t = s; t < e; ++t)
          for (std::size_t c = 0; c < d; ++c)
            p.direct.at(w, c) += table.at(std::size_t(p.seg.su_ids[t]), c) /
                                 double(e - s);
      }
      break;
    }
    case Strategy::bpe_gru: {
      const Tensor& table = res.encoder->params().by_name("enc.embed").value;
      p.su_embeds = Tensor({p.seg.su_ids.size(), table.cols()});
      for (std::size_t t = 0; t < p.seg.su_ids.size(); ++t)
        for (std::size_t c = 0; c < table.cols(); ++c)
          p.su_embeds.at(t, c) = table.at(std::size_t(p.seg.su_ids[t]), c);
      break;
    }
    case Strategy::static_table:
      p.direct = static_lookup(words, *res.static_lex).vectors;
      break;
    case Strategy::laser_top:
    case Strategy::laser_elmo: {
      // cache the direction max-pools; the learnable pieces (gamma, layer
      // weights) are applied on the tape at train time
      EncoderStates st =
          const_cast<SentenceEncoder&>(*res.encoder).encode(p.seg);
      for (auto& [hf, hb] : st.per_layer) {
        Tensor mb(hf.shape);
        for (std::size_t i = 0; i < mb.size(); ++i)
          mb[i] = std::max(hf[i], hb[i]);
        p.m_bases.push_back(std::move(mb));
      }
      break;
    }
    case Strategy::control:
      break;  // the encoder trains, nothing can be frozen
  }
  return p;
}

inline std::vector<Prepared> prepare_dataset(const Resources& res,
                                             const TagModel& m,
                                             const TaggedDataset& ds) {
  std::vector<Prepared> out;
  out.reserve(ds.sentences.size());
  for (const auto& s : ds.sentences) out.push_back(prepare_sentence(res, m, s));
  return out;
}

// builds the word-embedding Var for one sentence under the model's strategy
inline Var words_var(Graph& g, TagModel& m, const Prepared& p) {
  switch (m.cfg.strategy) {
    case Strategy::bpe_bow:
    case Strategy::static_table:
      return g.input(p.direct);
    case Strategy::bpe_gru:
      return bpe_gru(g, m.ps, *m.gru, p.seg, g.input(p.su_embeds));
    case Strategy::laser_top: {
      auto& ge = m.ps.at(m.extract.gamma);
      Var gamma = g.param(ge.value, &ge.grad);
      Var scaled = g.scale_by(g.input(p.m_bases.back()), gamma);
      return per_word_maxpool(g, scaled, p.seg);
    }
    case Strategy::laser_elmo: {
      auto& le = m.ps.at(m.extract.layer_logits);
      Var weights = g.softmax_rows(g.param(le.value, &le.grad));
      Var combined = -1;
      for (std::size_t l = 0; l < p.m_bases.size(); ++l) {
        Var term = g.scale_by(g.input(p.m_bases[l]),
                              g.slice_cols(weights, l, l + 1));
        combined = l == 0 ? term : g.add(combined, term);
      }
      auto& ge = m.ps.at(m.extract.gamma);
      Var gamma = g.param(ge.value, &ge.grad);
      return per_word_maxpool(g, g.scale_by(combined, gamma), p.seg);
    }
    case Strategy::control: {
      auto st = m.control_enc->run(g, p.seg.su_ids);
      return laser_elmo(g, m.ps, st, p.seg, m.extract);
    }
  }
  throw std::logic_error("unreachable");
}

inline std::vector<int> predict_sentence(TagModel& m, const Prepared& p) {
  Graph g;
  Rng rng(0);  // eval mode: dropout disabled, rng unused
  Var words = words_var(g, m, p);
  Var em = m.tagger->emissions(g, m.ps, words, false, rng);
  return m.tagger->decode(m.ps, g.value(em));
}

struct EvalResult {
  double score = 0.0;  // F1 for NER, token accuracy for POS
  PrfScore prf;
  ConfusionMatrix3 confusion;
  double accuracy = 0.0;
  std::vector<int> sentence_exact;  // per-sentence exact-match indicators
};

inline EvalResult evaluate_model(TagModel& m, const std::vector<Prepared>& data) {
  std::vector<std::vector<std::string>> pred, gold;
  EvalResult r;
  for (const auto& p : data) {
    std::vector<int> y = predict_sentence(m, p);
    std::vector<std::string> labels;
    for (int id : y) labels.push_back(m.labels[std::size_t(id)]);
    r.sentence_exact.push_back(labels == p.gold_labels ? 1 : 0);
    pred.push_back(std::move(labels));
    gold.push_back(p.gold_labels);
  }
  r.accuracy = token_accuracy(pred, gold);
  if (m.cfg.task == Task::ner) {
    r.prf = entity_f1(pred, gold);
    r.confusion = bio_confusion(pred, gold);
    r.score = r.prf.f1;
  } else {
    r.score = r.accuracy;
  }
  return r;
}

// ---------------------------------------------------------------------------
// tagger training

struct FitResult {
  std::vector<EpochRecord> log;
  double best_dev = 0.0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

inline FitResult fit_tagger(TagModel& m, const std::vector<Prepared>& train_set,
                            const std::vector<Prepared>& dev_set,
                            std::ostream* progress = nullptr) {
  if (train_set.empty()) throw std::invalid_argument("fit_tagger: empty train");
  const TrainConfig& tc = m.cfg.train;
  std::size_t steps_per_epoch =
      (train_set.size() + tc.batch_size - 1) / tc.batch_size;

  std::optional<AdamOptimizer> adam, adam_enc;
  std::optional<SgdMomentumOptimizer> sgd, sgd_enc;
  OneCycleSchedule sched;
  if (tc.optimizer == "adam") {
    adam.emplace(tc.lr, tc.l2_lambda);
    if (m.control_enc) adam_enc.emplace(tc.lr, tc.l2_lambda);
  } else if (tc.optimizer == "onecycle_sgd") {
    sched.max_lr = tc.lr;
    sched.total_steps = std::max<std::size_t>(1, steps_per_epoch * tc.epochs);
    sgd.emplace(sched, tc.l2_lambda);
    if (m.control_enc) sgd_enc.emplace(sched, tc.l2_lambda);
  } else {
    throw std::invalid_argument("unknown optimizer: " + tc.optimizer);
  }
  auto step_all = [&]() {
    if (adam) adam->step(m.ps);
    if (sgd) sgd->step(m.ps);
    if (m.control_enc) {
      if (adam_enc) adam_enc->step(m.control_enc->params());
      if (sgd_enc) sgd_enc->step(m.control_enc->params());
      m.control_enc->params().zero_grad();
    }
    m.ps.zero_grad();
  };

  Rng rng(tc.seed);
  FitResult fit;
  std::vector<double> history;
  std::vector<Tensor> best_values, best_enc_values;
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t in_batch = 0;
    m.ps.zero_grad();
    if (m.control_enc) m.control_enc->params().zero_grad();
    for (std::size_t i : order) {
      const Prepared& p = train_set[i];
      Graph g;
      Var words = words_var(g, m, p);
      Var loss = m.tagger->loss(g, m.ps, words, p.gold, true, rng);
      double lv = g.value(loss)[0];
      if (!std::isfinite(lv))
        throw std::runtime_error("divergence at epoch " +
                                 std::to_string(epoch));
      epoch_loss += lv;
      g.backward(loss);
      if (++in_batch == tc.batch_size) {
        step_all();
        in_batch = 0;
        ++global_step;
      }
    }
    if (in_batch) {
      step_all();
      ++global_step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / double(train_set.size());
    rec.dev_score = dev_set.empty() ? 0.0 : evaluate_model(m, dev_set).score;
    rec.lr = sgd ? sched.at(std::min(global_step, sched.total_steps - 1)).first
                 : tc.lr;
    fit.log.push_back(rec);
    if (progress) *progress << format_epoch_record(rec) << "\n";

    history.push_back(rec.dev_score);
    if (history.size() == 1 || rec.dev_score > fit.best_dev) {
      fit.best_dev = rec.dev_score;
      fit.best_epoch = epoch;
      best_values.clear();
      for (const auto& e : m.ps.entries()) best_values.push_back(e.value);
      best_enc_values.clear();
      if (m.control_enc)
        for (const auto& e : m.control_enc->params().entries())
          best_enc_values.push_back(e.value);
    }
    if (!dev_set.empty() && early_stop(history, tc.patience)) {
      fit.stopped_early = true;
      break;
    }
  }

  // restore the best dev-score parameters
  if (!best_values.empty()) {
    for (std::size_t i = 0; i < m.ps.size(); ++i)
      m.ps.at(i).value = best_values[i];
    if (m.control_enc)
      for (std::size_t i = 0; i < m.control_enc->params().size(); ++i)
        m.control_enc->params().at(i).value = best_enc_values[i];
  }
  return fit;
}

// ---------------------------------------------------------------------------
// result tables

struct ResultCell {
  std::string language;
  std::string strategy;
  double score = 0.0;
  bool failed = false;
  bool has_delta = false;
  double delta = 0.0;  // joint scenario B vs the scenario-A baseline
};

struct ResultTable {
  std::string task;
  std::string protocol;
  std::vector<ResultCell> cells;

  static std::string format_cell(const ResultCell& c) {
    if (c.failed) return "FAILED";
    char buf[48];
    if (c.has_delta)
      std::snprintf(buf, sizeof buf, "%.3f%+.2f", c.score - c.delta, c.delta);
    else
      std::snprintf(buf, sizeof buf, "%.3f", c.score);
    return buf;
  }

  std::string render() const {
    std::size_t lang_w = 8, strat_w = 10;
    for (const auto& c : cells) {
      lang_w = std::max(lang_w, c.language.size());
      strat_w = std::max(strat_w, c.strategy.size());
    }
    std::ostringstream os;
    os << "task=" << task << " protocol=" << protocol << "\n";
    auto pad = [](const std::string& s, std::size_t w) {
      return s + std::string(w - s.size() + 2, ' ');
    };
    os << pad("language", lang_w) << pad("strategy", strat_w) << "score\n";
    for (const auto& c : cells)
      os << pad(c.language, lang_w) << pad(c.strategy, strat_w)
         << format_cell(c) << "\n";
    return os.str();
  }
};

inline nlohmann::json table_to_json(const ResultTable& t) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : t.cells)
    cells.push_back({{"language", c.language},
                     {"strategy", c.strategy},
                     {"score", c.score},
                     {"failed", c.failed},
                     {"has_delta", c.has_delta},
                     {"delta", c.delta}});
  return {{"task", t.task}, {"protocol", t.protocol}, {"cells", cells}};
}

inline ResultTable table_from_json(const nlohmann::json& j) {
  ResultTable t;
  t.task = j.at("task");
  t.protocol = j.at("protocol");
  for (const auto& c : j.at("cells"))
    t.cells.push_back({c.at("language"), c.at("strategy"), c.at("score"),
                       c.at("failed"), c.at("has_delta"), c.at("delta")});
  return t;
}

// ---------------------------------------------------------------------------
// protocols

struct ProtocolOutcome {
  ResultTable table;
  FitResult fit;
  std::map<std::string, EvalResult> per_language;
};

// validates before any training: every target has a test set, the source
// has train and dev
inline void validate_zeroshot(const LanguageSet& source,
                              const std::vector<LanguageSet>& targets) {
  if (source.train.sentences.empty())
    throw std::invalid_argument("zeroshot: source train set empty");
  if (source.dev.sentences.empty())
    throw std::invalid_argument("zeroshot: source dev set empty");
  for (const auto& t : targets)
    if (t.test.sentences.empty())
      throw std::invalid_argument("zeroshot: target test set missing for " +
                                  t.language);
}

// trains once on the source language, evaluates on every target test set
// without touching target training data
inline ProtocolOutcome run_zeroshot(const Resources& res,
                                    const PipelineConfig& cfg,
                                    const LanguageSet& source,
                                    const std::vector<LanguageSet>& targets,
                                    std::ostream* progress = nullptr) {
  validate_zeroshot(source, targets);
  ProtocolOutcome out;
  out.table.task = task_name(cfg.task);
  out.table.protocol = "zeroshot";

  TagModel model = make_model(res, cfg, label_set(cfg.task, source.train));
  auto train_set = prepare_dataset(res, model, source.train);
  auto dev_set = prepare_dataset(res, model, source.dev);
  out.fit = fit_tagger(model, train_set, dev_set, progress);

  for (const auto& target : targets) {
    auto test_set = prepare_dataset(res, model, target.test);
    EvalResult ev = evaluate_model(model, test_set);
    ResultCell cell;
    cell.language = target.language;
    cell.strategy = strategy_name(cfg.strategy);
    cell.score = ev.score;
    out.table.cells.push_back(cell);
    out.per_language[target.language] = std::move(ev);
  }
  return out;
}

// joint protocol: quarter-mixing per scenario, trained once, evaluated on
// each language's own test set; scenario B renders deltas against a
// scenario-A baseline table when one is supplied
inline ProtocolOutcome run_joint(const Resources& res,
                                 const PipelineConfig& cfg,
                                 const std::vector<LanguageSet>& langs,
                                 JointScenario scenario,
                                 const std::string& anchor,
                                 const ResultTable* baseline_a = nullptr,
                                 std::ostream* progress = nullptr) {
  if (langs.size() < 2)
    throw std::invalid_argument("joint: need at least two languages");
  for (const auto& l : langs)
    if (l.test.sentences.empty())
      throw std::invalid_argument("joint: test set missing for " + l.language);

  std::vector<TaggedDataset> trains, devs;
  for (const auto& l : langs) {
    trains.push_back(l.train);
    devs.push_back(l.dev);
  }
  // the same quarter-mixing rule builds the dev split
  TaggedDataset mixed_train =
      mix_joint(trains, scenario, anchor, cfg.train.seed);
  TaggedDataset mixed_dev =
      mix_joint(devs, scenario, anchor, cfg.train.seed + 1);

  ProtocolOutcome out;
  out.table.task = task_name(cfg.task);
  out.table.protocol = scenario == JointScenario::A ? "jointA" : "jointB";

  TagModel model = make_model(res, cfg, label_set(cfg.task, mixed_train));
  auto train_set = prepare_dataset(res, model, mixed_train);
  auto dev_set = prepare_dataset(res, model, mixed_dev);
  out.fit = fit_tagger(model, train_set, dev_set, progress);

  for (const auto& lang : langs) {
    auto test_set = prepare_dataset(res, model, lang.test);
    EvalResult ev = evaluate_model(model, test_set);
    ResultCell cell;
    cell.language = lang.language;
    cell.strategy = strategy_name(cfg.strategy);
    cell.score = ev.score;
    if (scenario == JointScenario::B && baseline_a) {
      for (const auto& base : baseline_a->cells)
        if (base.language == cell.language &&
            base.strategy == cell.strategy && !base.failed) {
          cell.has_delta = true;
          cell.delta = cell.score - base.score;
        }
    }
    out.table.cells.push_back(cell);
    out.per_language[lang.language] = std::move(ev);
  }
  return out;
}

// ---------------------------------------------------------------------------
// reports and manifests

// writes aligned text tables plus delimited plot-data rows (one per bar)
// for the joint-training delta charts
inline std::vector<std::string> render_report(
    const std::vector<ResultTable>& tables, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  std::ostringstream text;
  for (const auto& t : tables) text << t.render() << "\n";
  {
    std::string path = (fs::path(out_dir) / "tables.txt").string();
    std::ofstream f(path, std::ios::binary);
    f << text.str();
    written.push_back(path);
  }
  std::ostringstream plot;
  for (const auto& t : tables)
    for (const auto& c : t.cells)
      if (c.has_delta && !c.failed) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s\t%s\t%+.4f\n", c.language.c_str(),
                      c.strategy.c_str(), c.delta);
        plot << buf;
      }
  if (!plot.str().empty()) {
    std::string path = (fs::path(out_dir) / "joint_deltas.tsv").string();
    std::ofstream f(path, std::ios::binary);
    f << plot.str();
    written.push_back(path);
  }
  return written;
}

// everything needed to re-run the experiment exactly
inline nlohmann::json run_manifest(
    const nlohmann::json& config, std::uint64_t seed,
    const std::map<std::string, std::string>& checkpoint_hashes) {
  nlohmann::json m;
  m["config_hash"] = hash_hex(config.dump());
  m["config"] = config;
  m["seed"] = seed;
  m["checkpoints"] = checkpoint_hashes;
  return m;
}

// ---------------------------------------------------------------------------
// encoder checkpoint plumbing

inline nlohmann::json encoder_manifest(const SentenceEncoder& enc) {
  const EncoderConfig& c = enc.config();
  return {{"kind", "encoder"},     {"preset", c.preset},
          {"num_layers", c.num_layers}, {"hidden", c.hidden},
          {"su_embed_dim", c.su_embed_dim}, {"vocab", c.vocab},
          {"objective", enc.objective()}};
}

inline void save_encoder(const std::string& path, const SentenceEncoder& enc) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  save_checkpoint(f, enc.params(), encoder_manifest(enc));
}

inline SentenceEncoder load_encoder(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json manifest = peek_manifest(f);
  if (manifest.value("kind", "") != "encoder")
    throw std::runtime_error(path + " is not an encoder checkpoint");
  EncoderConfig cfg;
  cfg.preset = manifest["preset"];
  cfg.num_layers = manifest["num_layers"];
  cfg.hidden = manifest["hidden"];
  cfg.su_embed_dim = manifest["su_embed_dim"];
  cfg.vocab = manifest["vocab"];
  SentenceEncoder enc(cfg, 0);
  f.seekg(0);
  load_checkpoint(f, enc.params());
  enc.set_objective(manifest.value("objective", "none"));
  return enc;
}

}  // namespace xling
