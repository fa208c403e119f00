// Command-line experiment harness: BPE learning, encoder pretraining,
// tagger training, evaluation, zero-shot / joint protocols, random
// hyperparameter search and report rendering.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xling/experiment.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace xling;

// exit codes by failure category
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kTrainingError = 3;
constexpr int kEvalError = 4;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? "."
                             : fs::path(path).parent_path().string());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << data;
}

std::vector<std::string> tokenize_line(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> words;
  std::string w;
  while (ss >> w) words.push_back(normalize(w));
  return words;
}

MergeTable load_merges(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return load_merge_table(f);
}

TaggedDataset load_conll(const std::string& path, const ConllSchema& schema,
                         const std::string& language,
                         const std::string& split) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return parse_conll(f, schema, language, split);
}

std::vector<int> encode_text_line(const std::string& line,
                                  const MergeTable& merges) {
  auto words = tokenize_line(line);
  if (words.empty()) words.push_back(".");
  return encode(words, merges).su_ids;
}

// ---------------------------------------------------------------------------
// config parsing

TrainConfig train_config_from(const json& j) {
  TrainConfig tc;
  tc.optimizer = j.value("optimizer", tc.optimizer);
  tc.lr = j.value("lr", tc.lr);
  tc.l2_lambda = j.value("l2_lambda", tc.l2_lambda);
  tc.epochs = j.value("epochs", tc.epochs);
  tc.batch_size = j.value("batch_size", tc.batch_size);
  tc.dropout_embed = j.value("dropout_embed", tc.dropout_embed);
  tc.dropout_tagger = j.value("dropout_tagger", tc.dropout_tagger);
  tc.patience = j.value("patience", tc.patience);
  tc.seed = j.value("seed", tc.seed);
  return tc;
}

PipelineConfig pipeline_config_from(const json& j) {
  PipelineConfig cfg;
  cfg.task = task_from_name(j.value("task", "ner"));
  cfg.strategy = strategy_from_name(j.value("strategy", "laser_top"));
  if (j.contains("train")) cfg.train = train_config_from(j.at("train"));
  if (j.contains("tagger")) {
    const json& t = j.at("tagger");
    cfg.tagger.layers = t.value("layers", cfg.tagger.layers);
    cfg.tagger.heads = t.value("heads", cfg.tagger.heads);
    cfg.tagger.model_dim = t.value("model_dim", cfg.tagger.model_dim);
    cfg.tagger.crf_head = t.value("crf_head", cfg.tagger.crf_head);
    cfg.tagger.bio_transition_mask =
        t.value("bio_transition_mask", cfg.tagger.bio_transition_mask);
  }
  cfg.gru_hidden = j.value("gru_hidden", cfg.gru_hidden);
  cfg.control_hidden = j.value("control_hidden", cfg.control_hidden);
  cfg.control_su_dim = j.value("control_su_dim", cfg.control_su_dim);
  return cfg;
}

// loads merges / encoder / static table referenced by a config, validating
// paths before anything trains
Resources resources_from(const json& j) {
  Resources res;
  res.merges = load_merges(j.at("bpe").get<std::string>());
  if (j.contains("encoder") && !j.at("encoder").is_null())
    res.encoder = load_encoder(j.at("encoder").get<std::string>());
  if (j.contains("static_table")) {
    std::ifstream f(j.at("static_table").get<std::string>());
    if (!f)
      throw std::runtime_error("cannot open " +
                               j.at("static_table").get<std::string>());
    res.static_lex = StaticTable::load(f);
  }
  return res;
}

LanguageSet language_set_from(const json& j, const ConllSchema& schema,
                              bool need_train) {
  LanguageSet ls;
  ls.language = j.at("language");
  if (j.contains("train"))
    ls.train = load_conll(j.at("train"), schema, ls.language, "train");
  if (j.contains("dev"))
    ls.dev = load_conll(j.at("dev"), schema, ls.language, "dev");
  if (j.contains("test"))
    ls.test = load_conll(j.at("test"), schema, ls.language, "test");
  if (need_train && ls.train.sentences.empty())
    throw std::runtime_error("language " + ls.language + " has no train data");
  return ls;
}

std::map<std::string, std::string> config_checkpoint_hashes(const json& j) {
  std::map<std::string, std::string> hashes;
  if (j.contains("encoder") && !j.at("encoder").is_null())
    hashes["encoder"] = file_hash(j.at("encoder").get<std::string>());
  hashes["bpe"] = file_hash(j.at("bpe").get<std::string>());
  return hashes;
}

void write_outcome(const std::string& out_dir, const json& config,
                   std::uint64_t seed, const ProtocolOutcome& outcome) {
  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "results.txt").string(),
             outcome.table.render());
  write_file((fs::path(out_dir) / "table.json").string(),
             table_to_json(outcome.table).dump(2) + "\n");
  write_file((fs::path(out_dir) / "manifest.json").string(),
             run_manifest(config, seed, config_checkpoint_hashes(config))
                     .dump(2) +
                 "\n");
  std::ostringstream log;
  for (const auto& rec : outcome.fit.log)
    log << format_epoch_record(rec) << "\n";
  write_file((fs::path(out_dir) / "epochs.log").string(), log.str());
}

// applies --seed / --preset overrides shared by the protocol subcommands
void apply_overrides(json& config, PipelineConfig& cfg, long long seed_flag,
                     const std::string& preset) {
  if (seed_flag >= 0) {
    cfg.train.seed = std::uint64_t(seed_flag);
    config["train"]["seed"] = cfg.train.seed;
  }
  if (preset == "full") {
    cfg.tagger.layers = 2;
    cfg.tagger.heads = 2;
    cfg.tagger.model_dim = 300;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multilingual contextual word-embedding laboratory"};
  app.require_subcommand(1);

  // --- learn-bpe ---
  auto* sc_bpe = app.add_subcommand("learn-bpe", "learn a BPE merge table");
  std::vector<std::string> bpe_inputs;
  std::size_t bpe_vocab = 500;
  std::string bpe_out = "merges.bpe";
  sc_bpe->add_option("--input", bpe_inputs, "text files, one sentence per line")
      ->required();
  sc_bpe->add_option("--vocab", bpe_vocab, "target vocabulary size");
  sc_bpe->add_option("--out", bpe_out, "output merge table path");

  // --- pretrain ---
  auto* sc_pre = app.add_subcommand("pretrain", "pretrain the encoder");
  std::string pre_objective = "translation", pre_bpe, pre_out = "encoder.ckpt";
  std::string pre_source, pre_target, pre_mono, pre_preset = "desk";
  std::size_t pre_epochs = 30, pre_batch = 8;
  double pre_lr = 0.002, pre_mask = 0.15;
  long long pre_seed = 0;
  bool pre_mask_target_only = false;
  sc_pre->add_option("--objective", pre_objective, "translation|mlm|tlm")
      ->check(CLI::IsMember({"translation", "mlm", "tlm"}));
  sc_pre->add_option("--bpe", pre_bpe, "merge table path")->required();
  sc_pre->add_option("--source", pre_source, "source side (translation/tlm)");
  sc_pre->add_option("--target", pre_target, "target side (translation/tlm)");
  sc_pre->add_option("--input", pre_mono, "monolingual text (mlm)");
  sc_pre->add_option("--out", pre_out, "encoder checkpoint path");
  sc_pre->add_option("--preset", pre_preset, "desk|full")
      ->check(CLI::IsMember({"desk", "full"}));
  sc_pre->add_option("--epochs", pre_epochs);
  sc_pre->add_option("--batch", pre_batch);
  sc_pre->add_option("--lr", pre_lr);
  sc_pre->add_option("--mask-prob", pre_mask);
  sc_pre->add_option("--seed", pre_seed);
  sc_pre->add_flag("--mask-target-only", pre_mask_target_only,
                   "TLM: mask only the target half");

  // --- train-tagger / eval / zeroshot / joint / search: config driven ---
  std::string cfg_path, out_dir = "out", preset = "desk";
  long long seed_flag = -1;
  auto add_cfg_flags = [&](CLI::App* sc) {
    sc->add_option("--config", cfg_path, "experiment config (JSON)")
        ->required();
    sc->add_option("--out", out_dir, "output directory");
    sc->add_option("--seed", seed_flag, "seed override");
    sc->add_option("--preset", preset, "desk|full")
        ->check(CLI::IsMember({"desk", "full"}));
  };
  auto* sc_tag = app.add_subcommand("train-tagger", "train one tagger");
  add_cfg_flags(sc_tag);
  auto* sc_eval = app.add_subcommand("eval", "evaluate a trained tagger");
  std::string eval_model;
  add_cfg_flags(sc_eval);
  sc_eval->add_option("--model", eval_model, "tagger checkpoint")->required();
  auto* sc_zero = app.add_subcommand("zeroshot", "zero-shot transfer run");
  add_cfg_flags(sc_zero);
  auto* sc_joint = app.add_subcommand("joint", "joint-training run");
  std::string joint_scenario = "A", joint_baseline;
  add_cfg_flags(sc_joint);
  sc_joint->add_option("--scenario", joint_scenario, "A|B")
      ->check(CLI::IsMember({"A", "B"}));
  sc_joint->add_option("--baseline", joint_baseline,
                       "scenario-A table.json for deltas");
  auto* sc_search = app.add_subcommand("search", "random hyperparameter search");
  std::size_t search_budget = 8;
  add_cfg_flags(sc_search);
  sc_search->add_option("--budget", search_budget, "number of trials");

  // --- report ---
  auto* sc_report = app.add_subcommand("report", "render result tables");
  std::vector<std::string> report_tables;
  std::string report_out = "report";
  sc_report->add_option("--table", report_tables, "table.json files")
      ->required();
  sc_report->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sc_bpe) {
      std::map<std::string, long> freq;
      for (const auto& path : bpe_inputs) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open " + path);
        std::string line;
        while (std::getline(f, line))
          for (const auto& w : tokenize_line(line)) ++freq[w];
      }
      MergeTable merges = learn_bpe(freq, bpe_vocab);
      std::ofstream f(bpe_out, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + bpe_out);
      save_merge_table(f, merges);
      std::cout << "learn-bpe vocab=" << merges.vocab_size()
                << " merges=" << merges.merges.size() << " out=" << bpe_out
                << "\n";
      return kOk;
    }

    if (*sc_pre) {
      MergeTable merges = load_merges(pre_bpe);
      EncoderConfig ec = pre_preset == "full"
                             ? EncoderConfig::full()
                             : EncoderConfig::desk(merges.vocab_size());
      SentenceEncoder enc(ec, std::uint64_t(pre_seed));
      PretrainConfig pc;
      pc.epochs = pre_epochs;
      pc.batch_size = pre_batch;
      pc.lr = pre_lr;
      pc.mask_prob = pre_mask;
      pc.seed = std::uint64_t(pre_seed);
      pc.mask_target_only = pre_mask_target_only;

      PretrainReport report;
      if (pre_objective == "mlm") {
        if (pre_mono.empty())
          throw std::runtime_error("mlm pretraining needs --input");
        std::vector<std::vector<int>> sents;
        std::ifstream f(pre_mono);
        if (!f) throw std::runtime_error("cannot open " + pre_mono);
        std::string line;
        while (std::getline(f, line))
          sents.push_back(encode_text_line(line, merges));
        MlmHead head(ec, std::uint64_t(pre_seed) + 1);
        report = train_mlm(sents, enc, head, pc);
      } else {
        if (pre_source.empty() || pre_target.empty())
          throw std::runtime_error(pre_objective +
                                   " pretraining needs --source and --target");
        ParallelCorpus corpus =
            load_parallel_files(pre_source, pre_target, "src", "tgt");
        std::vector<EncodedPair> pairs;
        for (const auto& p : corpus.pairs)
          pairs.push_back({encode_text_line(p.source, merges),
                           encode_text_line(p.target, merges), 0});
        if (pre_objective == "translation") {
          TranslationDecoder dec(ec, 1, std::uint64_t(pre_seed) + 1);
          report = train_translation(pairs, enc, dec, pc);
        } else {
          MlmHead head(ec, std::uint64_t(pre_seed) + 1);
          report = train_tlm(pairs, enc, head, pc);
        }
      }
      for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
        std::cout << "epoch=" << e << " loss=" << report.epoch_losses[e]
                  << "\n";
      std::cout << "pretrain objective=" << pre_objective
                << " initial=" << report.initial_loss_per_token
                << " final=" << report.final_loss_per_token << " out=" << pre_out
                << "\n";
      save_encoder(pre_out, enc);
      return kOk;
    }

    if (*sc_report) {
      std::vector<ResultTable> tables;
      for (const auto& path : report_tables)
        tables.push_back(table_from_json(json::parse(read_file(path))));
      for (const auto& f : render_report(tables, report_out))
        std::cout << "wrote " << f << "\n";
      return kOk;
    }

    // config-driven subcommands
    json config;
    PipelineConfig cfg;
    Resources res;
    ConllSchema schema;
    try {
      config = json::parse(read_file(cfg_path));
      cfg = pipeline_config_from(config);
      apply_overrides(config, cfg, seed_flag, preset);
      schema = ConllSchema::parse(config.value(
          "columns", cfg.task == Task::ner ? "surface,ner" : "surface,pos"));
      res = resources_from(config);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfigError;
    }

    if (*sc_tag) {
      LanguageSet source = language_set_from(config.at("source"), schema, true);
      TagModel model =
          make_model(res, cfg, label_set(cfg.task, source.train));
      auto train_set = prepare_dataset(res, model, source.train);
      auto dev_set = prepare_dataset(res, model, source.dev);
      FitResult fit = fit_tagger(model, train_set, dev_set, &std::cout);
      fs::create_directories(out_dir);
      json manifest = {{"kind", "tagger"},
                       {"task", task_name(cfg.task)},
                       {"strategy", strategy_name(cfg.strategy)},
                       {"labels", model.labels},
                       {"model_dim", cfg.tagger.model_dim},
                       {"best_dev", fit.best_dev},
                       {"best_epoch", fit.best_epoch}};
      std::ofstream ck((fs::path(out_dir) / "tagger.ckpt").string(),
                       std::ios::binary);
      save_checkpoint(ck, model.ps, manifest);
      std::ostringstream log;
      for (const auto& rec : fit.log) log << format_epoch_record(rec) << "\n";
      write_file((fs::path(out_dir) / "epochs.log").string(), log.str());
      std::cout << "train-tagger best_dev=" << fit.best_dev
                << " best_epoch=" << fit.best_epoch << "\n";
      return kOk;
    }

    if (*sc_eval) {
      LanguageSet lang = language_set_from(config.at("source"), schema, false);
      if (lang.test.sentences.empty())
        throw std::runtime_error("eval: no test data configured");
      std::ifstream ck(eval_model, std::ios::binary);
      if (!ck) throw std::runtime_error("cannot open " + eval_model);
      json manifest = peek_manifest(ck);
      std::vector<std::string> labels =
          manifest.at("labels").get<std::vector<std::string>>();
      TagModel model = make_model(res, cfg, labels);
      ck.seekg(0);
      load_checkpoint(ck, model.ps);
      auto test_set = prepare_dataset(res, model, lang.test);
      EvalResult ev = evaluate_model(model, test_set);
      std::cout << "eval language=" << lang.language
                << " task=" << task_name(cfg.task) << " score=" << ev.score
                << " accuracy=" << ev.accuracy << " p=" << ev.prf.precision
                << " r=" << ev.prf.recall << "\n";
      return kOk;
    }

    if (*sc_zero) {
      LanguageSet source = language_set_from(config.at("source"), schema, true);
      std::vector<LanguageSet> targets;
      for (const auto& t : config.at("targets"))
        targets.push_back(language_set_from(t, schema, false));
      ProtocolOutcome out =
          run_zeroshot(res, cfg, source, targets, &std::cout);
      write_outcome(out_dir, config, cfg.train.seed, out);
      std::cout << out.table.render();
      return kOk;
    }

    if (*sc_joint) {
      std::vector<LanguageSet> langs;
      for (const auto& l : config.at("languages"))
        langs.push_back(language_set_from(l, schema, true));
      JointScenario scenario =
          joint_scenario == "A" ? JointScenario::A : JointScenario::B;
      std::string anchor = config.value("anchor", std::string());
      ResultTable baseline;
      const ResultTable* baseline_ptr = nullptr;
      if (!joint_baseline.empty()) {
        baseline = table_from_json(json::parse(read_file(joint_baseline)));
        baseline_ptr = &baseline;
      }
      ProtocolOutcome out = run_joint(res, cfg, langs, scenario, anchor,
                                      baseline_ptr, &std::cout);
      write_outcome(out_dir, config, cfg.train.seed, out);
      std::cout << out.table.render();
      return kOk;
    }

    if (*sc_search) {
      LanguageSet source = language_set_from(config.at("source"), schema, true);
      std::map<std::string, SearchRange> space = {
          {"lr", {1e-4, 1e-2, true}},
          {"l2_lambda", {1e-5, 1e-2, true}},
          {"dropout_embed", {0.05, 0.5, false}},
          {"dropout_tagger", {0.05, 0.5, false}},
      };
      auto objective = [&](const std::map<std::string, double>& trial) {
        PipelineConfig c = cfg;
        c.train.lr = trial.at("lr");
        c.train.l2_lambda = trial.at("l2_lambda");
        c.train.dropout_embed = trial.at("dropout_embed");
        c.train.dropout_tagger = trial.at("dropout_tagger");
        TagModel model = make_model(res, c, label_set(c.task, source.train));
        auto train_set = prepare_dataset(res, model, source.train);
        auto dev_set = prepare_dataset(res, model, source.dev);
        return fit_tagger(model, train_set, dev_set).best_dev;
      };
      SearchResult result =
          random_search(space, search_budget, objective, cfg.train.seed);
      for (std::size_t i = 0; i < result.trace.size(); ++i) {
        const auto& t = result.trace[i];
        std::cout << "trial=" << i << " score=" << t.score
                  << " failed=" << t.failed;
        for (const auto& [k, v] : t.config) std::cout << " " << k << "=" << v;
        std::cout << "\n";
      }
      json best = {{"score", result.best.score},
                   {"config", result.best.config}};
      fs::create_directories(out_dir);
      write_file((fs::path(out_dir) / "search_best.json").string(),
                 best.dump(2) + "\n");
      std::cout << "search best_score=" << result.best.score << "\n";
      return kOk;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::runtime_error& e) {
    std::cerr << "run error: " << e.what() << "\n";
    std::string what = e.what();
    return what.find("divergence") != std::string::npos ? kTrainingError
                                                        : kEvalError;
  }
  return kOk;
}
