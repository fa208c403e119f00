// Tagged-corpus handling: CoNLL column parsing, punctuation-fold
// normalization, universal POS conversion, joint-training mixtures,
// parallel corpora and synthetic cipher languages.
#pragma once

#include <array>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xling/rng.hpp"

namespace xling {

inline const std::array<std::string, 12>& universal_pos_tags() {
  static const std::array<std::string, 12> tags = {
      "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET",
      "ADP",  "NUM",  "CONJ", "PRT", ".",   "X"};
  return tags;
}

inline bool is_universal_pos(const std::string& tag) {
  for (const auto& t : universal_pos_tags())
    if (t == tag) return true;
  return false;
}

inline constexpr const char* kUntagged = "_";

struct Token {
  std::string surface;
  std::string ner = kUntagged;   // B-X / I-X / O
  std::string upos = kUntagged;  // one of the 12 universal tags
};

struct Sentence {
  std::vector<Token> tokens;
  std::string source_lang;  // provenance, kept through mixing
};

struct TaggedDataset {
  std::string language;
  std::string split;  // train / dev / test
  std::vector<Sentence> sentences;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.tokens.size();
    return n;
  }
};

struct ParallelPair {
  std::string source, target;
  std::string source_lang, target_lang;
};

struct ParallelCorpus {
  std::vector<ParallelPair> pairs;
};

// ---------------------------------------------------------------------------
// normalization

// Fixed punctuation fold table: unicode quote/dash variants to ASCII.
// Applying it twice is a no-op.
inline const std::vector<std::pair<std::string, std::string>>& punct_fold_table() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"«", "\""}, {"»", "\""},  // « »
      {"“", "\""}, {"”", "\""}, {"„", "\""},  // “ ” „
      {"‘", "'"},  {"’", "'"},  {"‚", "'"},   // ‘ ’ ‚
      {"‹", "'"},  {"›", "'"},                     // ‹ ›
      {"–", "-"},  {"—", "-"},  {"−", "-"},   // – — −
      {"‐", "-"},  {"‑", "-"},                     // ‐ ‑
      {"…", "..."},                                     // …
      {" ", " "},                                       // nbsp
  };
  return table;
}

// lowercases ASCII letters and folds punctuation variants; idempotent and
// token-count preserving (no spaces are introduced inside tokens)
inline std::string normalize(const std::string& text) {
  std::string out = text;
  for (const auto& [from, to] : punct_fold_table()) {
    std::size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

// ---------------------------------------------------------------------------
// BIO validation

inline bool is_bio_label(const std::string& l) {
  if (l == "O") return true;
  if (l.size() < 3) return false;
  return (l[0] == 'B' || l[0] == 'I') && l[1] == '-';
}

// Returns the number of I- labels that do not continue a same-type span.
// Throws in strict mode.
inline std::size_t validate_bio(const std::vector<std::string>& labels,
                                bool strict) {
  std::size_t warnings = 0;
  std::string prev = "O";
  for (const auto& l : labels) {
    if (!is_bio_label(l))
      throw std::invalid_argument("malformed BIO label: " + l);
    if (l[0] == 'I') {
      std::string type = l.substr(2);
      bool ok = prev != "O" && prev.substr(2) == type;
      if (!ok) {
        if (strict)
          throw std::invalid_argument("I- label without matching B-: " + l);
        ++warnings;
      }
    }
    prev = l;
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// CoNLL parsing

struct ConllSchema {
  // column roles in file order; recognized: surface, ner, pos, ignore
  std::vector<std::string> columns;

  static ConllSchema parse(const std::string& csv) {
    ConllSchema s;
    std::istringstream ss(csv);
    std::string col;
    while (std::getline(ss, col, ',')) s.columns.push_back(col);
    return s;
  }
};

struct ParseStats {
  std::size_t bio_warnings = 0;
};

inline TaggedDataset parse_conll(std::istream& is, const ConllSchema& schema,
                                 const std::string& language = "und",
                                 const std::string& split = "train",
                                 bool strict_bio = false,
                                 ParseStats* stats = nullptr) {
  TaggedDataset ds;
  ds.language = language;
  ds.split = split;
  Sentence current;
  current.source_lang = language;
  std::string line;
  std::size_t line_no = 0;
  std::size_t bio_warnings = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      std::vector<std::string> ner;
      for (const auto& t : current.tokens)
        if (t.ner != kUntagged) ner.push_back(t.ner);
      bio_warnings += validate_bio(ner, strict_bio);
      ds.sentences.push_back(std::move(current));
      current = Sentence{};
      current.source_lang = language;
    }
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      flush();
      continue;
    }
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string f;
    while (ss >> f) fields.push_back(f);
    if (fields.size() < schema.columns.size())
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": expected " +
                               std::to_string(schema.columns.size()) +
                               " columns, got " + std::to_string(fields.size()));
    Token tok;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const std::string& role = schema.columns[c];
      if (role == "surface")
        tok.surface = fields[c];
      else if (role == "ner")
        tok.ner = fields[c];
      else if (role == "pos" || role == "upos")
        tok.upos = fields[c];
      // anything else: ignored column
    }
    current.tokens.push_back(std::move(tok));
  }
  flush();
  if (stats) stats->bio_warnings = bio_warnings;
  return ds;
}

inline void serialize_conll(std::ostream& os, const TaggedDataset& ds,
                            const ConllSchema& schema) {
  for (const auto& sent : ds.sentences) {
    for (const auto& tok : sent.tokens) {
      for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (c) os << ' ';
        const std::string& role = schema.columns[c];
        if (role == "surface")
          os << tok.surface;
        else if (role == "ner")
          os << tok.ner;
        else if (role == "pos" || role == "upos")
          os << tok.upos;
        else
          os << "_";
      }
      os << '\n';
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// universal POS mapping

using PosMapping = std::map<std::string, std::string>;

inline std::string map_to_universal_pos(const std::string& tag,
                                        const PosMapping& table) {
  auto it = table.find(tag);
  if (it == table.end())
    throw std::out_of_range("unmapped POS tag: " + tag);
  if (!is_universal_pos(it->second))
    throw std::out_of_range("mapping target is not a universal tag: " +
                            it->second);
  return it->second;
}

// file format: one "<source-tag>\t<universal-tag>" per line
inline PosMapping load_pos_mapping(std::istream& is) {
  PosMapping table;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("bad mapping line: " + line);
    table[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return table;
}

inline void convert_dataset_upos(TaggedDataset& ds, const PosMapping& table) {
  for (auto& sent : ds.sentences)
    for (auto& tok : sent.tokens)
      if (tok.upos != kUntagged)
        tok.upos = map_to_universal_pos(tok.upos, table);
}

// ---------------------------------------------------------------------------
// joint-training mixtures

enum class JointScenario { A, B };

// Scenario A: floor(|D_i|/4) sentences sampled without replacement from each
// dataset. Scenario B: the full anchor dataset plus quarters of the rest.
inline TaggedDataset mix_joint(const std::vector<TaggedDataset>& datasets,
                               JointScenario scenario,
                               const std::string& anchor, std::uint64_t seed) {
  if (datasets.size() < 2)
    throw std::invalid_argument("mix_joint: need at least two datasets");
  const TaggedDataset* anchor_ds = nullptr;
  if (scenario == JointScenario::B) {
    for (const auto& d : datasets)
      if (d.language == anchor) anchor_ds = &d;
    if (!anchor_ds)
      throw std::invalid_argument("mix_joint: anchor language '" + anchor +
                                  "' not among datasets");
  }
  TaggedDataset out;
  out.language = "joint";
  out.split = datasets[0].split;
  Rng rng(seed);
  for (const auto& d : datasets) {
    if (scenario == JointScenario::B && &d == anchor_ds) {
      for (const auto& s : d.sentences) out.sentences.push_back(s);
      continue;
    }
    std::size_t take = d.sentences.size() / 4;
    auto idx = rng.sample_without_replacement(d.sentences.size(), take);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) out.sentences.push_back(d.sentences[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// cipher languages

enum class ReorderRule { none, reverse };

struct CipherSpec {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> lexicon;  // bijection source -> cipher
  ReorderRule reorder = ReorderRule::none;

  void validate() const {
    std::map<std::string, int> seen;
    for (const auto& [src, dst] : lexicon)
      if (++seen[dst] > 1)
        throw std::invalid_argument("cipher lexicon not a bijection at '" +
                                    dst + "'");
  }
};

// deterministic pseudo-word cipher lexicon over the given vocabulary
inline CipherSpec make_cipher_spec(const std::vector<std::string>& vocab,
                                   std::uint64_t seed,
                                   ReorderRule reorder = ReorderRule::none) {
  static const char* onsets[] = {"z", "v", "k", "zh", "gr", "pl", "dr", "f"};
  static const char* nuclei[] = {"a", "o", "u", "ei", "ia", "ou"};
  static const char* codas[] = {"n", "rk", "t", "sh", "m", "l", "p", "x"};
  CipherSpec spec;
  spec.seed = seed;
  spec.reorder = reorder;
  Rng rng(seed);
  std::vector<std::string> sorted = vocab;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::map<std::string, int> used;
  std::vector<std::string> order = sorted;
  rng.shuffle(order);
  for (const auto& word : order) {
    std::string cipher;
    do {
      cipher = std::string(onsets[rng.below(8)]) + nuclei[rng.below(6)] +
               codas[rng.below(8)];
      if (used.count(cipher))
        cipher += std::string(nuclei[rng.below(6)]) + codas[rng.below(8)];
    } while (used.count(cipher));
    used[cipher] = 1;
    spec.lexicon[word] = cipher;
  }
  spec.validate();
  return spec;
}

// Applies the cipher to every sentence; tags travel with their tokens
// through any reordering. Also returns the aligned parallel corpus.
inline std::pair<TaggedDataset, ParallelCorpus> gen_cipher_corpus(
    const TaggedDataset& source, const CipherSpec& spec,
    const std::string& cipher_lang = "cipher") {
  spec.validate();
  TaggedDataset out;
  out.language = cipher_lang;
  out.split = source.split;
  ParallelCorpus parallel;
  for (const auto& sent : source.sentences) {
    Sentence mapped;
    mapped.source_lang = cipher_lang;
    for (const auto& tok : sent.tokens) {
      auto it = spec.lexicon.find(tok.surface);
      if (it == spec.lexicon.end())
        throw std::out_of_range("token not in cipher lexicon: " + tok.surface);
      Token t = tok;
      t.surface = it->second;
      mapped.tokens.push_back(std::move(t));
    }
    if (spec.reorder == ReorderRule::reverse)
      std::reverse(mapped.tokens.begin(), mapped.tokens.end());
    std::string src_text, dst_text;
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      if (i) src_text += ' ';
      src_text += sent.tokens[i].surface;
    }
    for (std::size_t i = 0; i < mapped.tokens.size(); ++i) {
      if (i) dst_text += ' ';
      dst_text += mapped.tokens[i].surface;
    }
    parallel.pairs.push_back(
        {src_text, dst_text, source.language, cipher_lang});
    out.sentences.push_back(std::move(mapped));
  }
  return {std::move(out), std::move(parallel)};
}

// inverse lexicon, for the bijection round-trip property
inline CipherSpec invert_cipher(const CipherSpec& spec) {
  CipherSpec inv;
  inv.seed = spec.seed;
  inv.reorder = spec.reorder;
  for (const auto& [src, dst] : spec.lexicon) inv.lexicon[dst] = src;
  inv.validate();
  return inv;
}

// ---------------------------------------------------------------------------
// parallel corpora

inline ParallelCorpus load_parallel(std::istream& src, std::istream& dst,
                                    const std::string& src_lang,
                                    const std::string& dst_lang) {
  std::vector<std::string> src_lines, dst_lines;
  std::string line;
  while (std::getline(src, line)) src_lines.push_back(line);
  while (std::getline(dst, line)) dst_lines.push_back(line);
  if (src_lines.size() != dst_lines.size())
    throw std::runtime_error("parallel alignment error: " +
                             std::to_string(src_lines.size()) + " != " +
                             std::to_string(dst_lines.size()) + " lines");
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    if (src_lines[i].empty() || dst_lines[i].empty())
      throw std::runtime_error("parallel pair " + std::to_string(i + 1) +
                               " has an empty side");
    corpus.pairs.push_back({src_lines[i], dst_lines[i], src_lang, dst_lang});
  }
  return corpus;
}

inline ParallelCorpus load_parallel_files(const std::string& src_path,
                                          const std::string& dst_path,
                                          const std::string& src_lang,
                                          const std::string& dst_lang) {
  std::ifstream src(src_path), dst(dst_path);
  if (!src) throw std::runtime_error("cannot open " + src_path);
  if (!dst) throw std::runtime_error("cannot open " + dst_path);
  return load_parallel(src, dst, src_lang, dst_lang);
}

// ---------------------------------------------------------------------------
// synthetic grammar corpus: templated sentences with entity slots

// Generates tagged sentences from a small closed grammar. Entities are
// identifiable from their sentence frames, which is what makes desk-scale
// transfer experiments possible after ciphering.
inline TaggedDataset gen_synthetic(std::size_t n_sentences, std::uint64_t seed,
                                   const std::string& language = "synth",
                                   const std::string& split = "train") {
  struct Slot {
    const char* cls;  // word class key
    const char* ner;
    const char* upos;
  };
  static const std::map<std::string, std::vector<std::string>> classes = {
      {"PER", {"mara", "telo", "rin", "kova", "selin", "dorat", "yeva", "pim"}},
      {"LOC", {"belun", "tarsa", "quon", "velda", "norim", "castu"}},
      {"ORG", {"ferro", "minka", "soltek", "ravia", "dunor"}},
      {"NN", {"letter", "ship", "market", "river", "garden", "song", "stone"}},
      {"VB", {"visits", "leads", "founded", "crosses", "praises", "joins"}},
      {"VB2", {"works", "lives", "sails", "sings", "trades"}},
      {"DT", {"the", "a"}},
      {"IN", {"in", "near", "with", "from"}},
      {"JJ", {"old", "bright", "quiet", "red"}},
      {"PUNCT", {"."}}};
  // templates: sequence of (class, ner-tag-kind, upos)
  static const std::vector<std::vector<Slot>> templates = {
      {{"PER", "B-PER", "NOUN"}, {"VB2", "O", "VERB"}, {"IN", "O", "ADP"},
       {"LOC", "B-LOC", "NOUN"}, {"PUNCT", "O", "."}},
      {{"PER", "B-PER", "NOUN"}, {"VB", "O", "VERB"}, {"DT", "O", "DET"},
       {"NN", "O", "NOUN"}, {"PUNCT", "O", "."}},
      {{"ORG", "B-ORG", "NOUN"}, {"VB", "O", "VERB"}, {"PER", "B-PER", "NOUN"},
       {"PUNCT", "O", "."}},
      {{"DT", "O", "DET"}, {"JJ", "O", "ADJ"}, {"NN", "O", "NOUN"},
       {"VB2", "O", "VERB"}, {"IN", "O", "ADP"}, {"LOC", "B-LOC", "NOUN"},
       {"PUNCT", "O", "."}},
      {{"PER", "B-PER", "NOUN"}, {"IN", "O", "ADP"}, {"ORG", "B-ORG", "NOUN"},
       {"VB2", "O", "VERB"}, {"IN", "O", "ADP"}, {"DT", "O", "DET"},
       {"NN", "O", "NOUN"}, {"PUNCT", "O", "."}},
      {{"DT", "O", "DET"}, {"NN", "O", "NOUN"}, {"IN", "O", "ADP"},
       {"LOC", "B-LOC", "NOUN"}, {"VB", "O", "VERB"}, {"PER", "B-PER", "NOUN"},
       {"PUNCT", "O", "."}}};
  TaggedDataset ds;
  ds.language = language;
  ds.split = split;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_sentences; ++i) {
    const auto& tmpl = templates[rng.below(templates.size())];
    Sentence sent;
    sent.source_lang = language;
    for (const auto& slot : tmpl) {
      const auto& pool = classes.at(slot.cls);
      Token tok;
      tok.surface = pool[rng.below(pool.size())];
      tok.ner = slot.ner;
      tok.upos = slot.upos;
      sent.tokens.push_back(std::move(tok));
    }
    ds.sentences.push_back(std::move(sent));
  }
  return ds;
}

// full surface vocabulary of a dataset, sorted
inline std::vector<std::string> dataset_vocab(const TaggedDataset& ds) {
  std::vector<std::string> vocab;
  for (const auto& s : ds.sentences)
    for (const auto& t : s.tokens) vocab.push_back(t.surface);
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  return vocab;
}

}  // namespace xling
