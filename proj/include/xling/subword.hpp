// Byte-pair encoding: greedy merge learning, encoding with an exact
// word-boundary map, decoding, and merge-table (de)serialization.
#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace xling {

// reserved vocabulary slots, always present
enum ReservedSu : int {
  SU_PAD = 0,
  SU_UNK = 1,
  SU_BOS = 2,
  SU_EOS = 3,
  SU_MASK = 4,
  SU_SEP = 5,
  SU_RESERVED_COUNT = 6
};

inline constexpr const char* kEndOfWord = "</w>";
inline constexpr const char* kUnkRender = "\xEF\xBF\xBD";  // U+FFFD

// splits a UTF-8 string into codepoint-sized symbols
inline std::vector<std::string> utf8_chars(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
    len = std::min(len, s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

struct SubwordSegmentation {
  std::vector<int> su_ids;
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;  // [start, end)

  void validate() const {
    std::size_t expect = 0;
    for (auto [s, e] : word_spans) {
      if (s != expect || e <= s)
        throw std::invalid_argument("segmentation: spans must tile su_ids");
      expect = e;
    }
    if (expect != su_ids.size())
      throw std::invalid_argument("segmentation: spans do not cover su_ids");
  }
};

class MergeTable {
 public:
  std::vector<std::pair<std::string, std::string>> merges;
  std::map<std::string, int> vocab;  // symbol -> id, dense from 0

  std::size_t vocab_size() const { return vocab.size() ? id_to_symbol_.size() : 0; }

  const std::string& symbol(int id) const { return id_to_symbol_.at(id); }

  void finalize() {
    id_to_symbol_.clear();
    std::vector<std::pair<int, std::string>> by_id;
    for (auto& [sym, id] : vocab) by_id.emplace_back(id, sym);
    std::sort(by_id.begin(), by_id.end());
    for (auto& [id, sym] : by_id) {
      if (static_cast<std::size_t>(id) != id_to_symbol_.size())
        throw std::logic_error("merge table: ids not dense");
      id_to_symbol_.push_back(sym);
    }
  }

  // word -> symbol strings after all merges, with the end-of-word marker
  // attached to the final character
  std::vector<std::string> split_word(const std::string& word) const {
    std::vector<std::string> syms = utf8_chars(word);
    if (syms.empty()) throw std::invalid_argument("empty word");
    syms.back() += kEndOfWord;
    for (const auto& [a, b] : merges) {
      for (std::size_t i = 0; i + 1 < syms.size();) {
        if (syms[i] == a && syms[i + 1] == b) {
          syms[i] = a + b;
          syms.erase(syms.begin() + i + 1);
        } else {
          ++i;
        }
      }
    }
    return syms;
  }

 private:
  std::vector<std::string> id_to_symbol_;
};

// Greedy BPE on a word-frequency map. Merges the most frequent adjacent
// pair (lexicographic tie-break) until the vocabulary reaches target_vocab
// or no pair occurs at least twice.
inline MergeTable learn_bpe(const std::map<std::string, long>& word_freq,
                            std::size_t target_vocab) {
  if (word_freq.empty()) throw std::invalid_argument("learn_bpe: empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long> freqs;
  std::map<std::string, int> vocab;
  static const char* reserved[] = {"<pad>", "<unk>", "<bos>",
                                   "<eos>", "<mask>", "<sep>"};
  for (int i = 0; i < SU_RESERVED_COUNT; ++i) vocab[reserved[i]] = i;

  std::vector<std::string> initial_symbols;
  for (const auto& [word, freq] : word_freq) {
    auto syms = utf8_chars(word);
    if (syms.empty()) continue;
    syms.back() += kEndOfWord;
    for (const auto& s : syms) initial_symbols.push_back(s);
    words.push_back(std::move(syms));
    freqs.push_back(freq);
  }
  std::sort(initial_symbols.begin(), initial_symbols.end());
  initial_symbols.erase(
      std::unique(initial_symbols.begin(), initial_symbols.end()),
      initial_symbols.end());
  for (const auto& s : initial_symbols)
    vocab.emplace(s, static_cast<int>(vocab.size()));

  if (target_vocab < vocab.size())
    throw std::invalid_argument(
        "learn_bpe: target vocab " + std::to_string(target_vocab) +
        " smaller than character inventory plus reserved (" +
        std::to_string(vocab.size()) + ")");

  MergeTable table;
  while (vocab.size() < target_vocab) {
    std::map<std::pair<std::string, std::string>, long> pair_count;
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
        pair_count[{words[w][i], words[w][i + 1]}] += freqs[w];
    const std::pair<std::string, std::string>* best = nullptr;
    long best_count = 1;  // require count >= 2
    for (const auto& [pair, count] : pair_count)
      if (count > best_count) {  // map iteration order gives the tie-break
        best = &pair;
        best_count = count;
      }
    if (!best) break;
    auto [a, b] = *best;
    table.merges.emplace_back(a, b);
    vocab.emplace(a + b, static_cast<int>(vocab.size()));
    for (auto& syms : words)
      for (std::size_t i = 0; i + 1 < syms.size();) {
        if (syms[i] == a && syms[i + 1] == b) {
          syms[i] = a + b;
          syms.erase(syms.begin() + i + 1);
        } else {
          ++i;
        }
      }
  }
  table.vocab = std::move(vocab);
  table.finalize();
  return table;
}

// Segments a sentence of words into SU ids plus the word-boundary map.
// Characters outside the learned inventory become UNK.
inline SubwordSegmentation encode(const std::vector<std::string>& words,
                                  const MergeTable& table) {
  if (words.empty()) throw std::invalid_argument("encode: empty sentence");
  SubwordSegmentation seg;
  for (const auto& word : words) {
    std::size_t start = seg.su_ids.size();
    for (const auto& sym : table.split_word(word)) {
      auto it = table.vocab.find(sym);
      seg.su_ids.push_back(it == table.vocab.end() ? SU_UNK : it->second);
    }
    seg.word_spans.emplace_back(start, seg.su_ids.size());
  }
  seg.validate();
  return seg;
}

inline std::vector<std::string> decode(const SubwordSegmentation& seg,
                                       const MergeTable& table) {
  std::vector<std::string> words;
  for (auto [s, e] : seg.word_spans) {
    if (e > seg.su_ids.size() || s >= e)
      throw std::out_of_range("decode: span outside su_ids");
    std::string word;
    for (std::size_t i = s; i < e; ++i) {
      int id = seg.su_ids[i];
      if (id == SU_UNK) {
        word += kUnkRender;
        continue;
      }
      std::string sym = table.symbol(id);
      std::size_t pos = sym.rfind(kEndOfWord);
      if (pos != std::string::npos) sym.erase(pos);
      word += sym;
    }
    words.push_back(std::move(word));
  }
  return words;
}

inline void save_merge_table(std::ostream& os, const MergeTable& table) {
  os << "xling-bpe v1 vocab=" << table.vocab.size()
     << " reserved=pad:0,unk:1,bos:2,eos:3,mask:4,sep:5\n";
  os << "chars:";
  for (const auto& [sym, id] : table.vocab) {
    if (id < SU_RESERVED_COUNT) continue;
    bool merged = false;
    for (const auto& [a, b] : table.merges)
      if (a + b == sym) {
        merged = true;
        break;
      }
    if (!merged) os << ' ' << sym;
  }
  os << '\n';
  for (const auto& [a, b] : table.merges) os << a << ' ' << b << '\n';
}

inline MergeTable load_merge_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("xling-bpe v1", 0) != 0)
    throw std::runtime_error("merge table: bad header");
  MergeTable table;
  static const char* reserved[] = {"<pad>", "<unk>", "<bos>",
                                   "<eos>", "<mask>", "<sep>"};
  for (int i = 0; i < SU_RESERVED_COUNT; ++i) table.vocab[reserved[i]] = i;
  if (!std::getline(is, line) || line.rfind("chars:", 0) != 0)
    throw std::runtime_error("merge table: missing chars line");
  {
    std::istringstream ss(line.substr(6));
    std::vector<std::string> chars;
    std::string sym;
    while (ss >> sym) chars.push_back(sym);
    std::sort(chars.begin(), chars.end());
    for (const auto& c : chars)
      table.vocab.emplace(c, static_cast<int>(table.vocab.size()));
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!(ss >> a >> b))
      throw std::runtime_error("merge table: malformed merge line: " + line);
    table.merges.emplace_back(a, b);
    table.vocab.emplace(a + b, static_cast<int>(table.vocab.size()));
  }
  table.finalize();
  return table;
}

}  // namespace xling
