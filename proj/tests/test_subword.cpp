#include <catch_amalgamated.hpp>

#include <sstream>

#include "xling/rng.hpp"
#include "xling/subword.hpp"

using namespace xling;

TEST_CASE("first merge follows pair frequency") {
  // pair (a,a) occurs twice per word instance: 6 > 3 for (a,b</w>)
  MergeTable t = learn_bpe({{"aaab", 3}}, SU_RESERVED_COUNT + 10);
  REQUIRE(!t.merges.empty());
  CHECK(t.merges[0] == std::pair<std::string, std::string>{"a", "a"});
}

TEST_CASE("no repeated pair means zero merges") {
  MergeTable t = learn_bpe({{"ab", 1}, {"cd", 1}}, 100);
  CHECK(t.merges.empty());
}

TEST_CASE("classic toy corpus first merges e s") {
  MergeTable t = learn_bpe(
      {{"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}}, 100);
  REQUIRE(!t.merges.empty());
  CHECK(t.merges[0] == std::pair<std::string, std::string>{"e", "s"});
}

TEST_CASE("target vocab below character inventory is rejected") {
  CHECK_THROWS(learn_bpe({{"abcdef", 2}}, 3));
}

TEST_CASE("encode applies merges and spans partition") {
  MergeTable t = learn_bpe({{"aaab", 3}}, SU_RESERVED_COUNT + 20);
  // force only the first merge to isolate behavior
  MergeTable one;
  one.merges = {t.merges[0]};
  one.vocab = {{"<pad>", 0}, {"<unk>", 1}, {"<bos>", 2}, {"<eos>", 3},
               {"<mask>", 4}, {"<sep>", 5}, {"a", 6}, {"b</w>", 7}, {"aa", 8}};
  one.finalize();
  SubwordSegmentation seg = encode({"aaab"}, one);
  REQUIRE(seg.su_ids.size() == 3);
  CHECK(one.symbol(seg.su_ids[0]) == "aa");
  CHECK(one.symbol(seg.su_ids[1]) == "a");
  CHECK(one.symbol(seg.su_ids[2]) == "b</w>");
  REQUIRE(seg.word_spans.size() == 1);
  CHECK(seg.word_spans[0] == std::pair<std::size_t, std::size_t>{0, 3});
}

TEST_CASE("unknown character maps to UNK") {
  MergeTable t = learn_bpe({{"ab", 2}}, 100);
  SubwordSegmentation seg = encode({"z"}, t);
  REQUIRE(seg.su_ids.size() == 1);
  CHECK(seg.su_ids[0] == SU_UNK);
  CHECK(seg.word_spans[0] == std::pair<std::size_t, std::size_t>{0, 1});
  // UNK renders as the replacement character
  CHECK(decode(seg, t)[0] == kUnkRender);
}

TEST_CASE("round trip on known characters") {
  MergeTable t = learn_bpe({{"hello", 4}, {"world", 4}, {"held", 2}}, 100);
  std::vector<std::string> sent = {"hello", "world", "held"};
  CHECK(decode(encode(sent, t), t) == sent);
}

TEST_CASE("learning is deterministic across runs") {
  std::map<std::string, long> corpus = {
      {"banana", 4}, {"bandana", 3}, {"cabana", 5}, {"canada", 2}};
  MergeTable a = learn_bpe(corpus, 40);
  MergeTable b = learn_bpe(corpus, 40);
  CHECK(a.merges == b.merges);
  CHECK(a.vocab == b.vocab);
}

TEST_CASE("merge table serialization round trip") {
  MergeTable t = learn_bpe({{"hello", 4}, {"world", 4}}, 30);
  std::stringstream ss;
  save_merge_table(ss, t);
  MergeTable u = load_merge_table(ss);
  CHECK(t.merges == u.merges);
  CHECK(t.vocab == u.vocab);
  std::vector<std::string> sent = {"hello", "world"};
  CHECK(encode(sent, t).su_ids == encode(sent, u).su_ids);
}

static std::vector<std::string> random_sentence(Rng& rng,
                                                const std::vector<std::string>& lexicon) {
  std::size_t n = 1 + rng.below(8);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i)
    words.push_back(lexicon[rng.below(lexicon.size())]);
  return words;
}

TEST_CASE("property: spans tile su_ids and round trip holds") {
  std::vector<std::string> lexicon = {"alpha", "beta",  "gamma", "delta",
                                      "epsilon", "zeta", "eta",   "theta"};
  std::map<std::string, long> freq;
  for (const auto& w : lexicon) freq[w] = 3;
  MergeTable t = learn_bpe(freq, 60);
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    auto sent = random_sentence(rng, lexicon);
    SubwordSegmentation seg = encode(sent, t);
    CHECK_NOTHROW(seg.validate());
    CHECK(seg.word_spans.size() == sent.size());
    CHECK(decode(seg, t) == sent);
  }
}

TEST_CASE("monotone coverage: more merges never increase SU count") {
  std::map<std::string, long> freq = {
      {"looking", 3}, {"booking", 4}, {"cooking", 5}, {"look", 2}, {"cook", 6}};
  MergeTable full = learn_bpe(freq, 80);
  std::vector<std::string> sent = {"looking", "cooking", "book"};
  std::size_t prev = SIZE_MAX;
  for (std::size_t k = 0; k <= full.merges.size(); ++k) {
    MergeTable prefix;
    prefix.vocab = full.vocab;  // superset vocab is fine for counting
    prefix.merges.assign(full.merges.begin(), full.merges.begin() + k);
    prefix.finalize();
    std::size_t count = encode(sent, prefix).su_ids.size();
    CHECK(count <= prev);
    prev = count;
  }
}

TEST_CASE("decode rejects spans outside su_ids") {
  MergeTable t = learn_bpe({{"ab", 2}}, 100);
  SubwordSegmentation seg = encode({"ab"}, t);
  seg.word_spans[0].second = 99;
  CHECK_THROWS(decode(seg, t));
}

TEST_CASE("empty spans decode to empty word list") {
  MergeTable t = learn_bpe({{"ab", 2}}, 100);
  SubwordSegmentation seg;
  CHECK(decode(seg, t).empty());
}
