#include <catch_amalgamated.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "xling/corpus.hpp"

using namespace xling;

static const ConllSchema kThreeCol = ConllSchema::parse("surface,ner,pos");

TEST_CASE("parse_conll basic block structure") {
  std::istringstream in("eu B-ORG NNP\nrejects O VBZ\n\n");
  TaggedDataset ds = parse_conll(in, kThreeCol);
  REQUIRE(ds.sentences.size() == 1);
  REQUIRE(ds.sentences[0].tokens.size() == 2);
  CHECK(ds.sentences[0].tokens[0].surface == "eu");
  CHECK(ds.sentences[0].tokens[0].ner == "B-ORG");
  CHECK(ds.sentences[0].tokens[0].upos == "NNP");
  CHECK(ds.sentences[0].tokens[1].ner == "O");
}

TEST_CASE("parse_conll empty stream gives empty dataset") {
  std::istringstream in("");
  CHECK(parse_conll(in, kThreeCol).sentences.empty());
}

TEST_CASE("parse_conll ragged row reports line number") {
  std::istringstream in("word B-ORG\n");
  try {
    parse_conll(in, kThreeCol);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("parse_conll strict BIO rejects orphan I-") {
  std::istringstream in("a O DT\nb I-PER NNP\n\n");
  CHECK_THROWS(parse_conll(in, kThreeCol, "en", "train", true));
  std::istringstream in2("a O DT\nb I-PER NNP\n\n");
  ParseStats stats;
  TaggedDataset ds = parse_conll(in2, kThreeCol, "en", "train", false, &stats);
  CHECK(ds.sentences.size() == 1);
  CHECK(stats.bio_warnings == 1);
}

TEST_CASE("conll round trip preserves all tag triples") {
  TaggedDataset ds = gen_synthetic(50, 9, "synth", "train");
  std::ostringstream out;
  ConllSchema schema = ConllSchema::parse("surface,ner,upos");
  serialize_conll(out, ds, schema);
  std::istringstream in(out.str());
  TaggedDataset back = parse_conll(in, schema, "synth", "train");
  REQUIRE(back.sentences.size() == ds.sentences.size());
  for (std::size_t i = 0; i < ds.sentences.size(); ++i) {
    REQUIRE(back.sentences[i].tokens.size() == ds.sentences[i].tokens.size());
    for (std::size_t j = 0; j < ds.sentences[i].tokens.size(); ++j) {
      CHECK(back.sentences[i].tokens[j].surface ==
            ds.sentences[i].tokens[j].surface);
      CHECK(back.sentences[i].tokens[j].ner == ds.sentences[i].tokens[j].ner);
      CHECK(back.sentences[i].tokens[j].upos ==
            ds.sentences[i].tokens[j].upos);
    }
  }
}

TEST_CASE("universal POS mapping") {
  std::ifstream mf(std::string(XLING_DATA_DIR) + "/upos/en-ptb.map");
  REQUIRE(mf.good());
  PosMapping table = load_pos_mapping(mf);
  CHECK(map_to_universal_pos("NNP", table) == "NOUN");
  CHECK(map_to_universal_pos(".", table) == ".");
  CHECK(map_to_universal_pos("VBZ", table) == "VERB");
  CHECK_THROWS_AS(map_to_universal_pos("ZZZ", table), std::out_of_range);
  // target inventory is exactly the 12 universal tags
  std::set<std::string> targets;
  for (const auto& [src, dst] : table) {
    CHECK(is_universal_pos(dst));
    targets.insert(dst);
  }
  CHECK(targets.size() == 12);
}

TEST_CASE("normalize lowercases, folds punctuation, idempotent") {
  CHECK(normalize("Hello") == "hello");
  CHECK(normalize("«x»") == "\"x\"");
  CHECK(normalize("—") == "-");
  std::vector<std::string> samples = {"Hello", "“quoted”", "A–B",
                                      "café", "…", "MiXeD"};
  for (const auto& s : samples) {
    std::string n = normalize(s);
    CHECK(normalize(n) == n);
    // never introduces token-splitting whitespace beyond what was there
    CHECK(std::count(n.begin(), n.end(), ' ') ==
          std::count(s.begin(), s.end(), ' '));
  }
}

TEST_CASE("mix_joint scenario arithmetic and determinism") {
  std::vector<TaggedDataset> ds;
  for (int i = 0; i < 4; ++i) {
    TaggedDataset d = gen_synthetic(16, 100 + i, "lang" + std::to_string(i));
    ds.push_back(d);
  }
  TaggedDataset a = mix_joint(ds, JointScenario::A, "", 7);
  CHECK(a.sentences.size() == 16);  // 4 per language
  TaggedDataset b = mix_joint(ds, JointScenario::B, "lang0", 7);
  CHECK(b.sentences.size() == 16 + 3 * 4);

  // provenance retained
  std::set<std::string> langs;
  for (const auto& s : a.sentences) langs.insert(s.source_lang);
  CHECK(langs.size() == 4);

  // determinism
  TaggedDataset a2 = mix_joint(ds, JointScenario::A, "", 7);
  REQUIRE(a2.sentences.size() == a.sentences.size());
  for (std::size_t i = 0; i < a.sentences.size(); ++i)
    CHECK(a2.sentences[i].tokens[0].surface ==
          a.sentences[i].tokens[0].surface);

  CHECK_THROWS(mix_joint(ds, JointScenario::B, "nope", 7));
  CHECK_THROWS(mix_joint({ds[0]}, JointScenario::A, "", 7));
}

TEST_CASE("cipher corpus maps tokens and projects tags") {
  TaggedDataset src;
  src.language = "a";
  src.split = "train";
  Sentence s;
  s.tokens = {{"ka", "B-PER", "NOUN"}, {"ru", "O", "VERB"}};
  src.sentences.push_back(s);

  CipherSpec spec;
  spec.lexicon = {{"ka", "zo"}, {"ru", "mi"}};
  auto [cip, par] = gen_cipher_corpus(src, spec);
  REQUIRE(cip.sentences.size() == 1);
  CHECK(cip.sentences[0].tokens[0].surface == "zo");
  CHECK(cip.sentences[0].tokens[0].ner == "B-PER");
  CHECK(cip.sentences[0].tokens[1].surface == "mi");
  REQUIRE(par.pairs.size() == 1);
  CHECK(par.pairs[0].source == "ka ru");
  CHECK(par.pairs[0].target == "zo mi");

  SECTION("reorder carries tags with tokens") {
    spec.reorder = ReorderRule::reverse;
    auto [rev, rpar] = gen_cipher_corpus(src, spec);
    CHECK(rev.sentences[0].tokens[0].surface == "mi");
    CHECK(rev.sentences[0].tokens[0].ner == "O");
    CHECK(rev.sentences[0].tokens[1].surface == "zo");
    CHECK(rev.sentences[0].tokens[1].ner == "B-PER");
  }

  SECTION("out-of-lexicon token names the token") {
    src.sentences[0].tokens[0].surface = "quux";
    try {
      gen_cipher_corpus(src, spec);
      FAIL("expected error");
    } catch (const std::out_of_range& e) {
      CHECK(std::string(e.what()).find("quux") != std::string::npos);
    }
  }

  SECTION("non-bijective lexicon rejected") {
    spec.lexicon["xx"] = "zo";
    CHECK_THROWS(gen_cipher_corpus(src, spec));
  }
}

TEST_CASE("cipher bijection round trip recovers the source corpus") {
  TaggedDataset src = gen_synthetic(40, 3);
  CipherSpec spec = make_cipher_spec(dataset_vocab(src), 11);
  auto [cip, par] = gen_cipher_corpus(src, spec);
  auto [back, par2] = gen_cipher_corpus(cip, invert_cipher(spec));
  REQUIRE(back.sentences.size() == src.sentences.size());
  for (std::size_t i = 0; i < src.sentences.size(); ++i)
    for (std::size_t j = 0; j < src.sentences[i].tokens.size(); ++j) {
      CHECK(back.sentences[i].tokens[j].surface ==
            src.sentences[i].tokens[j].surface);
      CHECK(back.sentences[i].tokens[j].ner == src.sentences[i].tokens[j].ner);
    }
}

TEST_CASE("cipher generation is seed deterministic") {
  TaggedDataset src = gen_synthetic(20, 5);
  auto vocab = dataset_vocab(src);
  CipherSpec s1 = make_cipher_spec(vocab, 9);
  CipherSpec s2 = make_cipher_spec(vocab, 9);
  CHECK(s1.lexicon == s2.lexicon);
  auto [c1, p1] = gen_cipher_corpus(src, s1);
  auto [c2, p2] = gen_cipher_corpus(src, s2);
  for (std::size_t i = 0; i < p1.pairs.size(); ++i)
    CHECK(p1.pairs[i].target == p2.pairs[i].target);
}

TEST_CASE("load_parallel alignment") {
  std::istringstream a("one\ntwo\nthree\n"), b("uno\ndos\ntres\n");
  ParallelCorpus c = load_parallel(a, b, "en", "es");
  REQUIRE(c.pairs.size() == 3);
  CHECK(c.pairs[0].source == "one");
  CHECK(c.pairs[0].target == "uno");
  CHECK(c.pairs[2].target == "tres");

  std::istringstream a2("one\ntwo\nthree\n"), b2("uno\ndos\ntres\ncuatro\n");
  try {
    load_parallel(a2, b2, "en", "es");
    FAIL("expected alignment error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("3") != std::string::npos);
    CHECK(msg.find("4") != std::string::npos);
  }

  std::istringstream a3(""), b3("");
  CHECK(load_parallel(a3, b3, "en", "es").pairs.empty());
}

TEST_CASE("synthetic grammar produces well formed tagged data") {
  TaggedDataset ds = gen_synthetic(200, 1);
  CHECK(ds.sentences.size() == 200);
  for (const auto& s : ds.sentences) {
    REQUIRE(!s.tokens.empty());
    std::vector<std::string> ner;
    for (const auto& t : s.tokens) {
      CHECK(!t.surface.empty());
      CHECK(is_bio_label(t.ner));
      CHECK(is_universal_pos(t.upos));
      ner.push_back(t.ner);
    }
    CHECK(validate_bio(ner, true) == 0);
  }
  // determinism
  TaggedDataset ds2 = gen_synthetic(200, 1);
  for (std::size_t i = 0; i < 200; ++i)
    CHECK(ds.sentences[i].tokens[0].surface ==
          ds2.sentences[i].tokens[0].surface);
}
