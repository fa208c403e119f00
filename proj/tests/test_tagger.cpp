#include <catch_amalgamated.hpp>

#include <cmath>

#include "xling/gradcheck.hpp"
#include "xling/tagger.hpp"

using namespace xling;

// ---------------------------------------------------------------------------
// brute-force oracle: enumerate all K^T paths

static void enumerate_paths(std::size_t t_count, std::size_t k_count,
                            std::vector<int>& path,
                            const std::function<void(const std::vector<int>&)>& f) {
  if (path.size() == t_count) {
    f(path);
    return;
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    path.push_back(static_cast<int>(k));
    enumerate_paths(t_count, k_count, path, f);
    path.pop_back();
  }
}

static double brute_log_partition(const Tensor& em, const CrfScores& crf) {
  std::vector<double> scores;
  std::vector<int> path;
  enumerate_paths(em.rows(), em.cols(), path, [&](const std::vector<int>& p) {
    scores.push_back(crf_path_score(em, crf, p));
  });
  return log_sum_exp(scores);
}

static std::pair<std::vector<int>, double> brute_argmax(const Tensor& em,
                                                        const CrfScores& crf) {
  std::vector<int> best_path;
  double best = -1e300;
  std::vector<int> path;
  enumerate_paths(em.rows(), em.cols(), path, [&](const std::vector<int>& p) {
    double s = crf_path_score(em, crf, p);
    if (s > best) {
      best = s;
      best_path = p;
    }
  });
  return {best_path, best};
}

static Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (auto& v : t.values) v = rng.uniform(-2.0, 2.0);
  return t;
}

static CrfScores random_crf(std::size_t k, Rng& rng) {
  CrfScores crf(k);
  crf.transitions = random_tensor(k, k, rng);
  crf.start = random_tensor(1, k, rng);
  crf.stop = random_tensor(1, k, rng);
  return crf;
}

TEST_CASE("log partition trivial cases") {
  CrfScores crf(2);
  Tensor em1({1, 2});
  CHECK(crf_log_partition(em1, crf) == Catch::Approx(std::log(2.0)));
  Tensor em2({2, 2});
  CHECK(crf_log_partition(em2, crf) == Catch::Approx(std::log(4.0)));
  CHECK_THROWS(crf_log_partition(Tensor({0, 2}), crf));
}

TEST_CASE("crf matches brute force on 200 random instances") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t t_count = 1 + rng.below(6);
    std::size_t k_count = 2 + rng.below(3);
    Tensor em = random_tensor(t_count, k_count, rng);
    CrfScores crf = random_crf(k_count, rng);

    double log_z = crf_log_partition(em, crf);
    CHECK(log_z == Catch::Approx(brute_log_partition(em, crf)).margin(1e-8));

    auto [path, score] = viterbi(em, crf);
    auto [bpath, bscore] = brute_argmax(em, crf);
    CHECK(score == Catch::Approx(bscore).margin(1e-9));
    CHECK(path == bpath);

    // path probabilities sum to 1
    double total = 0.0;
    std::vector<int> p;
    enumerate_paths(t_count, k_count, p, [&](const std::vector<int>& q) {
      total += std::exp(crf_path_score(em, crf, q) - log_z);
    });
    CHECK(total == Catch::Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("viterbi tie-breaking and simple argmax") {
  CrfScores crf(2);
  Tensor em({2, 2}, {1, 0, 0, 1});
  auto [path, score] = viterbi(em, crf);
  CHECK(path == std::vector<int>{0, 1});
  CHECK(score == Catch::Approx(2.0));

  Tensor zeros_em({2, 2});
  auto [tie_path, tie_score] = viterbi(zeros_em, crf);
  CHECK(tie_path == std::vector<int>{0, 0});
}

TEST_CASE("predict_linear argmax and degenerate CRF agreement") {
  Tensor em({2, 2}, {1, 0, 0, 1});
  CHECK(predict_linear(em) == std::vector<int>{0, 1});
  Tensor equal({2, 2});
  CHECK(predict_linear(equal) == std::vector<int>{0, 0});

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor r = random_tensor(1 + rng.below(5), 3, rng);
    CrfScores crf(3);  // all zero: CRF degenerates to per-position argmax
    CHECK(viterbi(r, crf).first == predict_linear(r));
  }
}

TEST_CASE("crf nll basics") {
  Rng rng(7);
  ParamSet ps;
  ps.add("em", Tensor({1, 2}));
  ps.add("tr", Tensor({2, 2}));
  ps.add("st", Tensor({1, 2}));
  ps.add("sp", Tensor({1, 2}));
  auto nll_of = [&](const std::vector<int>& gold) {
    Graph g;
    Var em = g.param(ps.by_name("em").value, &ps.by_name("em").grad);
    Var tr = g.param(ps.by_name("tr").value, &ps.by_name("tr").grad);
    Var st = g.param(ps.by_name("st").value, &ps.by_name("st").grad);
    Var sp = g.param(ps.by_name("sp").value, &ps.by_name("sp").grad);
    return g.value(crf_nll_op(g, em, tr, st, sp, gold))[0];
  };
  CHECK(nll_of({0}) == Catch::Approx(std::log(2.0)));
  CHECK(nll_of({1}) == Catch::Approx(std::log(2.0)));

  // emissions strongly favoring gold drive the loss to zero
  ps.by_name("em").value = Tensor({1, 2}, {100.0, 0.0});
  CHECK(nll_of({0}) < 1e-6);
}

TEST_CASE("crf nll nonneg and equals brute-force -log p on random instances") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t t_count = 1 + rng.below(5);
    std::size_t k_count = 2 + rng.below(3);
    Tensor em = random_tensor(t_count, k_count, rng);
    CrfScores crf = random_crf(k_count, rng);
    std::vector<int> gold(t_count);
    for (auto& gi : gold) gi = static_cast<int>(rng.below(k_count));

    double nll = crf_log_partition(em, crf) - crf_path_score(em, crf, gold);
    CHECK(nll >= -1e-12);
    double brute_p = std::exp(crf_path_score(em, crf, gold) -
                              brute_log_partition(em, crf));
    CHECK(nll == Catch::Approx(-std::log(brute_p)).margin(1e-8));
  }
}

TEST_CASE("emission shift property") {
  Rng rng(17);
  Tensor em = random_tensor(4, 3, rng);
  CrfScores crf = random_crf(3, rng);
  double z0 = crf_log_partition(em, crf);
  auto path0 = viterbi(em, crf).first;
  double c = 1.7;
  Tensor shifted = em;
  for (std::size_t k = 0; k < 3; ++k) shifted.at(2, k) += c;
  CHECK(crf_log_partition(shifted, crf) == Catch::Approx(z0 + c).margin(1e-10));
  CHECK(viterbi(shifted, crf).first == path0);
}

TEST_CASE("crf nll gradient matches finite differences") {
  Rng rng(41);
  ParamSet ps;
  ps.add("em", random_tensor(4, 3, rng));
  ps.add("tr", random_tensor(3, 3, rng));
  ps.add("st", random_tensor(1, 3, rng));
  ps.add("sp", random_tensor(1, 3, rng));
  std::vector<int> gold = {0, 2, 1, 1};
  auto f = [&gold](ParamSet& p) {
    Graph g;
    Var em = g.param(p.by_name("em").value, &p.by_name("em").grad);
    Var tr = g.param(p.by_name("tr").value, &p.by_name("tr").grad);
    Var st = g.param(p.by_name("st").value, &p.by_name("st").grad);
    Var sp = g.param(p.by_name("sp").value, &p.by_name("sp").grad);
    Var loss = crf_nll_op(g, em, tr, st, sp, gold);
    g.backward(loss);
    return g.value(loss)[0];
  };
  CHECK(grad_check(f, ps) < 1e-6);
}

TEST_CASE("crf rejects out-of-range gold labels") {
  Tensor em({2, 2});
  CrfScores crf(2);
  CHECK_THROWS(crf_path_score(em, crf, {0, 5}));
  CHECK_THROWS(crf_path_score(em, crf, {0}));
}

TEST_CASE("bio transition mask forbids O to I-X") {
  std::vector<std::string> labels = {"O", "B-PER", "I-PER", "B-LOC", "I-LOC"};
  Tensor mask = bio_mask(labels);
  CHECK(mask.at(0, 2) == -1e30);   // O -> I-PER
  CHECK(mask.at(1, 2) == 0.0);     // B-PER -> I-PER
  CHECK(mask.at(2, 2) == 0.0);     // I-PER -> I-PER
  CHECK(mask.at(3, 2) == -1e30);   // B-LOC -> I-PER
  CHECK(mask.at(0, 1) == 0.0);     // O -> B-PER fine
}

TEST_CASE("tagger emission shape, T=1 and full-stack gradient") {
  Rng rng(3);
  TaggerConfig cfg;
  cfg.model_dim = 8;
  cfg.heads = 2;
  cfg.labels = {"O", "B-PER", "I-PER"};
  cfg.input_dim = 5;
  ParamSet ps;
  Tagger tagger(cfg, ps, rng);

  Graph g;
  Rng drng(0);
  Tensor words = random_tensor(4, 5, rng);
  Var em = tagger.emissions(g, ps, g.input(words), false, drng);
  CHECK(g.value(em).rows() == 4);
  CHECK(g.value(em).cols() == 3);

  // dim mismatch rejected
  Graph g2;
  CHECK_THROWS(tagger.emissions(g2, ps, g2.input(random_tensor(4, 7, rng)),
                                false, drng));

  // finite differences through transformer + CRF
  std::vector<int> gold = {0, 1, 2, 0};
  auto f = [&](ParamSet& p) {
    Graph gl;
    Rng dr(0);
    Var loss = tagger.loss(gl, p, gl.input(words), gold, false, dr);
    gl.backward(loss);
    return gl.value(loss)[0];
  };
  CHECK(grad_check(f, ps) < 1e-4);
}

TEST_CASE("tagger predict is deterministic and respects bio mask flag") {
  Rng rng(13);
  TaggerConfig cfg;
  cfg.model_dim = 8;
  cfg.heads = 2;
  cfg.labels = {"O", "B-PER", "I-PER"};
  cfg.input_dim = 4;
  cfg.bio_transition_mask = true;
  ParamSet ps;
  Tagger tagger(cfg, ps, rng);
  Tensor words = random_tensor(5, 4, rng);
  Rng drng(0);
  auto p1 = tagger.predict(ps, words, drng);
  auto p2 = tagger.predict(ps, words, drng);
  CHECK(p1 == p2);
  // decoded sequence is BIO-valid under the mask
  int prev = 0;
  for (int l : p1) {
    if (l == 2) CHECK((prev == 1 || prev == 2));
    prev = l;
  }
}
