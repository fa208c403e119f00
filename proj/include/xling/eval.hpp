// Scoring: entity-level F1 over BIO spans, token accuracy, trimmed B/I/O
// confusion matrices and the exact paired sign test.
#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace xling {

struct EntitySpan {
  std::size_t start = 0, end = 0;  // inclusive token indices
  std::string type;

  auto operator<=>(const EntitySpan&) const = default;
};

// Maximal well-formed B-X / I-X runs. Lenient mode promotes an I- that does
// not continue a span to a B- (common CoNLL tooling behavior).
inline std::vector<EntitySpan> extract_spans(
    const std::vector<std::string>& labels, bool lenient = true) {
  std::vector<EntitySpan> spans;
  std::string open_type;
  std::size_t open_start = 0;
  auto close = [&](std::size_t end) {
    if (!open_type.empty())
      spans.push_back({open_start, end, open_type});
    open_type.clear();
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& l = labels[i];
    if (l == "O" || l.size() < 3) {
      if (i > 0) close(i - 1);
      open_type.clear();
      continue;
    }
    std::string type = l.substr(2);
    if (l[0] == 'B' || open_type != type) {
      // lenient: orphan I-X starts a new span; strict would reject it
      if (l[0] == 'I' && open_type != type && !lenient)
        throw std::invalid_argument("strict BIO: orphan I- at index " +
                                    std::to_string(i));
      if (i > 0) close(i - 1);
      open_type = type;
      open_start = i;
    }
    // I-X continuing the open span: nothing to do
  }
  if (!labels.empty()) close(labels.size() - 1);
  return spans;
}

inline std::vector<std::string> render_spans(std::size_t length,
                                             const std::vector<EntitySpan>& spans) {
  std::vector<std::string> labels(length, "O");
  for (const auto& sp : spans) {
    labels[sp.start] = "B-" + sp.type;
    for (std::size_t i = sp.start + 1; i <= sp.end; ++i)
      labels[i] = "I-" + sp.type;
  }
  return labels;
}

struct PrfScore {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool undefined = false;  // a zero denominator was hit
};

// exact-match entity F1 over per-sentence label sequences
inline PrfScore entity_f1(const std::vector<std::vector<std::string>>& pred,
                          const std::vector<std::vector<std::string>>& gold) {
  if (pred.size() != gold.size())
    throw std::invalid_argument("entity_f1: sentence count mismatch");
  std::size_t n_pred = 0, n_gold = 0, n_correct = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size())
      throw std::invalid_argument("entity_f1: length mismatch in sentence " +
                                  std::to_string(s));
    auto ps = extract_spans(pred[s]);
    auto gs = extract_spans(gold[s]);
    n_pred += ps.size();
    n_gold += gs.size();
    std::set<EntitySpan> gold_set(gs.begin(), gs.end());
    for (const auto& sp : ps) n_correct += gold_set.count(sp);
  }
  PrfScore out;
  out.undefined = n_pred == 0 || n_gold == 0;
  out.precision = n_pred ? static_cast<double>(n_correct) / n_pred : 0.0;
  out.recall = n_gold ? static_cast<double>(n_correct) / n_gold : 0.0;
  out.f1 = (out.precision + out.recall > 0.0)
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// 3x3 counts over {B, I, O}; rows = gold, cols = predicted
struct ConfusionMatrix3 {
  long counts[3][3] = {};

  long total() const {
    long t = 0;
    for (auto& row : counts)
      for (long c : row) t += c;
    return t;
  }
  long diagonal() const { return counts[0][0] + counts[1][1] + counts[2][2]; }
};

inline int bio_trim_index(const std::string& label) {
  if (label.empty()) throw std::invalid_argument("empty label");
  switch (label[0]) {
    case 'B': return 0;
    case 'I': return 1;
    case 'O': return 2;
    default:
      throw std::invalid_argument("not a BIO label: " + label);
  }
}

inline ConfusionMatrix3 bio_confusion(
    const std::vector<std::vector<std::string>>& pred,
    const std::vector<std::vector<std::string>>& gold) {
  if (pred.size() != gold.size())
    throw std::invalid_argument("bio_confusion: sentence count mismatch");
  ConfusionMatrix3 m;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size())
      throw std::invalid_argument("bio_confusion: length mismatch in sentence " +
                                  std::to_string(s));
    for (std::size_t i = 0; i < pred[s].size(); ++i)
      ++m.counts[bio_trim_index(gold[s][i])][bio_trim_index(pred[s][i])];
  }
  return m;
}

inline double token_accuracy(const std::vector<std::vector<std::string>>& pred,
                             const std::vector<std::vector<std::string>>& gold,
                             bool* undefined = nullptr) {
  if (pred.size() != gold.size())
    throw std::invalid_argument("token_accuracy: sentence count mismatch");
  std::size_t total = 0, match = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size())
      throw std::invalid_argument("token_accuracy: length mismatch");
    for (std::size_t i = 0; i < pred[s].size(); ++i) {
      ++total;
      match += pred[s][i] == gold[s][i];
    }
  }
  if (undefined) *undefined = total == 0;
  return total ? static_cast<double>(match) / total : 0.0;
}

struct SignTestResult {
  double p_value = 1.0;
  bool significant = false;
  bool undefined = false;  // every pair tied
  std::size_t wins_a = 0, wins_b = 0;
};

// Two-sided exact binomial sign test over paired per-unit outcomes.
// Outcomes are correctness indicators; ties are dropped.
inline SignTestResult sign_test(const std::vector<int>& outcomes_a,
                                const std::vector<int>& outcomes_b,
                                double alpha = 0.05) {
  if (outcomes_a.size() != outcomes_b.size())
    throw std::invalid_argument("sign_test: length mismatch");
  SignTestResult r;
  for (std::size_t i = 0; i < outcomes_a.size(); ++i) {
    if (outcomes_a[i] > outcomes_b[i]) ++r.wins_a;
    if (outcomes_b[i] > outcomes_a[i]) ++r.wins_b;
  }
  std::size_t n = r.wins_a + r.wins_b;
  if (n == 0) {
    r.undefined = true;
    return r;
  }
  std::size_t k = std::max(r.wins_a, r.wins_b);
  // p = 2 * P[X >= k], X ~ Binomial(n, 1/2), capped at 1; exact summation
  // in log space to stay stable for larger n
  double tail = 0.0;
  for (std::size_t i = k; i <= n; ++i) {
    double log_c = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                   std::lgamma(n - i + 1.0);
    tail += std::exp(log_c - n * std::log(2.0));
  }
  r.p_value = std::min(1.0, 2.0 * tail);
  r.significant = r.p_value < alpha;
  return r;
}

}  // namespace xling
