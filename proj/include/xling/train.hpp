// Optimization: Adam with classic L2, SGD+momentum under the 1cycle
// schedule, early stopping, and seeded random hyperparameter search.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xling/nn.hpp"

namespace xling {

struct TrainConfig {
  std::string optimizer = "adam";  // adam | onecycle_sgd
  double lr = 0.001;
  double l2_lambda = 0.001;
  std::size_t epochs = 15;
  std::size_t batch_size = 8;
  double dropout_embed = 0.25;
  double dropout_tagger = 0.15;
  std::size_t patience = 2;
  std::uint64_t seed = 0;
};

class AdamOptimizer {
 public:
  AdamOptimizer(double lr = 0.001, double l2 = 0.0, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), l2_(l2), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamSet& ps) {
    if (m_.empty()) {
      for (auto& e : ps.entries()) {
        m_.push_back(Tensor(e.value.shape));
        v_.push_back(Tensor(e.value.shape));
      }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& e = ps.at(i);
      for (std::size_t j = 0; j < e.value.size(); ++j) {
        double g = e.grad[j] + l2_ * e.value[j];  // classic L2, not decoupled
        if (!std::isfinite(g))
          throw std::runtime_error("divergence: non-finite gradient in " +
                                   e.name);
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
        double mhat = m_[i][j] / bc1;
        double vhat = v_[i][j] / bc2;
        e.value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  std::size_t steps() const { return t_; }

 private:
  double lr_, l2_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// lr: max_lr/10 -> max_lr over the warm segment, symmetric anneal back to
// max_lr/10, then down to max_lr/final_div; momentum moves inversely
struct OneCycleSchedule {
  double max_lr = 0.1;
  std::size_t total_steps = 0;
  double warm_frac = 0.45;
  double final_div = 100.0;
  double momentum_high = 0.95;
  double momentum_low = 0.85;

  std::pair<double, double> at(std::size_t step) const {
    if (step >= total_steps)
      throw std::out_of_range("one_cycle: step " + std::to_string(step) +
                              " >= total " + std::to_string(total_steps));
    double lo = max_lr / 10.0;
    auto warm_end = static_cast<double>(total_steps) * warm_frac;
    auto cool_end = warm_end * 2.0;
    double s = static_cast<double>(step);
    double lr, mom;
    if (s <= warm_end) {
      double f = warm_end > 0 ? s / warm_end : 1.0;
      lr = lo + f * (max_lr - lo);
      mom = momentum_high + f * (momentum_low - momentum_high);
    } else if (s <= cool_end) {
      double f = (s - warm_end) / (cool_end - warm_end);
      lr = max_lr + f * (lo - max_lr);
      mom = momentum_low + f * (momentum_high - momentum_low);
    } else {
      double f = (s - cool_end) /
                 std::max(1.0, static_cast<double>(total_steps - 1) - cool_end);
      lr = lo + f * (max_lr / final_div - lo);
      mom = momentum_high;
    }
    return {lr, mom};
  }
};

class SgdMomentumOptimizer {
 public:
  SgdMomentumOptimizer(OneCycleSchedule schedule, double l2 = 0.0)
      : schedule_(schedule), l2_(l2) {}

  void step(ParamSet& ps) {
    if (vel_.empty())
      for (auto& e : ps.entries()) vel_.push_back(Tensor(e.value.shape));
    auto [lr, mom] = schedule_.at(std::min(t_, schedule_.total_steps - 1));
    ++t_;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& e = ps.at(i);
      for (std::size_t j = 0; j < e.value.size(); ++j) {
        double g = e.grad[j] + l2_ * e.value[j];
        if (!std::isfinite(g))
          throw std::runtime_error("divergence: non-finite gradient in " +
                                   e.name);
        vel_[i][j] = mom * vel_[i][j] - lr * g;
        e.value[j] += vel_[i][j];
      }
    }
  }

 private:
  OneCycleSchedule schedule_;
  double l2_;
  std::size_t t_ = 0;
  std::vector<Tensor> vel_;
};

// true iff the last `patience` epochs each scored strictly below the best
// seen before them
inline bool early_stop(const std::vector<double>& history,
                       std::size_t patience) {
  if (history.empty()) throw std::invalid_argument("early_stop: empty history");
  if (history.size() < patience + 1) return false;
  double best = history[0];
  std::size_t run = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] < best)
      ++run;
    else
      run = 0;
    best = std::max(best, history[i]);
  }
  return run >= patience;
}

// ---------------------------------------------------------------------------
// random hyperparameter search

struct SearchRange {
  double lo = 0.0, hi = 1.0;
  bool log_scale = false;  // log-uniform for rates
};

struct SearchTrial {
  std::map<std::string, double> config;
  double score = 0.0;
  bool failed = false;
  std::string error;
};

struct SearchResult {
  SearchTrial best;
  std::vector<SearchTrial> trace;
};

inline SearchResult random_search(
    const std::map<std::string, SearchRange>& space, std::size_t budget,
    const std::function<double(const std::map<std::string, double>&)>& objective,
    std::uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("random_search: budget < 1");
  for (const auto& [name, r] : space)
    if (!(r.lo < r.hi) || (r.log_scale && r.lo <= 0.0))
      throw std::invalid_argument("random_search: bad range for " + name);
  Rng rng(seed);
  SearchResult result;
  bool have_best = false;
  for (std::size_t i = 0; i < budget; ++i) {
    SearchTrial trial;
    for (const auto& [name, r] : space)
      trial.config[name] =
          r.log_scale ? rng.log_uniform(r.lo, r.hi) : rng.uniform(r.lo, r.hi);
    try {
      trial.score = objective(trial.config);
    } catch (const std::exception& e) {
      trial.failed = true;
      trial.error = e.what();
    }
    if (!trial.failed && (!have_best || trial.score > result.best.score)) {
      result.best = trial;
      have_best = true;
    }
    result.trace.push_back(std::move(trial));
  }
  if (!have_best)
    throw std::runtime_error("random_search: every configuration failed");
  return result;
}

// per-epoch record for the metrics log
struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_score = 0.0;
  double lr = 0.0;
};

inline std::string format_epoch_record(const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "epoch=%zu train_loss=%.6f dev_score=%.6f lr=%.6g",
                r.epoch, r.train_loss, r.dev_score, r.lr);
  return buf;
}

}  // namespace xling
