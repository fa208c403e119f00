// Central finite-difference gradient checking against tape gradients.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "xling/nn.hpp"

namespace xling {

// f builds a fresh graph from the current parameter values and returns the
// scalar loss. Returns max over all parameter scalars of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const std::function<double(ParamSet&)>& f,
                         ParamSet& params, double eps = 1e-5) {
  params.zero_grad();
  double base = f(params);
  if (!std::isfinite(base))
    throw std::runtime_error("grad_check: non-finite loss");
  // f calls backward itself; snapshot the analytic grads before the
  // perturbation runs clobber them
  std::vector<Tensor> analytic_grads;
  for (auto& e : params.entries()) analytic_grads.push_back(e.grad);
  double worst = 0.0;
  for (std::size_t ei = 0; ei < params.entries().size(); ++ei) {
    auto& e = params.at(ei);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      double saved = e.value[i];
      double analytic = analytic_grads[ei][i];
      ParamSet& p = params;
      e.value[i] = saved + eps;
      p.zero_grad();
      double up = f(p);
      e.value[i] = saved - eps;
      p.zero_grad();
      double down = f(p);
      e.value[i] = saved;
      double numeric = (up - down) / (2.0 * eps);
      double err = std::fabs(analytic - numeric) /
                   std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      worst = std::max(worst, err);
    }
  }
  // restore analytic gradients for the caller
  params.zero_grad();
  f(params);
  return worst;
}

}  // namespace xling
