#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "usrl/errors.hpp"
#include "usrl/nn.hpp"

namespace usrl {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t scalars_checked = 0;
};

/// Central-difference verification of every trainable scalar.
///
/// loss_fn(bool with_grad) must deterministically evaluate the loss from the
/// current parameter values; when with_grad is true it must also leave exact
/// analytic gradients in each parameter's grad tensor (grads are zeroed here
/// first). Relative error uses max(|analytic|, |numeric|, 1e-8) as the
/// denominator. Run this with S = double.
template <typename S, typename LossFn>
GradCheckResult grad_check(LossFn&& loss_fn, const std::vector<Parameter<S>*>& params,
                           double eps) {
  for (Parameter<S>* p : params) p->grad.zero();
  const double base = loss_fn(true);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");

  std::vector<Tensor<S>> analytic;
  analytic.reserve(params.size());
  for (const Parameter<S>* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<S>* p = params[pi];
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const S saved = p->value[i];
      p->value[i] = saved + static_cast<S>(eps);
      const double up = loss_fn(false);
      p->value[i] = saved - static_cast<S>(eps);
      const double down = loss_fn(false);
      p->value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("grad_check: non-finite loss while perturbing " + p->name);
      const double numeric = (up - down) / (2.0 * eps);
      const double a = static_cast<double>(analytic[pi][i]);
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      ++result.scalars_checked;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = p->name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace usrl
