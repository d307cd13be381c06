#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "usrl/nn.hpp"
#include "usrl/tensor.hpp"

namespace usrl {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with decoupled weight decay: the decay term is applied directly to
/// the weights, outside the adaptive update. Parameters flagged non-trainable
/// are never touched (their bits stay identical across steps).
template <typename S>
class AdamW {
 public:
  AdamW(std::vector<Parameter<S>*> params, AdamWConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter<S>* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  std::size_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

  void step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Parameter<S>* p = params_[pi];
      if (!p->trainable) continue;
      Tensor<S>& m = m_[pi];
      Tensor<S>& v = v_[pi];
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double g = static_cast<double>(p->grad[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * g * g;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        const double w = static_cast<double>(p->value[i]);
        p->value[i] = static_cast<S>(
            w - cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.epsilon) +
                                      cfg_.weight_decay * w));
      }
    }
  }

 private:
  std::vector<Parameter<S>*> params_;
  AdamWConfig cfg_;
  std::vector<Tensor<S>> m_;
  std::vector<Tensor<S>> v_;
  std::size_t step_ = 0;
};

/// Spec-facing single step over a parameter list.
template <typename S>
void adamw_step(AdamW<S>& optimizer) {
  optimizer.step();
}

}  // namespace usrl
