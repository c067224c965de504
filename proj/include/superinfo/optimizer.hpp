#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "superinfo/tensor.hpp"

namespace superinfo {

/// Bias-corrected Adam over a fixed list of parameter tensors. Slot i of the
/// moment vectors corresponds to params[i] at every step; the caller keeps
/// the ordering stable.
template <Scalar T>
class Adam {
 public:
  explicit Adam(double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    if (!(lr > 0.0)) throw DomainError("adam: learning rate must be positive");
    if (b1_ < 0 || b1_ >= 1 || b2_ < 0 || b2_ >= 1) {
      throw DomainError("adam: betas must lie in [0, 1)");
    }
    if (!(eps_ > 0.0)) throw DomainError("adam: epsilon must be positive");
  }

  void attach(const std::vector<Tensor<T>*>& params) {
    m_.clear();
    v_.clear();
    for (const Tensor<T>* p : params) {
      m_.emplace_back(p->shape);
      v_.emplace_back(p->shape);
    }
  }

  uint64_t step_count() const { return t_; }
  std::vector<Tensor<T>>& moments_m() { return m_; }
  std::vector<Tensor<T>>& moments_v() { return v_; }
  void restore(uint64_t t, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  /// One update over all slots; a null gradient pointer freezes that slot
  /// entirely (no moment decay), keeping frozen-head runs resumable.
  void step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw LogicError("adam: parameter/gradient count does not match attached slots");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      if (grads[i] == nullptr) continue;
      Tensor<T>& p = *params[i];
      const Tensor<T>& g = *grads[i];
      if (g.shape != p.shape) throw ShapeError("adam: gradient shape mismatch");
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (size_t k = 0; k < p.numel(); ++k) {
        const T gk = g.data[k];
        m.data[k] = static_cast<T>(b1_ * m.data[k] + (1.0 - b1_) * gk);
        v.data[k] = static_cast<T>(b2_ * v.data[k] + (1.0 - b2_) * gk * gk);
        const double mhat = m.data[k] / c1;
        const double vhat = v.data[k] / c2;
        p.data[k] = static_cast<T>(p.data[k] - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  uint64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace superinfo
