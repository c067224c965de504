#pragma once

#include <cmath>
#include <string>

#include "superinfo/autodiff.hpp"

namespace superinfo {

/// Coefficients of the combined objective
///   l_total = l_cl + λ1·l_kl_1 + λ2·l_kl_2 + λ3·l_re_1 + λ4·l_re_2
/// plus the contrastive temperature.
struct LossWeights {
  double lambda1 = 0.01;
  double lambda2 = 0.01;
  double lambda3 = 0.1;
  double lambda4 = 0.1;
  double tau = 0.5;

  void validate() const {
    if (!(tau > 0.0)) throw DomainError("loss temperature must be positive");
    for (double l : {lambda1, lambda2, lambda3, lambda4}) {
      if (!(l >= 0.0)) throw DomainError("loss coefficients must be non-negative");
    }
  }
};

/// Per-component scalar values of one loss evaluation, kept in f64 no matter
/// the training dtype so l_total always recombines from the parts exactly.
struct LossBreakdown {
  double l_cl = 0.0;
  double l_kl_1 = 0.0;
  double l_kl_2 = 0.0;
  double l_re_1 = 0.0;
  double l_re_2 = 0.0;
  double l_total = 0.0;
};

// Grouped exactly like the recorded total (contrastive + (KL pair + recon
// pair)) so the double-precision recombination is bit-identical to the value
// the tape produces.
inline double combine_loss(const LossBreakdown& parts, const LossWeights& w) {
  return parts.l_cl + ((parts.l_kl_1 * w.lambda1 + parts.l_kl_2 * w.lambda2) +
                       (parts.l_re_1 * w.lambda3 + parts.l_re_2 * w.lambda4));
}

/// Normalized-temperature cross entropy over a batch of N positive pairs.
/// Rows of z1/z2 are L2-normalized, all 2N embeddings are compared by cosine
/// similarity / tau, each anchor's positive is the same-index row of the
/// other view, and the self-similarity term is excluded by a -1e30 additive
/// mask. The positive's probability is read out through a one-hot product and
/// a row sum, never through masked logits, so no 0·log 0 can arise.
template <Scalar T>
Var<T> nt_xent(Var<T> z1, Var<T> z2, double tau) {
  const Tensor<T>& v1 = z1.value();
  const Tensor<T>& v2 = z2.value();
  if (v1.rank() != 2 || v1.shape != v2.shape) {
    throw ShapeError("nt_xent: views must share a batch x dim shape, got " +
                     shape_str(v1.shape) + " and " + shape_str(v2.shape));
  }
  if (v1.shape[0] < 2) throw DomainError("nt_xent: need at least 2 pairs for negatives");
  if (!(tau > 0.0)) throw DomainError("nt_xent: temperature must be positive");

  const size_t n = v1.shape[0];
  const size_t m = 2 * n;
  Tape<T>& tape = *z1.tape;

  Var<T> zcat = concat_rows(l2_normalize_rows(z1), l2_normalize_rows(z2));
  Var<T> logits = scale(matmul(zcat, transpose(zcat)), 1.0 / tau);

  Tensor<T> diag_mask({m, m});
  for (size_t i = 0; i < m; ++i) diag_mask.data[i * m + i] = static_cast<T>(-1e30);
  Var<T> probs = softmax_rows(add(logits, tape.constant(std::move(diag_mask))));

  Tensor<T> positive({m, m});
  for (size_t i = 0; i < n; ++i) {
    positive.data[i * m + (i + n)] = T(1);
    positive.data[(i + n) * m + i] = T(1);
  }
  Var<T> picked = mul(probs, tape.constant(std::move(positive)));
  Var<T> p_pos = matmul(picked, tape.constant(Tensor<T>::full({m, size_t(1)}, T(1))));
  return scale(sum(log(p_pos)), -1.0 / static_cast<double>(m));
}

/// KL(N(mu, diag(exp(logvar))) || N(0, I)) in closed form,
/// -1/2 sum_d (1 + logvar - mu^2 - exp(logvar)), summed over dims and
/// averaged over the batch.
template <Scalar T>
Var<T> gaussian_kl(Var<T> mu, Var<T> logvar) {
  const Tensor<T>& m = mu.value();
  if (m.rank() != 2 || m.shape != logvar.value().shape) {
    throw ShapeError("gaussian_kl: mu and logvar must share a batch x dim shape");
  }
  Tape<T>& tape = *mu.tape;
  Var<T> ones = tape.constant(Tensor<T>::full(m.shape, T(1)));
  Var<T> inner = sub(add(ones, logvar), add(square(mu), exp(logvar)));
  return scale(sum(inner), -0.5 / static_cast<double>(m.shape[0]));
}

/// Squared L2 reconstruction distance, summed over feature dims and averaged
/// over the batch.
template <Scalar T>
Var<T> recon_loss(Var<T> v, Var<T> v_hat) {
  const Tensor<T>& a = v.value();
  if (a.shape != v_hat.value().shape) {
    throw ShapeError("recon_loss: shapes differ, " + shape_str(a.shape) + " vs " +
                     shape_str(v_hat.value().shape));
  }
  return scale(sum(square(sub(v_hat, v))), 1.0 / static_cast<double>(a.shape[0]));
}

/// The weighted total as a tape node (for backward) alongside the f64
/// breakdown (for logging and invariants). Zero-weight components still
/// appear in the breakdown but contribute exact zeros to the total.
template <Scalar T>
struct TapedLoss {
  Var<T> total;
  LossBreakdown parts;
};

template <Scalar T>
TapedLoss<T> superinfo_total(Var<T> l_cl, Var<T> l_kl_1, Var<T> l_kl_2, Var<T> l_re_1,
                             Var<T> l_re_2, const LossWeights& w) {
  w.validate();
  Var<T> total = add(l_cl, add(add(scale(l_kl_1, w.lambda1), scale(l_kl_2, w.lambda2)),
                               add(scale(l_re_1, w.lambda3), scale(l_re_2, w.lambda4))));
  LossBreakdown parts;
  parts.l_cl = static_cast<double>(l_cl.value().data[0]);
  parts.l_kl_1 = static_cast<double>(l_kl_1.value().data[0]);
  parts.l_kl_2 = static_cast<double>(l_kl_2.value().data[0]);
  parts.l_re_1 = static_cast<double>(l_re_1.value().data[0]);
  parts.l_re_2 = static_cast<double>(l_re_2.value().data[0]);
  parts.l_total = combine_loss(parts, w);
  return TapedLoss<T>{total, parts};
}

}  // namespace superinfo
