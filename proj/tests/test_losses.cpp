#include "superinfo/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "superinfo/gradcheck.hpp"
#include "superinfo/info.hpp"
#include "superinfo/rng.hpp"

namespace {

using superinfo::DomainError;
using superinfo::gaussian_kl;
using superinfo::LossBreakdown;
using superinfo::LossWeights;
using superinfo::nt_xent;
using superinfo::recon_loss;
using superinfo::Rng;
using superinfo::ShapeError;
using superinfo::Tape;
using superinfo::Tensor;
using superinfo::Var;

Tensor<double> rand_tensor(Rng& rng, std::vector<size_t> shape, double lo = -2, double hi = 2) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// ---------------------------------------------------------------------------
// Test-side NT-Xent oracle: direct 2N-way softmax cross-entropy over cosine
// similarities, no shared code with the library graph construction.
double oracle_nt_xent(const Tensor<double>& z1, const Tensor<double>& z2, double tau) {
  const size_t n = z1.shape[0], d = z1.shape[1], m = 2 * n;
  std::vector<std::vector<double>> e(m, std::vector<double>(d));
  for (size_t i = 0; i < n; ++i) {
    double n1 = 0, n2 = 0;
    for (size_t c = 0; c < d; ++c) {
      n1 += z1.data[i * d + c] * z1.data[i * d + c];
      n2 += z2.data[i * d + c] * z2.data[i * d + c];
    }
    n1 = std::sqrt(n1) + 1e-12;
    n2 = std::sqrt(n2) + 1e-12;
    for (size_t c = 0; c < d; ++c) {
      e[i][c] = z1.data[i * d + c] / n1;
      e[i + n][c] = z2.data[i * d + c] / n2;
    }
  }
  double loss = 0;
  for (size_t a = 0; a < m; ++a) {
    const size_t pos = a < n ? a + n : a - n;
    double denom = 0, pos_term = 0;
    for (size_t b = 0; b < m; ++b) {
      if (b == a) continue;
      double dot = 0;
      for (size_t c = 0; c < d; ++c) dot += e[a][c] * e[b][c];
      const double t = std::exp(dot / tau);
      denom += t;
      if (b == pos) pos_term = t;
    }
    loss -= std::log(pos_term / denom);
  }
  return loss / static_cast<double>(m);
}

TEST(NtXent, AllEqualEmbeddingsGiveLog2Nm1) {
  for (size_t n : {2u, 3u, 8u, 32u}) {
    Tape<double> tape;
    Tensor<double> z = Tensor<double>::full({n, 5}, 0.7);
    Var<double> loss =
        nt_xent(tape.constant(Tensor<double>(z)), tape.constant(Tensor<double>(z)), 0.5);
    EXPECT_NEAR(loss.value().data[0], std::log(2.0 * double(n) - 1.0), 1e-9) << "n=" << n;
  }
}

TEST(NtXent, HandComputedTwoPairCase) {
  // positive pairs at cosine +1, every negative at cosine -1, tau = 0.5:
  // each anchor's loss is -ln(e^2 / (e^2 + 2 e^-2))
  Tape<double> tape;
  Tensor<double> z1({2, 2}, {1, 0, -1, 0});
  Tensor<double> z2({2, 2}, {1, 0, -1, 0});
  Var<double> loss = nt_xent(tape.constant(std::move(z1)), tape.constant(std::move(z2)), 0.5);
  const double expect =
      -std::log(std::exp(2.0) / (std::exp(2.0) + 2.0 * std::exp(-2.0)));
  EXPECT_NEAR(loss.value().data[0], expect, 1e-12);
  EXPECT_NEAR(loss.value().data[0], 0.0359763, 1e-6);
}

TEST(NtXent, MatchesDirectSoftmaxOracleOnRandomBatches) {
  Rng rng(88);
  for (int trial = 0; trial < 25; ++trial) {
    const size_t n = 2 + rng.next_below(7);
    const size_t d = 2 + rng.next_below(6);
    const double tau = rng.uniform(0.2, 1.5);
    Tensor<double> z1 = rand_tensor(rng, {n, d});
    Tensor<double> z2 = rand_tensor(rng, {n, d});
    Tape<double> tape;
    Var<double> loss = nt_xent(tape.constant(Tensor<double>(z1)),
                               tape.constant(Tensor<double>(z2)), tau);
    ASSERT_NEAR(loss.value().data[0], oracle_nt_xent(z1, z2, tau), 1e-10)
        << "trial " << trial;
  }
}

TEST(NtXent, InvariantToPositiveRescaling) {
  Rng rng(89);
  Tensor<double> z1 = rand_tensor(rng, {4, 3});
  Tensor<double> z2 = rand_tensor(rng, {4, 3});
  Tape<double> tape;
  double base = nt_xent(tape.constant(Tensor<double>(z1)),
                        tape.constant(Tensor<double>(z2)), 0.5)
                    .value()
                    .data[0];
  Tensor<double> s1 = superinfo::kern::scale(z1, 3.7);
  Tensor<double> s2 = superinfo::kern::scale(z2, 3.7);
  Tape<double> tape2;
  double scaled = nt_xent(tape2.constant(std::move(s1)), tape2.constant(std::move(s2)), 0.5)
                      .value()
                      .data[0];
  EXPECT_NEAR(scaled, base, 1e-11);
}

TEST(NtXent, LowerBoundAndValidation) {
  Rng rng(90);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor<double> z1 = rand_tensor(rng, {5, 4});
    Tensor<double> z2 = rand_tensor(rng, {5, 4});
    Tape<double> tape;
    double v = nt_xent(tape.constant(std::move(z1)), tape.constant(std::move(z2)), 0.7)
                   .value()
                   .data[0];
    ASSERT_GE(v, 0.0);
  }

  Tape<double> tape;
  Var<double> single = tape.constant(Tensor<double>({1, 4}, {1, 2, 3, 4}));
  EXPECT_THROW(nt_xent(single, single, 0.5), DomainError);
  Var<double> a = tape.constant(Tensor<double>({2, 3}));
  Var<double> b = tape.constant(Tensor<double>({3, 3}));
  EXPECT_THROW(nt_xent(a, b, 0.5), ShapeError);
  Var<double> c = tape.constant(Tensor<double>({2, 3}));
  EXPECT_THROW(nt_xent(a, c, 0.0), DomainError);
  EXPECT_THROW(nt_xent(a, c, -1.0), DomainError);
}

TEST(NtXent, GradcheckPassesOnSmallBatch) {
  Rng rng(91);
  std::vector<Tensor<double>> params;
  params.push_back(rand_tensor(rng, {3, 4}));
  params.push_back(rand_tensor(rng, {3, 4}));
  auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
    return nt_xent(v[0], v[1], 0.5);
  };
  auto report = superinfo::finite_diff_check<double>(build, params, 1e-6);
  EXPECT_LE(report.max_rel_err, 1e-6);
}

// ---------------------------------------------------------------------------

TEST(GaussianKl, StandardNormalIsExactlyZero) {
  Tape<double> tape;
  Var<double> kl = gaussian_kl(tape.constant(Tensor<double>({3, 4})),
                               tape.constant(Tensor<double>({3, 4})));
  EXPECT_EQ(kl.value().data[0], 0.0);
}

TEST(GaussianKl, ClosedFormMatchesDirectFormula) {
  Rng rng(92);
  for (int trial = 0; trial < 20; ++trial) {
    const size_t b = 1 + rng.next_below(5), d = 1 + rng.next_below(6);
    Tensor<double> mu = rand_tensor(rng, {b, d}, -1.5, 1.5);
    Tensor<double> lv = rand_tensor(rng, {b, d}, -1.0, 1.0);
    double expect = 0;
    for (size_t i = 0; i < b * d; ++i) {
      expect += -0.5 * (1.0 + lv.data[i] - mu.data[i] * mu.data[i] - std::exp(lv.data[i]));
    }
    expect /= static_cast<double>(b);
    Tape<double> tape;
    Var<double> kl =
        gaussian_kl(tape.constant(Tensor<double>(mu)), tape.constant(Tensor<double>(lv)));
    ASSERT_NEAR(kl.value().data[0], expect, 1e-12);
    ASSERT_GE(kl.value().data[0], -1e-9);  // KL is non-negative
  }
}

TEST(GaussianKl, AgreesWithMonteCarloEstimate) {
  // MC oracle: KL = E_{x~q}[log q(x) - log p(x)] with q = N(mu, e^lv), p = N(0,1)
  Rng rng(93);
  for (int setting = 0; setting < 5; ++setting) {
    const double mu = rng.uniform(-1.5, 1.5);
    const double lv = rng.uniform(-1.0, 1.0);
    const double sd = std::exp(0.5 * lv);
    double acc = 0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      const double x = rng.normal(mu, sd);
      const double lq = -0.5 * std::log(2 * M_PI) - 0.5 * lv - (x - mu) * (x - mu) / (2 * sd * sd);
      const double lp = -0.5 * std::log(2 * M_PI) - x * x / 2;
      acc += lq - lp;
    }
    Tape<double> tape;
    Var<double> kl = gaussian_kl(tape.constant(Tensor<double>({1, 1}, {mu})),
                                 tape.constant(Tensor<double>({1, 1}, {lv})));
    EXPECT_NEAR(kl.value().data[0], acc / n, 1e-2) << "mu=" << mu << " lv=" << lv;
  }
}

TEST(GaussianKl, TwoPointBatchReproducesLinearChannelBound) {
  // mu = ±w, logvar = ln s² on a 2-row batch: the batch mean equals
  // ½(w² + s² − ln s² − 1), the expected KL of the linear-Gaussian channel.
  Rng rng(94);
  for (int trial = 0; trial < 10; ++trial) {
    const double w = rng.uniform(-3.0, 3.0);
    const double s2 = rng.uniform(0.1, 4.0);
    Tape<double> tape;
    Tensor<double> mu({2, 1}, {w, -w});
    Tensor<double> lv = Tensor<double>::full({2, 1}, std::log(s2));
    Var<double> kl = gaussian_kl(tape.constant(std::move(mu)), tape.constant(std::move(lv)));
    const double expect = 0.5 * (w * w + s2 - std::log(s2) - 1.0);
    ASSERT_NEAR(kl.value().data[0], expect, 1e-12);
    // and it dominates the analytic channel MI by exactly ½(a−1−ln a), a=s²+w²
    const double mi = superinfo::gaussian_linear_mi(w, std::sqrt(s2));
    const double a = s2 + w * w;
    ASSERT_NEAR(kl.value().data[0] - mi, 0.5 * (a - 1.0 - std::log(a)), 1e-10);
    ASSERT_GE(kl.value().data[0] - mi, -1e-12);
  }
}

TEST(GaussianKl, ShapeValidationAndGradcheck) {
  Tape<double> tape;
  EXPECT_THROW(gaussian_kl(tape.constant(Tensor<double>({2, 3})),
                           tape.constant(Tensor<double>({2, 4}))),
               ShapeError);

  Rng rng(95);
  std::vector<Tensor<double>> params;
  params.push_back(rand_tensor(rng, {4, 3}, -1.5, 1.5));
  params.push_back(rand_tensor(rng, {4, 3}, -1.0, 1.0));
  auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
    return gaussian_kl(v[0], v[1]);
  };
  auto report = superinfo::finite_diff_check<double>(build, params, 1e-6);
  EXPECT_LE(report.max_rel_err, 1e-6);
}

// ---------------------------------------------------------------------------

TEST(ReconLoss, MatchesHandLoop) {
  Rng rng(96);
  Tensor<double> v = rand_tensor(rng, {3, 5});
  Tensor<double> vh = rand_tensor(rng, {3, 5});
  double expect = 0;
  for (size_t i = 0; i < v.numel(); ++i) {
    expect += (vh.data[i] - v.data[i]) * (vh.data[i] - v.data[i]);
  }
  expect /= 3.0;
  Tape<double> tape;
  Var<double> l =
      recon_loss(tape.constant(Tensor<double>(v)), tape.constant(Tensor<double>(vh)));
  EXPECT_NEAR(l.value().data[0], expect, 1e-12);

  Var<double> same = tape.constant(Tensor<double>(v));
  EXPECT_EQ(recon_loss(same, same).value().data[0], 0.0);
  EXPECT_THROW(recon_loss(tape.constant(Tensor<double>({2, 3})),
                          tape.constant(Tensor<double>({3, 2}))),
               ShapeError);
}

TEST(ReconLoss, Gradcheck) {
  Rng rng(97);
  std::vector<Tensor<double>> params;
  params.push_back(rand_tensor(rng, {4, 3}));
  params.push_back(rand_tensor(rng, {4, 3}));
  auto build = [](Tape<double>& t, std::vector<Var<double>>& v) {
    return recon_loss(v[0], v[1]);
  };
  auto report = superinfo::finite_diff_check<double>(build, params, 1e-6);
  EXPECT_LE(report.max_rel_err, 1e-6);
}

// ---------------------------------------------------------------------------

TEST(LossWeights, Validation) {
  EXPECT_NO_THROW(LossWeights{}.validate());
  EXPECT_THROW((LossWeights{-0.1, 0, 0, 0, 0.5}).validate(), DomainError);
  EXPECT_THROW((LossWeights{0, 0, 0, 0, 0.0}).validate(), DomainError);
  EXPECT_THROW((LossWeights{0, 0, 0, 0, -0.5}).validate(), DomainError);
}

TEST(CombinedLoss, BreakdownRecombinesExactly) {
  Rng rng(98);
  for (int trial = 0; trial < 10; ++trial) {
    Tape<double> tape;
    Var<double> cl = tape.constant(Tensor<double>::scalar(rng.uniform(0, 4)));
    Var<double> k1 = tape.constant(Tensor<double>::scalar(rng.uniform(0, 50)));
    Var<double> k2 = tape.constant(Tensor<double>::scalar(rng.uniform(0, 50)));
    Var<double> r1 = tape.constant(Tensor<double>::scalar(rng.uniform(0, 30)));
    Var<double> r2 = tape.constant(Tensor<double>::scalar(rng.uniform(0, 30)));
    LossWeights w{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1),
                  0.5};
    auto total = superinfo::superinfo_total(cl, k1, k2, r1, r2, w);
    const LossBreakdown& p = total.parts;
    EXPECT_NEAR(p.l_total,
                p.l_cl + w.lambda1 * p.l_kl_1 + w.lambda2 * p.l_kl_2 + w.lambda3 * p.l_re_1 +
                    w.lambda4 * p.l_re_2,
                1e-12);
    // the taped value recombines from the same f64 arithmetic
    EXPECT_EQ(total.total.value().data[0], p.l_total);
  }
}

TEST(CombinedLoss, ZeroWeightsLeaveContrastiveTermBitExact) {
  Tape<double> tape;
  Var<double> cl = tape.constant(Tensor<double>::scalar(1.2345678901234567));
  Var<double> k1 = tape.constant(Tensor<double>::scalar(77.7));
  Var<double> k2 = tape.constant(Tensor<double>::scalar(88.8));
  Var<double> r1 = tape.constant(Tensor<double>::scalar(99.9));
  Var<double> r2 = tape.constant(Tensor<double>::scalar(11.1));
  auto total = superinfo::superinfo_total(cl, k1, k2, r1, r2, LossWeights{0, 0, 0, 0, 0.5});
  double got = total.total.value().data[0];
  double want = 1.2345678901234567;
  EXPECT_EQ(std::memcmp(&got, &want, sizeof(double)), 0);
}

TEST(CombinedLoss, BreakdownStaysF64ForF32Graphs) {
  Tape<float> tape;
  Var<float> cl = tape.constant(Tensor<float>::scalar(1.25f));
  Var<float> k1 = tape.constant(Tensor<float>::scalar(3.5f));
  Var<float> k2 = tape.constant(Tensor<float>::scalar(4.5f));
  Var<float> r1 = tape.constant(Tensor<float>::scalar(5.5f));
  Var<float> r2 = tape.constant(Tensor<float>::scalar(6.5f));
  LossWeights w{0.25, 0.25, 0.25, 0.25, 0.5};
  auto total = superinfo::superinfo_total(cl, k1, k2, r1, r2, w);
  // parts are doubles; recombination identity holds at f64 precision even
  // though the graph runs in f32
  EXPECT_NEAR(total.parts.l_total,
              total.parts.l_cl + 0.25 * (total.parts.l_kl_1 + total.parts.l_kl_2 +
                                         total.parts.l_re_1 + total.parts.l_re_2),
              1e-12);
  static_assert(std::is_same_v<decltype(total.parts.l_cl), double>);
}

TEST(CombinedLoss, FullObjectiveGradcheck) {
  // encoder-to-total finite difference on a tiny two-view batch
  Rng rng(99);
  std::vector<Tensor<double>> params;
  params.push_back(rand_tensor(rng, {4, 3}));  // z1 projection
  params.push_back(rand_tensor(rng, {4, 3}));  // z2 projection
  params.push_back(rand_tensor(rng, {4, 2}, -1.0, 1.0));  // mu1
  params.push_back(rand_tensor(rng, {4, 2}, -1.0, 1.0));  // lv1
  params.push_back(rand_tensor(rng, {4, 2}, -1.0, 1.0));  // mu2
  params.push_back(rand_tensor(rng, {4, 2}, -1.0, 1.0));  // lv2
  params.push_back(rand_tensor(rng, {4, 5}));  // recon 1
  params.push_back(rand_tensor(rng, {4, 5}));  // recon 2
  Tensor<double> v1 = rand_tensor(rng, {4, 5});
  Tensor<double> v2 = rand_tensor(rng, {4, 5});

  LossWeights w{0.01, 0.01, 0.1, 0.1, 0.5};
  auto build = [&](Tape<double>& t, std::vector<Var<double>>& p) {
    Var<double> l_cl = nt_xent(p[0], p[1], w.tau);
    Var<double> k1 = gaussian_kl(p[2], p[3]);
    Var<double> k2 = gaussian_kl(p[4], p[5]);
    Var<double> r1 = recon_loss(t.constant(Tensor<double>(v1)), p[6]);
    Var<double> r2 = recon_loss(t.constant(Tensor<double>(v2)), p[7]);
    return superinfo::superinfo_total(l_cl, k1, k2, r1, r2, w).total;
  };
  auto report = superinfo::finite_diff_check<double>(build, params, 1e-5);
  EXPECT_LE(report.max_rel_err, 1e-5);
}

}  // namespace
