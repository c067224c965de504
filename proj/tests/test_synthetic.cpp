#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "superinfo/synthetic.hpp"

namespace {

using superinfo::PairedViews;
using superinfo::Rng;
using superinfo::SyntheticSpec;
using superinfo::SyntheticTask;
using superinfo::ValidationError;

TEST(SyntheticSpec, ValidationRejectsDegenerateKnobs) {
  SyntheticSpec ok;
  EXPECT_NO_THROW(ok.validate());

  SyntheticSpec one_class = ok;
  one_class.n_classes = 1;
  EXPECT_THROW(one_class.validate(), ValidationError);

  SyntheticSpec empty = ok;
  empty.d_shared = empty.d_specific = empty.d_nuisance = 0;
  EXPECT_THROW(empty.validate(), ValidationError);

  SyntheticSpec neg_noise = ok;
  neg_noise.noise_std = -0.1;
  EXPECT_THROW(neg_noise.validate(), ValidationError);

  SyntheticSpec neg_scale = ok;
  neg_scale.nuisance_scale = -1.0;
  EXPECT_THROW(neg_scale.validate(), ValidationError);

  SyntheticSpec neg_jitter = ok;
  neg_jitter.jitter_std = -0.5;
  EXPECT_THROW(neg_jitter.validate(), ValidationError);
}

TEST(SyntheticTask, LabelsAreUniformWithinThreeSigma) {
  SyntheticSpec spec;
  spec.n_classes = 4;
  spec.d_shared = 1;
  spec.d_specific = 1;
  spec.d_nuisance = 0;
  spec.mixing_seed = 11;
  const size_t n = 100000;

  SyntheticTask task = SyntheticTask::build(spec);
  Rng rng(2024);
  PairedViews data = task.sample(n, rng);

  std::vector<size_t> counts(spec.n_classes, 0);
  for (uint32_t y : data.labels) {
    ASSERT_LT(y, spec.n_classes);
    ++counts[y];
  }
  const double p = 1.0 / spec.n_classes;
  const double sigma = std::sqrt(n * p * (1.0 - p));
  for (size_t c = 0; c < counts.size(); ++c) {
    EXPECT_NEAR(static_cast<double>(counts[c]), n * p, 3.0 * sigma) << "class " << c;
  }
}

TEST(SyntheticTask, MixingMatricesAreOrthonormal) {
  SyntheticSpec spec;
  spec.d_shared = 3;
  spec.d_specific = 2;
  spec.d_nuisance = 5;
  spec.mixing_seed = 7;
  SyntheticTask task = SyntheticTask::build(spec);
  const size_t d = spec.view_dim();

  for (const auto* m : {&task.mix1, &task.mix2}) {
    ASSERT_EQ(m->size(), d * d);
    for (size_t r = 0; r < d; ++r) {
      for (size_t q = 0; q < d; ++q) {
        double dot = 0.0;
        for (size_t c = 0; c < d; ++c) dot += (*m)[r * d + c] * (*m)[q * d + c];
        EXPECT_NEAR(dot, r == q ? 1.0 : 0.0, 1e-10) << "rows " << r << "," << q;
      }
    }
  }
  // Consecutive draws from one stream: the two mixings must differ.
  EXPECT_NE(0, std::memcmp(task.mix1.data(), task.mix2.data(), d * d * sizeof(double)));
}

TEST(SyntheticTask, IdenticalMixingFlagSharesOneMatrix) {
  SyntheticSpec spec;
  spec.identical_mixing = true;
  SyntheticTask task = SyntheticTask::build(spec);
  ASSERT_EQ(task.mix1.size(), task.mix2.size());
  EXPECT_EQ(0, std::memcmp(task.mix1.data(), task.mix2.data(),
                           task.mix1.size() * sizeof(double)));
}

TEST(SyntheticTask, BuildIsDeterministicAndCodeSeedOnlyMovesCodes) {
  SyntheticSpec spec;
  spec.mixing_seed = 1234;

  SyntheticTask a = SyntheticTask::build(spec);
  SyntheticTask b = SyntheticTask::build(spec);
  EXPECT_EQ(a.shared_codes, b.shared_codes);
  EXPECT_EQ(a.specific_codes_v1, b.specific_codes_v1);
  EXPECT_EQ(a.specific_codes_v2, b.specific_codes_v2);
  EXPECT_EQ(a.mix1, b.mix1);
  EXPECT_EQ(a.mix2, b.mix2);

  SyntheticSpec fresh_task = spec;
  fresh_task.code_seed = 999;
  SyntheticTask c = SyntheticTask::build(fresh_task);
  EXPECT_NE(a.shared_codes, c.shared_codes);
  EXPECT_NE(a.specific_codes_v1, c.specific_codes_v1);
  // Same mixing seed: the observation space is unchanged.
  EXPECT_EQ(a.mix1, c.mix1);
  EXPECT_EQ(a.mix2, c.mix2);
}

TEST(SyntheticTask, ClassCodesAreUnitVectors) {
  SyntheticSpec spec;
  spec.n_classes = 6;
  SyntheticTask task = SyntheticTask::build(spec);
  auto check_unit = [](const std::vector<std::vector<double>>& codes) {
    for (const auto& v : codes) {
      double norm = 0.0;
      for (double x : v) norm += x * x;
      EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-12);
    }
  };
  check_unit(task.shared_codes);
  check_unit(task.specific_codes_v1);
  check_unit(task.specific_codes_v2);
}

TEST(SyntheticTask, SamplingIsDeterministicPerRngSeed) {
  SyntheticSpec spec;
  spec.n_samples = 32;
  SyntheticTask task = SyntheticTask::build(spec);

  Rng r1(55), r2(55), r3(56);
  PairedViews a = task.sample(32, r1);
  PairedViews b = task.sample(32, r2);
  PairedViews c = task.sample(32, r3);

  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(0, std::memcmp(a.v1.data.data(), b.v1.data.data(),
                           a.v1.numel() * sizeof(float)));
  EXPECT_EQ(0, std::memcmp(a.v2.data.data(), b.v2.data.data(),
                           a.v2.numel() * sizeof(float)));
  EXPECT_NE(0, std::memcmp(a.v1.data.data(), c.v1.data.data(),
                           a.v1.numel() * sizeof(float)));
}

// With jitter, noise, and nuisance all silenced, un-mixing a sample with the
// transposed (orthonormal) mixing matrix must recover the class code blocks
// exactly (to float storage precision): shared block equal across views,
// specific blocks equal to the per-view codes, nuisance block zero.
TEST(SyntheticTask, UnmixingRecoversClassCodeBlocks) {
  SyntheticSpec spec;
  spec.n_classes = 3;
  spec.d_shared = 4;
  spec.d_specific = 3;
  spec.d_nuisance = 5;
  spec.jitter_std = 0.0;
  spec.noise_std = 0.0;
  spec.nuisance_scale = 0.0;
  spec.mixing_seed = 17;
  SyntheticTask task = SyntheticTask::build(spec);
  const size_t d = spec.view_dim();

  Rng rng(3);
  PairedViews data = task.sample(16, rng);

  std::vector<double> latent(d);
  for (size_t i = 0; i < data.size(); ++i) {
    const uint32_t y = data.labels[i];
    for (int view = 0; view < 2; ++view) {
      const float* row = view == 0 ? &data.v1.data[i * d] : &data.v2.data[i * d];
      const auto& mix = view == 0 ? task.mix1 : task.mix2;
      const auto& spec_code = view == 0 ? task.specific_codes_v1[y]
                                        : task.specific_codes_v2[y];
      for (size_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (size_t r = 0; r < d; ++r) acc += mix[r * d + c] * row[r];
        latent[c] = acc;
      }
      size_t k = 0;
      for (size_t c = 0; c < spec.d_shared; ++c, ++k) {
        EXPECT_NEAR(latent[k], task.shared_codes[y][c], 1e-5);
      }
      for (size_t c = 0; c < spec.d_specific; ++c, ++k) {
        EXPECT_NEAR(latent[k], spec_code[c], 1e-5);
      }
      for (; k < d; ++k) EXPECT_NEAR(latent[k], 0.0, 1e-5);
    }
  }
}

// The per-sample stream order (label, shared jitter, then per view: specific
// jitter, nuisance, observation noise) is a compatibility contract; resumed
// runs depend on it. Replicate it call-for-call and compare bitwise.
TEST(SyntheticTask, SampleDrawOrderMatchesDocumentedContract) {
  SyntheticSpec spec;
  spec.n_classes = 3;
  spec.d_shared = 2;
  spec.d_specific = 2;
  spec.d_nuisance = 3;
  spec.noise_std = 0.05;
  spec.jitter_std = 0.25;
  spec.nuisance_scale = 1.5;
  spec.mixing_seed = 9;
  SyntheticTask task = SyntheticTask::build(spec);
  const size_t d = spec.view_dim();
  const size_t n = 4;

  Rng lib_rng(77);
  PairedViews got = task.sample(n, lib_rng);

  Rng rng(77);
  std::vector<double> latent(d), mixed(d), shared_jit(spec.d_shared);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t y = static_cast<uint32_t>(rng.next_below(spec.n_classes));
    ASSERT_EQ(got.labels[i], y);
    for (auto& x : shared_jit) x = rng.normal(0.0, spec.jitter_std);
    for (int view = 0; view < 2; ++view) {
      const auto& code = view == 0 ? task.specific_codes_v1[y] : task.specific_codes_v2[y];
      const auto& mix = view == 0 ? task.mix1 : task.mix2;
      size_t k = 0;
      for (size_t c = 0; c < spec.d_shared; ++c, ++k) {
        latent[k] = task.shared_codes[y][c] + shared_jit[c];
      }
      for (size_t c = 0; c < spec.d_specific; ++c, ++k) {
        latent[k] = code[c] + rng.normal(0.0, spec.jitter_std);
      }
      for (size_t c = 0; c < spec.d_nuisance; ++c, ++k) {
        latent[k] = rng.normal(0.0, 1.0) * spec.nuisance_scale;
      }
      for (size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        for (size_t c = 0; c < d; ++c) acc += mix[r * d + c] * latent[c];
        mixed[r] = acc + rng.normal(0.0, spec.noise_std);
      }
      const float* row = view == 0 ? &got.v1.data[i * d] : &got.v2.data[i * d];
      for (size_t r = 0; r < d; ++r) {
        ASSERT_EQ(row[r], static_cast<float>(mixed[r])) << "sample " << i << " coord " << r;
      }
    }
  }
}

TEST(SyntheticTask, GenerateHelperMatchesExplicitTaskPath) {
  SyntheticSpec spec;
  spec.n_samples = 20;
  Rng r1(4), r2(4);
  PairedViews a = superinfo::generate_synthetic(spec, r1);
  PairedViews b = SyntheticTask::build(spec).sample(spec.n_samples, r2);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(0, std::memcmp(a.v1.data.data(), b.v1.data.data(),
                           a.v1.numel() * sizeof(float)));
  EXPECT_EQ(0, std::memcmp(a.v2.data.data(), b.v2.data.data(),
                           a.v2.numel() * sizeof(float)));
}

}  // namespace
