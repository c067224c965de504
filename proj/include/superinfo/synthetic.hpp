#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "superinfo/rng.hpp"
#include "superinfo/tensor.hpp"

namespace superinfo {

/// Knobs of the two-view synthetic task. Each view is an orthonormal mix of
/// three latent blocks: a class-coded block shared by both views, a per-view
/// class-coded block (task-relevant but not shared), and a per-view nuisance
/// block carrying no task information.
struct SyntheticSpec {
  uint32_t n_classes = 4;
  size_t d_shared = 4;
  size_t d_specific = 4;
  size_t d_nuisance = 8;
  size_t n_samples = 1024;
  uint64_t mixing_seed = 1;
  double noise_std = 0.05;
  double nuisance_scale = 1.0;
  double jitter_std = 0.25;       // within-class spread of the code blocks
  bool identical_mixing = false;  // give view 2 the view-1 mixing matrix
  uint64_t code_seed = 0;         // 0: class codes come from mixing_seed;
                                  // nonzero: separate stream (fresh task on
                                  // the same mixing, for transfer probes)

  size_t view_dim() const { return d_shared + d_specific + d_nuisance; }

  void validate() const {
    if (n_classes < 2) throw ValidationError("synthetic task needs at least 2 classes");
    if (view_dim() == 0) throw ValidationError("synthetic view dimension must be >= 1");
    if (noise_std < 0 || nuisance_scale < 0 || jitter_std < 0) {
      throw ValidationError("synthetic noise scales must be non-negative");
    }
  }
};

/// Two aligned views plus labels; row i of v1 and v2 describe the same
/// underlying sample.
struct PairedViews {
  Tensor<float> v1;
  Tensor<float> v2;
  std::vector<uint32_t> labels;

  size_t size() const { return labels.size(); }
  size_t dim() const { return v1.shape[1]; }
};

namespace detail {

/// Random unit vector; the all-but-impossible zero draw is rejected.
inline std::vector<double> unit_vector(Rng& rng, size_t d) {
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal(0.0, 1.0);
      norm += x * x;
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-9 && d > 0);
  for (auto& x : v) x /= norm;
  return v;
}

/// Orthonormal D x D matrix from Gram-Schmidt over Gaussian rows,
/// row-major, deterministic for a given rng state.
inline std::vector<double> orthonormal_matrix(Rng& rng, size_t d) {
  std::vector<double> m(d * d);
  for (size_t r = 0; r < d; ++r) {
    while (true) {
      for (size_t c = 0; c < d; ++c) m[r * d + c] = rng.normal(0.0, 1.0);
      for (size_t p = 0; p < r; ++p) {
        double dot = 0.0;
        for (size_t c = 0; c < d; ++c) dot += m[r * d + c] * m[p * d + c];
        for (size_t c = 0; c < d; ++c) m[r * d + c] -= dot * m[p * d + c];
      }
      double norm = 0.0;
      for (size_t c = 0; c < d; ++c) norm += m[r * d + c] * m[r * d + c];
      norm = std::sqrt(norm);
      if (norm > 1e-9) {
        for (size_t c = 0; c < d; ++c) m[r * d + c] /= norm;
        break;
      }
    }
  }
  return m;
}

}  // namespace detail

/// Fixed per-task structure shared by all samples: class codes and mixing
/// matrices. Splitting this out lets train and test sets share one task.
struct SyntheticTask {
  SyntheticSpec spec;
  std::vector<std::vector<double>> shared_codes;       // per class, d_shared
  std::vector<std::vector<double>> specific_codes_v1;  // per class, d_specific
  std::vector<std::vector<double>> specific_codes_v2;
  std::vector<double> mix1, mix2;                      // D x D row-major

  static SyntheticTask build(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticTask t;
    t.spec = spec;

    Rng code_rng(spec.code_seed != 0 ? spec.code_seed : spec.mixing_seed);
    for (uint32_t y = 0; y < spec.n_classes; ++y) {
      t.shared_codes.push_back(detail::unit_vector(code_rng, spec.d_shared));
      t.specific_codes_v1.push_back(detail::unit_vector(code_rng, spec.d_specific));
      t.specific_codes_v2.push_back(detail::unit_vector(code_rng, spec.d_specific));
    }

    Rng mix_rng(spec.mixing_seed);
    const size_t d = spec.view_dim();
    t.mix1 = detail::orthonormal_matrix(mix_rng, d);
    t.mix2 = spec.identical_mixing ? t.mix1 : detail::orthonormal_matrix(mix_rng, d);
    return t;
  }

  /// Draws n samples. Per sample the stream is consumed in a fixed order:
  /// label, shared jitter (used by both views), then per view its specific
  /// jitter, nuisance block, and observation noise.
  PairedViews sample(size_t n, Rng& rng) const {
    const size_t d = spec.view_dim();
    PairedViews out{Tensor<float>({n, d}), Tensor<float>({n, d}), std::vector<uint32_t>(n)};
    std::vector<double> latent(d), mixed(d), shared_jit(spec.d_shared);

    for (size_t i = 0; i < n; ++i) {
      const uint32_t y = static_cast<uint32_t>(rng.next_below(spec.n_classes));
      out.labels[i] = y;
      for (auto& x : shared_jit) x = rng.normal(0.0, spec.jitter_std);

      for (int view = 0; view < 2; ++view) {
        const auto& spec_code = view == 0 ? specific_codes_v1[y] : specific_codes_v2[y];
        const auto& mix = view == 0 ? mix1 : mix2;
        size_t k = 0;
        for (size_t c = 0; c < spec.d_shared; ++c, ++k) {
          latent[k] = shared_codes[y][c] + shared_jit[c];
        }
        for (size_t c = 0; c < spec.d_specific; ++c, ++k) {
          latent[k] = spec_code[c] + rng.normal(0.0, spec.jitter_std);
        }
        for (size_t c = 0; c < spec.d_nuisance; ++c, ++k) {
          latent[k] = rng.normal(0.0, 1.0) * spec.nuisance_scale;
        }
        for (size_t r = 0; r < d; ++r) {
          double acc = 0.0;
          for (size_t c = 0; c < d; ++c) acc += mix[r * d + c] * latent[c];
          mixed[r] = acc;
        }
        if (spec.noise_std > 0) {
          for (size_t r = 0; r < d; ++r) mixed[r] += rng.normal(0.0, spec.noise_std);
        }
        Tensor<float>& dst = view == 0 ? out.v1 : out.v2;
        for (size_t r = 0; r < d; ++r) dst.data[i * d + r] = static_cast<float>(mixed[r]);
      }
    }
    return out;
  }
};

/// One-call generation path: build the task, then draw spec.n_samples rows.
inline PairedViews generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
  return SyntheticTask::build(spec).sample(spec.n_samples, rng);
}

}  // namespace superinfo
