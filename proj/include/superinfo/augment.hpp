#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "superinfo/container.hpp"
#include "superinfo/rng.hpp"
#include "superinfo/synthetic.hpp"
#include "superinfo/tensor.hpp"

namespace superinfo {

/// View-generating perturbations: crop/flip apply to image-shaped data only,
/// channel scaling and additive noise apply to everything. A default config
/// is the identity.
struct AugmentationConfig {
  double crop_lo = 1.0, crop_hi = 1.0;    // crop side fraction range ⊆ (0,1]
  double flip_prob = 0.0;                 // horizontal mirror probability
  double noise_std = 0.0;                 // additive Gaussian, per element
  double scale_lo = 1.0, scale_hi = 1.0;  // per-channel multiplicative range

  void validate() const {
    if (!(crop_lo > 0.0) || crop_lo > crop_hi || crop_hi > 1.0) {
      throw ValidationError("crop fraction range must satisfy 0 < lo <= hi <= 1");
    }
    if (flip_prob < 0.0 || flip_prob > 1.0) {
      throw ValidationError("flip probability must lie in [0, 1]");
    }
    if (noise_std < 0.0) throw ValidationError("augmentation noise std must be >= 0");
    if (scale_lo > scale_hi) throw ValidationError("channel scale range must have lo <= hi");
  }
};

namespace detail {

/// Vector data: one channel-scale draw, then optional per-element noise.
/// Draw order is part of the determinism contract.
inline void augment_vector(const float* in, float* out, size_t d,
                           const AugmentationConfig& cfg, Rng& rng) {
  const double s = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  if (cfg.noise_std > 0.0) {
    for (size_t i = 0; i < d; ++i) {
      out[i] = static_cast<float>(in[i] * s + rng.normal(0.0, cfg.noise_std));
    }
  } else {
    for (size_t i = 0; i < d; ++i) out[i] = static_cast<float>(in[i] * s);
  }
}

/// Image data, channel-major C x H x W. Order: crop-and-resize (nearest
/// neighbor), horizontal flip, per-channel scale, additive noise. The crop
/// fraction, offsets, and flip coin are always drawn so the stream position
/// depends only on the config, not on the outcomes.
inline void augment_image(const float* in, float* out, std::array<uint32_t, 3> chw,
                          const AugmentationConfig& cfg, Rng& rng) {
  const size_t C = chw[0], H = chw[1], W = chw[2];
  const double frac = rng.uniform(cfg.crop_lo, cfg.crop_hi);
  const size_t ch = std::max<size_t>(1, static_cast<size_t>(std::lround(frac * H)));
  const size_t cw = std::max<size_t>(1, static_cast<size_t>(std::lround(frac * W)));
  const size_t oy = rng.next_below(H - ch + 1);
  const size_t ox = rng.next_below(W - cw + 1);
  const bool flip = rng.next_double() < cfg.flip_prob;

  for (size_t c = 0; c < C; ++c) {
    const double s = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    for (size_t y = 0; y < H; ++y) {
      const size_t sy = oy + y * ch / H;
      for (size_t x = 0; x < W; ++x) {
        const size_t xi = flip ? W - 1 - x : x;
        const size_t sx = ox + xi * cw / W;
        out[(c * H + y) * W + x] = static_cast<float>(in[(c * H + sy) * W + sx] * s);
      }
    }
  }
  if (cfg.noise_std > 0.0) {
    for (size_t i = 0; i < C * H * W; ++i) {
      out[i] = static_cast<float>(out[i] + rng.normal(0.0, cfg.noise_std));
    }
  }
}

}  // namespace detail

/// Augments one sample row; shape (vector vs image) decides which pipeline
/// applies. Output shape always equals input shape.
inline void augment_sample(const float* in, float* out, size_t dim,
                           DatasetContainer::ShapeKind kind, std::array<uint32_t, 3> chw,
                           const AugmentationConfig& cfg, Rng& rng) {
  cfg.validate();
  if (kind == DatasetContainer::ShapeKind::Image) {
    detail::augment_image(in, out, chw, cfg, rng);
  } else {
    detail::augment_vector(in, out, dim, cfg, rng);
  }
}

inline Tensor<float> augment(const Tensor<float>& sample, const AugmentationConfig& cfg,
                             Rng& rng,
                             DatasetContainer::ShapeKind kind = DatasetContainer::ShapeKind::Vector,
                             std::array<uint32_t, 3> chw = {0, 0, 0}) {
  Tensor<float> out(sample.shape);
  augment_sample(sample.data.data(), out.data.data(), sample.numel(), kind, chw, cfg, rng);
  return out;
}

/// One training minibatch: N aligned augmented view pairs.
struct ViewBatch {
  Tensor<float> x1;  // N x D
  Tensor<float> x2;  // N x D
  std::vector<uint32_t> indices;  // source rows, for tests
};

/// Seeded epoch iteration: Fisher-Yates shuffle, fixed batch size, final
/// partial batch dropped. Each emitted pair is (augment(v1[i]), augment(v2[i]))
/// with all draws taken from the single `rng` in emission order.
class BatchIterator {
 public:
  BatchIterator(const PairedViews& data, size_t batch_size, const AugmentationConfig& cfg,
                Rng& rng)
      : data_(&data), cfg_(cfg), rng_(&rng), batch_(batch_size) {
    cfg.validate();
    if (batch_ < 2) throw DomainError("batch size must be at least 2");
    if (data.size() < batch_) {
      throw DomainError("dataset of " + std::to_string(data.size()) +
                        " samples cannot fill a batch of " + std::to_string(batch_));
    }
    order_.resize(data.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<uint32_t>(i);
    for (size_t i = order_.size() - 1; i > 0; --i) {
      std::swap(order_[i], order_[rng.next_below(i + 1)]);
    }
  }

  size_t batches_per_epoch() const { return data_->size() / batch_; }

  /// Builds batch b of this epoch; must be called in order b = 0,1,2,...
  ViewBatch make_batch(size_t b) const {
    const size_t d = data_->dim();
    ViewBatch out{Tensor<float>({batch_, d}), Tensor<float>({batch_, d}), {}};
    out.indices.reserve(batch_);
    for (size_t k = 0; k < batch_; ++k) {
      const uint32_t i = order_[b * batch_ + k];
      out.indices.push_back(i);
      detail::augment_vector(&data_->v1.data[size_t(i) * d], &out.x1.data[k * d], d, cfg_,
                             *rng_);
      detail::augment_vector(&data_->v2.data[size_t(i) * d], &out.x2.data[k * d], d, cfg_,
                             *rng_);
    }
    return out;
  }

 private:
  const PairedViews* data_;
  AugmentationConfig cfg_;
  Rng* rng_;
  size_t batch_;
  std::vector<uint32_t> order_;
};

}  // namespace superinfo
