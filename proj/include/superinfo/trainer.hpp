#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "superinfo/augment.hpp"
#include "superinfo/io.hpp"
#include "superinfo/losses.hpp"
#include "superinfo/models.hpp"
#include "superinfo/optimizer.hpp"
#include "superinfo/rng.hpp"
#include "superinfo/synthetic.hpp"
#include "superinfo/text.hpp"

namespace superinfo {

/// Everything one pretraining run depends on. `echo()` is the canonical
/// text form used for run identity and the checkpoint's config record.
struct SuperInfoConfig {
  LossWeights weights;
  uint64_t epochs = 50;
  size_t batch_size = 64;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1;
  enum class Dtype : uint8_t { F32 = 0, F64 = 1 } dtype = Dtype::F32;
  AugmentationConfig aug;
  std::vector<size_t> enc_hidden = {256, 256};
  size_t repr_dim = 128;
  size_t proj_dim = 64;
  std::vector<size_t> dec_hidden = {256};
  bool freeze_heads = false;
  bool deterministic_metrics = true;  // wall_ms logged as 0 so outputs are byte-stable

  void validate() const {
    weights.validate();
    aug.validate();
    if (batch_size < 2) throw ValidationError("batch_size must be at least 2");
    if (!(learning_rate > 0)) throw ValidationError("learning_rate must be positive");
    if (repr_dim == 0 || proj_dim == 0) throw ValidationError("model dims must be positive");
    for (size_t w : enc_hidden)
      if (w == 0) throw ValidationError("encoder hidden widths must be positive");
    for (size_t w : dec_hidden)
      if (w == 0) throw ValidationError("decoder hidden widths must be positive");
  }

  std::string echo() const {
    auto list = [](const std::vector<size_t>& v) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += text::fmt(static_cast<uint64_t>(v[i]));
      }
      return s;
    };
    std::string s;
    s += "loss.lambda1=" + text::fmt(weights.lambda1) + "\n";
    s += "loss.lambda2=" + text::fmt(weights.lambda2) + "\n";
    s += "loss.lambda3=" + text::fmt(weights.lambda3) + "\n";
    s += "loss.lambda4=" + text::fmt(weights.lambda4) + "\n";
    s += "loss.tau=" + text::fmt(weights.tau) + "\n";
    s += "train.epochs=" + text::fmt(epochs) + "\n";
    s += "train.batch_size=" + text::fmt(static_cast<uint64_t>(batch_size)) + "\n";
    s += "train.lr=" + text::fmt(learning_rate) + "\n";
    s += "train.beta1=" + text::fmt(beta1) + "\n";
    s += "train.beta2=" + text::fmt(beta2) + "\n";
    s += "train.eps=" + text::fmt(adam_eps) + "\n";
    s += "train.dtype=" + std::string(dtype == Dtype::F32 ? "f32" : "f64") + "\n";
    s += "train.freeze_heads=" + std::string(freeze_heads ? "true" : "false") + "\n";
    s += "model.hidden=" + list(enc_hidden) + "\n";
    s += "model.repr_dim=" + text::fmt(static_cast<uint64_t>(repr_dim)) + "\n";
    s += "model.proj_dim=" + text::fmt(static_cast<uint64_t>(proj_dim)) + "\n";
    s += "model.dec_hidden=" + list(dec_hidden) + "\n";
    s += "aug.crop_lo=" + text::fmt(aug.crop_lo) + "\n";
    s += "aug.crop_hi=" + text::fmt(aug.crop_hi) + "\n";
    s += "aug.flip_prob=" + text::fmt(aug.flip_prob) + "\n";
    s += "aug.noise_std=" + text::fmt(aug.noise_std) + "\n";
    s += "aug.scale_lo=" + text::fmt(aug.scale_lo) + "\n";
    s += "aug.scale_hi=" + text::fmt(aug.scale_hi) + "\n";
    s += "metrics.deterministic=" + std::string(deterministic_metrics ? "true" : "false") + "\n";
    s += "seed=" + text::fmt(seed) + "\n";
    return s;
  }
};

inline std::string run_id_of(const SuperInfoConfig& cfg) {
  const uint64_t h = detail::fnv1a64(cfg.echo());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

/// One metrics line; step -1 carries the per-epoch means of that epoch's
/// step records (wall_ms summed instead).
struct MetricsRecord {
  std::string run_id;
  int64_t epoch = 0;
  int64_t step = 0;
  LossBreakdown parts;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  uint64_t seed = 0;

  std::string to_json() const {
    auto num = [](double v) { return std::isfinite(v) ? text::fmt(v) : std::string("null"); };
    std::string s = "{\"run_id\":\"" + text::json_escape(run_id) + "\"";
    s += ",\"epoch\":" + text::fmt(epoch);
    s += ",\"step\":" + text::fmt(step);
    s += ",\"l_cl\":" + num(parts.l_cl);
    s += ",\"l_kl_1\":" + num(parts.l_kl_1);
    s += ",\"l_kl_2\":" + num(parts.l_kl_2);
    s += ",\"l_re_1\":" + num(parts.l_re_1);
    s += ",\"l_re_2\":" + num(parts.l_re_2);
    s += ",\"l_total\":" + num(parts.l_total);
    s += ",\"grad_norm\":" + num(grad_norm);
    s += ",\"wall_ms\":" + num(wall_ms);
    s += ",\"seed\":" + text::fmt(seed);
    s += "}";
    return s;
  }
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

// -- checkpoints --------------------------------------------------------------
// magic "SINF" | u32 version=1 | u32 tensor count
// per tensor: u16 name length | name | u8 dtype (0=f32,1=f64) | u8 rank
//             | u64 dims | little-endian payload
// then: u64 epoch | 32-byte rng state | u32 config-echo length | echo text

struct NamedTensor {
  std::string name;
  uint8_t dtype = 0;  // 0=f32, 1=f64
  std::vector<size_t> dims;
  std::vector<float> f32;
  std::vector<double> f64;

  size_t numel() const {
    size_t n = 1;
    for (size_t d : dims) n *= d;
    return n;
  }
};

struct Checkpoint {
  uint32_t version = kVersion;
  std::vector<NamedTensor> tensors;
  uint64_t epoch = 0;
  std::array<uint8_t, 32> rng_state{};
  std::string config_echo;

  static constexpr uint32_t kVersion = 1;

  const NamedTensor* find(std::string_view name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  io::write_magic(out, "SINF");
  io::write_le<uint32_t>(out, Checkpoint::kVersion);
  io::write_le<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xffff) throw ValidationError("tensor name too long");
    io::write_le<uint16_t>(out, static_cast<uint16_t>(t.name.size()));
    io::write_bytes(out, t.name.data(), t.name.size());
    io::write_le<uint8_t>(out, t.dtype);
    io::write_le<uint8_t>(out, static_cast<uint8_t>(t.dims.size()));
    for (size_t d : t.dims) io::write_le<uint64_t>(out, d);
    if (t.dtype == 0) {
      for (float v : t.f32) io::write_le<float>(out, v);
    } else {
      for (double v : t.f64) io::write_le<double>(out, v);
    }
  }
  io::write_le<uint64_t>(out, ckpt.epoch);
  io::write_bytes(out, ckpt.rng_state.data(), ckpt.rng_state.size());
  io::write_le<uint32_t>(out, static_cast<uint32_t>(ckpt.config_echo.size()));
  io::write_bytes(out, ckpt.config_echo.data(), ckpt.config_echo.size());
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(FormatError::Code::TruncatedPayload,
                      "cannot open '" + path.string() + "' for reading");
  }
  io::expect_magic(in, "SINF");
  Checkpoint ckpt;
  ckpt.version = io::read_le<uint32_t>(in, "checkpoint version");
  if (ckpt.version != Checkpoint::kVersion) {
    throw FormatError(FormatError::Code::VersionMismatch,
                      "checkpoint version " + std::to_string(ckpt.version) + ", expected 1");
  }
  const uint32_t count = io::read_le<uint32_t>(in, "tensor count");
  if (count > 1'000'000) {
    throw FormatError(FormatError::Code::Corrupt, "implausible tensor count");
  }
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const uint16_t name_len = io::read_le<uint16_t>(in, "tensor name length");
    t.name.resize(name_len);
    io::read_bytes(in, t.name.data(), name_len, "tensor name");
    t.dtype = io::read_le<uint8_t>(in, "tensor dtype");
    if (t.dtype > 1) {
      throw FormatError(FormatError::Code::Corrupt,
                        "unknown dtype code " + std::to_string(t.dtype));
    }
    const uint8_t rank = io::read_le<uint8_t>(in, "tensor rank");
    if (rank > 8) throw FormatError(FormatError::Code::Corrupt, "implausible tensor rank");
    size_t numel = 1;
    for (uint8_t r = 0; r < rank; ++r) {
      const uint64_t d = io::read_le<uint64_t>(in, "tensor dim");
      if (d > (uint64_t(1) << 32)) {
        throw FormatError(FormatError::Code::Corrupt, "implausible tensor dim");
      }
      t.dims.push_back(static_cast<size_t>(d));
      numel *= static_cast<size_t>(d);
    }
    if (numel > (size_t(1) << 32)) {
      throw FormatError(FormatError::Code::Corrupt, "implausible tensor size");
    }
    if (t.dtype == 0) {
      t.f32.resize(numel);
      io::read_bytes(in, t.f32.data(), numel * sizeof(float), "tensor payload");
      if constexpr (std::endian::native == std::endian::big) {
        for (auto& v : t.f32) v = io::byteswap_if_big(v);
      }
    } else {
      t.f64.resize(numel);
      io::read_bytes(in, t.f64.data(), numel * sizeof(double), "tensor payload");
      if constexpr (std::endian::native == std::endian::big) {
        for (auto& v : t.f64) v = io::byteswap_if_big(v);
      }
    }
    ckpt.tensors.push_back(std::move(t));
  }
  ckpt.epoch = io::read_le<uint64_t>(in, "epoch counter");
  io::read_bytes(in, ckpt.rng_state.data(), ckpt.rng_state.size(), "rng state");
  const uint32_t echo_len = io::read_le<uint32_t>(in, "config echo length");
  if (echo_len > (uint32_t(1) << 24)) {
    throw FormatError(FormatError::Code::Corrupt, "implausible config echo length");
  }
  ckpt.config_echo.resize(echo_len);
  io::read_bytes(in, ckpt.config_echo.data(), echo_len, "config echo");
  return ckpt;
}

namespace detail {

template <Scalar T>
NamedTensor to_named(const std::string& name, const Tensor<T>& t) {
  NamedTensor n;
  n.name = name;
  n.dims = t.shape;
  if constexpr (std::is_same_v<T, float>) {
    n.dtype = 0;
    n.f32 = t.data;
  } else {
    n.dtype = 1;
    n.f64 = t.data;
  }
  return n;
}

template <Scalar T>
Tensor<T> from_named(const NamedTensor& n) {
  constexpr uint8_t want = std::is_same_v<T, float> ? 0 : 1;
  if (n.dtype != want) {
    throw ValidationError("checkpoint tensor '" + n.name + "' dtype differs from configured dtype");
  }
  Tensor<T> t(n.dims.empty() ? std::vector<size_t>{} : n.dims);
  if constexpr (std::is_same_v<T, float>) {
    t.data = n.f32;
  } else {
    t.data = n.f64;
  }
  return t;
}

}  // namespace detail

/// Serializes bundle + optimizer + stream position. Tensor order: parameters
/// (named_params order), their Adam m/v moments, then the scalar step count.
template <Scalar T>
Checkpoint make_checkpoint(ModelBundle<T>& bundle, Adam<T>& opt, uint64_t epoch,
                           const Rng& aug_rng, std::string config_echo) {
  Checkpoint ckpt;
  auto named = bundle.named_params();
  for (auto& [name, tensor] : named) ckpt.tensors.push_back(detail::to_named(name, *tensor));
  for (size_t i = 0; i < named.size(); ++i) {
    ckpt.tensors.push_back(detail::to_named("opt.m." + named[i].first, opt.moments_m()[i]));
    ckpt.tensors.push_back(detail::to_named("opt.v." + named[i].first, opt.moments_v()[i]));
  }
  NamedTensor t;
  t.name = "opt.t";
  t.dtype = 1;
  t.f64 = {static_cast<double>(opt.step_count())};
  ckpt.tensors.push_back(std::move(t));
  ckpt.epoch = epoch;
  ckpt.rng_state = aug_rng.save_state();
  ckpt.config_echo = std::move(config_echo);
  return ckpt;
}

/// Rebuilds the five networks from checkpoint tensors alone; layer counts and
/// widths come from the stored names and shapes.
template <Scalar T>
ModelBundle<T> bundle_from_checkpoint(const Checkpoint& ckpt) {
  auto mlp_of = [&](const std::string& prefix) {
    Mlp<T> m;
    for (size_t i = 0;; ++i) {
      const NamedTensor* w = ckpt.find(prefix + "." + std::to_string(i) + ".w");
      const NamedTensor* b = ckpt.find(prefix + "." + std::to_string(i) + ".b");
      if (!w || !b) break;
      m.layers.push_back(Linear<T>{detail::from_named<T>(*w), detail::from_named<T>(*b)});
    }
    if (m.layers.empty()) {
      throw ValidationError("checkpoint is missing network '" + prefix + "'");
    }
    return m;
  };
  auto linear_of = [&](const std::string& prefix) {
    const NamedTensor* w = ckpt.find(prefix + ".w");
    const NamedTensor* b = ckpt.find(prefix + ".b");
    if (!w || !b) throw ValidationError("checkpoint is missing network '" + prefix + "'");
    return Linear<T>{detail::from_named<T>(*w), detail::from_named<T>(*b)};
  };
  ModelBundle<T> bundle;
  bundle.f = mlp_of("f");
  bundle.g = mlp_of("g");
  bundle.q_mu = linear_of("q_mu");
  bundle.q_logvar = linear_of("q_logvar");
  bundle.r = mlp_of("r");
  bundle.check_dims();
  return bundle;
}

template <Scalar T>
struct TrainResult {
  ModelBundle<T> bundle;
  Adam<T> optimizer;
  uint64_t epochs_done = 0;
  Rng aug_rng{0};

  Checkpoint checkpoint(const SuperInfoConfig& cfg) {
    return make_checkpoint(bundle, optimizer, epochs_done, aug_rng, cfg.echo());
  }
};

/// Algorithm: per batch, augment both views, encode, project into the
/// contrastive loss, run the Gaussian heads into the KL terms, decode each
/// view's representation against the other view for the reconstruction
/// terms, combine, backprop, Adam-update every trainable network.
///
/// Deterministic for a given config: init draws from the seed's "init"
/// stream, shuffling and augmentation from its "augment" stream, and the
/// checkpoint records that stream so resuming continues the exact
/// trajectory. A non-finite loss component aborts with NumericError after
/// flushing a diagnostic record.
template <Scalar T>
TrainResult<T> pretrain(const SuperInfoConfig& cfg, const PairedViews& data,
                        const MetricsSink& sink, const Checkpoint* resume = nullptr) {
  cfg.validate();
  if (data.size() == 0) throw ValidationError("pretrain: dataset is empty");
  if (data.v1.shape != data.v2.shape) {
    throw ValidationError("pretrain: view tensors must have identical shapes");
  }
  const std::string run_id = run_id_of(cfg);
  const size_t input_dim = data.dim();

  TrainResult<T> result;
  uint64_t start_epoch = 0;
  if (resume) {
    result.bundle = bundle_from_checkpoint<T>(*resume);
    if (result.bundle.input_dim() != input_dim) {
      throw ValidationError("pretrain: checkpoint input width does not match dataset");
    }
    start_epoch = resume->epoch;
    result.aug_rng.load_state(resume->rng_state);
  } else {
    Rng init_rng = Rng::stream(cfg.seed, "init");
    result.bundle = init_bundle<T>(init_rng, input_dim, cfg.enc_hidden, cfg.repr_dim,
                                   cfg.proj_dim, cfg.dec_hidden);
    result.aug_rng = Rng::stream(cfg.seed, "augment");
  }

  Adam<T> opt(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  auto named = result.bundle.named_params();
  std::vector<Tensor<T>*> params;
  for (auto& [name, tensor] : named) params.push_back(tensor);
  opt.attach(params);
  if (resume) {
    std::vector<Tensor<T>> m, v;
    for (auto& [name, tensor] : named) {
      const NamedTensor* nm = resume->find("opt.m." + name);
      const NamedTensor* nv = resume->find("opt.v." + name);
      if (!nm || !nv) throw ValidationError("checkpoint is missing optimizer state for " + name);
      m.push_back(detail::from_named<T>(*nm));
      v.push_back(detail::from_named<T>(*nv));
    }
    const NamedTensor* nt = resume->find("opt.t");
    if (!nt || nt->dtype != 1 || nt->f64.size() != 1) {
      throw ValidationError("checkpoint is missing the optimizer step counter");
    }
    opt.restore(static_cast<uint64_t>(nt->f64[0]), std::move(m), std::move(v));
  }

  for (uint64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    BatchIterator iter(data, cfg.batch_size, cfg.aug, result.aug_rng);
    LossBreakdown epoch_sum;
    double epoch_grad_norm = 0.0, epoch_wall = 0.0;
    const size_t batches = iter.batches_per_epoch();

    for (size_t b = 0; b < batches; ++b) {
      const auto t0 = std::chrono::steady_clock::now();
      ViewBatch batch = iter.make_batch(b);

      Tape<T> tape;
      TapedBundle<T> tb(tape, result.bundle, !cfg.freeze_heads);
      auto to_t = [](const Tensor<float>& f) {
        Tensor<T> t(f.shape);
        for (size_t i = 0; i < f.numel(); ++i) t.data[i] = static_cast<T>(f.data[i]);
        return t;
      };
      Var<T> x1 = tape.constant(to_t(batch.x1));
      Var<T> x2 = tape.constant(to_t(batch.x2));

      MetricsRecord rec;
      rec.run_id = run_id;
      rec.epoch = static_cast<int64_t>(epoch);
      rec.step = static_cast<int64_t>(b);
      rec.seed = cfg.seed;

      TapedLoss<T> loss;
      try {
        Var<T> h1 = tb.encode(x1);
        Var<T> h2 = tb.encode(x2);
        Var<T> l_cl = nt_xent(tb.project(h1), tb.project(h2), cfg.weights.tau);
        auto [mu1, lv1] = tb.gaussian_heads(h1);
        auto [mu2, lv2] = tb.gaussian_heads(h2);
        Var<T> l_kl_1 = gaussian_kl(mu1, lv1);
        Var<T> l_kl_2 = gaussian_kl(mu2, lv2);
        Var<T> l_re_1 = recon_loss(x1, tb.decode(h2));
        Var<T> l_re_2 = recon_loss(x2, tb.decode(h1));
        loss = superinfo_total(l_cl, l_kl_1, l_kl_2, l_re_1, l_re_2, cfg.weights);
      } catch (const DomainError& e) {
        // A kernel rejecting its own intermediate values mid-run (e.g. log fed
        // a NaN once parameters explode) is a numeric failure of the training
        // trajectory, not a caller error. Flush a diagnostic record whose
        // values are all unusable, then abort with the numeric error type.
        const double qnan = std::numeric_limits<double>::quiet_NaN();
        rec.parts = LossBreakdown{qnan, qnan, qnan, qnan, qnan, qnan};
        rec.grad_norm = qnan;
        if (sink) sink(rec);
        throw NumericError("numeric failure in forward pass at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(b) + ": " + e.what());
      }
      rec.parts = loss.parts;

      const struct { const char* name; double v; } components[] = {
          {"l_cl", loss.parts.l_cl},     {"l_kl_1", loss.parts.l_kl_1},
          {"l_kl_2", loss.parts.l_kl_2}, {"l_re_1", loss.parts.l_re_1},
          {"l_re_2", loss.parts.l_re_2}, {"l_total", loss.parts.l_total},
      };
      for (const auto& c : components) {
        if (!std::isfinite(c.v)) {
          if (sink) sink(rec);
          throw NumericError(std::string("non-finite loss component ") + c.name + " at epoch " +
                             std::to_string(epoch) + " step " + std::to_string(b));
        }
      }

      GradMap<T> grads = tape.backward(loss.total);
      std::vector<const Tensor<T>*> grad_ptrs(params.size(), nullptr);
      double sq_norm = 0.0;
      for (size_t i = 0; i < params.size(); ++i) {
        auto it = grads.find(tb.params[i].id);
        if (it == grads.end()) continue;
        grad_ptrs[i] = &it->second;
        for (T g : it->second.data) sq_norm += static_cast<double>(g) * static_cast<double>(g);
      }
      rec.grad_norm = std::sqrt(sq_norm);
      if (!std::isfinite(rec.grad_norm)) {
        if (sink) sink(rec);
        throw NumericError("non-finite gradient norm at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(b));
      }
      opt.step(params, grad_ptrs);

      if (!cfg.deterministic_metrics) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      }
      if (sink) sink(rec);

      epoch_sum.l_cl += rec.parts.l_cl;
      epoch_sum.l_kl_1 += rec.parts.l_kl_1;
      epoch_sum.l_kl_2 += rec.parts.l_kl_2;
      epoch_sum.l_re_1 += rec.parts.l_re_1;
      epoch_sum.l_re_2 += rec.parts.l_re_2;
      epoch_sum.l_total += rec.parts.l_total;
      epoch_grad_norm += rec.grad_norm;
      epoch_wall += rec.wall_ms;
    }

    if (sink) {
      MetricsRecord rec;
      rec.run_id = run_id;
      rec.epoch = static_cast<int64_t>(epoch);
      rec.step = -1;
      const double inv = 1.0 / static_cast<double>(batches);
      rec.parts.l_cl = epoch_sum.l_cl * inv;
      rec.parts.l_kl_1 = epoch_sum.l_kl_1 * inv;
      rec.parts.l_kl_2 = epoch_sum.l_kl_2 * inv;
      rec.parts.l_re_1 = epoch_sum.l_re_1 * inv;
      rec.parts.l_re_2 = epoch_sum.l_re_2 * inv;
      rec.parts.l_total = epoch_sum.l_total * inv;
      rec.grad_norm = epoch_grad_norm * inv;
      rec.wall_ms = epoch_wall;
      rec.seed = cfg.seed;
      sink(rec);
    }
  }

  result.optimizer = std::move(opt);
  result.epochs_done = cfg.epochs > start_epoch ? cfg.epochs : start_epoch;
  return result;
}

}  // namespace superinfo
