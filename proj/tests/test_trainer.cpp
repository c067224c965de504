#include <gtest/gtest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "superinfo/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using superinfo::Adam;
using superinfo::BatchIterator;
using superinfo::Checkpoint;
using superinfo::FormatError;
using superinfo::MetricsRecord;
using superinfo::ModelBundle;
using superinfo::NumericError;
using superinfo::PairedViews;
using superinfo::Rng;
using superinfo::SuperInfoConfig;
using superinfo::Tape;
using superinfo::TapedBundle;
using superinfo::Tensor;
using superinfo::ValidationError;
using superinfo::Var;

uint64_t oracle_fnv1a(const std::string& s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

PairedViews tiny_views(size_t n, size_t d, uint64_t seed) {
  PairedViews pv{Tensor<float>({n, d}), Tensor<float>({n, d}),
                 std::vector<uint32_t>(n, 0)};
  Rng rng(seed);
  for (auto& v : pv.v1.data) v = static_cast<float>(rng.normal(0.0, 1.0));
  for (auto& v : pv.v2.data) v = static_cast<float>(rng.normal(0.0, 1.0));
  return pv;
}

SuperInfoConfig small_config() {
  SuperInfoConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  cfg.seed = 33;
  cfg.enc_hidden = {8};
  cfg.repr_dim = 6;
  cfg.proj_dim = 4;
  cfg.dec_hidden = {8};
  cfg.aug.noise_std = 0.05;
  cfg.aug.scale_lo = 0.9;
  cfg.aug.scale_hi = 1.1;
  return cfg;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("sinf_test_" + tag);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(SuperInfoConfig, EchoPinsEveryRunAffectingField) {
  SuperInfoConfig cfg = small_config();
  const std::string echo = cfg.echo();
  for (const char* line : {
           "loss.lambda1=0.01\n", "loss.tau=0.5\n", "train.epochs=2\n",
           "train.batch_size=4\n", "train.lr=0.001\n", "train.dtype=f32\n",
           "train.freeze_heads=false\n", "model.hidden=8\n", "model.repr_dim=6\n",
           "model.proj_dim=4\n", "model.dec_hidden=8\n", "aug.noise_std=0.05\n",
           "aug.scale_lo=0.9\n", "metrics.deterministic=true\n", "seed=33\n",
       }) {
    EXPECT_NE(echo.find(line), std::string::npos) << "missing " << line;
  }
}

TEST(SuperInfoConfig, RunIdIsFnvOfEcho) {
  SuperInfoConfig cfg = small_config();
  char want[17];
  std::snprintf(want, sizeof(want), "%016llx",
                static_cast<unsigned long long>(oracle_fnv1a(cfg.echo())));
  EXPECT_EQ(superinfo::run_id_of(cfg), std::string(want));

  SuperInfoConfig other = cfg;
  other.learning_rate = 2e-3;
  EXPECT_NE(superinfo::run_id_of(cfg), superinfo::run_id_of(other));
}

TEST(Trainer, CheckpointRoundTripIsBitExact) {
  TempDir dir("roundtrip");
  SuperInfoConfig cfg = small_config();
  cfg.epochs = 1;
  PairedViews data = tiny_views(8, 5, 2);
  auto result = superinfo::pretrain<float>(cfg, data, nullptr);

  Checkpoint ck = result.checkpoint(cfg);
  const fs::path p1 = dir.path / "a.ckpt";
  save_checkpoint(ck, p1);
  Checkpoint back = superinfo::load_checkpoint(p1);

  ASSERT_EQ(back.tensors.size(), ck.tensors.size());
  for (size_t i = 0; i < ck.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, ck.tensors[i].name);
    EXPECT_EQ(back.tensors[i].dtype, ck.tensors[i].dtype);
    EXPECT_EQ(back.tensors[i].dims, ck.tensors[i].dims);
    EXPECT_EQ(back.tensors[i].f32, ck.tensors[i].f32);
    EXPECT_EQ(back.tensors[i].f64, ck.tensors[i].f64);
  }
  EXPECT_EQ(back.epoch, ck.epoch);
  EXPECT_EQ(back.rng_state, ck.rng_state);
  EXPECT_EQ(back.config_echo, ck.config_echo);

  const fs::path p2 = dir.path / "b.ckpt";
  save_checkpoint(back, p2);
  EXPECT_EQ(slurp(p1), slurp(p2));
}

TEST(Trainer, CheckpointTensorOrderIsParamsThenMomentsThenStep) {
  SuperInfoConfig cfg = small_config();
  cfg.epochs = 0;
  PairedViews data = tiny_views(8, 5, 2);
  auto result = superinfo::pretrain<float>(cfg, data, nullptr);
  Checkpoint ck = result.checkpoint(cfg);

  auto named = result.bundle.named_params();
  ASSERT_EQ(ck.tensors.size(), 3 * named.size() + 1);
  for (size_t i = 0; i < named.size(); ++i) {
    EXPECT_EQ(ck.tensors[i].name, named[i].first);
    EXPECT_EQ(ck.tensors[named.size() + 2 * i].name, "opt.m." + named[i].first);
    EXPECT_EQ(ck.tensors[named.size() + 2 * i + 1].name, "opt.v." + named[i].first);
  }
  const auto& last = ck.tensors.back();
  EXPECT_EQ(last.name, "opt.t");
  EXPECT_EQ(last.dtype, 1);  // the step count rides along as a f64 scalar
  ASSERT_EQ(last.f64.size(), 1u);
  EXPECT_EQ(last.f64[0], 0.0);
}

TEST(Trainer, CheckpointLoaderRejectsCorruptedFiles) {
  TempDir dir("corrupt");
  SuperInfoConfig cfg = small_config();
  cfg.epochs = 0;
  PairedViews data = tiny_views(8, 5, 2);
  auto result = superinfo::pretrain<float>(cfg, data, nullptr);
  const fs::path good = dir.path / "good.ckpt";
  save_checkpoint(result.checkpoint(cfg), good);
  const std::vector<unsigned char> bytes = slurp(good);

  auto write_bytes = [&](const fs::path& p, const std::vector<unsigned char>& b) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(b.size()));
  };

  struct Case {
    size_t offset;
    unsigned char value;
    FormatError::Code want;
  };
  // offsets: magic at 0, version at 4, tensor count at 8, first name length
  // at 12, name "f.0.w" at 14, its dtype byte at 19.
  const Case cases[] = {
      {0, 'Z', FormatError::Code::MagicMismatch},
      {4, 3, FormatError::Code::VersionMismatch},
      {19, 9, FormatError::Code::Corrupt},
  };
  for (const Case& c : cases) {
    std::vector<unsigned char> bad = bytes;
    bad[c.offset] = c.value;
    const fs::path p = dir.path / ("bad_" + std::to_string(c.offset) + ".ckpt");
    write_bytes(p, bad);
    try {
      superinfo::load_checkpoint(p);
      FAIL() << "expected FormatError at offset " << c.offset;
    } catch (const FormatError& e) {
      EXPECT_EQ(e.code(), c.want) << "offset " << c.offset;
    }
  }

  std::vector<unsigned char> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
  const fs::path p = dir.path / "cut.ckpt";
  write_bytes(p, cut);
  try {
    superinfo::load_checkpoint(p);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatError::Code::TruncatedPayload);
  }
}

TEST(Trainer, ResumeReproducesTheUninterruptedRunBitwise) {
  TempDir dir("resume");
  SuperInfoConfig cfg = small_config();  // 2 epochs
  PairedViews data = tiny_views(12, 5, 4);

  std::vector<MetricsRecord> full_records;
  auto full = superinfo::pretrain<float>(
      cfg, data, [&](const MetricsRecord& r) { full_records.push_back(r); });

  SuperInfoConfig first_half = cfg;
  first_half.epochs = 1;
  auto part = superinfo::pretrain<float>(first_half, data, nullptr);
  Checkpoint ck = part.checkpoint(first_half);

  std::vector<MetricsRecord> resumed_records;
  auto resumed = superinfo::pretrain<float>(
      cfg, data, [&](const MetricsRecord& r) { resumed_records.push_back(r); }, &ck);

  const fs::path pa = dir.path / "full.ckpt";
  const fs::path pb = dir.path / "resumed.ckpt";
  save_checkpoint(full.checkpoint(cfg), pa);
  save_checkpoint(resumed.checkpoint(cfg), pb);
  EXPECT_EQ(slurp(pa), slurp(pb));

  std::vector<std::string> full_second_epoch;
  for (const auto& r : full_records) {
    if (r.epoch == 1) full_second_epoch.push_back(r.to_json());
  }
  std::vector<std::string> resumed_json;
  for (const auto& r : resumed_records) resumed_json.push_back(r.to_json());
  EXPECT_EQ(full_second_epoch, resumed_json);
  EXPECT_EQ(resumed.epochs_done, 2u);
}

TEST(Trainer, ZeroEpochsReturnsTheUntouchedInitialization) {
  SuperInfoConfig cfg = small_config();
  cfg.epochs = 0;
  PairedViews data = tiny_views(8, 5, 6);

  size_t records = 0;
  auto result = superinfo::pretrain<float>(
      cfg, data, [&](const MetricsRecord&) { ++records; });
  EXPECT_EQ(records, 0u);
  EXPECT_EQ(result.epochs_done, 0u);

  Rng init_rng = Rng::stream(cfg.seed, "init");
  ModelBundle<float> want = superinfo::init_bundle<float>(
      init_rng, 5, cfg.enc_hidden, cfg.repr_dim, cfg.proj_dim, cfg.dec_hidden);
  auto got_named = result.bundle.named_params();
  auto want_named = want.named_params();
  ASSERT_EQ(got_named.size(), want_named.size());
  for (size_t i = 0; i < got_named.size(); ++i) {
    EXPECT_EQ(got_named[i].first, want_named[i].first);
    ASSERT_EQ(got_named[i].second->shape, want_named[i].second->shape);
    EXPECT_EQ(0, std::memcmp(got_named[i].second->data.data(),
                             want_named[i].second->data.data(),
                             got_named[i].second->numel() * sizeof(float)));
  }
}

TEST(Trainer, MetricsRecordsHavePinnedSchemaAndEpochSummary) {
  SuperInfoConfig cfg = small_config();
  cfg.epochs = 1;
  PairedViews data = tiny_views(8, 5, 7);

  std::vector<MetricsRecord> records;
  superinfo::pretrain<float>(cfg, data,
                             [&](const MetricsRecord& r) { records.push_back(r); });

  ASSERT_EQ(records.size(), 3u);  // two steps, one summary
  const std::string run_id = superinfo::run_id_of(cfg);

  for (size_t i = 0; i < 2; ++i) {
    const MetricsRecord& r = records[i];
    EXPECT_EQ(r.step, static_cast<int64_t>(i));
    EXPECT_EQ(r.epoch, 0);
    EXPECT_EQ(r.wall_ms, 0.0);  // deterministic metrics by default
    EXPECT_EQ(r.seed, cfg.seed);
    EXPECT_GT(r.grad_norm, 0.0);

    const std::string json = r.to_json();
    const char* keys[] = {"\"run_id\":\"", "\"epoch\":", "\"step\":", "\"l_cl\":",
                          "\"l_kl_1\":",   "\"l_kl_2\":", "\"l_re_1\":", "\"l_re_2\":",
                          "\"l_total\":",  "\"grad_norm\":", "\"wall_ms\":", "\"seed\":"};
    size_t pos = 0;
    for (const char* k : keys) {
      const size_t at = json.find(k, pos);
      ASSERT_NE(at, std::string::npos) << k << " missing/mis-ordered in " << json;
      pos = at + 1;
    }
    EXPECT_EQ(json.find("{\"run_id\":\"" + run_id + "\""), 0u);
  }

  const MetricsRecord& sum = records[2];
  EXPECT_EQ(sum.step, -1);
  EXPECT_EQ(sum.epoch, 0);
  const double inv = 1.0 / 2.0;
  EXPECT_DOUBLE_EQ(sum.parts.l_cl, (records[0].parts.l_cl + records[1].parts.l_cl) * inv);
  EXPECT_DOUBLE_EQ(sum.parts.l_total,
                   (records[0].parts.l_total + records[1].parts.l_total) * inv);
  EXPECT_DOUBLE_EQ(sum.grad_norm, (records[0].grad_norm + records[1].grad_norm) * inv);
  EXPECT_EQ(sum.wall_ms, 0.0);
}

TEST(Trainer, WallClockIsRecordedWhenDeterminismIsOff) {
  SuperInfoConfig cfg = small_config();
  cfg.epochs = 1;
  cfg.deterministic_metrics = false;
  PairedViews data = tiny_views(8, 5, 7);

  double total_wall = 0.0;
  superinfo::pretrain<float>(cfg, data, [&](const MetricsRecord& r) {
    if (r.step >= 0) total_wall += r.wall_ms;
  });
  EXPECT_GT(total_wall, 0.0);
}

TEST(Trainer, FreezeHeadsKeepsHeadParametersAtInit) {
  SuperInfoConfig cfg = small_config();
  cfg.freeze_heads = true;
  PairedViews data = tiny_views(8, 5, 9);
  auto result = superinfo::pretrain<float>(cfg, data, nullptr);

  Rng init_rng = Rng::stream(cfg.seed, "init");
  ModelBundle<float> init = superinfo::init_bundle<float>(
      init_rng, 5, cfg.enc_hidden, cfg.repr_dim, cfg.proj_dim, cfg.dec_hidden);

  auto got = result.bundle.named_params();
  auto want = init.named_params();
  for (size_t i = 0; i < got.size(); ++i) {
    const std::string& name = got[i].first;
    const bool is_head = name.starts_with("q_") || name.starts_with("r.");
    const bool same = 0 == std::memcmp(got[i].second->data.data(),
                                       want[i].second->data.data(),
                                       got[i].second->numel() * sizeof(float));
    if (is_head) {
      EXPECT_TRUE(same) << name << " moved despite frozen heads";
    } else {
      EXPECT_FALSE(same) << name << " never trained";
    }
  }
}

// An insane learning rate sends activations past float range within a step;
// a kernel then rejects its own NaN intermediate mid-forward. The trainer must
// map that onto the numeric-failure contract: flush a diagnostic record (all
// values unusable) and throw NumericError, not leak the kernel's domain error.
TEST(Trainer, ForwardPassExplosionFlushesDiagnosticRecordThenThrows) {
  SuperInfoConfig cfg = small_config();
  cfg.learning_rate = 1e20;  // guarantees overflow within a step or two
  cfg.epochs = 3;
  PairedViews data = tiny_views(8, 5, 8);

  std::vector<MetricsRecord> records;
  std::string message;
  try {
    superinfo::pretrain<float>(cfg, data,
                               [&](const MetricsRecord& r) { records.push_back(r); });
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    message = e.what();
  }
  EXPECT_NE(message.find("forward pass"), std::string::npos) << message;
  ASSERT_FALSE(records.empty());
  const MetricsRecord& last = records.back();
  EXPECT_FALSE(std::isfinite(last.parts.l_total));
  EXPECT_FALSE(std::isfinite(last.parts.l_cl));
  EXPECT_FALSE(std::isfinite(last.grad_norm));
  EXPECT_NE(last.to_json().find("null"), std::string::npos);
}

// A milder explosion keeps the whole forward pass finite in float except the
// Gaussian-head means, whose squares overflow inside the KL term. Here the
// per-component finiteness check is what fires, so the flushed record carries
// the real component values: a finite contrastive term next to infinite ones.
TEST(Trainer, NonFiniteLossComponentFlushesDiagnosticRecordThenThrows) {
  SuperInfoConfig cfg = small_config();
  cfg.learning_rate = 1e8;
  cfg.epochs = 3;
  PairedViews data = tiny_views(8, 5, 8);

  std::vector<MetricsRecord> records;
  std::string message;
  try {
    superinfo::pretrain<float>(cfg, data,
                               [&](const MetricsRecord& r) { records.push_back(r); });
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    message = e.what();
  }
  EXPECT_NE(message.find("non-finite loss component"), std::string::npos) << message;
  ASSERT_FALSE(records.empty());
  const MetricsRecord& last = records.back();
  EXPECT_TRUE(std::isfinite(last.parts.l_cl));
  EXPECT_FALSE(std::isfinite(last.parts.l_total));
  EXPECT_NE(last.to_json().find("null"), std::string::npos);
}

// With every auxiliary coefficient at zero the auxiliary terms must not
// perturb the contrastive path at all: encoder and projector trajectories
// match a contrastive-only reference trainer bit for bit.
TEST(Trainer, ZeroWeightsMatchContrastiveOnlyReferenceBitwise) {
  SuperInfoConfig cfg = small_config();
  cfg.weights.lambda1 = cfg.weights.lambda2 = 0.0;
  cfg.weights.lambda3 = cfg.weights.lambda4 = 0.0;
  cfg.seed = 11;
  PairedViews data = tiny_views(8, 5, 3);

  auto full = superinfo::pretrain<float>(cfg, data, nullptr);

  // Reference: same init, same streams, nt-xent only, heads never stepped.
  Rng init_rng = Rng::stream(cfg.seed, "init");
  ModelBundle<float> bundle = superinfo::init_bundle<float>(
      init_rng, 5, cfg.enc_hidden, cfg.repr_dim, cfg.proj_dim, cfg.dec_hidden);
  Rng aug_rng = Rng::stream(cfg.seed, "augment");
  Adam<float> opt(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  auto named = bundle.named_params();
  std::vector<Tensor<float>*> params;
  for (auto& [name, tensor] : named) params.push_back(tensor);
  opt.attach(params);

  for (uint64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchIterator iter(data, cfg.batch_size, cfg.aug, aug_rng);
    for (size_t b = 0; b < iter.batches_per_epoch(); ++b) {
      superinfo::ViewBatch batch = iter.make_batch(b);
      Tape<float> tape;
      TapedBundle<float> tb(tape, bundle, true);
      Var<float> x1 = tape.constant(batch.x1);
      Var<float> x2 = tape.constant(batch.x2);
      Var<float> loss =
          nt_xent(tb.project(tb.encode(x1)), tb.project(tb.encode(x2)), cfg.weights.tau);
      auto grads = tape.backward(loss);
      std::vector<const Tensor<float>*> grad_ptrs(params.size(), nullptr);
      for (size_t i = 0; i < params.size(); ++i) {
        auto it = grads.find(tb.params[i].id);
        if (it != grads.end()) grad_ptrs[i] = &it->second;
      }
      opt.step(params, grad_ptrs);
    }
  }

  auto got = full.bundle.named_params();
  for (size_t i = 0; i < got.size(); ++i) {
    const std::string& name = got[i].first;
    if (!(name.starts_with("f.") || name.starts_with("g."))) continue;
    EXPECT_EQ(0, std::memcmp(got[i].second->data.data(), named[i].second->data.data(),
                             got[i].second->numel() * sizeof(float)))
        << name << " diverged from the contrastive-only reference";
  }
}

TEST(Trainer, TotalLossDecreasesAcrossEpochsOnMostSeeds) {
  superinfo::SyntheticSpec spec;
  spec.n_classes = 4;
  spec.d_shared = 3;
  spec.d_specific = 2;
  spec.d_nuisance = 3;
  spec.n_samples = 64;
  spec.mixing_seed = 5;
  superinfo::SyntheticTask task = superinfo::SyntheticTask::build(spec);

  int improved = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng data_rng = Rng::stream(seed, "data");
    PairedViews data = task.sample(64, data_rng);

    SuperInfoConfig cfg = small_config();
    cfg.seed = seed;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.learning_rate = 3e-3;
    cfg.enc_hidden = {16};
    cfg.repr_dim = 8;
    cfg.proj_dim = 4;
    cfg.dec_hidden = {16};

    std::vector<double> epoch_totals;
    superinfo::pretrain<float>(cfg, data, [&](const MetricsRecord& r) {
      if (r.step == -1) epoch_totals.push_back(r.parts.l_total);
    });
    ASSERT_EQ(epoch_totals.size(), 2u);
    if (epoch_totals[1] < epoch_totals[0]) ++improved;
  }
  EXPECT_GE(improved, 8) << "training failed to reduce the loss on most seeds";
}

TEST(Trainer, InputValidation) {
  SuperInfoConfig cfg = small_config();
  PairedViews empty{Tensor<float>({0, 5}), Tensor<float>({0, 5}), {}};
  EXPECT_THROW(superinfo::pretrain<float>(cfg, empty, nullptr), ValidationError);

  PairedViews mismatched{Tensor<float>({4, 5}), Tensor<float>({4, 6}),
                         std::vector<uint32_t>(4, 0)};
  EXPECT_THROW(superinfo::pretrain<float>(cfg, mismatched, nullptr), ValidationError);
}

TEST(Trainer, ResumeValidatesWidthAndDtype) {
  SuperInfoConfig cfg = small_config();
  cfg.epochs = 1;
  PairedViews data = tiny_views(8, 5, 2);
  auto result = superinfo::pretrain<float>(cfg, data, nullptr);
  Checkpoint ck = result.checkpoint(cfg);

  PairedViews wider = tiny_views(8, 6, 2);
  EXPECT_THROW(superinfo::pretrain<float>(cfg, wider, nullptr, &ck), ValidationError);
  EXPECT_THROW(superinfo::pretrain<double>(cfg, data, nullptr, &ck), ValidationError);

  Checkpoint missing = ck;
  missing.tensors.erase(missing.tensors.begin());  // drop f.0.w
  EXPECT_THROW(superinfo::pretrain<float>(cfg, data, nullptr, &missing), ValidationError);
}

}  // namespace
