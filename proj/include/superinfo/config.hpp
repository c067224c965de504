#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "superinfo/probe.hpp"
#include "superinfo/synthetic.hpp"
#include "superinfo/text.hpp"
#include "superinfo/trainer.hpp"

namespace superinfo {

/// Flat key=value run configuration ('#' starts a comment, blank lines
/// ignored). Every key has a default except `seed`; unknown and duplicate
/// keys are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
  uint64_t seed = 0;
  SyntheticSpec synth;
  size_t data_n_test = 256;
  std::vector<uint64_t> transfer_code_seeds;  // extra tasks for transfer probes
  SuperInfoConfig train;
  ProbeConfig probe;
  size_t probe_n_train = 256;  // generated probe-set sizes used by ablation runs
  size_t probe_n_test = 512;

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "seed",
        "data.n_classes", "data.d_shared", "data.d_specific", "data.d_nuisance",
        "data.n_samples", "data.n_test", "data.mixing_seed", "data.code_seed",
        "data.noise_std", "data.nuisance_scale", "data.jitter_std",
        "data.identical_mixing", "data.transfer_code_seeds",
        "loss.lambda1", "loss.lambda2", "loss.lambda3", "loss.lambda4", "loss.tau",
        "train.epochs", "train.batch_size", "train.lr", "train.beta1", "train.beta2",
        "train.eps", "train.dtype", "train.freeze_heads",
        "model.hidden", "model.repr_dim", "model.proj_dim", "model.dec_hidden",
        "aug.crop_lo", "aug.crop_hi", "aug.flip_prob", "aug.noise_std",
        "aug.scale_lo", "aug.scale_hi",
        "probe.lr", "probe.iters", "probe.n_train", "probe.n_test",
        "metrics.deterministic",
    };
    return keys;
  }

  static RunConfig from_stream(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> kv = parse_kv(in);
    RunConfig cfg;
    cfg.train.aug = AugmentationConfig{1.0, 1.0, 0.0, 0.1, 0.8, 1.2};
    bool have_seed = false;

    for (const auto& [key, value] : kv) {
      if (!is_known(key)) throw ValidationError("unknown config key '" + key + "'");
      const char* k = key.c_str();
      if (key == "seed") {
        cfg.seed = text::parse_uint<uint64_t>(value, k);
        have_seed = true;
      } else if (key == "data.n_classes") {
        cfg.synth.n_classes = text::parse_uint<uint32_t>(value, k);
      } else if (key == "data.d_shared") {
        cfg.synth.d_shared = text::parse_uint<size_t>(value, k);
      } else if (key == "data.d_specific") {
        cfg.synth.d_specific = text::parse_uint<size_t>(value, k);
      } else if (key == "data.d_nuisance") {
        cfg.synth.d_nuisance = text::parse_uint<size_t>(value, k);
      } else if (key == "data.n_samples") {
        cfg.synth.n_samples = text::parse_uint<size_t>(value, k);
      } else if (key == "data.n_test") {
        cfg.data_n_test = text::parse_uint<size_t>(value, k);
      } else if (key == "data.mixing_seed") {
        cfg.synth.mixing_seed = text::parse_uint<uint64_t>(value, k);
      } else if (key == "data.code_seed") {
        cfg.synth.code_seed = text::parse_uint<uint64_t>(value, k);
      } else if (key == "data.noise_std") {
        cfg.synth.noise_std = text::parse_double(value, k);
      } else if (key == "data.nuisance_scale") {
        cfg.synth.nuisance_scale = text::parse_double(value, k);
      } else if (key == "data.jitter_std") {
        cfg.synth.jitter_std = text::parse_double(value, k);
      } else if (key == "data.identical_mixing") {
        cfg.synth.identical_mixing = text::parse_bool(value, k);
      } else if (key == "data.transfer_code_seeds") {
        cfg.transfer_code_seeds = parse_u64_list(value, k);
      } else if (key == "loss.lambda1") {
        cfg.train.weights.lambda1 = text::parse_double(value, k);
      } else if (key == "loss.lambda2") {
        cfg.train.weights.lambda2 = text::parse_double(value, k);
      } else if (key == "loss.lambda3") {
        cfg.train.weights.lambda3 = text::parse_double(value, k);
      } else if (key == "loss.lambda4") {
        cfg.train.weights.lambda4 = text::parse_double(value, k);
      } else if (key == "loss.tau") {
        cfg.train.weights.tau = text::parse_double(value, k);
      } else if (key == "train.epochs") {
        cfg.train.epochs = text::parse_uint<uint64_t>(value, k);
      } else if (key == "train.batch_size") {
        cfg.train.batch_size = text::parse_uint<size_t>(value, k);
      } else if (key == "train.lr") {
        cfg.train.learning_rate = text::parse_double(value, k);
      } else if (key == "train.beta1") {
        cfg.train.beta1 = text::parse_double(value, k);
      } else if (key == "train.beta2") {
        cfg.train.beta2 = text::parse_double(value, k);
      } else if (key == "train.eps") {
        cfg.train.adam_eps = text::parse_double(value, k);
      } else if (key == "train.dtype") {
        if (value == "f32") cfg.train.dtype = SuperInfoConfig::Dtype::F32;
        else if (value == "f64") cfg.train.dtype = SuperInfoConfig::Dtype::F64;
        else throw ValidationError("train.dtype must be f32 or f64");
      } else if (key == "train.freeze_heads") {
        cfg.train.freeze_heads = text::parse_bool(value, k);
      } else if (key == "model.hidden") {
        cfg.train.enc_hidden = parse_size_list(value, k);
      } else if (key == "model.repr_dim") {
        cfg.train.repr_dim = text::parse_uint<size_t>(value, k);
      } else if (key == "model.proj_dim") {
        cfg.train.proj_dim = text::parse_uint<size_t>(value, k);
      } else if (key == "model.dec_hidden") {
        cfg.train.dec_hidden = parse_size_list(value, k);
      } else if (key == "aug.crop_lo") {
        cfg.train.aug.crop_lo = text::parse_double(value, k);
      } else if (key == "aug.crop_hi") {
        cfg.train.aug.crop_hi = text::parse_double(value, k);
      } else if (key == "aug.flip_prob") {
        cfg.train.aug.flip_prob = text::parse_double(value, k);
      } else if (key == "aug.noise_std") {
        cfg.train.aug.noise_std = text::parse_double(value, k);
      } else if (key == "aug.scale_lo") {
        cfg.train.aug.scale_lo = text::parse_double(value, k);
      } else if (key == "aug.scale_hi") {
        cfg.train.aug.scale_hi = text::parse_double(value, k);
      } else if (key == "probe.lr") {
        cfg.probe.learning_rate = text::parse_double(value, k);
      } else if (key == "probe.iters") {
        cfg.probe.iterations = text::parse_uint<size_t>(value, k);
      } else if (key == "probe.n_train") {
        cfg.probe_n_train = text::parse_uint<size_t>(value, k);
      } else if (key == "probe.n_test") {
        cfg.probe_n_test = text::parse_uint<size_t>(value, k);
      } else if (key == "metrics.deterministic") {
        cfg.train.deterministic_metrics = text::parse_bool(value, k);
      }
    }
    if (!have_seed) throw ValidationError("config is missing required key 'seed'");
    cfg.train.seed = cfg.seed;
    cfg.probe.seed = cfg.seed;
    cfg.synth.validate();
    cfg.train.validate();
    cfg.probe.validate();
    return cfg;
  }

  static RunConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
    return from_stream(in);
  }

  static RunConfig from_text(std::string_view body) {
    std::istringstream in{std::string(body)};
    return from_stream(in);
  }

 private:
  static bool is_known(const std::string& key) {
    for (const auto& k : known_keys())
      if (k == key) return true;
    return false;
  }

  static std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    return b == std::string_view::npos ? std::string() : std::string(s.substr(b, e - b + 1));
  }

  static std::vector<std::pair<std::string, std::string>> parse_kv(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const size_t eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("config line " + std::to_string(line_no) + " is not key=value");
      }
      std::string key = trim(stripped.substr(0, eq));
      std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) {
        throw ValidationError("config line " + std::to_string(line_no) + " has an empty key");
      }
      for (const auto& [k, v] : out) {
        if (k == key) throw ValidationError("duplicate config key '" + key + "'");
      }
      out.emplace_back(std::move(key), std::move(value));
    }
    return out;
  }

  static std::vector<size_t> parse_size_list(std::string_view s, const char* what) {
    std::vector<size_t> out;
    if (trim(s).empty()) return out;
    size_t start = 0;
    const std::string str(s);
    while (start <= str.size()) {
      size_t comma = str.find(',', start);
      const std::string item = trim(std::string_view(str).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start));
      out.push_back(text::parse_uint<size_t>(item, what));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }

  static std::vector<uint64_t> parse_u64_list(std::string_view s, const char* what) {
    std::vector<uint64_t> out;
    for (size_t v : parse_size_list(s, what)) out.push_back(v);
    return out;
  }
};

}  // namespace superinfo
