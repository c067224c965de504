#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "superinfo/models.hpp"
#include "superinfo/tensor.hpp"
#include "superinfo/text.hpp"

namespace superinfo {

struct ProbeConfig {
  double learning_rate = 0.1;
  size_t iterations = 500;
  uint64_t seed = 0;  // recorded in results; the zero-init probe needs no draws

  void validate() const {
    if (!(learning_rate > 0)) throw ValidationError("probe learning rate must be positive");
    if (iterations == 0) throw ValidationError("probe needs at least one iteration");
  }
};

struct ProbeResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // index = class id; 0 when absent in test
  size_t n_train = 0;
  size_t n_test = 0;
  uint64_t probe_seed = 0;
  bool converged = false;

  std::string to_json() const {
    std::string s = "{\"accuracy\":" + text::fmt(accuracy);
    s += ",\"per_class_accuracy\":[";
    for (size_t i = 0; i < per_class_accuracy.size(); ++i) {
      if (i) s += ",";
      s += text::fmt(per_class_accuracy[i]);
    }
    s += "]";
    s += ",\"n_train\":" + text::fmt(static_cast<uint64_t>(n_train));
    s += ",\"n_test\":" + text::fmt(static_cast<uint64_t>(n_test));
    s += ",\"probe_seed\":" + text::fmt(probe_seed);
    s += ",\"converged\":" + std::string(converged ? "true" : "false");
    s += "}";
    return s;
  }
};

/// Encoder output h for every row, computed without augmentation or tape.
template <Scalar T>
Tensor<T> extract_features(const ModelBundle<T>& bundle, const Tensor<float>& x) {
  Tensor<T> input({x.shape[0], x.shape[1]});
  for (size_t i = 0; i < x.numel(); ++i) input.data[i] = static_cast<T>(x.data[i]);
  return encode_eval(bundle, input);
}

/// Multinomial logistic regression on frozen features: zero-initialized
/// weights, full-batch gradient descent, fixed iteration count, f64
/// arithmetic. Prediction is argmax with ties going to the lowest class id;
/// accuracy is the confusion-matrix diagonal over the test count.
inline ProbeResult linear_probe(const Tensor<double>& train_x,
                                const std::vector<uint32_t>& train_y,
                                const Tensor<double>& test_x,
                                const std::vector<uint32_t>& test_y,
                                const ProbeConfig& cfg = {}) {
  cfg.validate();
  if (train_x.rank() != 2 || test_x.rank() != 2 || train_x.shape[1] != test_x.shape[1]) {
    throw ShapeError("probe: train/test feature widths differ");
  }
  if (train_y.size() != train_x.shape[0] || test_y.size() != test_x.shape[0]) {
    throw ValidationError("probe: label counts do not match feature rows");
  }
  if (train_y.empty() || test_y.empty()) {
    throw ValidationError("probe: train and test sets must be non-empty");
  }
  uint32_t max_label = 0;
  for (uint32_t y : train_y) max_label = std::max(max_label, y);
  bool multi_class = false;
  for (uint32_t y : train_y) {
    if (y != train_y[0]) {
      multi_class = true;
      break;
    }
  }
  if (!multi_class) throw DomainError("probe: training labels contain a single class");
  for (uint32_t y : test_y) max_label = std::max(max_label, y);
  const size_t k = max_label + 1;
  const size_t d = train_x.shape[1];
  const size_t n = train_x.shape[0];

  std::vector<double> w(d * k, 0.0), b(k, 0.0);
  std::vector<double> gw(d * k), gb(k), logits(k);
  double grad_inf_norm = 0.0;

  for (size_t it = 0; it < cfg.iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double* xi = &train_x.data[i * d];
      for (size_t c = 0; c < k; ++c) {
        double acc = b[c];
        for (size_t j = 0; j < d; ++j) acc += xi[j] * w[j * k + c];
        logits[c] = acc;
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double denom = 0.0;
      for (size_t c = 0; c < k; ++c) {
        logits[c] = std::exp(logits[c] - mx);
        denom += logits[c];
      }
      for (size_t c = 0; c < k; ++c) {
        const double p = logits[c] / denom;
        const double delta = p - (static_cast<size_t>(train_y[i]) == c ? 1.0 : 0.0);
        gb[c] += delta;
        for (size_t j = 0; j < d; ++j) gw[j * k + c] += xi[j] * delta;
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    grad_inf_norm = 0.0;
    for (size_t j = 0; j < d * k; ++j) {
      const double g = gw[j] * inv_n;
      grad_inf_norm = std::max(grad_inf_norm, std::abs(g));
      w[j] -= cfg.learning_rate * g;
    }
    for (size_t c = 0; c < k; ++c) {
      const double g = gb[c] * inv_n;
      grad_inf_norm = std::max(grad_inf_norm, std::abs(g));
      b[c] -= cfg.learning_rate * g;
    }
  }

  std::vector<uint64_t> confusion(k * k, 0);
  for (size_t i = 0; i < test_y.size(); ++i) {
    const double* xi = &test_x.data[i * d];
    size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < k; ++c) {
      double acc = b[c];
      for (size_t j = 0; j < d; ++j) acc += xi[j] * w[j * k + c];
      if (acc > best_v) {  // strict: ties keep the lowest class id
        best_v = acc;
        best = c;
      }
    }
    confusion[size_t(test_y[i]) * k + best] += 1;
  }

  ProbeResult res;
  res.n_train = n;
  res.n_test = test_y.size();
  res.probe_seed = cfg.seed;
  res.converged = grad_inf_norm <= 1e-3;
  uint64_t correct = 0;
  res.per_class_accuracy.assign(k, 0.0);
  for (size_t c = 0; c < k; ++c) {
    correct += confusion[c * k + c];
    uint64_t row = 0;
    for (size_t j = 0; j < k; ++j) row += confusion[c * k + j];
    if (row > 0) {
      res.per_class_accuracy[c] =
          static_cast<double>(confusion[c * k + c]) / static_cast<double>(row);
    }
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(res.n_test);
  return res;
}

/// A labeled downstream task, already split.
struct ProbeTask {
  Tensor<float> train_x;
  std::vector<uint32_t> train_y;
  Tensor<float> test_x;
  std::vector<uint32_t> test_y;
};

namespace detail {

template <Scalar T>
Tensor<double> widen(const Tensor<T>& t) {
  Tensor<double> out(t.shape);
  for (size_t i = 0; i < t.numel(); ++i) out.data[i] = static_cast<double>(t.data[i]);
  return out;
}

}  // namespace detail

/// Extract-then-probe for one task.
template <Scalar T>
ProbeResult probe_task(const ModelBundle<T>& bundle, const ProbeTask& task,
                       const ProbeConfig& cfg = {}) {
  Tensor<double> ftrain = detail::widen(extract_features(bundle, task.train_x));
  Tensor<double> ftest = detail::widen(extract_features(bundle, task.test_x));
  return linear_probe(ftrain, task.train_y, ftest, task.test_y, cfg);
}

/// Probes every task on the same frozen encoder; pairs with mean_accuracy for
/// the aggregate number reported by transfer runs.
template <Scalar T>
std::vector<ProbeResult> transfer_eval(const ModelBundle<T>& bundle,
                                       const std::vector<ProbeTask>& tasks,
                                       const ProbeConfig& cfg = {}) {
  std::vector<ProbeResult> out;
  out.reserve(tasks.size());
  for (const auto& task : tasks) out.push_back(probe_task(bundle, task, cfg));
  return out;
}

inline double mean_accuracy(const std::vector<ProbeResult>& results) {
  if (results.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : results) s += r.accuracy;
  return s / static_cast<double>(results.size());
}

}  // namespace superinfo
