#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "superinfo/autodiff.hpp"

namespace superinfo {

/// Result of a finite-difference gradient comparison.
struct GradCheckReport {
  double max_rel_err = 0.0;   // worst relative error over all checked coordinates
  size_t checked = 0;         // coordinates compared
  size_t skipped = 0;         // coordinates skipped near non-smooth points
};

/// Compares tape gradients against central finite differences.
///
/// `build_loss` must record a scalar loss for the given parameter tensors on
/// the supplied tape; it is re-invoked on a fresh tape for every probe, so it
/// has to be a pure function of the parameter values. Relative error uses
/// |a - n| / (|a| + |n| + 1e-12). Coordinates whose perturbation interval
/// straddles a point within `kink_radius` of a relu/normalization kink cannot
/// be checked meaningfully; callers avoid them by choosing inputs away from
/// kinks, and `skip_if` lets a caller exclude coordinates explicitly.
template <Scalar T>
GradCheckReport finite_diff_check(
    const std::function<Var<T>(Tape<T>&, std::vector<Var<T>>&)>& build_loss,
    std::vector<Tensor<T>> params, double eps = 1e-5,
    const std::function<bool(size_t, size_t)>& skip_if = nullptr) {
  for (auto& p : params) p.requires_grad = true;

  auto eval = [&](const std::vector<Tensor<T>>& values,
                  GradMap<T>* grads_out) -> double {
    Tape<T> tape;
    std::vector<Var<T>> vars;
    vars.reserve(values.size());
    for (const auto& v : values) vars.push_back(tape.leaf(Tensor<T>(v)));
    Var<T> loss = build_loss(tape, vars);
    const double out = static_cast<double>(loss.value().data[0]);
    if (grads_out) {
      GradMap<T> g = tape.backward(loss);
      GradMap<T> by_param;
      for (size_t i = 0; i < vars.size(); ++i) {
        auto it = g.find(vars[i].id);
        if (it != g.end()) by_param.emplace(static_cast<uint32_t>(i), std::move(it->second));
      }
      *grads_out = std::move(by_param);
    }
    return out;
  };

  GradMap<T> analytic;
  eval(params, &analytic);

  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto it = analytic.find(static_cast<uint32_t>(pi));
    if (it == analytic.end()) continue;
    const Tensor<T>& ga = it->second;
    for (size_t ci = 0; ci < params[pi].numel(); ++ci) {
      if (skip_if && skip_if(pi, ci)) {
        ++report.skipped;
        continue;
      }
      const T saved = params[pi].data[ci];
      params[pi].data[ci] = saved + static_cast<T>(eps);
      const double up = eval(params, nullptr);
      params[pi].data[ci] = saved - static_cast<T>(eps);
      const double down = eval(params, nullptr);
      params[pi].data[ci] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = static_cast<double>(ga.data[ci]);
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      if (rel > report.max_rel_err) report.max_rel_err = rel;
      ++report.checked;
    }
  }
  return report;
}

}  // namespace superinfo
