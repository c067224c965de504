#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "superinfo/autodiff.hpp"
#include "superinfo/rng.hpp"
#include "superinfo/tensor.hpp"

namespace superinfo {

/// Widths of an MLP, input first, output last; ReLU on hidden layers,
/// identity on the output layer.
struct LayerSpec {
  std::vector<size_t> widths;

  void validate() const {
    if (widths.size() < 2) throw ValidationError("layer spec needs input and output widths");
    for (size_t w : widths)
      if (w == 0) throw ValidationError("layer widths must be positive");
  }
};

template <Scalar T>
struct Linear {
  Tensor<T> w;  // (in, out)
  Tensor<T> b;  // (1, out), row-broadcast over the batch

  size_t in_dim() const { return w.shape[0]; }
  size_t out_dim() const { return w.shape[1]; }
};

template <Scalar T>
struct Mlp {
  std::vector<Linear<T>> layers;

  size_t in_dim() const { return layers.front().in_dim(); }
  size_t out_dim() const { return layers.back().out_dim(); }
};

/// Parameters of the five networks of the training loop: encoder f,
/// projector g, Gaussian heads q_mu / q_logvar, decoder r.
template <Scalar T>
struct ModelBundle {
  Mlp<T> f;          // D -> hidden -> H
  Mlp<T> g;          // H -> P
  Linear<T> q_mu;    // H -> H
  Linear<T> q_logvar;// H -> H
  Mlp<T> r;          // H -> dec hidden -> D

  size_t input_dim() const { return f.in_dim(); }
  size_t repr_dim() const { return f.out_dim(); }
  size_t proj_dim() const { return g.out_dim(); }

  /// Stable name -> tensor mapping in a fixed order; the order defines
  /// optimizer slot and checkpoint layout.
  std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    auto add_mlp = [&out](const char* prefix, Mlp<T>& m) {
      for (size_t i = 0; i < m.layers.size(); ++i) {
        out.emplace_back(std::string(prefix) + "." + std::to_string(i) + ".w", &m.layers[i].w);
        out.emplace_back(std::string(prefix) + "." + std::to_string(i) + ".b", &m.layers[i].b);
      }
    };
    add_mlp("f", f);
    add_mlp("g", g);
    out.emplace_back("q_mu.w", &q_mu.w);
    out.emplace_back("q_mu.b", &q_mu.b);
    out.emplace_back("q_logvar.w", &q_logvar.w);
    out.emplace_back("q_logvar.b", &q_logvar.b);
    add_mlp("r", r);
    return out;
  }

  void check_dims() const {
    const size_t H = f.out_dim();
    if (g.in_dim() != H || q_mu.in_dim() != H || q_logvar.in_dim() != H || r.in_dim() != H) {
      throw ValidationError("model bundle dimension chain broken at representation width");
    }
    if (q_mu.out_dim() != H || q_logvar.out_dim() != H) {
      throw ValidationError("gaussian heads must map H -> H");
    }
    if (r.out_dim() != f.in_dim()) {
      throw ValidationError("decoder output width must equal encoder input width");
    }
    for (const auto* m : {&f, &g, &r}) {
      for (size_t i = 1; i < m->layers.size(); ++i) {
        if (m->layers[i].in_dim() != m->layers[i - 1].out_dim()) {
          throw ValidationError("mlp layer widths do not chain");
        }
      }
    }
  }
};

namespace detail {

template <Scalar T>
Linear<T> init_linear(Rng& rng, size_t in, size_t out) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in));
  return Linear<T>{rng_normal<T>(rng, {in, out}, 0.0, stddev),
                   Tensor<T>({size_t(1), out})};  // biases stay zero
}

template <Scalar T>
Mlp<T> init_mlp(Rng& rng, const LayerSpec& spec) {
  spec.validate();
  Mlp<T> m;
  for (size_t i = 0; i + 1 < spec.widths.size(); ++i) {
    m.layers.push_back(init_linear<T>(rng, spec.widths[i], spec.widths[i + 1]));
  }
  return m;
}

inline std::vector<size_t> chain(size_t first, const std::vector<size_t>& mid, size_t last) {
  std::vector<size_t> w{first};
  w.insert(w.end(), mid.begin(), mid.end());
  w.push_back(last);
  return w;
}

}  // namespace detail

/// He-scaled normal weights (std √(2/fan_in)), zero biases, drawn in a fixed
/// order (f, g, q_mu, q_logvar, r) so a seed pins every parameter byte.
template <Scalar T>
ModelBundle<T> init_bundle(Rng& rng, size_t input_dim, const std::vector<size_t>& enc_hidden,
                           size_t repr_dim, size_t proj_dim,
                           const std::vector<size_t>& dec_hidden) {
  if (input_dim == 0 || repr_dim == 0 || proj_dim == 0) {
    throw ValidationError("model dims must be positive");
  }
  ModelBundle<T> b;
  b.f = detail::init_mlp<T>(rng, LayerSpec{detail::chain(input_dim, enc_hidden, repr_dim)});
  b.g = detail::init_mlp<T>(rng, LayerSpec{detail::chain(repr_dim, {}, proj_dim)});
  b.q_mu = detail::init_linear<T>(rng, repr_dim, repr_dim);
  b.q_logvar = detail::init_linear<T>(rng, repr_dim, repr_dim);
  b.r = detail::init_mlp<T>(rng, LayerSpec{detail::chain(repr_dim, dec_hidden, input_dim)});
  b.check_dims();
  return b;
}

constexpr double kLogVarLo = -10.0;
constexpr double kLogVarHi = 10.0;

/// The bundle's parameters mirrored onto a tape as leaves, plus the forward
/// functions that build the training graph. Parameter Vars keep the
/// named_params order, so gradients map back to parameters by position.
template <Scalar T>
struct TapedBundle {
  Tape<T>* tape;
  std::vector<Var<T>> params;       // leaf per named param, fixed order
  std::vector<Var<T>> f_w, f_b, g_w, g_b, r_w, r_b;
  Var<T> qmu_w{}, qmu_b{}, qlv_w{}, qlv_b{};

  TapedBundle(Tape<T>& t, ModelBundle<T>& bundle, bool train_heads = true) : tape(&t) {
    auto named = bundle.named_params();
    params.reserve(named.size());
    for (auto& [name, tensor] : named) {
      Tensor<T> copy(*tensor);
      const bool head = name.starts_with("q_") || name.starts_with("r.");
      copy.requires_grad = train_heads || !head;
      Var<T> v = t.leaf(std::move(copy));
      params.push_back(v);
      if (name.starts_with("f.")) (name.ends_with(".w") ? f_w : f_b).push_back(v);
      else if (name.starts_with("g.")) (name.ends_with(".w") ? g_w : g_b).push_back(v);
      else if (name.starts_with("r.")) (name.ends_with(".w") ? r_w : r_b).push_back(v);
      else if (name == "q_mu.w") qmu_w = v;
      else if (name == "q_mu.b") qmu_b = v;
      else if (name == "q_logvar.w") qlv_w = v;
      else if (name == "q_logvar.b") qlv_b = v;
    }
  }

  Var<T> mlp_forward(const std::vector<Var<T>>& ws, const std::vector<Var<T>>& bs,
                     Var<T> x) const {
    for (size_t i = 0; i < ws.size(); ++i) {
      x = add(matmul(x, ws[i]), bs[i]);
      if (i + 1 < ws.size()) x = relu(x);
    }
    return x;
  }

  Var<T> encode(Var<T> v) const { return mlp_forward(f_w, f_b, v); }
  Var<T> project(Var<T> h) const { return mlp_forward(g_w, g_b, h); }
  Var<T> decode(Var<T> h) const { return mlp_forward(r_w, r_b, h); }

  /// mu unbounded; logvar clamped into [-10, 10] via the ReLU identity
  /// lo + relu(x - lo) - relu(x - hi), which stays differentiable on-tape.
  std::pair<Var<T>, Var<T>> gaussian_heads(Var<T> h) const {
    Var<T> mu = add(matmul(h, qmu_w), qmu_b);
    Var<T> raw = add(matmul(h, qlv_w), qlv_b);
    const auto& shp = raw.value().shape;
    Var<T> lo = tape->constant(Tensor<T>::full(shp, static_cast<T>(kLogVarLo)));
    Var<T> hi = tape->constant(Tensor<T>::full(shp, static_cast<T>(kLogVarHi)));
    Var<T> clamped = add(lo, sub(relu(sub(raw, lo)), relu(sub(raw, hi))));
    return {mu, clamped};
  }
};

// -- tape-free forwards (evaluation / feature extraction) --------------------

namespace kern {

template <Scalar T>
Tensor<T> mlp_eval(const Mlp<T>& m, const Tensor<T>& x) {
  Tensor<T> h = add(matmul(x, m.layers[0].w), m.layers[0].b);
  for (size_t i = 1; i < m.layers.size(); ++i) {
    h = add(matmul(relu(h), m.layers[i].w), m.layers[i].b);
  }
  return h;
}

}  // namespace kern

/// Deterministic encoder forward with no gradients recorded.
template <Scalar T>
Tensor<T> encode_eval(const ModelBundle<T>& b, const Tensor<T>& v) {
  if (v.rank() != 2 || v.shape[1] != b.input_dim()) {
    throw ShapeError("encode: input must be batch x " + std::to_string(b.input_dim()) +
                     ", got " + shape_str(v.shape));
  }
  return kern::mlp_eval(b.f, v);
}

template <Scalar T>
Tensor<T> project_eval(const ModelBundle<T>& b, const Tensor<T>& h) {
  return kern::mlp_eval(b.g, h);
}

template <Scalar T>
Tensor<T> decode_eval(const ModelBundle<T>& b, const Tensor<T>& h) {
  return kern::mlp_eval(b.r, h);
}

template <Scalar T>
std::pair<Tensor<T>, Tensor<T>> gaussian_heads_eval(const ModelBundle<T>& b,
                                                    const Tensor<T>& h) {
  Tensor<T> mu = kern::add(kern::matmul(h, b.q_mu.w), b.q_mu.b);
  Tensor<T> lv = kern::add(kern::matmul(h, b.q_logvar.w), b.q_logvar.b);
  // Same arithmetic as the taped clamp (lo + relu(x-lo) - relu(x-hi)), not
  // min/max, so both paths produce bit-identical values.
  const T lo = static_cast<T>(kLogVarLo), hi = static_cast<T>(kLogVarHi);
  for (auto& x : lv.data) {
    const T a = x - lo, b2 = x - hi;
    x = lo + ((a > T(0) ? a : T(0)) - (b2 > T(0) ? b2 : T(0)));
  }
  return {std::move(mu), std::move(lv)};
}

}  // namespace superinfo
