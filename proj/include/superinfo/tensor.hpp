#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "superinfo/errors.hpp"
#include "superinfo/rng.hpp"

namespace superinfo {

template <typename T>
concept Scalar = std::same_as<T, float> || std::same_as<T, double>;

inline std::string shape_str(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ")";
  return os.str();
}

/// Dense row-major numeric array. Values are immutable by convention once an
/// op has produced them; only optimizer steps mutate `data` in place.
template <Scalar T>
struct Tensor {
  std::vector<size_t> shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty = no gradient attached

  Tensor() = default;

  explicit Tensor(std::vector<size_t> shape_in) : shape(std::move(shape_in)) {
    validate_shape();
    data.assign(numel_of(shape), T(0));
  }

  Tensor(std::vector<size_t> shape_in, std::vector<T> data_in)
      : shape(std::move(shape_in)), data(std::move(data_in)) {
    validate_shape();
    if (data.size() != numel_of(shape)) {
      throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
  }

  static Tensor full(std::vector<size_t> shape_in, T value) {
    Tensor t(std::move(shape_in));
    for (auto& v : t.data) v = value;
    return t;
  }

  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  static size_t numel_of(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
  }

  size_t numel() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  bool is_scalar() const { return numel() == 1; }

  size_t rows() const {
    require_rank2("rows");
    return shape[0];
  }
  size_t cols() const {
    require_rank2("cols");
    return shape[1];
  }

  T& at(size_t r, size_t c) { return data[r * cols() + c]; }
  T at(size_t r, size_t c) const { return data[r * cols() + c]; }

  void set_grad(std::vector<T> g) {
    if (g.size() != data.size()) {
      throw ShapeError("tensor grad: length " + std::to_string(g.size()) +
                       " does not match tensor numel " + std::to_string(data.size()));
    }
    grad = std::move(g);
  }

  bool all_finite() const {
    for (T v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  void validate_shape() const {
    if (shape.empty()) throw ShapeError("tensor: empty shape");
    for (size_t i = 0; i < shape.size(); ++i) {
      // rank-2 tensors may have zero rows (empty batches); every other dim
      // must be positive
      if (shape[i] == 0 && !(shape.size() == 2 && i == 0)) {
        throw ShapeError("tensor: zero dim in shape " + shape_str(shape));
      }
    }
  }

  void require_rank2(const char* who) const {
    if (shape.size() != 2) {
      throw ShapeError(std::string(who) + ": tensor is not rank-2, shape " + shape_str(shape));
    }
  }
};

// ---------------------------------------------------------------------------
// Raw (untaped) tensor math. These are the evaluation-path kernels; the
// autodiff layer in autodiff.hpp calls the same functions for its forwards.
// All reductions run in a fixed left-to-right order.
// ---------------------------------------------------------------------------

namespace kern {

template <Scalar T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                     " vs " + shape_str(b.shape));
  }
}

/// add supports one broadcast form: (m,n) + (1,n), applied row-wise.
template <Scalar T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape != b.shape) {
    if (a.rank() == 2 && b.rank() == 2 && b.shape[0] == 1 && b.shape[1] == a.shape[1]) {
      Tensor<T> out(a.shape);
      const size_t n = a.shape[1];
      for (size_t r = 0; r < a.shape[0]; ++r)
        for (size_t c = 0; c < n; ++c) out.data[r * n + c] = a.data[r * n + c] + b.data[c];
      return out;
    }
    throw ShapeError("add: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
  Tensor<T> out(a.shape);
  for (size_t i = 0; i < a.numel(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

template <Scalar T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("sub", a, b);
  Tensor<T> out(a.shape);
  for (size_t i = 0; i < a.numel(); ++i) out.data[i] = a.data[i] - b.data[i];
  return out;
}

template <Scalar T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("mul", a, b);
  Tensor<T> out(a.shape);
  for (size_t i = 0; i < a.numel(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

template <Scalar T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  }
  const size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor<T> out({m, n});
  // i-k-j order: streams through b rows, keeps the accumulation order fixed
  for (size_t i = 0; i < m; ++i) {
    T* orow = out.data.data() + i * n;
    for (size_t kk = 0; kk < k; ++kk) {
      const T aik = a.data[i * k + kk];
      const T* brow = b.data.data() + kk * n;
      for (size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

template <Scalar T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return out;
}

template <Scalar T>
Tensor<T> exp(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) out.data[i] = std::exp(x.data[i]);
  return out;
}

template <Scalar T>
Tensor<T> log(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) {
    if (!(x.data[i] > T(0))) {
      throw DomainError("log: non-positive input " + std::to_string(static_cast<double>(x.data[i])) +
                        " at flat index " + std::to_string(i));
    }
    out.data[i] = std::log(x.data[i]);
  }
  return out;
}

template <Scalar T>
Tensor<T> square(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] * x.data[i];
  return out;
}

template <Scalar T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (size_t i = 0; i < x.numel(); ++i) acc += x.data[i];
  return Tensor<T>::scalar(acc);
}

template <Scalar T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  T acc = 0;
  for (size_t i = 0; i < x.numel(); ++i) acc += x.data[i];
  return Tensor<T>::scalar(acc / static_cast<T>(x.numel()));
}

template <Scalar T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("softmax_rows: needs rank-2, got " + shape_str(x.shape));
  const size_t m = x.shape[0], n = x.shape[1];
  Tensor<T> out(x.shape);
  for (size_t r = 0; r < m; ++r) {
    const T* in = x.data.data() + r * n;
    T* o = out.data.data() + r * n;
    T mx = in[0];
    for (size_t c = 1; c < n; ++c) mx = in[c] > mx ? in[c] : mx;
    T denom = 0;
    for (size_t c = 0; c < n; ++c) {
      o[c] = std::exp(in[c] - mx);
      denom += o[c];
    }
    for (size_t c = 0; c < n; ++c) o[c] /= denom;
  }
  return out;
}

inline constexpr double kL2NormFloor = 1e-12;

/// Rows scaled to unit L2 norm; the norm gets a 1e-12 floor so zero rows map
/// to zero rather than NaN.
template <Scalar T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("l2_normalize_rows: needs rank-2, got " + shape_str(x.shape));
  const size_t m = x.shape[0], n = x.shape[1];
  Tensor<T> out(x.shape);
  for (size_t r = 0; r < m; ++r) {
    const T* in = x.data.data() + r * n;
    T* o = out.data.data() + r * n;
    double nrm = 0;
    for (size_t c = 0; c < n; ++c) nrm += static_cast<double>(in[c]) * static_cast<double>(in[c]);
    nrm = std::sqrt(nrm) + kL2NormFloor;
    for (size_t c = 0; c < n; ++c) o[c] = static_cast<T>(in[c] / nrm);
  }
  return out;
}

template <Scalar T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[1]) {
    throw ShapeError("concat_rows: incompatible shapes " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  }
  Tensor<T> out({a.shape[0] + b.shape[0], a.shape[1]});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.numel()));
  return out;
}

template <Scalar T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("transpose: needs rank-2, got " + shape_str(x.shape));
  const size_t m = x.shape[0], n = x.shape[1];
  Tensor<T> out({n, m});
  for (size_t r = 0; r < m; ++r)
    for (size_t c = 0; c < n; ++c) out.data[c * m + r] = x.data[r * n + c];
  return out;
}

template <Scalar T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<uint32_t>& rows) {
  if (x.rank() != 2) throw ShapeError("gather_rows: needs rank-2, got " + shape_str(x.shape));
  const size_t n = x.shape[1];
  Tensor<T> out({rows.size(), n});
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.shape[0]) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                       shape_str(x.shape));
    }
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * n),
              x.data.begin() + static_cast<std::ptrdiff_t>((rows[i] + 1) * n),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return out;
}

template <Scalar T>
Tensor<T> scale(const Tensor<T>& x, double factor) {
  Tensor<T> out(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) out.data[i] = static_cast<T>(x.data[i] * static_cast<T>(factor));
  return out;
}

}  // namespace kern

// ---------------------------------------------------------------------------
// Random tensor construction
// ---------------------------------------------------------------------------

/// Normal samples drawn left-to-right in row-major order. Draws happen in
/// double precision and are cast to T, so the f32 and f64 streams agree.
template <Scalar T>
Tensor<T> rng_normal(Rng& rng, std::vector<size_t> shape, double mean, double std) {
  if (std < 0) throw DomainError("rng_normal: std < 0");
  Tensor<T> out(std::move(shape));
  for (auto& v : out.data) v = static_cast<T>(rng.normal(mean, std));
  return out;
}

template <Scalar T>
Tensor<T> rng_uniform(Rng& rng, std::vector<size_t> shape, double lo, double hi) {
  if (lo > hi) throw DomainError("rng_uniform: lo > hi");
  Tensor<T> out(std::move(shape));
  for (auto& v : out.data) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

}  // namespace superinfo
