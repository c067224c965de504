#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <unordered_map>
#include <vector>

#include "superinfo/tensor.hpp"

namespace superinfo {

enum class OpKind : uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  MatMul,
  Relu,
  Exp,
  Log,
  Square,
  Sum,
  Mean,
  SoftmaxRows,
  L2NormalizeRows,
  ConcatRows,
  Transpose,
  GatherRows,
  Scale,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::MatMul: return "matmul";
    case OpKind::Relu: return "relu";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Square: return "square";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::SoftmaxRows: return "softmax_rows";
    case OpKind::L2NormalizeRows: return "l2_normalize_rows";
    case OpKind::ConcatRows: return "concat_rows";
    case OpKind::Transpose: return "transpose";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::Scale: return "scale";
  }
  return "?";
}

template <Scalar T>
class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; valid until the tape
/// is reset. References returned by value() stay valid while the tape grows
/// (node storage is a deque), so callers may hold them across further ops.
template <Scalar T>
struct Var {
  Tape<T>* tape = nullptr;
  uint32_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
};

/// Gradients of a scalar loss with respect to every requires_grad leaf,
/// keyed by leaf id. Leaves the loss does not reach hold zeros.
template <Scalar T>
using GradMap = std::unordered_map<uint32_t, Tensor<T>>;

/// Append-only record of executed primitives. Node inputs always precede the
/// node, so one reverse sweep is a valid backpropagation order. A tape
/// supports one backward pass per recorded segment; recording more nodes
/// re-arms it.
template <Scalar T>
class Tape {
 public:
  static constexpr uint32_t kNone = std::numeric_limits<uint32_t>::max();

  Var<T> leaf(Tensor<T> value) {
    const bool rg = value.requires_grad;
    return push(OpKind::Leaf, kNone, kNone, std::move(value), rg);
  }

  Var<T> leaf(Tensor<T> value, bool requires_grad) {
    value.requires_grad = requires_grad;
    return leaf(std::move(value));
  }

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  const Tensor<T>& value(uint32_t id) const { return nodes_[id].value; }
  size_t size() const { return nodes_.size(); }

  void reset() {
    nodes_.clear();
    backward_done_ = false;
  }

  // -- primitives -----------------------------------------------------------

  Var<T> add(Var<T> a, Var<T> b) {
    return push(OpKind::Add, a.id, b.id, kern::add(val(a), val(b)), needs(a, b));
  }
  Var<T> sub(Var<T> a, Var<T> b) {
    return push(OpKind::Sub, a.id, b.id, kern::sub(val(a), val(b)), needs(a, b));
  }
  Var<T> mul(Var<T> a, Var<T> b) {
    return push(OpKind::Mul, a.id, b.id, kern::mul(val(a), val(b)), needs(a, b));
  }
  Var<T> matmul(Var<T> a, Var<T> b) {
    return push(OpKind::MatMul, a.id, b.id, kern::matmul(val(a), val(b)), needs(a, b));
  }
  Var<T> relu(Var<T> x) { return push(OpKind::Relu, x.id, kNone, kern::relu(val(x)), needs(x)); }
  Var<T> exp(Var<T> x) { return push(OpKind::Exp, x.id, kNone, kern::exp(val(x)), needs(x)); }
  Var<T> log(Var<T> x) { return push(OpKind::Log, x.id, kNone, kern::log(val(x)), needs(x)); }
  Var<T> square(Var<T> x) {
    return push(OpKind::Square, x.id, kNone, kern::square(val(x)), needs(x));
  }
  Var<T> sum(Var<T> x) { return push(OpKind::Sum, x.id, kNone, kern::sum(val(x)), needs(x)); }
  Var<T> mean(Var<T> x) { return push(OpKind::Mean, x.id, kNone, kern::mean(val(x)), needs(x)); }
  Var<T> softmax_rows(Var<T> x) {
    return push(OpKind::SoftmaxRows, x.id, kNone, kern::softmax_rows(val(x)), needs(x));
  }
  Var<T> l2_normalize_rows(Var<T> x) {
    return push(OpKind::L2NormalizeRows, x.id, kNone, kern::l2_normalize_rows(val(x)), needs(x));
  }
  Var<T> concat_rows(Var<T> a, Var<T> b) {
    return push(OpKind::ConcatRows, a.id, b.id, kern::concat_rows(val(a), val(b)), needs(a, b));
  }
  Var<T> transpose(Var<T> x) {
    return push(OpKind::Transpose, x.id, kNone, kern::transpose(val(x)), needs(x));
  }
  Var<T> gather_rows(Var<T> x, std::vector<uint32_t> rows) {
    Var<T> out =
        push(OpKind::GatherRows, x.id, kNone, kern::gather_rows(val(x), rows), needs(x));
    nodes_[out.id].rows = std::move(rows);
    return out;
  }
  Var<T> scale(Var<T> x, double factor) {
    Var<T> out = push(OpKind::Scale, x.id, kNone, kern::scale(val(x), factor), needs(x));
    nodes_[out.id].factor = factor;
    return out;
  }

  /// Kind-dispatched entry point; `aux` carries the scale factor when kind is
  /// Scale. GatherRows needs the dedicated overload.
  Var<T> apply(OpKind kind, std::vector<Var<T>> inputs, double aux = 0.0) {
    switch (kind) {
      case OpKind::Add: return add(in2(kind, inputs, 0), in2(kind, inputs, 1));
      case OpKind::Sub: return sub(in2(kind, inputs, 0), in2(kind, inputs, 1));
      case OpKind::Mul: return mul(in2(kind, inputs, 0), in2(kind, inputs, 1));
      case OpKind::MatMul: return matmul(in2(kind, inputs, 0), in2(kind, inputs, 1));
      case OpKind::ConcatRows: return concat_rows(in2(kind, inputs, 0), in2(kind, inputs, 1));
      case OpKind::Relu: return relu(in1(kind, inputs));
      case OpKind::Exp: return exp(in1(kind, inputs));
      case OpKind::Log: return log(in1(kind, inputs));
      case OpKind::Square: return square(in1(kind, inputs));
      case OpKind::Sum: return sum(in1(kind, inputs));
      case OpKind::Mean: return mean(in1(kind, inputs));
      case OpKind::SoftmaxRows: return softmax_rows(in1(kind, inputs));
      case OpKind::L2NormalizeRows: return l2_normalize_rows(in1(kind, inputs));
      case OpKind::Transpose: return transpose(in1(kind, inputs));
      case OpKind::Scale: return scale(in1(kind, inputs), aux);
      default: throw LogicError(std::string("apply: unsupported kind ") + op_name(kind));
    }
  }

  /// Reverse sweep from a scalar loss. Returns gradients for every
  /// requires_grad leaf on the tape (zeros when the loss does not reach it).
  GradMap<T> backward(Var<T> loss) {
    if (loss.tape != this) throw LogicError("backward: loss recorded on a different tape");
    if (!value(loss.id).is_scalar()) {
      throw LogicError("backward: loss is not scalar, shape " + shape_str(value(loss.id).shape));
    }
    if (backward_done_) {
      throw LogicError("backward: tape already consumed; record a new forward first");
    }
    backward_done_ = true;

    std::vector<Tensor<T>> grads(nodes_.size());
    std::vector<bool> has_grad(nodes_.size(), false);
    seed(grads, has_grad, loss.id);

    for (uint32_t id = loss.id + 1; id-- > 0;) {
      const Node& node = nodes_[id];
      if (!has_grad[id] || node.op == OpKind::Leaf) continue;
      propagate(node, grads[id], grads, has_grad);
    }

    GradMap<T> out;
    for (uint32_t id = 0; id < nodes_.size(); ++id) {
      const Node& node = nodes_[id];
      if (node.op != OpKind::Leaf || !node.value.requires_grad) continue;
      if (has_grad[id]) {
        out.emplace(id, std::move(grads[id]));
      } else {
        out.emplace(id, Tensor<T>(node.value.shape));
      }
    }
    return out;
  }

 private:
  struct Node {
    OpKind op;
    uint32_t in0, in1;
    Tensor<T> value;
    double factor = 0.0;          // Scale
    std::vector<uint32_t> rows;   // GatherRows
  };

  // Deque, not vector: pushing must never invalidate references handed out
  // through value(), which loss code holds across subsequent recordings.
  std::deque<Node> nodes_;
  bool backward_done_ = false;

  const Tensor<T>& val(Var<T> v) const {
    if (v.tape != this) throw LogicError("op input recorded on a different tape");
    return nodes_[v.id].value;
  }
  static bool needs(Var<T> a) { return a.tape->nodes_[a.id].value.requires_grad; }
  static bool needs(Var<T> a, Var<T> b) { return needs(a) || needs(b); }

  Var<T> push(OpKind op, uint32_t in0, uint32_t in1, Tensor<T> value, bool requires_grad) {
    value.requires_grad = requires_grad;
    nodes_.push_back(Node{op, in0, in1, std::move(value), 0.0, {}});
    backward_done_ = false;
    return Var<T>{this, static_cast<uint32_t>(nodes_.size() - 1)};
  }

  Var<T> in1(OpKind k, const std::vector<Var<T>>& v) {
    if (v.size() != 1) throw LogicError(std::string(op_name(k)) + ": expects 1 input");
    return v[0];
  }
  Var<T> in2(OpKind k, const std::vector<Var<T>>& v, size_t i) {
    if (v.size() != 2) throw LogicError(std::string(op_name(k)) + ": expects 2 inputs");
    return v[i];
  }

  void seed(std::vector<Tensor<T>>& grads, std::vector<bool>& has, uint32_t id) {
    grads[id] = Tensor<T>::scalar(T(1));
    has[id] = true;
  }

  void accum(std::vector<Tensor<T>>& grads, std::vector<bool>& has, uint32_t id,
             Tensor<T>&& g) {
    if (!nodes_[id].value.requires_grad) return;
    if (!has[id]) {
      grads[id] = std::move(g);
      has[id] = true;
    } else {
      for (size_t i = 0; i < g.numel(); ++i) grads[id].data[i] += g.data[i];
    }
  }

  void propagate(const Node& node, const Tensor<T>& g, std::vector<Tensor<T>>& grads,
                 std::vector<bool>& has) {
    const uint32_t a = node.in0, b = node.in1;
    switch (node.op) {
      case OpKind::Add: {
        const Tensor<T>& av = nodes_[a].value;
        const Tensor<T>& bv = nodes_[b].value;
        accum(grads, has, a, Tensor<T>(g));
        if (bv.shape == av.shape) {
          accum(grads, has, b, Tensor<T>(g));
        } else {
          // row-broadcast operand: gradient is the column sum
          Tensor<T> gb(bv.shape);
          const size_t n = bv.shape[1];
          for (size_t r = 0; r < g.shape[0]; ++r)
            for (size_t c = 0; c < n; ++c) gb.data[c] += g.data[r * n + c];
          accum(grads, has, b, std::move(gb));
        }
        break;
      }
      case OpKind::Sub: {
        accum(grads, has, a, Tensor<T>(g));
        Tensor<T> gb(g.shape);
        for (size_t i = 0; i < g.numel(); ++i) gb.data[i] = -g.data[i];
        accum(grads, has, b, std::move(gb));
        break;
      }
      case OpKind::Mul: {
        accum(grads, has, a, kern::mul(g, nodes_[b].value));
        accum(grads, has, b, kern::mul(g, nodes_[a].value));
        break;
      }
      case OpKind::MatMul: {
        // dA = g B^T, dB = A^T g
        accum(grads, has, a, kern::matmul(g, kern::transpose(nodes_[b].value)));
        accum(grads, has, b, kern::matmul(kern::transpose(nodes_[a].value), g));
        break;
      }
      case OpKind::Relu: {
        const Tensor<T>& x = nodes_[a].value;
        Tensor<T> gx(g.shape);
        for (size_t i = 0; i < g.numel(); ++i) gx.data[i] = x.data[i] > T(0) ? g.data[i] : T(0);
        accum(grads, has, a, std::move(gx));
        break;
      }
      case OpKind::Exp: {
        accum(grads, has, a, kern::mul(g, node.value));
        break;
      }
      case OpKind::Log: {
        const Tensor<T>& x = nodes_[a].value;
        Tensor<T> gx(g.shape);
        for (size_t i = 0; i < g.numel(); ++i) gx.data[i] = g.data[i] / x.data[i];
        accum(grads, has, a, std::move(gx));
        break;
      }
      case OpKind::Square: {
        const Tensor<T>& x = nodes_[a].value;
        Tensor<T> gx(g.shape);
        for (size_t i = 0; i < g.numel(); ++i) gx.data[i] = T(2) * x.data[i] * g.data[i];
        accum(grads, has, a, std::move(gx));
        break;
      }
      case OpKind::Sum: {
        const Tensor<T>& x = nodes_[a].value;
        accum(grads, has, a, Tensor<T>::full(x.shape, g.data[0]));
        break;
      }
      case OpKind::Mean: {
        const Tensor<T>& x = nodes_[a].value;
        accum(grads, has, a,
              Tensor<T>::full(x.shape, g.data[0] / static_cast<T>(x.numel())));
        break;
      }
      case OpKind::SoftmaxRows: {
        // dx = y * (g - <g, y>_row)
        const Tensor<T>& y = node.value;
        const size_t m = y.shape[0], n = y.shape[1];
        Tensor<T> gx(y.shape);
        for (size_t r = 0; r < m; ++r) {
          T dot = 0;
          for (size_t c = 0; c < n; ++c) dot += g.data[r * n + c] * y.data[r * n + c];
          for (size_t c = 0; c < n; ++c)
            gx.data[r * n + c] = y.data[r * n + c] * (g.data[r * n + c] - dot);
        }
        accum(grads, has, a, std::move(gx));
        break;
      }
      case OpKind::L2NormalizeRows: {
        // y = x / (|x| + eps); dx = g/(|x|+eps) - <g,x> x / ((|x|+eps)^2 |x|)
        // zero rows get zero gradient (the map is flat there by convention)
        const Tensor<T>& x = nodes_[a].value;
        const size_t m = x.shape[0], n = x.shape[1];
        Tensor<T> gx(x.shape);
        for (size_t r = 0; r < m; ++r) {
          double nrm = 0;
          for (size_t c = 0; c < n; ++c)
            nrm += static_cast<double>(x.data[r * n + c]) * static_cast<double>(x.data[r * n + c]);
          nrm = std::sqrt(nrm);
          if (nrm == 0.0) continue;
          const double denom = nrm + kern::kL2NormFloor;
          double gdotx = 0;
          for (size_t c = 0; c < n; ++c)
            gdotx += static_cast<double>(g.data[r * n + c]) * static_cast<double>(x.data[r * n + c]);
          for (size_t c = 0; c < n; ++c) {
            const double xi = x.data[r * n + c];
            gx.data[r * n + c] =
                static_cast<T>(g.data[r * n + c] / denom - gdotx * xi / (denom * denom * nrm));
          }
        }
        accum(grads, has, a, std::move(gx));
        break;
      }
      case OpKind::ConcatRows: {
        const Tensor<T>& av = nodes_[a].value;
        const Tensor<T>& bv = nodes_[b].value;
        const size_t n = av.shape[1];
        Tensor<T> ga(av.shape), gb(bv.shape);
        std::copy(g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(av.numel()),
                  ga.data.begin());
        std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(av.numel()), g.data.end(),
                  gb.data.begin());
        (void)n;
        accum(grads, has, a, std::move(ga));
        accum(grads, has, b, std::move(gb));
        break;
      }
      case OpKind::Transpose: {
        accum(grads, has, a, kern::transpose(g));
        break;
      }
      case OpKind::GatherRows: {
        const Tensor<T>& x = nodes_[a].value;
        const size_t n = x.shape[1];
        Tensor<T> gx(x.shape);
        for (size_t i = 0; i < node.rows.size(); ++i)
          for (size_t c = 0; c < n; ++c) gx.data[node.rows[i] * n + c] += g.data[i * n + c];
        accum(grads, has, a, std::move(gx));
        break;
      }
      case OpKind::Scale: {
        accum(grads, has, a, kern::scale(g, node.factor));
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }
};

// Free-function spelling so loss/model code reads like plain math.
template <Scalar T> Var<T> add(Var<T> a, Var<T> b) { return a.tape->add(a, b); }
template <Scalar T> Var<T> sub(Var<T> a, Var<T> b) { return a.tape->sub(a, b); }
template <Scalar T> Var<T> mul(Var<T> a, Var<T> b) { return a.tape->mul(a, b); }
template <Scalar T> Var<T> matmul(Var<T> a, Var<T> b) { return a.tape->matmul(a, b); }
template <Scalar T> Var<T> relu(Var<T> x) { return x.tape->relu(x); }
template <Scalar T> Var<T> exp(Var<T> x) { return x.tape->exp(x); }
template <Scalar T> Var<T> log(Var<T> x) { return x.tape->log(x); }
template <Scalar T> Var<T> square(Var<T> x) { return x.tape->square(x); }
template <Scalar T> Var<T> sum(Var<T> x) { return x.tape->sum(x); }
template <Scalar T> Var<T> mean(Var<T> x) { return x.tape->mean(x); }
template <Scalar T> Var<T> softmax_rows(Var<T> x) { return x.tape->softmax_rows(x); }
template <Scalar T> Var<T> l2_normalize_rows(Var<T> x) { return x.tape->l2_normalize_rows(x); }
template <Scalar T> Var<T> concat_rows(Var<T> a, Var<T> b) { return a.tape->concat_rows(a, b); }
template <Scalar T> Var<T> transpose(Var<T> x) { return x.tape->transpose(x); }
template <Scalar T> Var<T> gather_rows(Var<T> x, std::vector<uint32_t> rows) {
  return x.tape->gather_rows(x, std::move(rows));
}
template <Scalar T> Var<T> scale(Var<T> x, double factor) { return x.tape->scale(x, factor); }

}  // namespace superinfo
