#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "genclust/array.hpp"
#include "genclust/error.hpp"

namespace genclust {

// Floor applied to logarithm inputs (cross-entropy stabilization).
inline constexpr double kLogFloor = 1e-12;
// Stabilizer inside L2 norms so the norm gradient exists at the origin.
inline constexpr double kNormEps = 1e-12;

enum class Op : std::uint8_t {
  Const,
  MatMulNN,
  MatMulNT,
  MatMulTN,
  Add,
  Sub,
  Mul,
  Div,
  Scale,     // c * a
  AddConst,  // a + c
  Relu,
  ReluMask,  // 1 where a > 0
  ClampMin,  // max(a, c)
  GeMask,    // 1 where a >= c
  Exp,
  Log,  // precondition: inputs >= kLogFloor (use log_clamped)
  Square,
  Sqrt,
  SumAll,     // (r x c) -> (1 x 1)
  RowSum,     // (r x c) -> (r x 1)
  ColSum,     // (r x c) -> (1 x c)
  BcastAll,   // (1 x 1) -> (r x c)
  BcastCols,  // (r x 1) -> (r x c)
  BcastRows,  // (1 x c) -> (r x c)
  RowMaxStop  // rowwise max, treated as a constant by backward
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::MatMulNN: return "matmul";
    case Op::MatMulNT: return "matmul_nt";
    case Op::MatMulTN: return "matmul_tn";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Scale: return "scale";
    case Op::AddConst: return "add_const";
    case Op::Relu: return "relu";
    case Op::ReluMask: return "relu_mask";
    case Op::ClampMin: return "clamp_min";
    case Op::GeMask: return "ge_mask";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::SumAll: return "sum";
    case Op::RowSum: return "rowsum";
    case Op::ColSum: return "colsum";
    case Op::BcastAll: return "bcast_all";
    case Op::BcastCols: return "bcast_cols";
    case Op::BcastRows: return "bcast_rows";
    case Op::RowMaxStop: return "rowmax_stopgrad";
  }
  return "?";
}

struct ValueId {
  std::int32_t v = -1;
  bool valid() const { return v >= 0; }
};

// Recorded computation graph. Nodes are appended in execution order, so the
// list is always topologically sorted. backward() emits its adjoint
// arithmetic as ordinary nodes onto the same tape, which makes the adjoint
// pass differentiable in turn (second-order support). truncate() rolls the
// tape back to a mark once gradients have been copied out.
template <class T>
class Tape {
 public:
  bool check_finite = true;

  std::size_t size() const { return nodes_.size(); }

  void truncate(std::size_t mark) {
    if (mark > nodes_.size()) throw ValueError("Tape::truncate: mark beyond end");
    nodes_.resize(mark);
  }

  void clear() { nodes_.clear(); }

  const Array<T>& value(ValueId id) const { return node(id).val; }

  T scalar_value(ValueId id) const {
    const Array<T>& v = value(id);
    if (!v.is_scalar()) throw ValueError("Tape::scalar_value: node is not scalar");
    return v.data[0];
  }

  ValueId constant(Array<T> a) { return push(Op::Const, -1, -1, T(0), std::move(a)); }

  ValueId scalar(T v) { return constant(Array<T>::scalar(v)); }

  // --- primitives ---------------------------------------------------------

  ValueId matmul(ValueId a, ValueId b) { return binary(Op::MatMulNN, a, b); }
  ValueId matmul_nt(ValueId a, ValueId b) { return binary(Op::MatMulNT, a, b); }
  ValueId matmul_tn(ValueId a, ValueId b) { return binary(Op::MatMulTN, a, b); }
  ValueId add(ValueId a, ValueId b) { return binary(Op::Add, a, b); }
  ValueId sub(ValueId a, ValueId b) { return binary(Op::Sub, a, b); }
  ValueId mul(ValueId a, ValueId b) { return binary(Op::Mul, a, b); }
  ValueId div(ValueId a, ValueId b) { return binary(Op::Div, a, b); }

  ValueId scale(ValueId a, T c) { return unary(Op::Scale, a, c); }
  ValueId add_const(ValueId a, T c) { return unary(Op::AddConst, a, c); }
  ValueId neg(ValueId a) { return scale(a, T(-1)); }

  ValueId relu(ValueId a) { return unary(Op::Relu, a); }
  ValueId relu_mask(ValueId a) { return unary(Op::ReluMask, a); }
  ValueId clamp_min(ValueId a, T floor) { return unary(Op::ClampMin, a, floor); }
  ValueId ge_mask(ValueId a, T c) { return unary(Op::GeMask, a, c); }
  ValueId exp(ValueId a) { return unary(Op::Exp, a); }
  ValueId square(ValueId a) { return unary(Op::Square, a); }
  ValueId sqrt(ValueId a) { return unary(Op::Sqrt, a); }

  // log with the standard clamp floor applied first.
  ValueId log_clamped(ValueId a) { return unary(Op::Log, clamp_min(a, T(kLogFloor))); }

  ValueId sum_all(ValueId a) { return unary(Op::SumAll, a); }
  ValueId rowsum(ValueId a) { return unary(Op::RowSum, a); }
  ValueId colsum(ValueId a) { return unary(Op::ColSum, a); }
  ValueId rowmax_stopgrad(ValueId a) { return unary(Op::RowMaxStop, a); }

  ValueId bcast_all(ValueId a, std::size_t r, std::size_t c) {
    return sized(Op::BcastAll, a, r, c);
  }
  ValueId bcast_cols(ValueId a, std::size_t c) { return sized(Op::BcastCols, a, 0, c); }
  ValueId bcast_rows(ValueId a, std::size_t r) { return sized(Op::BcastRows, a, r, 0); }

  // --- composed helpers ----------------------------------------------------

  ValueId mean_all(ValueId a) {
    const std::size_t n = value(a).size();
    return scale(sum_all(a), T(1) / T(n));
  }

  // Broadcasting bias add: x (n x k) + b (1 x k).
  ValueId add_bias(ValueId x, ValueId b) {
    return add(x, bcast_rows(b, value(x).rows()));
  }

  // sqrt(sum(a^2) + eps), defined (and differentiable) at the origin.
  ValueId l2norm_all(ValueId a) {
    return sqrt(add_const(sum_all(square(a)), T(kNormEps)));
  }

  // Per-row stabilized L2 norms: (n x d) -> (n x 1).
  ValueId rowwise_l2norm(ValueId a) {
    return sqrt(add_const(rowsum(square(a)), T(kNormEps)));
  }

  // Numerically stable softmax over each row. The rowwise max is detached,
  // which leaves the derivative unchanged (softmax shift invariance).
  ValueId softmax_rows(ValueId z) {
    const std::size_t k = value(z).cols();
    ValueId m = rowmax_stopgrad(z);
    ValueId e = exp(sub(z, bcast_cols(m, k)));
    return div(e, bcast_cols(rowsum(e), k));
  }

  // --- reverse sweep -------------------------------------------------------

  // Accumulates d(out)/d(node) for every node reachable from `out`, emitting
  // the adjoint arithmetic onto this tape, and returns the adjoint ids for
  // `wrt` (zeros for nodes the sweep never reaches). `out` must be scalar.
  std::vector<ValueId> gradients(ValueId out, std::span<const ValueId> wrt) {
    if (!value(out).is_scalar()) {
      throw ValueError(std::string("backward: output must be scalar, got ") +
                       value(out).shape_str());
    }
    const std::size_t sweep_end = static_cast<std::size_t>(out.v) + 1;
    std::vector<std::int32_t> adj(sweep_end, -1);

    auto accumulate = [&](std::int32_t target, ValueId g) {
      if (target < 0 || static_cast<std::size_t>(target) >= sweep_end) return;
      if (adj[target] < 0) {
        adj[target] = g.v;
      } else {
        adj[target] = add(ValueId{adj[target]}, g).v;
      }
    };

    adj[out.v] = scalar(T(1)).v;

    for (std::int32_t i = out.v; i >= 0; --i) {
      if (adj[i] < 0) continue;
      const Node& nd = nodes_[static_cast<std::size_t>(i)];
      const ValueId g{adj[i]};
      const ValueId self{i};
      switch (nd.op) {
        case Op::Const:
        case Op::ReluMask:
        case Op::GeMask:
        case Op::RowMaxStop:
          break;  // leaves and detached values
        case Op::MatMulNN:
          accumulate(nd.a, matmul_nt(g, ValueId{nd.b}));
          accumulate(nd.b, matmul_tn(ValueId{nd.a}, g));
          break;
        case Op::MatMulNT:
          accumulate(nd.a, matmul(g, ValueId{nd.b}));
          accumulate(nd.b, matmul_tn(g, ValueId{nd.a}));
          break;
        case Op::MatMulTN:
          accumulate(nd.a, matmul_nt(ValueId{nd.b}, g));
          accumulate(nd.b, matmul(ValueId{nd.a}, g));
          break;
        case Op::Add:
          accumulate(nd.a, g);
          accumulate(nd.b, g);
          break;
        case Op::Sub:
          accumulate(nd.a, g);
          accumulate(nd.b, neg(g));
          break;
        case Op::Mul:
          accumulate(nd.a, mul(g, ValueId{nd.b}));
          accumulate(nd.b, mul(g, ValueId{nd.a}));
          break;
        case Op::Div:
          accumulate(nd.a, div(g, ValueId{nd.b}));
          accumulate(nd.b, neg(div(mul(g, self), ValueId{nd.b})));
          break;
        case Op::Scale:
          accumulate(nd.a, scale(g, nd.c));
          break;
        case Op::AddConst:
          accumulate(nd.a, g);
          break;
        case Op::Relu:
          accumulate(nd.a, mul(g, relu_mask(ValueId{nd.a})));
          break;
        case Op::ClampMin:
          accumulate(nd.a, mul(g, ge_mask(ValueId{nd.a}, nd.c)));
          break;
        case Op::Exp:
          accumulate(nd.a, mul(g, self));
          break;
        case Op::Log:
          accumulate(nd.a, div(g, ValueId{nd.a}));
          break;
        case Op::Square:
          accumulate(nd.a, scale(mul(g, ValueId{nd.a}), T(2)));
          break;
        case Op::Sqrt:
          accumulate(nd.a, div(scale(g, T(0.5)), self));
          break;
        case Op::SumAll: {
          const Array<T>& in = value(ValueId{nd.a});
          accumulate(nd.a, bcast_all(g, in.rows(), in.cols()));
          break;
        }
        case Op::RowSum:
          accumulate(nd.a, bcast_cols(g, value(ValueId{nd.a}).cols()));
          break;
        case Op::ColSum:
          accumulate(nd.a, bcast_rows(g, value(ValueId{nd.a}).rows()));
          break;
        case Op::BcastAll:
          accumulate(nd.a, sum_all(g));
          break;
        case Op::BcastCols:
          accumulate(nd.a, rowsum(g));
          break;
        case Op::BcastRows:
          accumulate(nd.a, colsum(g));
          break;
      }
    }

    std::vector<ValueId> result;
    result.reserve(wrt.size());
    for (const ValueId w : wrt) {
      if (static_cast<std::size_t>(w.v) < sweep_end && adj[w.v] >= 0) {
        result.push_back(ValueId{adj[w.v]});
      } else {
        const Array<T>& v = value(w);
        result.push_back(constant(Array<T>::zeros(v.rows(), v.cols())));
      }
    }
    return result;
  }

  std::vector<ValueId> gradients(ValueId out, std::initializer_list<ValueId> wrt) {
    return gradients(out, std::span<const ValueId>(wrt.begin(), wrt.size()));
  }

 private:
  struct Node {
    Op op = Op::Const;
    std::int32_t a = -1;
    std::int32_t b = -1;
    T c = T(0);                 // scalar attribute (Scale/AddConst/ClampMin/GeMask)
    std::size_t r = 0, cc = 0;  // broadcast target sizes
    Array<T> val;
  };

  std::vector<Node> nodes_;

  const Node& node(ValueId id) const {
    if (!id.valid() || static_cast<std::size_t>(id.v) >= nodes_.size()) {
      throw ValueError("Tape: invalid value id");
    }
    return nodes_[static_cast<std::size_t>(id.v)];
  }

  ValueId unary(Op op, ValueId a, T c = T(0)) {
    node(a);  // validate
    return push(op, a.v, -1, c, {});
  }

  ValueId binary(Op op, ValueId a, ValueId b) {
    node(a);
    node(b);
    return push(op, a.v, b.v, T(0), {});
  }

  ValueId sized(Op op, ValueId a, std::size_t r, std::size_t c) {
    node(a);
    Node nd;
    nd.op = op;
    nd.a = a.v;
    nd.r = r;
    nd.cc = c;
    execute(nd);
    return append(std::move(nd));
  }

  ValueId push(Op op, std::int32_t a, std::int32_t b, T c, Array<T> preset) {
    Node nd;
    nd.op = op;
    nd.a = a;
    nd.b = b;
    nd.c = c;
    if (op == Op::Const) {
      nd.val = std::move(preset);
    } else {
      execute(nd);
    }
    return append(std::move(nd));
  }

  ValueId append(Node nd) {
    if (check_finite && nd.op != Op::Const && !nd.val.all_finite()) {
      throw NumericError(std::string("non-finite output from ") + op_name(nd.op));
    }
    nodes_.push_back(std::move(nd));
    return ValueId{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  [[noreturn]] void shape_fail(Op op, const Array<T>& a, const Array<T>& b) const {
    throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + a.shape_str() +
                     " and " + b.shape_str());
  }

  using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const EMat>;
  using MMap = Eigen::Map<EMat>;

  static CMap map(const Array<T>& a) {
    return CMap(a.data.data(), static_cast<Eigen::Index>(a.rows()),
                static_cast<Eigen::Index>(a.cols()));
  }

  void execute(Node& nd) {
    const Array<T>& a = nodes_[static_cast<std::size_t>(nd.a)].val;
    switch (nd.op) {
      case Op::Const:
        break;
      case Op::MatMulNN:
      case Op::MatMulNT:
      case Op::MatMulTN: {
        const Array<T>& b = nodes_[static_cast<std::size_t>(nd.b)].val;
        std::size_t m, k, k2, n;
        if (nd.op == Op::MatMulNN) {
          m = a.rows(); k = a.cols(); k2 = b.rows(); n = b.cols();
        } else if (nd.op == Op::MatMulNT) {
          m = a.rows(); k = a.cols(); k2 = b.cols(); n = b.rows();
        } else {
          m = a.cols(); k = a.rows(); k2 = b.rows(); n = b.cols();
        }
        if (k != k2) shape_fail(nd.op, a, b);
        nd.val = Array<T>::zeros(m, n);
        MMap out(nd.val.data.data(), static_cast<Eigen::Index>(m),
                 static_cast<Eigen::Index>(n));
        if (nd.op == Op::MatMulNN) {
          out.noalias() = map(a) * map(b);
        } else if (nd.op == Op::MatMulNT) {
          out.noalias() = map(a) * map(b).transpose();
        } else {
          out.noalias() = map(a).transpose() * map(b);
        }
        break;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div: {
        const Array<T>& b = nodes_[static_cast<std::size_t>(nd.b)].val;
        if (!a.same_shape(b)) shape_fail(nd.op, a, b);
        nd.val = Array<T>::zeros(a.rows(), a.cols());
        const std::size_t n = a.size();
        const T* pa = a.data.data();
        const T* pb = b.data.data();
        T* po = nd.val.data.data();
        switch (nd.op) {
          case Op::Add: for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i]; break;
          case Op::Sub: for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i]; break;
          case Op::Mul: for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i]; break;
          default:      for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] / pb[i]; break;
        }
        break;
      }
      case Op::Scale:
      case Op::AddConst:
      case Op::Relu:
      case Op::ReluMask:
      case Op::ClampMin:
      case Op::GeMask:
      case Op::Exp:
      case Op::Log:
      case Op::Square:
      case Op::Sqrt: {
        nd.val = Array<T>::zeros(a.rows(), a.cols());
        const std::size_t n = a.size();
        const T* pa = a.data.data();
        T* po = nd.val.data.data();
        const T c = nd.c;
        switch (nd.op) {
          case Op::Scale:    for (std::size_t i = 0; i < n; ++i) po[i] = c * pa[i]; break;
          case Op::AddConst: for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + c; break;
          case Op::Relu:     for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] > T(0) ? pa[i] : T(0); break;
          case Op::ReluMask: for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] > T(0) ? T(1) : T(0); break;
          case Op::ClampMin: for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] > c ? pa[i] : c; break;
          case Op::GeMask:   for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] >= c ? T(1) : T(0); break;
          case Op::Exp:      for (std::size_t i = 0; i < n; ++i) po[i] = std::exp(pa[i]); break;
          case Op::Log:      for (std::size_t i = 0; i < n; ++i) po[i] = std::log(pa[i]); break;
          case Op::Square:   for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pa[i]; break;
          default:           for (std::size_t i = 0; i < n; ++i) po[i] = std::sqrt(pa[i]); break;
        }
        break;
      }
      case Op::SumAll: {
        T acc = T(0);
        for (const T v : a.data) acc += v;
        nd.val = Array<T>::scalar(acc);
        break;
      }
      case Op::RowSum: {
        nd.val = Array<T>::zeros(a.rows(), 1);
        for (std::size_t r = 0; r < a.rows(); ++r) {
          T acc = T(0);
          for (std::size_t c2 = 0; c2 < a.cols(); ++c2) acc += a.at(r, c2);
          nd.val.data[r] = acc;
        }
        break;
      }
      case Op::ColSum: {
        nd.val = Array<T>::zeros(1, a.cols());
        for (std::size_t r = 0; r < a.rows(); ++r) {
          for (std::size_t c2 = 0; c2 < a.cols(); ++c2) nd.val.data[c2] += a.at(r, c2);
        }
        break;
      }
      case Op::RowMaxStop: {
        if (a.cols() == 0) throw ShapeError("rowmax_stopgrad: empty rows");
        nd.val = Array<T>::zeros(a.rows(), 1);
        for (std::size_t r = 0; r < a.rows(); ++r) {
          T best = a.at(r, 0);
          for (std::size_t c2 = 1; c2 < a.cols(); ++c2) best = std::max(best, a.at(r, c2));
          nd.val.data[r] = best;
        }
        break;
      }
      case Op::BcastAll: {
        if (!a.is_scalar()) {
          throw ShapeError(std::string("bcast_all: expected scalar input, got ") +
                           a.shape_str());
        }
        nd.val = Array<T>::full(nd.r, nd.cc, a.data[0]);
        break;
      }
      case Op::BcastCols: {
        if (a.cols() != 1) {
          throw ShapeError(std::string("bcast_cols: expected column input, got ") +
                           a.shape_str());
        }
        nd.val = Array<T>::zeros(a.rows(), nd.cc);
        for (std::size_t r = 0; r < a.rows(); ++r) {
          for (std::size_t c2 = 0; c2 < nd.cc; ++c2) nd.val.at(r, c2) = a.data[r];
        }
        break;
      }
      case Op::BcastRows: {
        if (a.rows() != 1) {
          throw ShapeError(std::string("bcast_rows: expected row input, got ") +
                           a.shape_str());
        }
        nd.val = Array<T>::zeros(nd.r, a.cols());
        for (std::size_t r = 0; r < nd.r; ++r) {
          for (std::size_t c2 = 0; c2 < a.cols(); ++c2) nd.val.at(r, c2) = a.data[c2];
        }
        break;
      }
    }
  }
};

}  // namespace genclust
