#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "quadfuse/rng.hpp"

namespace quadfuse {

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const std::vector<size_t>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor: n-d row-major array over shared immutable storage. Copies are cheap
// and alias the same buffer; the buffer must not be mutated while a tape holds
// a reference to it (the optimizer mutates parameters only between steps,
// after the tape has been cleared).
// ---------------------------------------------------------------------------

template <class T>
class TapeT;

template <class T>
struct TensorT {
  std::vector<size_t> shape;
  std::shared_ptr<std::vector<T>> storage = std::make_shared<std::vector<T>>();
  bool requires_grad = false;
  // Cache of this tensor's node on the active tape; valid only while
  // tape_gen matches the tape's generation counter.
  mutable int node_id = -1;
  mutable uint64_t tape_gen = 0;

  TensorT() = default;

  static size_t numel_of(const std::vector<size_t>& shp) {
    size_t n = 1;
    for (size_t d : shp) n *= d;
    return n;
  }

  static TensorT zeros(std::vector<size_t> shp) {
    TensorT t;
    t.storage = std::make_shared<std::vector<T>>(numel_of(shp), T(0));
    t.shape = std::move(shp);
    return t;
  }

  static TensorT full(std::vector<size_t> shp, T v) {
    TensorT t;
    t.storage = std::make_shared<std::vector<T>>(numel_of(shp), v);
    t.shape = std::move(shp);
    return t;
  }

  static TensorT from(std::vector<size_t> shp, std::vector<T> values) {
    if (numel_of(shp) != values.size())
      throw TensorError("tensor: shape " + shape_str(shp) + " does not match " +
                        std::to_string(values.size()) + " values");
    TensorT t;
    t.storage = std::make_shared<std::vector<T>>(std::move(values));
    t.shape = std::move(shp);
    return t;
  }

  static TensorT scalar(T v) { return from({}, {v}); }

  size_t numel() const { return numel_of(shape); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape[i]; }

  std::vector<T>& data() { return *storage; }
  const std::vector<T>& data() const { return *storage; }
  T operator[](size_t i) const { return (*storage)[i]; }
  T& operator[](size_t i) { return (*storage)[i]; }

  T value() const {
    if (numel() != 1) throw TensorError("value(): tensor is not scalar");
    return (*storage)[0];
  }

  // Deep copy with fresh storage; drops tape linkage.
  TensorT clone() const {
    TensorT t;
    t.shape = shape;
    t.storage = std::make_shared<std::vector<T>>(*storage);
    t.requires_grad = requires_grad;
    return t;
  }

  // Value-only copy: fresh storage, no grad, no tape linkage.
  TensorT detached() const {
    TensorT t = clone();
    t.requires_grad = false;
    return t;
  }
};

using Tensor = TensorT<float>;

template <class U, class T>
TensorT<U> cast(const TensorT<T>& x) {
  TensorT<U> out;
  out.shape = x.shape;
  out.storage = std::make_shared<std::vector<U>>(x.data().begin(), x.data().end());
  out.requires_grad = x.requires_grad;
  return out;
}

// ---------------------------------------------------------------------------
// Operation kinds recorded on the tape.
// ---------------------------------------------------------------------------

enum class OpKind {
  Leaf,
  Add,
  Sub,
  MulElem,
  MatMul,
  Relu,
  SoftmaxLastDim,
  ConcatLastDim,
  MeanAxis,
  Transpose2d,
  Reshape,
  Scale,
  Log,
  Exp,
  Gelu,
  SliceLastDim,
  RowStandardize,
  Patchify,
  QuadCropResize,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::MulElem: return "mul_elem";
    case OpKind::MatMul: return "matmul";
    case OpKind::Relu: return "relu";
    case OpKind::SoftmaxLastDim: return "softmax_lastdim";
    case OpKind::ConcatLastDim: return "concat_lastdim";
    case OpKind::MeanAxis: return "mean_axis";
    case OpKind::Transpose2d: return "transpose2d";
    case OpKind::Reshape: return "reshape";
    case OpKind::Scale: return "scale";
    case OpKind::Log: return "log";
    case OpKind::Exp: return "exp";
    case OpKind::Gelu: return "gelu";
    case OpKind::SliceLastDim: return "slice_lastdim";
    case OpKind::RowStandardize: return "row_standardize";
    case OpKind::Patchify: return "patchify";
    case OpKind::QuadCropResize: return "quad_crop_resize";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Dense kernels. Row-major, f32/f64. The i-k-j order lets the compiler emit
// FMA over the contiguous j loop.
// ---------------------------------------------------------------------------

namespace kernels {

template <class T>
void matmul(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    std::fill(crow, crow + n, T(0));
    const T* arow = a + i * k;
    for (size_t kk = 0; kk < k; ++kk) {
      const T av = arow[kk];
      const T* brow = b + kk * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,k] = a[m,n] * b[k,n]^T
template <class T>
void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t n, size_t k) {
  for (size_t i = 0; i < m; ++i) {
    const T* arow = a + i * n;
    for (size_t kk = 0; kk < k; ++kk) {
      const T* brow = b + kk * n;
      T acc = 0;
      for (size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + kk] = acc;
    }
  }
}

// c[k,n] += a[m,k]^T * g[m,n]
template <class T>
void matmul_tn_acc(const T* a, const T* g, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* grow = g + i * n;
    for (size_t kk = 0; kk < k; ++kk) {
      const T av = arow[kk];
      T* crow = c + kk * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

template <class T>
void transpose(const T* a, T* out, size_t m, size_t n) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Tape: ordered record of operations for reverse-mode differentiation.
// One tape per training thread; activated via TapeT::Scope.
// ---------------------------------------------------------------------------

template <class T>
class TapeT {
 public:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<int> inputs;
    std::vector<char> input_needs_grad;
    std::vector<std::vector<size_t>> in_shapes;
    std::vector<size_t> out_shape;
    std::vector<TensorT<T>> saved;  // forward values needed by backward
    std::vector<long long> iargs;   // axis / offsets / geometry
    std::vector<double> dargs;      // scale factor / eps
    bool leaf_requires_grad = false;
  };

  TapeT() : gen_(next_gen()) {}
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;
  ~TapeT() {
    if (active_ == this) active_ = nullptr;
  }

  class Scope {
   public:
    explicit Scope(TapeT& t) : prev_(active_) { active_ = &t; }
    ~Scope() { active_ = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    TapeT* prev_;
  };

  static TapeT* active() { return active_; }

  uint64_t generation() const { return gen_; }
  size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[size_t(id)]; }

  void clear() {
    nodes_.clear();
    by_storage_.clear();
    gen_ = next_gen();
  }

  // Node id for an existing tensor; registers it as a leaf on first sight.
  // Identity is the storage buffer, so parameter copies share one node and
  // gradients from every use accumulate together.
  int ensure_id(const TensorT<T>& t) {
    if (t.tape_gen == gen_ && t.node_id >= 0) return t.node_id;
    const void* key = static_cast<const void*>(t.storage.get());
    auto it = by_storage_.find(key);
    if (it != by_storage_.end()) {
      if (t.requires_grad) nodes_[size_t(it->second)].leaf_requires_grad |= nodes_[size_t(it->second)].kind == OpKind::Leaf;
      t.node_id = it->second;
      t.tape_gen = gen_;
      return it->second;
    }
    Node n;
    n.kind = OpKind::Leaf;
    n.out_shape = t.shape;
    n.leaf_requires_grad = t.requires_grad;
    int id = int(nodes_.size());
    nodes_.push_back(std::move(n));
    by_storage_.emplace(key, id);
    t.node_id = id;
    t.tape_gen = gen_;
    return id;
  }

  int record(Node&& n, const TensorT<T>& out) {
    int id = int(nodes_.size());
    nodes_.push_back(std::move(n));
    by_storage_.emplace(static_cast<const void*>(out.storage.get()), id);
    out.node_id = id;
    out.tape_gen = gen_;
    return id;
  }

  int id_of(const TensorT<T>& t) const {
    if (t.tape_gen == gen_ && t.node_id >= 0) return t.node_id;
    auto it = by_storage_.find(static_cast<const void*>(t.storage.get()));
    return it == by_storage_.end() ? -1 : it->second;
  }

  // Reverse pass from a scalar loss. Returns gradients for every
  // requires_grad leaf, keyed by node id. Each node is visited once;
  // gradients from multiple consumers accumulate additively.
  std::unordered_map<int, TensorT<T>> backward(const TensorT<T>& loss);

 private:
  static uint64_t next_gen() {
    static std::atomic<uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  void backward_node(int id, std::vector<std::vector<T>>& grads, std::vector<char>& has);

  std::vector<Node> nodes_;
  std::unordered_map<const void*, int> by_storage_;
  uint64_t gen_;
  inline static thread_local TapeT* active_ = nullptr;
};

using Tape = TapeT<float>;

namespace detail {

template <class T>
bool should_record(std::initializer_list<const TensorT<T>*> ins) {
  if (!TapeT<T>::active()) return false;
  for (const TensorT<T>* p : ins)
    if (p->requires_grad) return true;
  return false;
}

template <class T>
void record_op(OpKind kind, std::initializer_list<const TensorT<T>*> ins, const TensorT<T>& out,
               std::vector<TensorT<T>> saved = {}, std::vector<long long> iargs = {},
               std::vector<double> dargs = {}) {
  TapeT<T>* tp = TapeT<T>::active();
  typename TapeT<T>::Node n;
  n.kind = kind;
  for (const TensorT<T>* p : ins) {
    n.inputs.push_back(tp->ensure_id(*p));
    n.input_needs_grad.push_back(p->requires_grad ? 1 : 0);
    n.in_shapes.push_back(p->shape);
  }
  n.out_shape = out.shape;
  n.saved = std::move(saved);
  n.iargs = std::move(iargs);
  n.dargs = std::move(dargs);
  tp->record(std::move(n), out);
}

inline bool bias_pattern(const std::vector<size_t>& a, const std::vector<size_t>& b) {
  return a.size() == 2 && b.size() == 1 && a[1] == b[0];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive operations. Each validates shapes, computes the forward value and
// records itself on the active tape when any input requires gradients.
// Broadcasting is limited to the bias pattern [n,d] (+|-|*) [d].
// ---------------------------------------------------------------------------

namespace ops {

template <class T, class FScalar>
TensorT<T> binary_elem(OpKind kind, const TensorT<T>& a, const TensorT<T>& b, FScalar&& f) {
  const bool same = a.shape == b.shape;
  const bool bias = detail::bias_pattern(a.shape, b.shape);
  if (!same && !bias)
    throw TensorError(std::string(op_name(kind)) + ": incompatible shapes " + shape_str(a.shape) +
                      " and " + shape_str(b.shape));
  TensorT<T> out = TensorT<T>::zeros(a.shape);
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  if (same) {
    for (size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i], bv[i]);
  } else {
    const size_t n = a.shape[0], d = a.shape[1];
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) ov[i * d + j] = f(av[i * d + j], bv[j]);
  }
  out.requires_grad = a.requires_grad || b.requires_grad;
  return out;
}

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  TensorT<T> out = binary_elem(OpKind::Add, a, b, [](T x, T y) { return x + y; });
  if (detail::should_record<T>({&a, &b})) detail::record_op(OpKind::Add, {&a, &b}, out);
  return out;
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  TensorT<T> out = binary_elem(OpKind::Sub, a, b, [](T x, T y) { return x - y; });
  if (detail::should_record<T>({&a, &b})) detail::record_op(OpKind::Sub, {&a, &b}, out);
  return out;
}

template <class T>
TensorT<T> mul_elem(const TensorT<T>& a, const TensorT<T>& b) {
  TensorT<T> out = binary_elem(OpKind::MulElem, a, b, [](T x, T y) { return x * y; });
  if (detail::should_record<T>({&a, &b}))
    detail::record_op(OpKind::MulElem, {&a, &b}, out, {a, b});
  return out;
}

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
    throw TensorError(std::string("matmul: incompatible shapes ") + shape_str(a.shape) + " x " +
                      shape_str(b.shape));
  const size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  TensorT<T> out = TensorT<T>::zeros({m, n});
  kernels::matmul(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  out.requires_grad = a.requires_grad || b.requires_grad;
  if (detail::should_record<T>({&a, &b}))
    detail::record_op(OpKind::MatMul, {&a, &b}, out, {a, b});
  return out;
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out = TensorT<T>::zeros(x.shape);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x})) detail::record_op(OpKind::Relu, {&x}, out, {x});
  return out;
}

// Max-subtracted softmax over the last dimension; exponentials are summed in
// double so row sums are exact up to one final rounding.
template <class T>
TensorT<T> softmax_lastdim(const TensorT<T>& x) {
  if (x.rank() == 0 || x.shape.back() == 0)
    throw TensorError("softmax_lastdim: empty last dimension on shape " + shape_str(x.shape));
  const size_t d = x.shape.back();
  const size_t rows = x.numel() / d;
  TensorT<T> out = TensorT<T>::zeros(x.shape);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T* orow = ov.data() + r * d;
    T m = row[0];
    for (size_t j = 1; j < d; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (size_t j = 0; j < d; ++j) {
      T e = std::exp(row[j] - m);
      orow[j] = e;
      sum += double(e);
    }
    const double inv = 1.0 / sum;
    for (size_t j = 0; j < d; ++j) orow[j] = T(double(orow[j]) * inv);
  }
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x})) detail::record_op(OpKind::SoftmaxLastDim, {&x}, out, {out});
  return out;
}

template <class T>
TensorT<T> concat_lastdim(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw TensorError("concat_lastdim: no inputs");
  const auto& first = parts.front().shape;
  if (first.empty()) throw TensorError("concat_lastdim: rank-0 input");
  size_t total_last = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size())
      throw TensorError("concat_lastdim: rank mismatch " + shape_str(p.shape) + " vs " +
                        shape_str(first));
    for (size_t i = 0; i + 1 < first.size(); ++i)
      if (p.shape[i] != first[i])
        throw TensorError("concat_lastdim: incompatible shapes " + shape_str(p.shape) + " and " +
                          shape_str(first));
    total_last += p.shape.back();
  }
  std::vector<size_t> oshape = first;
  oshape.back() = total_last;
  TensorT<T> out = TensorT<T>::zeros(oshape);
  const size_t rows = out.numel() / total_last;
  size_t off = 0;
  for (const auto& p : parts) {
    const size_t w = p.shape.back();
    for (size_t r = 0; r < rows; ++r)
      std::copy_n(p.data().data() + r * w, w, out.data().data() + r * total_last + off);
    off += w;
    out.requires_grad = out.requires_grad || p.requires_grad;
  }
  bool rec = false;
  if (TapeT<T>::active())
    for (const auto& p : parts) rec = rec || p.requires_grad;
  if (rec) {
    TapeT<T>* tp = TapeT<T>::active();
    typename TapeT<T>::Node n;
    n.kind = OpKind::ConcatLastDim;
    for (const auto& p : parts) {
      n.inputs.push_back(tp->ensure_id(p));
      n.input_needs_grad.push_back(p.requires_grad ? 1 : 0);
      n.in_shapes.push_back(p.shape);
    }
    n.out_shape = out.shape;
    tp->record(std::move(n), out);
  }
  return out;
}

template <class T>
TensorT<T> concat_lastdim(const TensorT<T>& a, const TensorT<T>& b) {
  return concat_lastdim(std::vector<TensorT<T>>{a, b});
}

// Mean over one axis of a rank-1 or rank-2 tensor; rank-1 reduces to a
// rank-0 scalar. Accumulates in double so the result is independent of the
// order of equal-magnitude addends (exact for float inputs).
template <class T>
TensorT<T> mean_axis(const TensorT<T>& x, size_t axis) {
  if (x.rank() == 0 || x.rank() > 2 || axis >= x.rank())
    throw TensorError("mean_axis: axis " + std::to_string(axis) + " invalid for shape " +
                      shape_str(x.shape));
  TensorT<T> out;
  if (x.rank() == 1) {
    double acc = 0.0;
    for (T v : x.data()) acc += double(v);
    out = TensorT<T>::scalar(T(acc / double(x.shape[0])));
  } else {
    const size_t m = x.shape[0], n = x.shape[1];
    if (axis == 0) {
      out = TensorT<T>::zeros({n});
      for (size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (size_t i = 0; i < m; ++i) acc += double(x.data()[i * n + j]);
        out.data()[j] = T(acc / double(m));
      }
    } else {
      out = TensorT<T>::zeros({m});
      for (size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < n; ++j) acc += double(x.data()[i * n + j]);
        out.data()[i] = T(acc / double(n));
      }
    }
  }
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x}))
    detail::record_op(OpKind::MeanAxis, {&x}, out, {}, {(long long)axis});
  return out;
}

template <class T>
TensorT<T> transpose2d(const TensorT<T>& x) {
  if (x.rank() != 2) throw TensorError("transpose2d: rank-2 required, got " + shape_str(x.shape));
  const size_t m = x.shape[0], n = x.shape[1];
  TensorT<T> out = TensorT<T>::zeros({n, m});
  kernels::transpose(x.data().data(), out.data().data(), m, n);
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x})) detail::record_op(OpKind::Transpose2d, {&x}, out);
  return out;
}

template <class T>
TensorT<T> reshape(const TensorT<T>& x, std::vector<size_t> new_shape) {
  if (TensorT<T>::numel_of(new_shape) != x.numel())
    throw TensorError("reshape: cannot reshape " + shape_str(x.shape) + " to " +
                      shape_str(new_shape));
  TensorT<T> out;
  out.shape = std::move(new_shape);
  out.storage = std::make_shared<std::vector<T>>(x.data());
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x})) detail::record_op(OpKind::Reshape, {&x}, out);
  return out;
}

template <class T>
TensorT<T> scale(const TensorT<T>& x, double s) {
  TensorT<T> out = TensorT<T>::zeros(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = T(double(x.data()[i]) * s);
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x})) detail::record_op(OpKind::Scale, {&x}, out, {}, {}, {s});
  return out;
}

template <class T>
TensorT<T> log(const TensorT<T>& x) {
  TensorT<T> out = TensorT<T>::zeros(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = std::log(x.data()[i]);
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x})) detail::record_op(OpKind::Log, {&x}, out, {x});
  return out;
}

template <class T>
TensorT<T> exp(const TensorT<T>& x) {
  TensorT<T> out = TensorT<T>::zeros(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = std::exp(x.data()[i]);
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x})) detail::record_op(OpKind::Exp, {&x}, out, {out});
  return out;
}

// Exact (erf-based) GELU.
template <class T>
TensorT<T> gelu(const TensorT<T>& x) {
  TensorT<T> out = TensorT<T>::zeros(x.shape);
  for (size_t i = 0; i < x.numel(); ++i) {
    const double z = double(x.data()[i]);
    out.data()[i] = T(0.5 * z * (1.0 + std::erf(z * 0.7071067811865475)));
  }
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x})) detail::record_op(OpKind::Gelu, {&x}, out, {x});
  return out;
}

template <class T>
TensorT<T> slice_lastdim(const TensorT<T>& x, size_t start, size_t len) {
  if (x.rank() == 0 || start + len > x.shape.back())
    throw TensorError("slice_lastdim: range [" + std::to_string(start) + "," +
                      std::to_string(start + len) + ") invalid for shape " + shape_str(x.shape));
  std::vector<size_t> oshape = x.shape;
  oshape.back() = len;
  TensorT<T> out = TensorT<T>::zeros(oshape);
  const size_t d = x.shape.back();
  const size_t rows = x.numel() / d;
  for (size_t r = 0; r < rows; ++r)
    std::copy_n(x.data().data() + r * d + start, len, out.data().data() + r * len);
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x}))
    detail::record_op(OpKind::SliceLastDim, {&x}, out, {}, {(long long)start, (long long)len});
  return out;
}

// Per-row standardization of a rank-2 tensor: (x - mean) / sqrt(var + eps),
// population variance. The building block of layer normalization.
template <class T>
TensorT<T> row_standardize(const TensorT<T>& x, double eps) {
  if (x.rank() != 2) throw TensorError("row_standardize: rank-2 required, got " + shape_str(x.shape));
  const size_t n = x.shape[0], d = x.shape[1];
  TensorT<T> out = TensorT<T>::zeros({n, d});
  TensorT<T> rstd = TensorT<T>::zeros({n});
  for (size_t i = 0; i < n; ++i) {
    const T* row = x.data().data() + i * d;
    double mean = 0.0;
    for (size_t j = 0; j < d; ++j) mean += double(row[j]);
    mean /= double(d);
    double var = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double c = double(row[j]) - mean;
      var += c * c;
    }
    var /= double(d);
    const double r = 1.0 / std::sqrt(var + eps);
    rstd.data()[i] = T(r);
    T* orow = out.data().data() + i * d;
    for (size_t j = 0; j < d; ++j) orow[j] = T((double(row[j]) - mean) * r);
  }
  out.requires_grad = x.requires_grad;
  if (detail::should_record<T>({&x}))
    detail::record_op(OpKind::RowStandardize, {&x}, out, {out, rstd}, {}, {eps});
  return out;
}

// [C,S,S] -> [(S/P)^2, C*P*P]; patches row-major from the top-left, each row
// the channel-major flattening of one patch.
template <class T>
TensorT<T> patchify(const TensorT<T>& image, size_t patch) {
  if (image.rank() != 3 || image.shape[1] != image.shape[2])
    throw TensorError("patchify: [C,S,S] required, got " + shape_str(image.shape));
  const size_t c = image.shape[0], s = image.shape[1];
  if (patch == 0 || s % patch != 0)
    throw TensorError("patchify: patch size " + std::to_string(patch) +
                      " does not divide image size " + std::to_string(s));
  const size_t g = s / patch;
  TensorT<T> out = TensorT<T>::zeros({g * g, c * patch * patch});
  const size_t row_w = c * patch * patch;
  for (size_t gy = 0; gy < g; ++gy)
    for (size_t gx = 0; gx < g; ++gx) {
      T* orow = out.data().data() + (gy * g + gx) * row_w;
      for (size_t ch = 0; ch < c; ++ch)
        for (size_t py = 0; py < patch; ++py)
          for (size_t px = 0; px < patch; ++px)
            orow[ch * patch * patch + py * patch + px] =
                image.data()[ch * s * s + (gy * patch + py) * s + (gx * patch + px)];
    }
  out.requires_grad = image.requires_grad;
  if (detail::should_record<T>({&image}))
    detail::record_op(OpKind::Patchify, {&image}, out, {}, {(long long)patch});
  return out;
}

namespace bilinear {
// Half-pixel-center source coordinate with clamped taps.
inline void taps(size_t dst, double scale_f, size_t src_size, size_t& i0, size_t& i1, double& w1) {
  double src = (double(dst) + 0.5) * scale_f - 0.5;
  double fl = std::floor(src);
  w1 = src - fl;
  long long lo = (long long)fl;
  long long hi = lo + 1;
  i0 = size_t(std::clamp(lo, 0LL, (long long)src_size - 1));
  i1 = size_t(std::clamp(hi, 0LL, (long long)src_size - 1));
}
}  // namespace bilinear

// Crop quadrant q (0 UL, 1 UR, 2 LL, 3 LR) of an even-sized [C,S,S] image and
// bilinearly resize it back to [C,S,S].
template <class T>
TensorT<T> quad_crop_resize(const TensorT<T>& image, size_t q) {
  if (image.rank() != 3 || image.shape[1] != image.shape[2])
    throw TensorError("quad_crop_resize: [C,S,S] required, got " + shape_str(image.shape));
  if (q > 3) throw TensorError("quad_crop_resize: quadrant index " + std::to_string(q));
  const size_t c = image.shape[0], s = image.shape[1];
  if (s % 2 != 0)
    throw TensorError("quad_crop_resize: image size " + std::to_string(s) + " must be even");
  const size_t h = s / 2;
  const size_t oy = (q / 2) * h, ox = (q % 2) * h;
  const double sf = double(h) / double(s);
  TensorT<T> out = TensorT<T>::zeros(image.shape);
  for (size_t y = 0; y < s; ++y) {
    size_t y0, y1;
    double wy;
    bilinear::taps(y, sf, h, y0, y1, wy);
    for (size_t x = 0; x < s; ++x) {
      size_t x0, x1;
      double wx;
      bilinear::taps(x, sf, h, x0, x1, wx);
      for (size_t ch = 0; ch < c; ++ch) {
        const T* plane = image.data().data() + ch * s * s;
        auto px = [&](size_t yy, size_t xx) { return double(plane[(oy + yy) * s + (ox + xx)]); };
        const double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) +
                         wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
        out.data()[ch * s * s + y * s + x] = T(v);
      }
    }
  }
  out.requires_grad = image.requires_grad;
  if (detail::should_record<T>({&image}))
    detail::record_op(OpKind::QuadCropResize, {&image}, out, {}, {(long long)q});
  return out;
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Composites built from primitives (rank-2 row manipulation helpers).
// ---------------------------------------------------------------------------

// Stack rank-1 vectors of equal length d into a [k, d] matrix.
template <class T>
TensorT<T> stack_rows(const std::vector<TensorT<T>>& rows) {
  std::vector<TensorT<T>> cols;
  cols.reserve(rows.size());
  for (const auto& r : rows) cols.push_back(ops::reshape(r, {r.numel(), 1}));
  return ops::transpose2d(ops::concat_lastdim(cols));
}

// Concatenate two rank-2 tensors along rows: [m,d] ++ [n,d] -> [m+n,d].
template <class T>
TensorT<T> concat_rows(const TensorT<T>& a, const TensorT<T>& b) {
  return ops::transpose2d(ops::concat_lastdim(ops::transpose2d(a), ops::transpose2d(b)));
}

// Extract row i of a [n,d] matrix as a rank-1 [d] vector.
template <class T>
TensorT<T> row_at(const TensorT<T>& x, size_t i) {
  auto col = ops::slice_lastdim(ops::transpose2d(x), i, 1);
  return ops::reshape(col, {x.shape[1]});
}

// Sum of all elements as a scalar.
template <class T>
TensorT<T> sum_all(const TensorT<T>& x) {
  if (x.rank() == 0) return x;
  TensorT<T> cur = x.rank() == 1 ? x : ops::reshape(x, {x.numel()});
  return ops::scale(ops::mean_axis(cur, 0), double(x.numel()));
}

// ---------------------------------------------------------------------------
// Tape backward implementation.
// ---------------------------------------------------------------------------

template <class T>
void TapeT<T>::backward_node(int id, std::vector<std::vector<T>>& grads, std::vector<char>& has) {
  Node& n = nodes_[size_t(id)];
  const std::vector<T>& g = grads[size_t(id)];

  auto add_to = [&](size_t pos, const std::vector<T>& contrib) {
    if (!n.input_needs_grad[pos]) return;
    const int nid = n.inputs[pos];
    auto& dst = grads[size_t(nid)];
    if (!has[size_t(nid)]) {
      dst.assign(contrib.begin(), contrib.end());
      has[size_t(nid)] = 1;
    } else {
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += contrib[i];
    }
  };
  auto needs = [&](size_t pos) { return n.input_needs_grad[pos] != 0; };

  switch (n.kind) {
    case OpKind::Leaf:
      break;
    case OpKind::Add:
    case OpKind::Sub: {
      const bool neg = n.kind == OpKind::Sub;
      add_to(0, g);
      if (needs(1)) {
        if (n.in_shapes[1] == n.in_shapes[0]) {
          if (!neg) {
            add_to(1, g);
          } else {
            std::vector<T> gb(g.size());
            for (size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
            add_to(1, gb);
          }
        } else {
          const size_t rows = n.in_shapes[0][0], d = n.in_shapes[0][1];
          std::vector<T> gb(d, T(0));
          for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < d; ++j) gb[j] += neg ? -g[i * d + j] : g[i * d + j];
          add_to(1, gb);
        }
      }
      break;
    }
    case OpKind::MulElem: {
      const auto& a = n.saved[0].data();
      const auto& b = n.saved[1].data();
      const bool bias = n.in_shapes[1] != n.in_shapes[0];
      if (needs(0)) {
        std::vector<T> da(g.size());
        if (!bias) {
          for (size_t i = 0; i < g.size(); ++i) da[i] = g[i] * b[i];
        } else {
          const size_t rows = n.in_shapes[0][0], d = n.in_shapes[0][1];
          for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < d; ++j) da[i * d + j] = g[i * d + j] * b[j];
        }
        add_to(0, da);
      }
      if (needs(1)) {
        if (!bias) {
          std::vector<T> db(g.size());
          for (size_t i = 0; i < g.size(); ++i) db[i] = g[i] * a[i];
          add_to(1, db);
        } else {
          const size_t rows = n.in_shapes[0][0], d = n.in_shapes[0][1];
          std::vector<T> db(d, T(0));
          for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < d; ++j) db[j] += g[i * d + j] * a[i * d + j];
          add_to(1, db);
        }
      }
      break;
    }
    case OpKind::MatMul: {
      const auto& a = n.saved[0];
      const auto& b = n.saved[1];
      const size_t m = a.shape[0], k = a.shape[1], nn = b.shape[1];
      if (needs(0)) {
        std::vector<T> da(m * k);
        kernels::matmul_nt(g.data(), b.data().data(), da.data(), m, nn, k);
        add_to(0, da);
      }
      if (needs(1)) {
        std::vector<T> db(k * nn, T(0));
        kernels::matmul_tn_acc(a.data().data(), g.data(), db.data(), m, k, nn);
        add_to(1, db);
      }
      break;
    }
    case OpKind::Relu: {
      const auto& x = n.saved[0].data();
      std::vector<T> dx(g.size());
      for (size_t i = 0; i < g.size(); ++i) dx[i] = x[i] > T(0) ? g[i] : T(0);
      add_to(0, dx);
      break;
    }
    case OpKind::SoftmaxLastDim: {
      const auto& y = n.saved[0].data();
      const size_t d = n.out_shape.back();
      const size_t rows = y.size() / d;
      std::vector<T> dx(g.size());
      for (size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (size_t j = 0; j < d; ++j) dot += double(g[r * d + j]) * double(y[r * d + j]);
        for (size_t j = 0; j < d; ++j)
          dx[r * d + j] = T(double(y[r * d + j]) * (double(g[r * d + j]) - dot));
      }
      add_to(0, dx);
      break;
    }
    case OpKind::ConcatLastDim: {
      const size_t total = n.out_shape.back();
      const size_t rows = n.saved.empty() ? TensorT<T>::numel_of(n.out_shape) / total
                                          : TensorT<T>::numel_of(n.out_shape) / total;
      size_t off = 0;
      for (size_t p = 0; p < n.inputs.size(); ++p) {
        const size_t w = n.in_shapes[p].back();
        if (needs(p)) {
          std::vector<T> dp(TensorT<T>::numel_of(n.in_shapes[p]));
          for (size_t r = 0; r < rows; ++r)
            std::copy_n(g.data() + r * total + off, w, dp.data() + r * w);
          add_to(p, dp);
        }
        off += w;
      }
      break;
    }
    case OpKind::MeanAxis: {
      const size_t axis = size_t(n.iargs[0]);
      const auto& ishape = n.in_shapes[0];
      std::vector<T> dx(TensorT<T>::numel_of(ishape));
      if (ishape.size() == 1) {
        const T inv = T(1.0 / double(ishape[0]));
        for (auto& v : dx) v = g[0] * inv;
      } else {
        const size_t m = ishape[0], nn = ishape[1];
        if (axis == 0) {
          const T inv = T(1.0 / double(m));
          for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < nn; ++j) dx[i * nn + j] = g[j] * inv;
        } else {
          const T inv = T(1.0 / double(nn));
          for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < nn; ++j) dx[i * nn + j] = g[i] * inv;
        }
      }
      add_to(0, dx);
      break;
    }
    case OpKind::Transpose2d: {
      const size_t m = n.in_shapes[0][0], nn = n.in_shapes[0][1];
      std::vector<T> dx(m * nn);
      kernels::transpose(g.data(), dx.data(), nn, m);
      add_to(0, dx);
      break;
    }
    case OpKind::Reshape:
      add_to(0, g);
      break;
    case OpKind::Scale: {
      const double s = n.dargs[0];
      std::vector<T> dx(g.size());
      for (size_t i = 0; i < g.size(); ++i) dx[i] = T(double(g[i]) * s);
      add_to(0, dx);
      break;
    }
    case OpKind::Log: {
      const auto& x = n.saved[0].data();
      std::vector<T> dx(g.size());
      for (size_t i = 0; i < g.size(); ++i) dx[i] = g[i] / x[i];
      add_to(0, dx);
      break;
    }
    case OpKind::Exp: {
      const auto& y = n.saved[0].data();
      std::vector<T> dx(g.size());
      for (size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * y[i];
      add_to(0, dx);
      break;
    }
    case OpKind::Gelu: {
      const auto& x = n.saved[0].data();
      std::vector<T> dx(g.size());
      for (size_t i = 0; i < g.size(); ++i) {
        const double z = double(x[i]);
        const double cdf = 0.5 * (1.0 + std::erf(z * 0.7071067811865475));
        const double pdf = std::exp(-0.5 * z * z) * 0.3989422804014327;
        dx[i] = T(double(g[i]) * (cdf + z * pdf));
      }
      add_to(0, dx);
      break;
    }
    case OpKind::SliceLastDim: {
      const size_t start = size_t(n.iargs[0]);
      const size_t len = size_t(n.iargs[1]);
      const size_t d = n.in_shapes[0].back();
      const size_t rows = TensorT<T>::numel_of(n.in_shapes[0]) / d;
      std::vector<T> dx(TensorT<T>::numel_of(n.in_shapes[0]), T(0));
      for (size_t r = 0; r < rows; ++r)
        std::copy_n(g.data() + r * len, len, dx.data() + r * d + start);
      add_to(0, dx);
      break;
    }
    case OpKind::RowStandardize: {
      const auto& xhat = n.saved[0].data();
      const auto& rstd = n.saved[1].data();
      const size_t rows = n.in_shapes[0][0], d = n.in_shapes[0][1];
      std::vector<T> dx(rows * d);
      for (size_t i = 0; i < rows; ++i) {
        double gm = 0.0, gxm = 0.0;
        for (size_t j = 0; j < d; ++j) {
          gm += double(g[i * d + j]);
          gxm += double(g[i * d + j]) * double(xhat[i * d + j]);
        }
        gm /= double(d);
        gxm /= double(d);
        const double r = double(rstd[i]);
        for (size_t j = 0; j < d; ++j)
          dx[i * d + j] = T(r * (double(g[i * d + j]) - gm - double(xhat[i * d + j]) * gxm));
      }
      add_to(0, dx);
      break;
    }
    case OpKind::Patchify: {
      const size_t patch = size_t(n.iargs[0]);
      const size_t c = n.in_shapes[0][0], s = n.in_shapes[0][1];
      const size_t gdim = s / patch;
      const size_t row_w = c * patch * patch;
      std::vector<T> dx(c * s * s);
      for (size_t gy = 0; gy < gdim; ++gy)
        for (size_t gx = 0; gx < gdim; ++gx) {
          const T* grow = g.data() + (gy * gdim + gx) * row_w;
          for (size_t ch = 0; ch < c; ++ch)
            for (size_t py = 0; py < patch; ++py)
              for (size_t px = 0; px < patch; ++px)
                dx[ch * s * s + (gy * patch + py) * s + (gx * patch + px)] =
                    grow[ch * patch * patch + py * patch + px];
        }
      add_to(0, dx);
      break;
    }
    case OpKind::QuadCropResize: {
      const size_t q = size_t(n.iargs[0]);
      const size_t c = n.in_shapes[0][0], s = n.in_shapes[0][1];
      const size_t h = s / 2;
      const size_t oy = (q / 2) * h, ox = (q % 2) * h;
      const double sf = double(h) / double(s);
      std::vector<T> dx(c * s * s, T(0));
      for (size_t y = 0; y < s; ++y) {
        size_t y0, y1;
        double wy;
        ops::bilinear::taps(y, sf, h, y0, y1, wy);
        for (size_t x = 0; x < s; ++x) {
          size_t x0, x1;
          double wx;
          ops::bilinear::taps(x, sf, h, x0, x1, wx);
          for (size_t ch = 0; ch < c; ++ch) {
            const double gv = double(g[ch * s * s + y * s + x]);
            T* plane = dx.data() + ch * s * s;
            plane[(oy + y0) * s + (ox + x0)] += T((1 - wy) * (1 - wx) * gv);
            plane[(oy + y0) * s + (ox + x1)] += T((1 - wy) * wx * gv);
            plane[(oy + y1) * s + (ox + x0)] += T(wy * (1 - wx) * gv);
            plane[(oy + y1) * s + (ox + x1)] += T(wy * wx * gv);
          }
        }
      }
      add_to(0, dx);
      break;
    }
  }
}

template <class T>
std::unordered_map<int, TensorT<T>> TapeT<T>::backward(const TensorT<T>& loss) {
  const int start = id_of(loss);
  if (start < 0)
    throw TensorError("backward: loss is not recorded on the active tape");
  if (loss.numel() != 1)
    throw TensorError("backward: loss must be scalar, got shape " + shape_str(loss.shape));

  std::vector<std::vector<T>> grads(nodes_.size());
  std::vector<char> has(nodes_.size(), 0);
  grads[size_t(start)] = {T(1)};
  has[size_t(start)] = 1;

  for (int id = start; id >= 0; --id) {
    if (!has[size_t(id)]) continue;
    Node& n = nodes_[size_t(id)];
    if (n.kind != OpKind::Leaf) {
      backward_node(id, grads, has);
      std::vector<T>().swap(grads[size_t(id)]);  // free as we descend
      has[size_t(id)] = 0;
    }
  }

  std::unordered_map<int, TensorT<T>> result;
  for (size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].kind == OpKind::Leaf && nodes_[id].leaf_requires_grad && has[id])
      result.emplace(int(id), TensorT<T>::from(nodes_[id].out_shape, std::move(grads[id])));
  }
  return result;
}

// ---------------------------------------------------------------------------
// forward_op: uniform dispatcher over the op vocabulary.
// ---------------------------------------------------------------------------

struct OpArgs {
  long long axis = 0;
  double scale = 1.0;
  double eps = 1e-5;
  long long start = 0;
  long long len = 0;
  long long patch = 0;
  long long quadrant = 0;
  std::vector<size_t> new_shape;
};

template <class T>
TensorT<T> forward_op(OpKind kind, const std::vector<TensorT<T>>& inputs, const OpArgs& args = {}) {
  auto need = [&](size_t n) {
    if (inputs.size() != n)
      throw TensorError(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                        " inputs, got " + std::to_string(inputs.size()));
  };
  switch (kind) {
    case OpKind::Add: need(2); return ops::add(inputs[0], inputs[1]);
    case OpKind::Sub: need(2); return ops::sub(inputs[0], inputs[1]);
    case OpKind::MulElem: need(2); return ops::mul_elem(inputs[0], inputs[1]);
    case OpKind::MatMul: need(2); return ops::matmul(inputs[0], inputs[1]);
    case OpKind::Relu: need(1); return ops::relu(inputs[0]);
    case OpKind::SoftmaxLastDim: need(1); return ops::softmax_lastdim(inputs[0]);
    case OpKind::ConcatLastDim: return ops::concat_lastdim(inputs);
    case OpKind::MeanAxis: need(1); return ops::mean_axis(inputs[0], size_t(args.axis));
    case OpKind::Transpose2d: need(1); return ops::transpose2d(inputs[0]);
    case OpKind::Reshape: need(1); return ops::reshape(inputs[0], args.new_shape);
    case OpKind::Scale: need(1); return ops::scale(inputs[0], args.scale);
    case OpKind::Log: need(1); return ops::log(inputs[0]);
    case OpKind::Exp: need(1); return ops::exp(inputs[0]);
    case OpKind::Gelu: need(1); return ops::gelu(inputs[0]);
    case OpKind::SliceLastDim:
      need(1);
      return ops::slice_lastdim(inputs[0], size_t(args.start), size_t(args.len));
    case OpKind::RowStandardize: need(1); return ops::row_standardize(inputs[0], args.eps);
    case OpKind::Patchify: need(1); return ops::patchify(inputs[0], size_t(args.patch));
    case OpKind::QuadCropResize:
      need(1);
      return ops::quad_crop_resize(inputs[0], size_t(args.quadrant));
    case OpKind::Leaf: break;
  }
  throw TensorError("forward_op: not an executable op kind");
}

// ---------------------------------------------------------------------------
// grad_check: tape gradient vs central differences.
//
// The analytic gradient is computed on the f32 tape; the difference quotient
// is evaluated through the f64 shadow engine so the oracle is not drowned by
// single-precision forward noise. grad_check_f64 runs both sides in f64.
// The callable must be generic over the scalar type (a generic lambda built
// from the templated ops). For large inputs a random subset of coordinates
// can be checked.
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_rel_err = 0.0;
  bool nan_seen = false;
  size_t coords_checked = 0;

  bool ok(double tol) const { return !nan_seen && max_rel_err < tol; }
};

namespace detail {

template <class T, class F>
std::vector<T> tape_gradient(F&& f, const TensorT<T>& x, std::vector<size_t>& out_shape) {
  TapeT<T> tape;
  typename TapeT<T>::Scope scope(tape);
  TensorT<T> xa = x.clone();
  xa.requires_grad = true;
  TensorT<T> loss = f(xa);
  out_shape = loss.shape;
  if (loss.numel() != 1) throw TensorError("grad_check: function must be scalar-valued");
  auto grads = tape.backward(loss);
  const int id = tape.id_of(xa);
  auto it = grads.find(id);
  if (it == grads.end()) return std::vector<T>(x.numel(), T(0));
  return it->second.data();
}

template <class F, class T>
GradCheckResult grad_check_impl(F&& f, const TensorT<T>& x, double eps, size_t max_coords,
                                uint64_t coord_seed) {
  std::vector<size_t> loss_shape;
  std::vector<T> analytic = tape_gradient(f, x, loss_shape);

  TensorT<double> xd = cast<double>(x);
  xd.requires_grad = false;

  // Baseline evaluation to catch NaN up front.
  GradCheckResult res;
  {
    double f0 = f(xd).value();
    if (!std::isfinite(f0)) {
      res.nan_seen = true;
      res.max_rel_err = std::numeric_limits<double>::infinity();
      return res;
    }
  }

  std::vector<size_t> coords;
  if (x.numel() <= max_coords) {
    coords.resize(x.numel());
    for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  } else {
    Rng rng(coord_seed);
    for (size_t i = 0; i < max_coords; ++i) coords.push_back(size_t(rng.below(x.numel())));
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  }

  for (size_t i : coords) {
    const double orig = xd.data()[i];
    xd.data()[i] = orig + eps;
    const double fp = f(xd).value();
    xd.data()[i] = orig - eps;
    const double fm = f(xd).value();
    xd.data()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      res.nan_seen = true;
      res.max_rel_err = std::numeric_limits<double>::infinity();
      return res;
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = double(analytic[i]);
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    res.max_rel_err = std::max(res.max_rel_err, rel);
  }
  res.coords_checked = coords.size();
  return res;
}

}  // namespace detail

template <class F>
GradCheckResult grad_check(F&& f, const Tensor& x, double eps, size_t max_coords = size_t(-1),
                           uint64_t coord_seed = 0x9e3779b9u) {
  return detail::grad_check_impl(std::forward<F>(f), x, eps, max_coords, coord_seed);
}

template <class F>
GradCheckResult grad_check_f64(F&& f, const TensorT<double>& x, double eps,
                               size_t max_coords = size_t(-1), uint64_t coord_seed = 0x9e3779b9u) {
  return detail::grad_check_impl(std::forward<F>(f), x, eps, max_coords, coord_seed);
}

}  // namespace quadfuse
