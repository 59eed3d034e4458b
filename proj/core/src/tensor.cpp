#include "spike/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spike/errors.hpp"

namespace spike {

namespace {

std::atomic<std::size_t> g_current_bytes{0};
std::atomic<std::size_t> g_peak_bytes{0};

void account_alloc(std::size_t bytes) {
  const std::size_t now = g_current_bytes.fetch_add(bytes) + bytes;
  std::size_t peak = g_peak_bytes.load();
  while (now > peak && !g_peak_bytes.compare_exchange_weak(peak, now)) {
  }
}

void account_free(std::size_t bytes) { g_current_bytes.fetch_sub(bytes); }

thread_local Tape* t_active_tape = nullptr;

}  // namespace

namespace detail {

struct TensorImpl {
  TensorImpl(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    account_alloc(data.size() * sizeof(double));
  }
  ~TensorImpl() { account_free((data.size() + grad.size()) * sizeof(double)); }
  TensorImpl(const TensorImpl&) = delete;
  TensorImpl& operator=(const TensorImpl&) = delete;

  void ensure_grad() {
    if (grad.empty() && !data.empty()) {
      grad.assign(data.size(), 0.0);
      account_alloc(grad.size() * sizeof(double));
    }
  }

  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
};

struct TensorAccess {
  static Tensor wrap(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }
};

}  // namespace detail

using detail::TensorImpl;

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Tensor -------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> values(shape_numel(shape), value);
  return from(std::move(shape), std::move(values));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  return Tensor(std::make_shared<TensorImpl>(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from({rows.size(), cols}, std::move(values));
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }
std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return impl_->data[i * impl_->shape.back() + j];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !impl_->grad.empty() || impl_->data.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::mutable_grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0); }

Tensor Tensor::clone() const { return from(impl_->shape, impl_->data); }

// ---- Tape ---------------------------------------------------------------------

struct Tape::Node {
  std::shared_ptr<TensorImpl> out;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void()> pullback;
};

Tape::Tape() = default;
Tape::~Tape() = default;

Tape::Scope::Scope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }
Tape::Scope::~Scope() { t_active_tape = previous_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::clear() { nodes_.clear(); }
std::size_t Tape::size() const { return nodes_.size(); }

void Tape::record(const Tensor& out, std::vector<Tensor> inputs, std::function<void()> pullback) {
  Node node;
  node.out = out.shared_impl();
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.shared_impl());
  node.pullback = std::move(pullback);
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " +
                         (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
  }
  const bool on_tape = std::any_of(nodes_.begin(), nodes_.end(),
                                   [&](const Node& n) { return n.out.get() == loss.impl(); });
  if (!on_tape) throw Error("backward(): loss was not produced on this tape");

  for (auto& node : nodes_) {
    node.out->ensure_grad();
    std::fill(node.out->grad.begin(), node.out->grad.end(), 0.0);
  }
  for (auto& node : nodes_) {
    for (auto& in : node.inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
  }
  loss.impl()->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->pullback();
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (!tape) throw Error("backward(): no active tape");
  tape->backward(loss);
}

MemoryStats memory_stats() { return {g_current_bytes.load(), g_peak_bytes.load()}; }
void reset_peak_memory() { g_peak_bytes.store(g_current_bytes.load()); }

// ---- operations -------------------------------------------------------------

namespace {

Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = Tape::active();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return tape;
  }
  return nullptr;
}

Tensor make_tensor(Shape shape, std::vector<double> values) {
  return Tensor::from(std::move(shape), std::move(values));
}

// Marks `out` as a tracked intermediate and records it.
void track(Tape* tape, Tensor& out, std::vector<Tensor> inputs, std::function<void()> pullback) {
  out.impl()->requires_grad = true;
  out.impl()->is_leaf = false;
  tape->record(out, std::move(inputs), std::move(pullback));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined operand");
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  require_defined(t, op);
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

bool wants_grad(const TensorImpl* t) { return t && t->requires_grad; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t p = a.dim(0), q = a.dim(1), s = b.dim(1);
  if (b.dim(0) != q) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  std::vector<double> c(p * s, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = A[i * q + k];
      for (std::size_t j = 0; j < s; ++j) c[i * s + j] += aik * B[k * s + j];
    }
  }
  Tensor out = make_tensor({p, s}, std::move(c));
  if (Tape* tape = recording_tape({&a, &b})) {
    auto* ai = a.impl();
    auto* bi = b.impl();
    auto* oi = out.impl();
    track(tape, out, {a, b}, [=] {
      const auto& g = oi->grad;
      if (wants_grad(ai)) {
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < s; ++j) acc += g[i * s + j] * bi->data[k * s + j];
            ai->grad[i * q + k] += acc;
          }
      }
      if (wants_grad(bi)) {
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            const double aik = ai->data[i * q + k];
            for (std::size_t j = 0; j < s; ++j) bi->grad[k * s + j] += aik * g[i * s + j];
          }
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t n = x.dim(0), in = x.dim(1), outd = weight.dim(0);
  if (weight.dim(1) != in) {
    throw DimensionError("linear: input " + to_string(x.shape()) + " does not match weight " +
                         to_string(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != outd)) {
    throw DimensionError("linear: bias " + to_string(bias.shape()) + " does not match weight " +
                         to_string(weight.shape()));
  }
  std::vector<double> y(n * outd);
  const auto X = x.data();
  const auto W = weight.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* xr = &X[i * in];
    for (std::size_t o = 0; o < outd; ++o) {
      const double* wr = &W[o * in];
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
      if (bias.defined()) acc += bias.data()[o];
      y[i * outd + o] = acc;
    }
  }
  Tensor out = make_tensor({n, outd}, std::move(y));
  if (Tape* tape = recording_tape({&x, &weight, &bias})) {
    auto* xi = x.impl();
    auto* wi = weight.impl();
    auto* bi = bias.defined() ? bias.impl() : nullptr;
    auto* oi = out.impl();
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    track(tape, out, std::move(inputs), [=] {
      const auto& g = oi->grad;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < outd; ++o) {
          const double go = g[i * outd + o];
          if (go == 0.0) continue;
          if (wants_grad(xi)) {
            for (std::size_t k = 0; k < in; ++k) xi->grad[i * in + k] += go * wi->data[o * in + k];
          }
          if (wants_grad(wi)) {
            for (std::size_t k = 0; k < in; ++k) wi->grad[o * in + k] += go * xi->data[i * in + k];
          }
          if (wants_grad(bi)) bi->grad[o] += go;
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> t(r * c);
  const auto A = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = A[i * c + j];
  Tensor out = make_tensor({c, r}, std::move(t));
  if (Tape* tape = recording_tape({&a})) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    track(tape, out, {a}, [=] {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ai->grad[i * c + j] += oi->grad[j * r + i];
    });
  }
  return out;
}

namespace {

template <typename Fwd, typename Da, typename Db>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Da da,
                          Db db) {
  require_same_shape(a, b, name);
  const std::size_t n = a.numel();
  std::vector<double> y(n);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = fwd(A[i], B[i]);
  Tensor out = make_tensor(a.shape(), std::move(y));
  if (Tape* tape = recording_tape({&a, &b})) {
    auto* ai = a.impl();
    auto* bi = b.impl();
    auto* oi = out.impl();
    track(tape, out, {a, b}, [=] {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = oi->grad[i];
        if (wants_grad(ai)) ai->grad[i] += g * da(ai->data[i], bi->data[i]);
        if (wants_grad(bi)) bi->grad[i] += g * db(ai->data[i], bi->data[i]);
      }
    });
  }
  return out;
}

template <typename Fwd, typename Deriv>
Tensor unary_elementwise(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
  require_defined(a, name);
  const std::size_t n = a.numel();
  std::vector<double> y(n);
  const auto A = a.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = fwd(A[i]);
  Tensor out = make_tensor(a.shape(), std::move(y));
  if (Tape* tape = recording_tape({&a})) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    track(tape, out, {a}, [=] {
      for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i] * deriv(ai->data[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_elementwise(
      a, "scale", [factor](double x) { return x * factor; }, [factor](double) { return factor; });
}

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& a) {
  return unary_elementwise(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor add_rowwise(const Tensor& x, const Tensor& row) {
  require_defined(x, "add_rowwise");
  require_rank(row, 1, "add_rowwise");
  if (x.rank() == 0 || x.shape().back() != row.dim(0)) {
    throw DimensionError("add_rowwise: row " + to_string(row.shape()) + " does not match " +
                         to_string(x.shape()));
  }
  const std::size_t c = row.dim(0), n = x.numel();
  std::vector<double> y(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < n; ++i) y[i] += row.data()[i % c];
  Tensor out = make_tensor(x.shape(), std::move(y));
  if (Tape* tape = recording_tape({&x, &row})) {
    auto* xi = x.impl();
    auto* ri = row.impl();
    auto* oi = out.impl();
    track(tape, out, {x, row}, [=] {
      for (std::size_t i = 0; i < n; ++i) {
        if (wants_grad(xi)) xi->grad[i] += oi->grad[i];
        if (wants_grad(ri)) ri->grad[i % c] += oi->grad[i];
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require_defined(x, "layer_norm");
  require_rank(gain, 1, "layer_norm");
  require_rank(bias, 1, "layer_norm");
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t c = x.shape().back();
  if (gain.dim(0) != c || bias.dim(0) != c) {
    throw DimensionError("layer_norm: affine " + to_string(gain.shape()) + "/" +
                         to_string(bias.shape()) + " does not match " + to_string(x.shape()));
  }
  const std::size_t rows = x.numel() / c;
  std::vector<double> xhat(x.numel()), inv_std(rows), y(x.numel());
  const auto X = x.data();
  const auto G = gain.data();
  const auto B = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &X[r * c];
    double mu = 0.0;
    for (std::size_t k = 0; k < c; ++k) mu += xr[k];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t k = 0; k < c; ++k) var += (xr[k] - mu) * (xr[k] - mu);
    var /= static_cast<double>(c);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (std::size_t k = 0; k < c; ++k) {
      xhat[r * c + k] = (xr[k] - mu) * inv_std[r];
      y[r * c + k] = xhat[r * c + k] * G[k] + B[k];
    }
  }
  Tensor out = make_tensor(x.shape(), std::move(y));
  if (Tape* tape = recording_tape({&x, &gain, &bias})) {
    auto* xi = x.impl();
    auto* gi = gain.impl();
    auto* bi = bias.impl();
    auto* oi = out.impl();
    track(tape, out, {x, gain, bias},
          [=, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
            std::vector<double> dxhat(c);
            for (std::size_t r = 0; r < rows; ++r) {
              const double* g = &oi->grad[r * c];
              const double* xh = &xhat[r * c];
              double mean_d = 0.0, mean_dx = 0.0;
              for (std::size_t k = 0; k < c; ++k) {
                dxhat[k] = g[k] * gi->data[k];
                mean_d += dxhat[k];
                mean_dx += dxhat[k] * xh[k];
                if (wants_grad(gi)) gi->grad[k] += g[k] * xh[k];
                if (wants_grad(bi)) bi->grad[k] += g[k];
              }
              mean_d /= static_cast<double>(c);
              mean_dx /= static_cast<double>(c);
              if (wants_grad(xi)) {
                for (std::size_t k = 0; k < c; ++k) {
                  xi->grad[r * c + k] += inv_std[r] * (dxhat[k] - mean_d - xh[k] * mean_dx);
                }
              }
            }
          });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw DimensionError("concat: scalar operand");
  const std::size_t rows = shape_numel(first) / first.back();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw DimensionError("concat: shape mismatch " + to_string(first) + " vs " + to_string(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  std::vector<double> y(rows * total);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto P = parts[pi].data();
    const std::size_t w = widths[pi];
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(&P[r * w], w, &y[r * total + offset]);
    offset += w;
  }
  Shape out_shape = first;
  out_shape.back() = total;
  Tensor out = make_tensor(std::move(out_shape), std::move(y));

  Tape* tape = Tape::active();
  const bool any = std::any_of(parts.begin(), parts.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (tape && any) {
    std::vector<TensorImpl*> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    auto* oi = out.impl();
    track(tape, out, parts, [=] {
      std::size_t off = 0;
      for (std::size_t pi = 0; pi < impls.size(); ++pi) {
        const std::size_t w = widths[pi];
        if (wants_grad(impls[pi])) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < w; ++k) impls[pi]->grad[r * w + k] += oi->grad[r * total + off + k];
        }
        off += w;
      }
    });
  }
  return out;
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
  require_defined(x, "slice_last");
  if (x.rank() == 0 || begin >= end || end > x.shape().back()) {
    throw DimensionError("slice_last: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + to_string(x.shape()));
  }
  const std::size_t c = x.shape().back(), w = end - begin, rows = x.numel() / c;
  std::vector<double> y(rows * w);
  const auto X = x.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(&X[r * c + begin], w, &y[r * w]);
  Shape s = x.shape();
  s.back() = w;
  Tensor out = make_tensor(std::move(s), std::move(y));
  if (Tape* tape = recording_tape({&x})) {
    auto* xi = x.impl();
    auto* oi = out.impl();
    track(tape, out, {x}, [=] {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < w; ++k) xi->grad[r * c + begin + k] += oi->grad[r * w + k];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + to_string(x.shape()) + " cannot become " + to_string(shape));
  }
  Tensor out = make_tensor(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (Tape* tape = recording_tape({&x})) {
    auto* xi = x.impl();
    auto* oi = out.impl();
    const std::size_t n = x.numel();
    track(tape, out, {x}, [=] {
      for (std::size_t i = 0; i < n; ++i) xi->grad[i] += oi->grad[i];
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_defined(x, "softmax_rows");
  if (x.rank() == 0) throw DimensionError("softmax_rows: scalar input");
  const std::size_t c = x.shape().back(), rows = x.numel() / c;
  const auto X = x.data();
  for (double v : X) {
    if (std::isnan(v)) throw NumericError("softmax_rows: NaN in input");
  }
  std::vector<double> y(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &X[r * c];
    const double mx = *std::max_element(xr, xr + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      y[r * c + k] = std::exp(xr[k] - mx);
      z += y[r * c + k];
    }
    for (std::size_t k = 0; k < c; ++k) y[r * c + k] /= z;
  }
  Tensor out = make_tensor(x.shape(), std::move(y));
  if (Tape* tape = recording_tape({&x})) {
    auto* xi = x.impl();
    auto* oi = out.impl();
    track(tape, out, {x}, [=] {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = &oi->data[r * c];
        const double* g = &oi->grad[r * c];
        double dot = 0.0;
        for (std::size_t k = 0; k < c; ++k) dot += g[k] * yr[k];
        for (std::size_t k = 0; k < c; ++k) xi->grad[r * c + k] += yr[k] * (g[k] - dot);
      }
    });
  }
  return out;
}

Tensor max_reduce(const Tensor& x, std::size_t axis) {
  require_defined(x, "max_reduce");
  if (axis >= x.rank()) {
    throw DimensionError("max_reduce: axis " + std::to_string(axis) + " invalid for " +
                         to_string(x.shape()));
  }
  const Shape& s = x.shape();
  const std::size_t extent = s[axis];
  if (extent == 0) throw DimensionError("max_reduce: empty axis in " + to_string(s));
  const std::size_t outer = shape_numel(Shape(s.begin(), s.begin() + static_cast<long>(axis)));
  const std::size_t inner = shape_numel(Shape(s.begin() + static_cast<long>(axis) + 1, s.end()));
  std::vector<double> y(outer * inner);
  std::vector<std::size_t> arg(outer * inner);
  const auto X = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      std::size_t best = o * extent * inner + i;
      for (std::size_t e = 1; e < extent; ++e) {
        const std::size_t idx = (o * extent + e) * inner + i;
        if (X[idx] > X[best]) best = idx;
      }
      y[o * inner + i] = X[best];
      arg[o * inner + i] = best;
    }
  }
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  Tensor out = make_tensor(std::move(out_shape), std::move(y));
  if (Tape* tape = recording_tape({&x})) {
    auto* xi = x.impl();
    auto* oi = out.impl();
    track(tape, out, {x}, [=, arg = std::move(arg)] {
      for (std::size_t k = 0; k < arg.size(); ++k) xi->grad[arg[k]] += oi->grad[k];
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (Tape* tape = recording_tape({&x})) {
    auto* xi = x.impl();
    auto* oi = out.impl();
    track(tape, out, {x}, [=] {
      for (double& g : xi->grad) g += oi->grad[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  if (x.numel() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace spike
