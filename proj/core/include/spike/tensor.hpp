#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spike {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct TensorImpl;
struct TensorAccess;
}

// Dense row-major array of doubles. Copies are shallow handles onto the same
// storage; use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // 2-D convenience: rows of equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writes bypass the tape; reserved for parameter updates and test fixtures.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, fresh storage, no gradient tracking.
  Tensor clone() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& shared_impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  friend struct detail::TensorAccess;

  std::shared_ptr<detail::TensorImpl> impl_;
};

// Records primitive operations for a reverse sweep. A tape is owned by one
// thread at a time; install it with Tape::Scope so ops on that thread record
// onto it. Ops issued with no active tape are not recorded.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  // Accumulates d(loss)/d(x) into every requires_grad leaf reachable from
  // loss. Intermediate gradients are recomputed from zero on every call;
  // leaf gradients accumulate across calls.
  void backward(const Tensor& loss);

  // Releases every recorded node and the intermediates they reference.
  void clear();
  std::size_t size() const;

  // Registers `out` as produced from `inputs`; `pullback` propagates out's
  // gradient into the inputs' gradients.
  void record(const Tensor& out, std::vector<Tensor> inputs, std::function<void()> pullback);

 private:
  struct Node;
  std::vector<Node> nodes_;
};

// Reverse sweep on the active tape.
void backward(const Tensor& loss);

// Allocation accounting for tensor storage (values and gradients), used for
// running-memory reports.
struct MemoryStats {
  std::size_t current_bytes = 0;
  std::size_t peak_bytes = 0;
};
MemoryStats memory_stats();
void reset_peak_memory();

// ---- primitive operations ---------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// x[n×in] · w[out×in]ᵀ (+ bias[out] on every row when given).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Adds a vector of length last-dim to every row.
Tensor add_rowwise(const Tensor& x, const Tensor& row);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
// Normalizes over the last axis (epsilon 1e-5), then applies gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
inline constexpr double kLayerNormEpsilon = 1e-5;
Tensor concat(const std::vector<Tensor>& parts);  // along the last axis
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
Tensor softmax_rows(const Tensor& x);
// Max along `axis`; gradient goes to the first maximal element.
Tensor max_reduce(const Tensor& x, std::size_t axis);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace spike
