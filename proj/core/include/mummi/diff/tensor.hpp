#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mummi::diff {

using Index = std::int64_t;
using Shape = std::vector<Index>;

std::string shape_to_string(const Shape& s);
Index shape_numel(const Shape& s);

/// Base class for all numeric-substrate errors.
class DiffError : public std::runtime_error {
 public:
  explicit DiffError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when operand shapes are incompatible. Carries the op name and both shapes.
class ShapeError : public DiffError {
 public:
  ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
  ShapeError(const std::string& op, const std::string& detail);
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

/// Raised on domain violations (log of non-positive, division by zero, ...).
class DomainError : public DiffError {
 public:
  DomainError(const std::string& op, const std::string& detail);
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;  // absent until first accumulation
};
}  // namespace detail

/// Dense row-major float64 array with optional participation in reverse-mode
/// differentiation. Value-semantic handle: copies share storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_values(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  /// Leaf with requires_grad set; the usual way to create a learned parameter.
  static Tensor param(Shape shape, std::vector<double> values);

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const;
  Index numel() const;
  Index dim(std::size_t axis) const;
  std::size_t rank() const;

  /// View into shared storage; keep the Tensor alive while the span is used
  /// (do not call on a temporary).
  std::span<const double> values() const;
  std::span<double> mutable_values();  // optimizer / grad-check perturbations
  double scalar_value() const;         // requires numel() == 1

  bool requires_grad() const;
  void set_requires_grad(bool rg);
  /// Gradient buffer, or nullptr when no gradient has been accumulated.
  const std::vector<double>* grad() const;
  void zero_grad();

  /// Same values, detached from any tape; never requires grad.
  Tensor detached() const;

  /// Identity check (same underlying storage).
  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

  std::shared_ptr<detail::TensorData> data_handle() const { return data_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : data_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> data_;

  friend class Tape;
  friend Tensor make_result(Shape, std::vector<double>, bool);
};

/// Ordered record of executed operations. Ops append their adjoint closures in
/// execution order, so a reverse sweep is a valid reverse-topological order and
/// visits each node exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Seeds d(loss)/d(loss) = 1 and runs all adjoints in reverse order.
  /// Errors: non-scalar loss, loss not connected to the tape, or a second
  /// call on the same tape.
  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  void record(std::function<void()> adjoint);

 private:
  std::vector<std::function<void()>> nodes_;
  bool consumed_ = false;
};

/// Installs a tape as the current recording target for this thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording within its lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// Currently active tape for this thread, or nullptr.
Tape* current_tape();

namespace detail {
/// Adds `g` into the tensor's grad buffer, allocating zeros on first use.
/// No-op for tensors that do not require grad (detached leaves stay grad-less).
void accumulate_grad(TensorData& t, std::span<const double> g);
}  // namespace detail

}  // namespace mummi::diff
