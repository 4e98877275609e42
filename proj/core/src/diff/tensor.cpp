#include "mummi/diff/tensor.hpp"

#include <sstream>

namespace mummi::diff {

std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Index shape_numel(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

ShapeError::ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs)
    : DiffError("shape mismatch in " + op + ": " + shape_to_string(lhs) + " vs " +
                shape_to_string(rhs)),
      op_(op) {}

ShapeError::ShapeError(const std::string& op, const std::string& detail)
    : DiffError("shape error in " + op + ": " + detail), op_(op) {}

DomainError::DomainError(const std::string& op, const std::string& detail)
    : DiffError("domain error in " + op + ": " + detail), op_(op) {}

namespace {

std::shared_ptr<detail::TensorData> make_data(Shape shape, std::vector<double> values) {
  const Index n = shape_numel(shape);
  if (static_cast<Index>(values.size()) != n) {
    throw ShapeError("from_values", "value count " + std::to_string(values.size()) +
                                        " does not match shape " + shape_to_string(shape));
  }
  for (Index d : shape) {
    if (d <= 0) throw ShapeError("from_values", "non-positive dimension in " + shape_to_string(shape));
  }
  auto d = std::make_shared<detail::TensorData>();
  d->shape = std::move(shape);
  d->values = std::move(values);
  return d;
}

thread_local Tape* g_current_tape = nullptr;

}  // namespace

Tensor make_result(Shape shape, std::vector<double> values, bool requires_grad);

Tensor Tensor::zeros(Shape shape) {
  const Index n = shape_numel(shape);
  return from_values(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double value) {
  const Index n = shape_numel(shape);
  return from_values(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  return Tensor(make_data(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  Tensor t = from_values(std::move(shape), std::move(values));
  t.data_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return data_->shape; }

Index Tensor::numel() const { return static_cast<Index>(data_->values.size()); }

Index Tensor::dim(std::size_t axis) const { return data_->shape.at(axis); }

std::size_t Tensor::rank() const { return data_->shape.size(); }

std::span<const double> Tensor::values() const { return data_->values; }

std::span<double> Tensor::mutable_values() { return data_->values; }

double Tensor::scalar_value() const {
  if (numel() != 1) {
    throw ShapeError("scalar_value", "tensor of shape " + shape_to_string(shape()) + " is not scalar");
  }
  return data_->values[0];
}

bool Tensor::requires_grad() const { return data_ && data_->requires_grad; }

void Tensor::set_requires_grad(bool rg) { data_->requires_grad = rg; }

const std::vector<double>* Tensor::grad() const {
  if (!data_ || !data_->grad) return nullptr;
  return &*data_->grad;
}

void Tensor::zero_grad() {
  if (data_) data_->grad.reset();
}

Tensor Tensor::detached() const {
  Tensor t = from_values(data_->shape, data_->values);
  return t;
}

void Tape::record(std::function<void()> adjoint) { nodes_.push_back(std::move(adjoint)); }

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw DiffError("backward called twice on the same tape");
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward", "loss must be a scalar, got " +
                                     (loss.defined() ? shape_to_string(loss.shape()) : std::string("<empty>")));
  }
  if (!loss.requires_grad()) {
    throw DiffError("backward: loss does not require grad (not reachable from any leaf through taped ops)");
  }
  consumed_ = true;
  auto d = loss.data_handle();
  d->grad = std::vector<double>{1.0};
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_current_tape) { g_current_tape = &tape; }
TapeScope::~TapeScope() { g_current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_current_tape) { g_current_tape = nullptr; }
NoGradScope::~NoGradScope() { g_current_tape = previous_; }

Tape* current_tape() { return g_current_tape; }

namespace detail {
void accumulate_grad(TensorData& t, std::span<const double> g) {
  if (!t.requires_grad) return;
  if (!t.grad) t.grad = std::vector<double>(t.values.size(), 0.0);
  auto& acc = *t.grad;
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}
}  // namespace detail

}  // namespace mummi::diff
