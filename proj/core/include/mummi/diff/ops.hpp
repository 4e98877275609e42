#pragma once

#include <functional>

#include "mummi/diff/tensor.hpp"

namespace mummi::diff {

// Elementwise binary ops with numpy-style broadcasting over leading/trailing
// singleton axes. Shape mismatch raises ShapeError naming the op.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);  // zero denominator -> DomainError

Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, double b);
Tensor div(const Tensor& a, double b);
Tensor div(double a, const Tensor& b);

Tensor neg(const Tensor& x);

// Elementwise unaries.
Tensor exp(const Tensor& x);       // input above ~709 -> DomainError (would overflow)
Tensor log(const Tensor& x);       // non-positive input -> DomainError
Tensor sqrt(const Tensor& x);      // non-positive input -> DomainError (grad unbounded at 0)
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor elu(const Tensor& x);       // alpha = 1
Tensor softplus(const Tensor& x);  // numerically stable log(1 + e^x)
Tensor square(const Tensor& x);

/// Elementwise op with caller-supplied forward and derivative. The extension
/// point for one-off activations and for gradient-check negative controls.
Tensor elementwise_custom(const Tensor& x, const std::function<double(double)>& f,
                          const std::function<double(double)>& dfdx, const std::string& name);

// Linear algebra (2-D).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Reductions. `axis` must satisfy 0 <= axis < rank.
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis, bool keepdims = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdims = false);
Tensor logsumexp(const Tensor& x, std::size_t axis, bool keepdims = false);

// Shape manipulation.
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, Index start, Index len);
/// Gathers rows of a 2-D tensor; adjoint scatter-adds back.
Tensor take_rows(const Tensor& x, const std::vector<Index>& rows);

/// Values pass through; the result is detached from the tape and never
/// requires grad.
Tensor stop_gradient(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator+(double a, const Tensor& b) { return add(b, a); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, b); }
inline Tensor operator-(double a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, b); }
inline Tensor operator/(double a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }

}  // namespace mummi::diff
