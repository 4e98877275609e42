#include "mummi/diff/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace mummi::diff {

namespace {

using detail::TensorData;
using DataPtr = std::shared_ptr<TensorData>;

constexpr double kExpOverflow = 709.0;

bool grad_needed(const Tensor& t) { return t.requires_grad(); }

Tensor make_out(Shape shape, std::vector<double> values, bool requires_grad) {
  Tensor t = Tensor::from_values(std::move(shape), std::move(values));
  if (requires_grad && current_tape() != nullptr) t.set_requires_grad(true);
  return t;
}

// Right-aligned broadcast of two shapes; throws on incompatibility.
Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  const std::size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const Index da = i < r - ra ? 1 : a[i - (r - ra)];
    const Index db = i < r - rb ? 1 : b[i - (r - rb)];
    if (da != db && da != 1 && db != 1) throw ShapeError(op, a, b);
    out[i] = std::max(da, db);
  }
  return out;
}

// Flat output index -> flat input index map for a broadcast input.
std::vector<Index> broadcast_map(const Shape& out, const Shape& in) {
  const std::size_t r = out.size(), ri = in.size();
  std::vector<Index> stride(r, 0);
  Index s = 1;
  for (std::size_t i = ri; i-- > 0;) {
    const std::size_t oi = i + (r - ri);
    stride[oi] = (in[i] == 1 && out[oi] != 1) ? 0 : s;
    s *= in[i];
  }
  const Index n = shape_numel(out);
  std::vector<Index> map(static_cast<std::size_t>(n));
  std::vector<Index> counter(r, 0);
  Index idx = 0;
  for (Index flat = 0; flat < n; ++flat) {
    map[static_cast<std::size_t>(flat)] = idx;
    for (std::size_t d = r; d-- > 0;) {
      ++counter[d];
      idx += stride[d];
      if (counter[d] < out[d]) break;
      counter[d] = 0;
      idx -= stride[d] * out[d];
    }
  }
  return map;
}

// Shared skeleton for elementwise binaries: value fn plus the two partials,
// each of signature (a_i, b_i, y_i) -> d.
template <class F, class DA, class DB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, DA dfa, DB dfb,
                 bool domain_check_b_nonzero = false) {
  const auto av = a.values();
  const auto bv = b.values();
  const bool rg = grad_needed(a) || grad_needed(b);

  if (domain_check_b_nonzero) {
    for (std::size_t i = 0; i < bv.size(); ++i) {
      if (bv[i] == 0.0) throw DomainError(name, "division by zero at index " + std::to_string(i));
    }
  }

  if (a.shape() == b.shape()) {
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
    Tensor result = make_out(a.shape(), std::move(out), rg);
    if (result.requires_grad()) {
      DataPtr ad = a.data_handle(), bd = b.data_handle(), od = result.data_handle();
      current_tape()->record([ad, bd, od, dfa, dfb]() {
        if (!od->grad) return;
        const auto& go = *od->grad;
        if (ad->requires_grad) {
          std::vector<double> ga(ad->values.size());
          for (std::size_t i = 0; i < ga.size(); ++i)
            ga[i] = go[i] * dfa(ad->values[i], bd->values[i], od->values[i]);
          detail::accumulate_grad(*ad, ga);
        }
        if (bd->requires_grad) {
          std::vector<double> gb(bd->values.size());
          for (std::size_t i = 0; i < gb.size(); ++i)
            gb[i] = go[i] * dfb(ad->values[i], bd->values[i], od->values[i]);
          detail::accumulate_grad(*bd, gb);
        }
      });
    }
    return result;
  }

  Shape oshape = broadcast_shape(name, a.shape(), b.shape());
  auto amap = broadcast_map(oshape, a.shape());
  auto bmap = broadcast_map(oshape, b.shape());
  const Index n = shape_numel(oshape);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    out[ii] = f(av[static_cast<std::size_t>(amap[ii])], bv[static_cast<std::size_t>(bmap[ii])]);
  }
  Tensor result = make_out(std::move(oshape), std::move(out), rg);
  if (result.requires_grad()) {
    DataPtr ad = a.data_handle(), bd = b.data_handle(), od = result.data_handle();
    auto am = std::make_shared<std::vector<Index>>(std::move(amap));
    auto bm = std::make_shared<std::vector<Index>>(std::move(bmap));
    // Broadcast adjoints sum-reduce over the broadcast axes via scatter-add.
    current_tape()->record([ad, bd, od, am, bm, dfa, dfb]() {
      if (!od->grad) return;
      const auto& go = *od->grad;
      if (ad->requires_grad) {
        std::vector<double> ga(ad->values.size(), 0.0);
        for (std::size_t i = 0; i < go.size(); ++i) {
          const auto ai = static_cast<std::size_t>((*am)[i]);
          const auto bi = static_cast<std::size_t>((*bm)[i]);
          ga[ai] += go[i] * dfa(ad->values[ai], bd->values[bi], od->values[i]);
        }
        detail::accumulate_grad(*ad, ga);
      }
      if (bd->requires_grad) {
        std::vector<double> gb(bd->values.size(), 0.0);
        for (std::size_t i = 0; i < go.size(); ++i) {
          const auto ai = static_cast<std::size_t>((*am)[i]);
          const auto bi = static_cast<std::size_t>((*bm)[i]);
          gb[bi] += go[i] * dfb(ad->values[ai], bd->values[bi], od->values[i]);
        }
        detail::accumulate_grad(*bd, gb);
      }
    });
  }
  return result;
}

// Unary skeleton; derivative has signature (x_i, y_i) -> dy/dx.
template <class F, class DF, class Guard>
Tensor unary_op([[maybe_unused]] const char* name, const Tensor& x, F f, DF df, Guard guard) {
  const auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) guard(xv[i], i);
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  Tensor result = make_out(x.shape(), std::move(out), grad_needed(x));
  if (result.requires_grad()) {
    DataPtr xd = x.data_handle(), od = result.data_handle();
    current_tape()->record([xd, od, df]() {
      if (!od->grad) return;
      const auto& go = *od->grad;
      std::vector<double> gx(xd->values.size());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = go[i] * df(xd->values[i], od->values[i]);
      detail::accumulate_grad(*xd, gx);
    });
  }
  return result;
}

auto no_guard = [](double, std::size_t) {};

// outer/axis/inner decomposition used by the axis reductions.
struct AxisDecomp {
  Index outer, n, inner;
};

AxisDecomp axis_decomp(const char* op, const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError(op, "axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  AxisDecomp d{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) d.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) d.inner *= s[i];
  return d;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdims) {
  Shape out = s;
  if (keepdims) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out.empty()) out = {1};
  }
  return out;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; }, /*domain_check_b_nonzero=*/true);
}

Tensor add(const Tensor& a, double b) {
  return unary_op(
      "add_scalar", a, [b](double x) { return x + b; }, [](double, double) { return 1.0; }, no_guard);
}

Tensor sub(const Tensor& a, double b) { return add(a, -b); }

Tensor sub(double a, const Tensor& b) {
  return unary_op(
      "rsub_scalar", b, [a](double x) { return a - x; }, [](double, double) { return -1.0; }, no_guard);
}

Tensor mul(const Tensor& a, double b) {
  return unary_op(
      "mul_scalar", a, [b](double x) { return x * b; }, [b](double, double) { return b; }, no_guard);
}

Tensor div(const Tensor& a, double b) {
  if (b == 0.0) throw DomainError("div_scalar", "division by zero");
  return mul(a, 1.0 / b);
}

Tensor div(double a, const Tensor& b) {
  return unary_op(
      "rdiv_scalar", b, [a](double x) { return a / x; },
      [a](double x, double) { return -a / (x * x); },
      [](double v, std::size_t i) {
        if (v == 0.0) throw DomainError("rdiv_scalar", "division by zero at index " + std::to_string(i));
      });
}

Tensor neg(const Tensor& x) {
  return unary_op(
      "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; }, no_guard);
}

Tensor exp(const Tensor& x) {
  return unary_op(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; },
      [](double v, std::size_t i) {
        if (v > kExpOverflow)
          throw DomainError("exp", "input " + std::to_string(v) + " at index " + std::to_string(i) +
                                       " would overflow");
      });
}

Tensor log(const Tensor& x) {
  return unary_op(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; },
      [](double v, std::size_t i) {
        if (v <= 0.0)
          throw DomainError("log", "non-positive input " + std::to_string(v) + " at index " +
                                       std::to_string(i));
      });
}

Tensor sqrt(const Tensor& x) {
  return unary_op(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; },
      [](double v, std::size_t i) {
        if (v <= 0.0)
          throw DomainError("sqrt", "non-positive input " + std::to_string(v) + " at index " +
                                        std::to_string(i));
      });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; }, no_guard);
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); }, no_guard);
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; }, no_guard);
}

Tensor elu(const Tensor& x) {
  return unary_op(
      "elu", x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double v, double y) { return v > 0.0 ? 1.0 : y + 1.0; }, no_guard);
}

Tensor softplus(const Tensor& x) {
  return unary_op(
      "softplus", x,
      [](double v) {
        if (v > 30.0) return v;
        if (v < -30.0) return std::exp(v);
        return std::log1p(std::exp(v));
      },
      [](double v, double) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      no_guard);
}

Tensor square(const Tensor& x) {
  return unary_op(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; }, no_guard);
}

Tensor elementwise_custom(const Tensor& x, const std::function<double(double)>& f,
                          const std::function<double(double)>& dfdx, const std::string& name) {
  return unary_op(
      name.c_str(), x, [&f](double v) { return f(v); },
      [dfdx](double v, double) { return dfdx(v); }, no_guard);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) throw ShapeError("matmul", a.shape(), b.shape());
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m * n));
  {
    ConstMap A(a.values().data(), m, k), B(b.values().data(), k, n);
    MutMap C(out.data(), m, n);
    C.noalias() = A * B;
  }
  Tensor result = make_out({m, n}, std::move(out), grad_needed(a) || grad_needed(b));
  if (result.requires_grad()) {
    DataPtr ad = a.data_handle(), bd = b.data_handle(), od = result.data_handle();
    current_tape()->record([ad, bd, od, m, k, n]() {
      if (!od->grad) return;
      ConstMap G(od->grad->data(), m, n);
      if (ad->requires_grad) {
        ConstMap B(bd->values.data(), k, n);
        std::vector<double> ga(static_cast<std::size_t>(m * k));
        MutMap(ga.data(), m, k).noalias() = G * B.transpose();
        detail::accumulate_grad(*ad, ga);
      }
      if (bd->requires_grad) {
        ConstMap A(ad->values.data(), m, k);
        std::vector<double> gb(static_cast<std::size_t>(k * n));
        MutMap(gb.data(), k, n).noalias() = A.transpose() * G;
        detail::accumulate_grad(*bd, gb);
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose", "expected rank 2, got " + shape_to_string(x.shape()));
  const Index m = x.dim(0), n = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m * n));
  const auto xv = x.values();
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) out[static_cast<std::size_t>(j * m + i)] = xv[static_cast<std::size_t>(i * n + j)];
  Tensor result = make_out({n, m}, std::move(out), grad_needed(x));
  if (result.requires_grad()) {
    DataPtr xd = x.data_handle(), od = result.data_handle();
    current_tape()->record([xd, od, m, n]() {
      if (!od->grad) return;
      const auto& go = *od->grad;
      std::vector<double> gx(xd->values.size());
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j)
          gx[static_cast<std::size_t>(i * n + j)] = go[static_cast<std::size_t>(j * m + i)];
      detail::accumulate_grad(*xd, gx);
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor result = make_out({1}, {s}, grad_needed(x));
  if (result.requires_grad()) {
    DataPtr xd = x.data_handle(), od = result.data_handle();
    current_tape()->record([xd, od]() {
      if (!od->grad) return;
      std::vector<double> gx(xd->values.size(), (*od->grad)[0]);
      detail::accumulate_grad(*xd, gx);
    });
  }
  return result;
}

Tensor mean(const Tensor& x) { return mul(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum(const Tensor& x, std::size_t axis, bool keepdims) {
  const auto d = axis_decomp("sum", x.shape(), axis);
  std::vector<double> out(static_cast<std::size_t>(d.outer * d.inner), 0.0);
  const auto xv = x.values();
  for (Index o = 0; o < d.outer; ++o)
    for (Index a = 0; a < d.n; ++a)
      for (Index i = 0; i < d.inner; ++i)
        out[static_cast<std::size_t>(o * d.inner + i)] += xv[static_cast<std::size_t>((o * d.n + a) * d.inner + i)];
  Tensor result = make_out(reduced_shape(x.shape(), axis, keepdims), std::move(out), grad_needed(x));
  if (result.requires_grad()) {
    DataPtr xd = x.data_handle(), od = result.data_handle();
    current_tape()->record([xd, od, d]() {
      if (!od->grad) return;
      const auto& go = *od->grad;
      std::vector<double> gx(xd->values.size());
      for (Index o = 0; o < d.outer; ++o)
        for (Index a = 0; a < d.n; ++a)
          for (Index i = 0; i < d.inner; ++i)
            gx[static_cast<std::size_t>((o * d.n + a) * d.inner + i)] = go[static_cast<std::size_t>(o * d.inner + i)];
      detail::accumulate_grad(*xd, gx);
    });
  }
  return result;
}

Tensor mean(const Tensor& x, std::size_t axis, bool keepdims) {
  const auto d = axis_decomp("mean", x.shape(), axis);
  return mul(sum(x, axis, keepdims), 1.0 / static_cast<double>(d.n));
}

Tensor logsumexp(const Tensor& x, std::size_t axis, bool keepdims) {
  const auto d = axis_decomp("logsumexp", x.shape(), axis);
  std::vector<double> out(static_cast<std::size_t>(d.outer * d.inner));
  const auto xv = x.values();
  for (Index o = 0; o < d.outer; ++o) {
    for (Index i = 0; i < d.inner; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (Index a = 0; a < d.n; ++a)
        m = std::max(m, xv[static_cast<std::size_t>((o * d.n + a) * d.inner + i)]);
      double s = 0.0;
      for (Index a = 0; a < d.n; ++a)
        s += std::exp(xv[static_cast<std::size_t>((o * d.n + a) * d.inner + i)] - m);
      out[static_cast<std::size_t>(o * d.inner + i)] = m + std::log(s);
    }
  }
  Tensor result = make_out(reduced_shape(x.shape(), axis, keepdims), std::move(out), grad_needed(x));
  if (result.requires_grad()) {
    DataPtr xd = x.data_handle(), od = result.data_handle();
    current_tape()->record([xd, od, d]() {
      if (!od->grad) return;
      const auto& go = *od->grad;
      std::vector<double> gx(xd->values.size());
      // d lse / d x_a = softmax(x)_a, recovered as exp(x - lse)
      for (Index o = 0; o < d.outer; ++o)
        for (Index a = 0; a < d.n; ++a)
          for (Index i = 0; i < d.inner; ++i) {
            const auto oi = static_cast<std::size_t>(o * d.inner + i);
            const auto xi = static_cast<std::size_t>((o * d.n + a) * d.inner + i);
            gx[xi] = go[oi] * std::exp(xd->values[xi] - od->values[oi]);
          }
      detail::accumulate_grad(*xd, gx);
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) throw ShapeError("reshape", x.shape(), new_shape);
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor result = make_out(std::move(new_shape), std::move(out), grad_needed(x));
  if (result.requires_grad()) {
    DataPtr xd = x.data_handle(), od = result.data_handle();
    current_tape()->record([xd, od]() {
      if (!od->grad) return;
      detail::accumulate_grad(*xd, *od->grad);
    });
  }
  return result;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat", "empty input list");
  const auto& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat", "axis " + std::to_string(axis) + " out of range");
  Shape oshape = first;
  Index axis_total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) throw ShapeError("concat", first, s);
    axis_total += s[axis];
  }
  oshape[axis] = axis_total;

  const auto d0 = axis_decomp("concat", oshape, axis);
  std::vector<double> out(static_cast<std::size_t>(shape_numel(oshape)));
  Index offset = 0;
  bool rg = false;
  for (const auto& p : parts) {
    rg = rg || grad_needed(p);
    const Index pn = p.shape()[axis];
    const auto pv = p.values();
    for (Index o = 0; o < d0.outer; ++o)
      for (Index a = 0; a < pn; ++a)
        for (Index i = 0; i < d0.inner; ++i)
          out[static_cast<std::size_t>((o * axis_total + offset + a) * d0.inner + i)] =
              pv[static_cast<std::size_t>((o * pn + a) * d0.inner + i)];
    offset += pn;
  }
  Tensor result = make_out(std::move(oshape), std::move(out), rg);
  if (result.requires_grad()) {
    std::vector<DataPtr> pds;
    pds.reserve(parts.size());
    for (const auto& p : parts) pds.push_back(p.data_handle());
    DataPtr od = result.data_handle();
    const Index outer = d0.outer, inner = d0.inner, total = axis_total;
    current_tape()->record([pds, od, outer, inner, total, axis]() {
      if (!od->grad) return;
      const auto& go = *od->grad;
      Index off = 0;
      for (const auto& pd : pds) {
        const Index pn = pd->shape[axis];
        if (pd->requires_grad) {
          std::vector<double> gp(pd->values.size());
          for (Index o = 0; o < outer; ++o)
            for (Index a = 0; a < pn; ++a)
              for (Index i = 0; i < inner; ++i)
                gp[static_cast<std::size_t>((o * pn + a) * inner + i)] =
                    go[static_cast<std::size_t>((o * total + off + a) * inner + i)];
          detail::accumulate_grad(*pd, gp);
        }
        off += pn;
      }
    });
  }
  return result;
}

Tensor slice(const Tensor& x, std::size_t axis, Index start, Index len) {
  const auto& s = x.shape();
  if (axis >= s.size()) throw ShapeError("slice", "axis " + std::to_string(axis) + " out of range");
  if (start < 0 || len <= 0 || start + len > s[axis])
    throw ShapeError("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                                  ") invalid for axis size " + std::to_string(s[axis]));
  const auto d = axis_decomp("slice", s, axis);
  Shape oshape = s;
  oshape[axis] = len;
  std::vector<double> out(static_cast<std::size_t>(d.outer * len * d.inner));
  const auto xv = x.values();
  for (Index o = 0; o < d.outer; ++o)
    for (Index a = 0; a < len; ++a)
      for (Index i = 0; i < d.inner; ++i)
        out[static_cast<std::size_t>((o * len + a) * d.inner + i)] =
            xv[static_cast<std::size_t>((o * d.n + start + a) * d.inner + i)];
  Tensor result = make_out(std::move(oshape), std::move(out), grad_needed(x));
  if (result.requires_grad()) {
    DataPtr xd = x.data_handle(), od = result.data_handle();
    current_tape()->record([xd, od, d, start, len]() {
      if (!od->grad) return;
      const auto& go = *od->grad;
      std::vector<double> gx(xd->values.size(), 0.0);
      for (Index o = 0; o < d.outer; ++o)
        for (Index a = 0; a < len; ++a)
          for (Index i = 0; i < d.inner; ++i)
            gx[static_cast<std::size_t>((o * d.n + start + a) * d.inner + i)] =
                go[static_cast<std::size_t>((o * len + a) * d.inner + i)];
      detail::accumulate_grad(*xd, gx);
    });
  }
  return result;
}

Tensor take_rows(const Tensor& x, const std::vector<Index>& rows) {
  if (x.rank() != 2) throw ShapeError("take_rows", "expected rank 2, got " + shape_to_string(x.shape()));
  const Index n = x.dim(0), cols = x.dim(1);
  for (Index r : rows)
    if (r < 0 || r >= n) throw ShapeError("take_rows", "row index " + std::to_string(r) + " out of range");
  std::vector<double> out(rows.size() * static_cast<std::size_t>(cols));
  const auto xv = x.values();
  for (std::size_t k = 0; k < rows.size(); ++k)
    std::copy_n(xv.data() + rows[k] * cols, cols, out.data() + static_cast<Index>(k) * cols);
  Tensor result = make_out({static_cast<Index>(rows.size()), cols}, std::move(out), grad_needed(x));
  if (result.requires_grad()) {
    DataPtr xd = x.data_handle(), od = result.data_handle();
    auto rws = std::make_shared<std::vector<Index>>(rows);
    current_tape()->record([xd, od, rws, cols]() {
      if (!od->grad) return;
      const auto& go = *od->grad;
      std::vector<double> gx(xd->values.size(), 0.0);
      for (std::size_t k = 0; k < rws->size(); ++k)
        for (Index c = 0; c < cols; ++c)
          gx[static_cast<std::size_t>((*rws)[k] * cols + c)] += go[k * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
      detail::accumulate_grad(*xd, gx);
    });
  }
  return result;
}

Tensor stop_gradient(const Tensor& x) { return x.detached(); }

}  // namespace mummi::diff
