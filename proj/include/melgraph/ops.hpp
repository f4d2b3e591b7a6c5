#pragma once

// Autodiff primitives. Every op computes its result eagerly; when an operand
// is attached to a Tape, the op records one backward closure that accumulates
// d(loss)/d(input) from d(loss)/d(output). Gradients only flow into tensors
// whose grad_tracked flag is set, so plain data inputs cost nothing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "melgraph/tensor.hpp"
#include "melgraph/threading.hpp"

namespace melgraph {

namespace detail {

template <typename S>
Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> arr(std::vector<S>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}
template <typename S>
Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> arr(const std::vector<S>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

inline void check(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check(a.shape() == b.shape(), "add: shape mismatch");
  Tensor<S> out(a.shape());
  detail::arr(out.values()) = detail::arr(a.values()) + detail::arr(b.values());
  if (Tape<S>* tp = Tape<S>::joint({&a, &b})) {
    tp->attach(out);
    tp->push([a, b, out]() mutable {
      if (a.grad_tracked()) detail::arr(a.grad()) += detail::arr(out.grad());
      if (b.grad_tracked()) detail::arr(b.grad()) += detail::arr(out.grad());
    });
  }
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check(a.shape() == b.shape(), "mul: shape mismatch");
  Tensor<S> out(a.shape());
  detail::arr(out.values()) = detail::arr(a.values()) * detail::arr(b.values());
  if (Tape<S>* tp = Tape<S>::joint({&a, &b})) {
    tp->attach(out);
    tp->push([a, b, out]() mutable {
      if (a.grad_tracked())
        detail::arr(a.grad()) += detail::arr(out.grad()) * detail::arr(b.values());
      if (b.grad_tracked())
        detail::arr(b.grad()) += detail::arr(out.grad()) * detail::arr(a.values());
    });
  }
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  Tensor<S> out(a.shape());
  detail::arr(out.values()) = detail::arr(a.values()) * c;
  if (Tape<S>* tp = Tape<S>::joint({&a})) {
    tp->attach(out);
    tp->push([a, out, c]() mutable {
      if (a.grad_tracked()) detail::arr(a.grad()) += detail::arr(out.grad()) * c;
    });
  }
  return out;
}

// out = x + b broadcast over all leading axes; b.shape must equal the
// trailing dims of x. Covers bias-add and the 2-d positional embedding.
template <typename S>
Tensor<S> add_broadcast(const Tensor<S>& x, const Tensor<S>& b) {
  detail::check(b.ndim() <= x.ndim(), "add_broadcast: rank mismatch");
  std::int64_t inner = b.numel();
  std::int64_t off = x.ndim() - b.ndim();
  for (std::int64_t i = 0; i < b.ndim(); ++i)
    detail::check(x.dim(off + i) == b.dim(i), "add_broadcast: trailing dims mismatch");
  std::int64_t outer = x.numel() / inner;
  Tensor<S> out(x.shape());
  const S* xp = x.data();
  const S* bp = b.data();
  S* op = out.data();
  for (std::int64_t r = 0; r < outer; ++r)
    for (std::int64_t i = 0; i < inner; ++i) op[r * inner + i] = xp[r * inner + i] + bp[i];
  if (Tape<S>* tp = Tape<S>::joint({&x, &b})) {
    tp->attach(out);
    tp->push([x, b, out, outer, inner]() mutable {
      const S* g = out.grad().data();
      if (x.grad_tracked()) detail::arr(x.grad()) += detail::arr(out.grad());
      if (b.grad_tracked()) {
        S* gb = b.grad().data();
        for (std::int64_t r = 0; r < outer; ++r)
          for (std::int64_t i = 0; i < inner; ++i) gb[i] += g[r * inner + i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops (all produce contiguous copies)

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
  detail::check(shape_numel(new_shape) == x.numel(), "reshape: element count mismatch");
  Tensor<S> out = Tensor<S>::from_values(std::move(new_shape), x.values());
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out]() mutable {
      if (x.grad_tracked()) detail::arr(x.grad()) += detail::arr(out.grad());
    });
  }
  return out;
}

template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<int>& axes) {
  std::int64_t nd = x.ndim();
  detail::check(static_cast<std::int64_t>(axes.size()) == nd, "permute: axes rank mismatch");
  std::vector<bool> seen(axes.size(), false);
  Shape out_shape(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    detail::check(axes[i] >= 0 && axes[i] < nd && !seen[axes[i]], "permute: invalid axes");
    seen[axes[i]] = true;
    out_shape[i] = x.dim(axes[i]);
  }
  std::vector<std::int64_t> in_strides(nd, 1), out_strides(nd, 1), out_to_in(nd);
  for (std::int64_t i = nd - 2; i >= 0; --i) {
    in_strides[i] = in_strides[i + 1] * x.dim(i + 1);
    out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
  }
  for (std::int64_t i = 0; i < nd; ++i) out_to_in[i] = in_strides[axes[i]];

  Tensor<S> out(out_shape);
  std::int64_t n = x.numel();
  const S* xp = x.data();
  S* op = out.data();
  // flat index map: shared by forward copy and the backward scatter
  auto map_index = [out_strides, out_to_in, nd](std::int64_t flat) {
    std::int64_t src = 0, rem = flat;
    for (std::int64_t i = 0; i < nd; ++i) {
      std::int64_t q = rem / out_strides[i];
      rem -= q * out_strides[i];
      src += q * out_to_in[i];
    }
    return src;
  };
  for (std::int64_t i = 0; i < n; ++i) op[i] = xp[map_index(i)];
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out, map_index, n]() mutable {
      if (!x.grad_tracked()) return;
      S* gx = x.grad().data();
      const S* g = out.grad().data();
      for (std::int64_t i = 0; i < n; ++i) gx[map_index(i)] += g[i];
    });
  }
  return out;
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis) {
  detail::check(!parts.empty(), "concat: empty input");
  std::int64_t nd = parts[0].ndim();
  detail::check(axis >= 0 && axis < nd, "concat: axis out of range");
  Shape out_shape = parts[0].shape();
  std::int64_t axis_total = 0;
  for (const auto& p : parts) {
    detail::check(p.ndim() == nd, "concat: rank mismatch");
    for (std::int64_t i = 0; i < nd; ++i)
      detail::check(i == axis || p.dim(i) == out_shape[i], "concat: dim mismatch");
    axis_total += p.dim(axis);
  }
  out_shape[axis] = axis_total;
  std::int64_t inner = 1, outer = 1;
  for (std::int64_t i = axis + 1; i < nd; ++i) inner *= out_shape[i];
  for (std::int64_t i = 0; i < axis; ++i) outer *= out_shape[i];

  Tensor<S> out(out_shape);
  S* op = out.data();
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    std::int64_t len = p.dim(axis);
    const S* pp = p.data();
    for (std::int64_t r = 0; r < outer; ++r)
      std::copy(pp + r * len * inner, pp + (r + 1) * len * inner,
                op + (r * axis_total + offset) * inner);
    offset += len;
  }
  std::vector<const Tensor<S>*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  Tape<S>* tp = nullptr;
  for (const auto& p : parts) {
    Tape<S>* t = Tape<S>::joint({&p});
    if (t && tp && t != tp) throw std::runtime_error("concat: operands on different tapes");
    if (t) tp = t;
  }
  if (tp) {
    tp->attach(out);
    auto parts_copy = parts;
    tp->push([parts_copy, out, outer, inner, axis_total, axis]() mutable {
      const S* g = out.grad().data();
      std::int64_t offset = 0;
      for (auto& p : parts_copy) {
        std::int64_t len = p.dim(axis);
        if (p.grad_tracked()) {
          S* gp = p.grad().data();
          for (std::int64_t r = 0; r < outer; ++r) {
            const S* src = g + (r * axis_total + offset) * inner;
            S* dst = gp + r * len * inner;
            for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
          }
        }
        offset += len;
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> slice(const Tensor<S>& x, int axis, std::int64_t start, std::int64_t len) {
  std::int64_t nd = x.ndim();
  detail::check(axis >= 0 && axis < nd, "slice: axis out of range");
  detail::check(start >= 0 && len >= 0 && start + len <= x.dim(axis), "slice: range out of bounds");
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  std::int64_t inner = 1, outer = 1;
  for (std::int64_t i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  for (std::int64_t i = 0; i < axis; ++i) outer *= x.dim(i);
  std::int64_t axis_dim = x.dim(axis);

  Tensor<S> out(out_shape);
  const S* xp = x.data();
  S* op = out.data();
  for (std::int64_t r = 0; r < outer; ++r)
    std::copy(xp + (r * axis_dim + start) * inner, xp + (r * axis_dim + start + len) * inner,
              op + r * len * inner);
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out, outer, inner, axis_dim, start, len]() mutable {
      if (!x.grad_tracked()) return;
      S* gx = x.grad().data();
      const S* g = out.grad().data();
      for (std::int64_t r = 0; r < outer; ++r) {
        S* dst = gx + (r * axis_dim + start) * inner;
        const S* src = g + r * len * inner;
        for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix multiplication: [m,k]x[k,n], [B,m,k]x[k,n], [B,m,k]x[B,k,n]

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  const bool a3 = a.ndim() == 3, b3 = b.ndim() == 3;
  detail::check((a.ndim() == 2 || a3) && (b.ndim() == 2 || b3), "matmul: rank must be 2 or 3");
  detail::check(!(a.ndim() == 2 && b3), "matmul: 2-d by 3-d not supported");

  if (!a3 && !b3) {
    detail::check(a.dim(1) == b.dim(0), "matmul: inner dim mismatch");
    std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<S> out({m, n});
    out.as_matrix(m, n).noalias() = a.as_matrix(m, k) * b.as_matrix(k, n);
    if (Tape<S>* tp = Tape<S>::joint({&a, &b})) {
      tp->attach(out);
      tp->push([a, b, out, m, k, n]() mutable {
        Eigen::Map<const RowMat<S>> g(out.grad().data(), m, n);
        if (a.grad_tracked())
          Eigen::Map<RowMat<S>>(a.grad().data(), m, k).noalias() +=
              g * b.as_matrix(k, n).transpose();
        if (b.grad_tracked())
          Eigen::Map<RowMat<S>>(b.grad().data(), k, n).noalias() +=
              a.as_matrix(m, k).transpose() * g;
      });
    }
    return out;
  }

  if (a3 && !b3) {
    detail::check(a.dim(2) == b.dim(0), "matmul: inner dim mismatch");
    std::int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
    Tensor<S> out({bs, m, n});
    out.as_matrix(bs * m, n).noalias() = a.as_matrix(bs * m, k) * b.as_matrix(k, n);
    if (Tape<S>* tp = Tape<S>::joint({&a, &b})) {
      tp->attach(out);
      tp->push([a, b, out, bs, m, k, n]() mutable {
        Eigen::Map<const RowMat<S>> g(out.grad().data(), bs * m, n);
        if (a.grad_tracked())
          Eigen::Map<RowMat<S>>(a.grad().data(), bs * m, k).noalias() +=
              g * b.as_matrix(k, n).transpose();
        if (b.grad_tracked())
          Eigen::Map<RowMat<S>>(b.grad().data(), k, n).noalias() +=
              a.as_matrix(bs * m, k).transpose() * g;
      });
    }
    return out;
  }

  detail::check(a.dim(0) == b.dim(0), "matmul: batch dim mismatch");
  detail::check(a.dim(2) == b.dim(1), "matmul: inner dim mismatch");
  std::int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Tensor<S> out({bs, m, n});
  {
    const S* ap = a.data();
    const S* bp = b.data();
    S* op = out.data();
    parallel_for(bs, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i) {
        Eigen::Map<const RowMat<S>> ai(ap + i * m * k, m, k);
        Eigen::Map<const RowMat<S>> bi(bp + i * k * n, k, n);
        Eigen::Map<RowMat<S>>(op + i * m * n, m, n).noalias() = ai * bi;
      }
    });
  }
  if (Tape<S>* tp = Tape<S>::joint({&a, &b})) {
    tp->attach(out);
    tp->push([a, b, out, bs, m, k, n]() mutable {
      bool need_a = a.grad_tracked(), need_b = b.grad_tracked();
      if (!need_a && !need_b) return;
      S* ga = need_a ? a.grad().data() : nullptr;
      S* gb = need_b ? b.grad().data() : nullptr;
      const S* g = out.grad().data();
      const S* ap = a.data();
      const S* bp = b.data();
      parallel_for(bs, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
          Eigen::Map<const RowMat<S>> gi(g + i * m * n, m, n);
          if (need_a)
            Eigen::Map<RowMat<S>>(ga + i * m * k, m, k).noalias() +=
                gi * Eigen::Map<const RowMat<S>>(bp + i * k * n, k, n).transpose();
          if (need_b)
            Eigen::Map<RowMat<S>>(gb + i * k * n, k, n).noalias() +=
                Eigen::Map<const RowMat<S>>(ap + i * m * k, m, k).transpose() * gi;
        }
      });
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Activations

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> out(x.shape());
  detail::arr(out.values()) = detail::arr(x.values()).max(S(0));
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out]() mutable {
      if (!x.grad_tracked()) return;
      // subgradient 0 at x == 0
      detail::arr(x.grad()) +=
          detail::arr(out.grad()) * (detail::arr(x.values()) > S(0)).template cast<S>();
    });
  }
  return out;
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  // tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715 x^3)))
  const S c = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
  const S k = static_cast<S>(0.044715);
  Tensor<S> out(x.shape());
  {
    auto xv = detail::arr(x.values());
    auto t = (c * (xv + k * xv.cube())).tanh();
    detail::arr(out.values()) = S(0.5) * xv * (S(1) + t);
  }
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out, c, k]() mutable {
      if (!x.grad_tracked()) return;
      auto xv = detail::arr(x.values());
      auto t = (c * (xv + k * xv.cube())).tanh();
      auto dudx = c * (S(1) + S(3) * k * xv.square());
      detail::arr(x.grad()) += detail::arr(out.grad()) *
                               (S(0.5) * (S(1) + t) + S(0.5) * xv * (S(1) - t.square()) * dudx);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Softmax over the last axis, and general-axis wrapper

template <typename S>
Tensor<S> softmax_lastdim(const Tensor<S>& x) {
  std::int64_t d = x.dim(x.ndim() - 1);
  std::int64_t rows = x.numel() / d;
  Tensor<S> out(x.shape());
  const S* xp = x.data();
  S* op = out.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S* row = xp + r * d;
    S* orow = op + r * d;
    S mx = row[0];
    for (std::int64_t i = 1; i < d; ++i) mx = std::max(mx, row[i]);
    S sum = S(0);
    for (std::int64_t i = 0; i < d; ++i) {
      orow[i] = std::exp(row[i] - mx);
      sum += orow[i];
    }
    for (std::int64_t i = 0; i < d; ++i) orow[i] /= sum;
  }
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out, rows, d]() mutable {
      if (!x.grad_tracked()) return;
      S* gx = x.grad().data();
      const S* g = out.grad().data();
      const S* y = out.data();
      for (std::int64_t r = 0; r < rows; ++r) {
        S dot = S(0);
        for (std::int64_t i = 0; i < d; ++i) dot += g[r * d + i] * y[r * d + i];
        for (std::int64_t i = 0; i < d; ++i)
          gx[r * d + i] += y[r * d + i] * (g[r * d + i] - dot);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
  std::int64_t nd = x.ndim();
  if (axis < 0) axis += static_cast<int>(nd);
  detail::check(axis >= 0 && axis < nd, "softmax: axis out of range");
  if (axis == nd - 1) return softmax_lastdim(x);
  std::vector<int> fwd(static_cast<std::size_t>(nd));
  for (std::int64_t i = 0; i < nd; ++i) fwd[i] = static_cast<int>(i);
  std::swap(fwd[axis], fwd[nd - 1]);
  return permute(softmax_lastdim(permute(x, fwd)), fwd);
}

// ---------------------------------------------------------------------------
// conv2d: x [B,C,H,W], w [F,C,kh,kw], bias [F] (undefined tensor = no bias)

template <typename S>
inline void im2col(const S* img, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t kh,
                   std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
                   std::int64_t Wo, S* col) {
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t i = 0; i < kh; ++i)
      for (std::int64_t j = 0; j < kw; ++j) {
        S* dst = col + ((c * kh + i) * kw + j) * Ho * Wo;
        for (std::int64_t ho = 0; ho < Ho; ++ho) {
          std::int64_t h = ho * stride - pad + i;
          if (h < 0 || h >= H) {
            std::fill(dst + ho * Wo, dst + (ho + 1) * Wo, S(0));
            continue;
          }
          const S* src = img + (c * H + h) * W;
          for (std::int64_t wo = 0; wo < Wo; ++wo) {
            std::int64_t wx = wo * stride - pad + j;
            dst[ho * Wo + wo] = (wx >= 0 && wx < W) ? src[wx] : S(0);
          }
        }
      }
}

template <typename S>
inline void col2im(const S* col, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t kh,
                   std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
                   std::int64_t Wo, S* img) {
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t i = 0; i < kh; ++i)
      for (std::int64_t j = 0; j < kw; ++j) {
        const S* src = col + ((c * kh + i) * kw + j) * Ho * Wo;
        for (std::int64_t ho = 0; ho < Ho; ++ho) {
          std::int64_t h = ho * stride - pad + i;
          if (h < 0 || h >= H) continue;
          S* dst = img + (c * H + h) * W;
          for (std::int64_t wo = 0; wo < Wo; ++wo) {
            std::int64_t wx = wo * stride - pad + j;
            if (wx >= 0 && wx < W) dst[wx] += src[ho * Wo + wo];
          }
        }
      }
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                 std::int64_t stride, std::int64_t pad = 1) {
  detail::check(x.ndim() == 4, "conv2d: input must be [B,C,H,W]");
  detail::check(w.ndim() == 4, "conv2d: weight must be [F,C,kh,kw]");
  detail::check(stride >= 1, "conv2d: stride must be >= 1");
  std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  std::int64_t F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  detail::check(w.dim(1) == C, "conv2d: channel mismatch");
  if (bias.defined()) detail::check(bias.numel() == F, "conv2d: bias size mismatch");
  std::int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  std::int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  detail::check(Ho >= 1 && Wo >= 1, "conv2d: kernel larger than padded input");

  std::int64_t K = C * kh * kw;
  Tensor<S> out({B, F, Ho, Wo});
  Tape<S>* tp = Tape<S>::joint({&x, &w, &bias});

  // per-image patch matrices, kept for the backward pass when taping
  auto cols = std::make_shared<std::vector<RowMat<S>>>(static_cast<std::size_t>(B));
  {
    const S* xp = x.data();
    S* op = out.data();
    Eigen::Map<const RowMat<S>> wm(w.data(), F, K);
    parallel_for(B, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t b = lo; b < hi; ++b) {
        RowMat<S> col(K, Ho * Wo);
        im2col(xp + b * C * H * W, C, H, W, kh, kw, stride, pad, Ho, Wo, col.data());
        Eigen::Map<RowMat<S>> ob(op + b * F * Ho * Wo, F, Ho * Wo);
        ob.noalias() = wm * col;
        if (tp) (*cols)[static_cast<std::size_t>(b)] = std::move(col);
      }
    });
    if (bias.defined()) {
      const S* bp = bias.data();
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t f = 0; f < F; ++f) {
          S* dst = op + (b * F + f) * Ho * Wo;
          for (std::int64_t i = 0; i < Ho * Wo; ++i) dst[i] += bp[f];
        }
    }
  }

  if (tp) {
    tp->attach(out);
    tp->push([x, w, bias, out, cols, B, C, H, W, F, K, kh, kw, stride, pad, Ho, Wo]() mutable {
      const S* g = out.grad().data();
      if (x.grad_tracked()) {
        S* gx = x.grad().data();
        Eigen::Map<const RowMat<S>> wm(w.data(), F, K);
        parallel_for(B, [&](std::int64_t lo, std::int64_t hi) {
          for (std::int64_t b = lo; b < hi; ++b) {
            Eigen::Map<const RowMat<S>> gb(g + b * F * Ho * Wo, F, Ho * Wo);
            RowMat<S> gcol = wm.transpose() * gb;
            col2im(gcol.data(), C, H, W, kh, kw, stride, pad, Ho, Wo, gx + b * C * H * W);
          }
        });
      }
      if (w.grad_tracked()) {
        Eigen::Map<RowMat<S>> gw(w.grad().data(), F, K);
        for (std::int64_t b = 0; b < B; ++b) {
          Eigen::Map<const RowMat<S>> gb(g + b * F * Ho * Wo, F, Ho * Wo);
          gw.noalias() += gb * (*cols)[static_cast<std::size_t>(b)].transpose();
        }
      }
      if (bias.defined() && bias.grad_tracked()) {
        S* gbias = bias.grad().data();
        for (std::int64_t b = 0; b < B; ++b)
          for (std::int64_t f = 0; f < F; ++f) {
            const S* src = g + (b * F + f) * Ho * Wo;
            S acc = S(0);
            for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += src[i];
            gbias[f] += acc;
          }
      }
      cols->clear();
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization layers

enum class NormMode { kTrain, kEval };

// Batch normalization over (B,H,W) per channel of a [B,C,H,W] input.
// Training mode normalizes with batch statistics and updates the running
// buffers in place (unbiased variance, like the usual convention); eval mode
// is a deterministic affine map using the running buffers.
template <typename S>
Tensor<S> batchnorm2d(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                      Tensor<S>& running_mean, Tensor<S>& running_var, NormMode mode,
                      S momentum = S(0.1), S eps = S(1e-5)) {
  detail::check(x.ndim() == 4, "batchnorm2d: input must be [B,C,H,W]");
  std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  detail::check(gamma.numel() == C && beta.numel() == C, "batchnorm2d: affine size mismatch");
  detail::check(running_mean.numel() == C && running_var.numel() == C,
                "batchnorm2d: running buffer size mismatch");
  std::int64_t plane = H * W;
  std::int64_t n = B * plane;

  std::vector<S> mean(C), ivar(C);
  if (mode == NormMode::kTrain) {
    for (std::int64_t c = 0; c < C; ++c) {
      S m = S(0);
      for (std::int64_t b = 0; b < B; ++b) {
        const S* p = x.data() + (b * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) m += p[i];
      }
      m /= static_cast<S>(n);
      S v = S(0);
      for (std::int64_t b = 0; b < B; ++b) {
        const S* p = x.data() + (b * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
      }
      v /= static_cast<S>(n);
      mean[c] = m;
      ivar[c] = S(1) / std::sqrt(v + eps);
      S unbiased = n > 1 ? v * static_cast<S>(n) / static_cast<S>(n - 1) : v;
      running_mean.data()[c] = (S(1) - momentum) * running_mean.data()[c] + momentum * m;
      running_var.data()[c] = (S(1) - momentum) * running_var.data()[c] + momentum * unbiased;
    }
  } else {
    for (std::int64_t c = 0; c < C; ++c) {
      mean[c] = running_mean.data()[c];
      ivar[c] = S(1) / std::sqrt(running_var.data()[c] + eps);
    }
  }

  Tensor<S> out(x.shape());
  {
    const S* xp = x.data();
    S* op = out.data();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < C; ++c) {
        const S g = gamma.data()[c], bt = beta.data()[c], m = mean[c], iv = ivar[c];
        const S* src = xp + (b * C + c) * plane;
        S* dst = op + (b * C + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - m) * iv + bt;
      }
  }

  if (Tape<S>* tp = Tape<S>::joint({&x, &gamma, &beta})) {
    tp->attach(out);
    bool train = mode == NormMode::kTrain;
    auto stats = std::make_shared<std::pair<std::vector<S>, std::vector<S>>>(mean, ivar);
    tp->push([x, gamma, beta, out, stats, train, B, C, plane, n]() mutable {
      const S* g = out.grad().data();
      const S* xp = x.data();
      const auto& mean = stats->first;
      const auto& ivar = stats->second;
      for (std::int64_t c = 0; c < C; ++c) {
        const S m = mean[c], iv = ivar[c], gm = gamma.data()[c];
        S sum_g = S(0), sum_gx = S(0);
        for (std::int64_t b = 0; b < B; ++b) {
          const S* gs = g + (b * C + c) * plane;
          const S* xs = xp + (b * C + c) * plane;
          for (std::int64_t i = 0; i < plane; ++i) {
            sum_g += gs[i];
            sum_gx += gs[i] * (xs[i] - m) * iv;
          }
        }
        if (gamma.grad_tracked()) gamma.grad()[c] += sum_gx;
        if (beta.grad_tracked()) beta.grad()[c] += sum_g;
        if (x.grad_tracked()) {
          S* gx = x.grad().data();
          for (std::int64_t b = 0; b < B; ++b) {
            const S* gs = g + (b * C + c) * plane;
            const S* xs = xp + (b * C + c) * plane;
            S* gd = gx + (b * C + c) * plane;
            if (train) {
              const S inv_n = S(1) / static_cast<S>(n);
              for (std::int64_t i = 0; i < plane; ++i) {
                S xhat = (xs[i] - m) * iv;
                gd[i] += gm * iv * (gs[i] - inv_n * sum_g - xhat * inv_n * sum_gx);
              }
            } else {
              for (std::int64_t i = 0; i < plane; ++i) gd[i] += gm * iv * gs[i];
            }
          }
        }
      }
    });
  }
  return out;
}

// Layer normalization over the last axis.
template <typename S>
Tensor<S> layernorm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                    S eps = S(1e-6)) {
  std::int64_t d = x.dim(x.ndim() - 1);
  detail::check(gamma.numel() == d && beta.numel() == d, "layernorm: affine size mismatch");
  std::int64_t rows = x.numel() / d;
  Tensor<S> out(x.shape());
  auto ivars = std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows));
  auto means = std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows));
  {
    const S* xp = x.data();
    S* op = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const S* row = xp + r * d;
      S m = S(0);
      for (std::int64_t i = 0; i < d; ++i) m += row[i];
      m /= static_cast<S>(d);
      S v = S(0);
      for (std::int64_t i = 0; i < d; ++i) v += (row[i] - m) * (row[i] - m);
      v /= static_cast<S>(d);
      S iv = S(1) / std::sqrt(v + eps);
      (*means)[static_cast<std::size_t>(r)] = m;
      (*ivars)[static_cast<std::size_t>(r)] = iv;
      S* orow = op + r * d;
      for (std::int64_t i = 0; i < d; ++i)
        orow[i] = gamma.data()[i] * (row[i] - m) * iv + beta.data()[i];
    }
  }
  if (Tape<S>* tp = Tape<S>::joint({&x, &gamma, &beta})) {
    tp->attach(out);
    tp->push([x, gamma, beta, out, means, ivars, rows, d]() mutable {
      const S* g = out.grad().data();
      const S* xp = x.data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const S m = (*means)[static_cast<std::size_t>(r)];
        const S iv = (*ivars)[static_cast<std::size_t>(r)];
        const S* gs = g + r * d;
        const S* xs = xp + r * d;
        S sum_dxhat = S(0), sum_dxhat_xhat = S(0);
        for (std::int64_t i = 0; i < d; ++i) {
          S xhat = (xs[i] - m) * iv;
          S dxhat = gs[i] * gamma.data()[i];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          if (gamma.grad_tracked()) gamma.grad()[i] += gs[i] * xhat;
          if (beta.grad_tracked()) beta.grad()[i] += gs[i];
        }
        if (x.grad_tracked()) {
          S* gx = x.grad().data() + r * d;
          const S inv_d = S(1) / static_cast<S>(d);
          for (std::int64_t i = 0; i < d; ++i) {
            S xhat = (xs[i] - m) * iv;
            S dxhat = gs[i] * gamma.data()[i];
            gx[i] += iv * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph aggregation: out[.., i, d] = max_j(x[.., nbr(i,j), d] - x[.., i, d])

struct NeighborLists {
  std::int64_t batch = 1;  // 1 for an unbatched [N,K] list
  std::int64_t nodes = 0;
  std::int64_t k = 0;
  std::vector<std::int32_t> idx;  // [batch][nodes][k]

  std::int32_t at(std::int64_t b, std::int64_t i, std::int64_t j) const {
    return idx[static_cast<std::size_t>((b * nodes + i) * k + j)];
  }
};

template <typename S>
Tensor<S> neighbor_max_diff(const Tensor<S>& x, const NeighborLists& nb) {
  detail::check(x.ndim() == 2 || x.ndim() == 3, "neighbor_max_diff: input must be [N,D] or [B,N,D]");
  std::int64_t B = x.ndim() == 3 ? x.dim(0) : 1;
  std::int64_t N = x.dim(x.ndim() - 2), D = x.dim(x.ndim() - 1);
  detail::check(nb.batch == B && nb.nodes == N && nb.k >= 1, "neighbor_max_diff: neighbor list mismatch");
  Tensor<S> out(x.shape());
  // winning neighbor per output cell, for the backward subgradient
  auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(B * N * D));
  {
    const S* xp = x.data();
    S* op = out.data();
    std::int32_t* am = argmax->data();
    parallel_for(B * N, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t bi = lo; bi < hi; ++bi) {
        std::int64_t b = bi / N, i = bi % N;
        const S* xi = xp + (b * N + i) * D;
        S* orow = op + (b * N + i) * D;
        std::int32_t* arow = am + (b * N + i) * D;
        for (std::int64_t d = 0; d < D; ++d) {
          S best = -std::numeric_limits<S>::infinity();
          std::int32_t best_j = -1;
          for (std::int64_t j = 0; j < nb.k; ++j) {
            std::int32_t nj = nb.at(b, i, j);
            S v = xp[(b * N + nj) * D + d] - xi[d];
            if (v > best) {  // first index wins ties
              best = v;
              best_j = nj;
            }
          }
          orow[d] = best;
          arow[d] = best_j;
        }
      }
    });
  }
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out, argmax, B, N, D]() mutable {
      if (!x.grad_tracked()) return;
      S* gx = x.grad().data();
      const S* g = out.grad().data();
      const std::int32_t* am = argmax->data();
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t i = 0; i < N; ++i)
          for (std::int64_t d = 0; d < D; ++d) {
            std::int64_t o = (b * N + i) * D + d;
            gx[(b * N + am[o]) * D + d] += g[o];
            gx[o] -= g[o];
          }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooling, loss, reductions

template <typename S>
Tensor<S> adaptive_avg_pool(const Tensor<S>& x) {
  detail::check(x.ndim() == 4, "adaptive_avg_pool: input must be [B,C,H,W]");
  std::int64_t B = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out({B, C, 1, 1});
  const S* xp = x.data();
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    S acc = S(0);
    for (std::int64_t i = 0; i < plane; ++i) acc += xp[bc * plane + i];
    out.data()[bc] = acc / static_cast<S>(plane);
  }
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out, B, C, plane]() mutable {
      if (!x.grad_tracked()) return;
      S* gx = x.grad().data();
      const S* g = out.grad().data();
      for (std::int64_t bc = 0; bc < B * C; ++bc) {
        S v = g[bc] / static_cast<S>(plane);
        for (std::int64_t i = 0; i < plane; ++i) gx[bc * plane + i] += v;
      }
    });
  }
  return out;
}

// Mean cross-entropy over the batch, with a fused log-softmax.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& labels) {
  detail::check(logits.ndim() == 2, "cross_entropy: logits must be [B,C]");
  std::int64_t B = logits.dim(0), C = logits.dim(1);
  detail::check(static_cast<std::int64_t>(labels.size()) == B, "cross_entropy: label count mismatch");
  for (int y : labels) detail::check(y >= 0 && y < C, "cross_entropy: label out of range");
  S total = S(0);
  const S* lp = logits.data();
  for (std::int64_t b = 0; b < B; ++b) {
    const S* row = lp + b * C;
    S mx = row[0];
    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    S sum = S(0);
    for (std::int64_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
    total += mx + std::log(sum) - row[labels[static_cast<std::size_t>(b)]];
  }
  Tensor<S> out = Tensor<S>::scalar(total / static_cast<S>(B));
  if (Tape<S>* tp = Tape<S>::joint({&logits})) {
    tp->attach(out);
    tp->push([logits, out, labels, B, C]() mutable {
      if (!logits.grad_tracked()) return;
      const S g = out.grad()[0] / static_cast<S>(B);
      const S* lp = logits.data();
      S* gl = logits.grad().data();
      for (std::int64_t b = 0; b < B; ++b) {
        const S* row = lp + b * C;
        S mx = row[0];
        for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        S sum = S(0);
        for (std::int64_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
        for (std::int64_t c = 0; c < C; ++c) {
          S p = std::exp(row[c] - mx) / sum;
          gl[b * C + c] += g * (p - (c == labels[static_cast<std::size_t>(b)] ? S(1) : S(0)));
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> reduce_sum(const Tensor<S>& x) {
  S total = S(0);
  for (std::int64_t i = 0; i < x.numel(); ++i) total += x.data()[i];
  Tensor<S> out = Tensor<S>::scalar(total);
  if (Tape<S>* tp = Tape<S>::joint({&x})) {
    tp->attach(out);
    tp->push([x, out]() mutable {
      if (!x.grad_tracked()) return;
      detail::arr(x.grad()) += out.grad()[0];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification

// Compares the tape gradient of a scalar-valued function against central
// differences; returns the max over coordinates of |a-n|/max(1e-8, |a|+|n|).
template <typename S>
double grad_check(const std::function<Tensor<S>(const Tensor<S>&)>& f, Tensor<S> x,
                  S eps = S(1e-5)) {
  std::vector<S> analytic(static_cast<std::size_t>(x.numel()));
  {
    Tape<S> tape;
    tape.watch(x);
    Tensor<S> y = f(x);
    if (y.numel() != 1) throw std::invalid_argument("grad_check: f must be scalar-valued");
    if (!std::isfinite(static_cast<double>(y.data()[0])))
      throw std::runtime_error("grad_check: non-finite function value");
    x.zero_grad();
    tape.backward(y);
    analytic = x.grad();
  }
  double max_err = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    S saved = x.data()[i];
    x.data()[i] = saved + eps;
    S up = f(x).data()[0];
    x.data()[i] = saved - eps;
    S down = f(x).data()[0];
    x.data()[i] = saved;
    if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down)))
      throw std::runtime_error("grad_check: non-finite function value");
    double numeric = static_cast<double>(up - down) / (2.0 * static_cast<double>(eps));
    double a = static_cast<double>(analytic[static_cast<std::size_t>(i)]);
    double err = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace melgraph
