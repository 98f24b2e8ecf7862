#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dewarp/kernels/api.hpp"
#include "dewarp/kernels/ref.hpp"
#include "dewarp/tensor.hpp"

// Differentiable ops over TensorT. float32 routes the hot kernels through
// the runtime-dispatched backend; every other element type (double for
// gradient checking) runs the scalar reference directly.
namespace dewarp::ops {

enum class Activation { relu, sigmoid, tanh, none };

namespace detail {

template <typename T>
struct Backend {
  static void conv2d_fwd(const T* in, const T* w, const T* b, T* out,
                         const kernels::ConvDims& d) {
    kernels::ref::conv2d_fwd(in, w, b, out, d);
  }
  static void conv2d_bwd_input(const T* g, const T* w, T* gi, const kernels::ConvDims& d) {
    kernels::ref::conv2d_bwd_input(g, w, gi, d);
  }
  static void conv2d_bwd_weights(const T* in, const T* g, T* gw, T* gb,
                                 const kernels::ConvDims& d) {
    kernels::ref::conv2d_bwd_weights(in, g, gw, gb, d);
  }
  static void add(const T* a, const T* b, T* out, std::size_t n) {
    kernels::ref::add(a, b, out, n);
  }
  static void mul(const T* a, const T* b, T* out, std::size_t n) {
    kernels::ref::mul(a, b, out, n);
  }
  static void axpy(T alpha, const T* x, T* y, std::size_t n) {
    kernels::ref::axpy(alpha, x, y, n);
  }
  static void relu_fwd(const T* x, T* out, std::size_t n) { kernels::ref::relu_fwd(x, out, n); }
  static void relu_bwd(const T* x, const T* g, T* gi, std::size_t n) {
    kernels::ref::relu_bwd(x, g, gi, n);
  }
};

template <>
struct Backend<float> {
  static void conv2d_fwd(const float* in, const float* w, const float* b, float* out,
                         const kernels::ConvDims& d) {
    kernels::active().conv2d_fwd(in, w, b, out, d);
  }
  static void conv2d_bwd_input(const float* g, const float* w, float* gi,
                               const kernels::ConvDims& d) {
    kernels::active().conv2d_bwd_input(g, w, gi, d);
  }
  static void conv2d_bwd_weights(const float* in, const float* g, float* gw, float* gb,
                                 const kernels::ConvDims& d) {
    kernels::active().conv2d_bwd_weights(in, g, gw, gb, d);
  }
  static void add(const float* a, const float* b, float* out, std::size_t n) {
    kernels::active().add(a, b, out, n);
  }
  static void mul(const float* a, const float* b, float* out, std::size_t n) {
    kernels::active().mul(a, b, out, n);
  }
  static void axpy(float alpha, const float* x, float* y, std::size_t n) {
    kernels::active().axpy(alpha, x, y, n);
  }
  static void relu_fwd(const float* x, float* out, std::size_t n) {
    kernels::active().relu_fwd(x, out, n);
  }
  static void relu_bwd(const float* x, const float* g, float* gi, std::size_t n) {
    kernels::active().relu_bwd(x, g, gi, n);
  }
};

template <typename T>
bool record(const std::vector<TensorT<T>>& inputs) {
  if (!grad_enabled()) return false;
  for (const auto& t : inputs)
    if (t.defined() && t.requires_grad()) return true;
  return false;
}

}  // namespace detail

template <typename T>
void check_finite(const TensorT<T>& t, const char* context) {
  if (!t.all_finite()) throw NumericError(std::string(context) + ": non-finite values");
}

// ---------------------------------------------------------------------------
// conv2d: weight (out_ch, in_ch, k, k), bias (1, out_ch, 1, 1) or undefined.
// ---------------------------------------------------------------------------
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>& bias,
                  int stride, int padding) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.h != ws.w) throw DimensionError("conv2d: kernel must be square, got " + ws.str());
  if (xs.c != ws.c)
    throw DimensionError("conv2d: input channels " + std::to_string(xs.c) +
                         " != weight in_ch " + std::to_string(ws.c));
  if (stride < 1) throw UsageError("conv2d: stride must be >= 1");
  if (padding < 0) throw UsageError("conv2d: padding must be >= 0");
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(ws.n))
    throw DimensionError("conv2d: bias length != out channels");
  if (!weight.all_finite()) throw NumericError("conv2d: non-finite weights");

  kernels::ConvDims d;
  d.n = xs.n;
  d.cin = xs.c;
  d.hin = xs.h;
  d.win = xs.w;
  d.cout = ws.n;
  d.k = ws.h;
  d.stride = stride;
  d.pad = padding;
  d.hout = (xs.h + 2 * padding - d.k) / stride + 1;
  d.wout = (xs.w + 2 * padding - d.k) / stride + 1;
  if (d.hout < 1 || d.wout < 1)
    throw DimensionError("conv2d: empty output for input " + xs.str());

  auto out = TensorT<T>::zeros(Shape(d.n, d.cout, d.hout, d.wout));
  detail::Backend<T>::conv2d_fwd(x.data(), weight.data(), bias.defined() ? bias.data() : nullptr,
                                 out.data(), d);

  if (detail::record<T>({x, weight, bias})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto wi = weight.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    auto& node = *out.impl();
    node.parents = {xi, wi};
    if (bi) node.parents.push_back(bi);
    node.backprop = [xi, wi, bi, d](TensorImpl<T>& self) {
      const T* g = self.grad.data();
      if (xi->requires_grad)
        detail::Backend<T>::conv2d_bwd_input(g, wi->data.data(), xi->grad_data(), d);
      if (wi->requires_grad || (bi && bi->requires_grad)) {
        T* gw = wi->requires_grad ? wi->grad_data() : nullptr;
        T* gb = (bi && bi->requires_grad) ? bi->grad_data() : nullptr;
        if (gw)
          detail::Backend<T>::conv2d_bwd_weights(xi->data.data(), g, gw, gb, d);
        else if (gb) {
          // bias-only path
          const std::size_t plane = static_cast<std::size_t>(d.hout) * d.wout;
          for (int n = 0; n < d.n; ++n)
            for (int oc = 0; oc < d.cout; ++oc) {
              const T* gp = g + (static_cast<std::size_t>(n) * d.cout + oc) * plane;
              T acc = 0;
              for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
              gb[oc] += acc;
            }
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// maxpool2x2, first-wins tie-break in row-major window order
// ---------------------------------------------------------------------------
template <typename T>
TensorT<T> maxpool2x2(const TensorT<T>& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0)
    throw DimensionError("maxpool2x2: spatial dims must be even, got " + s.str());
  const int oh = s.h / 2, ow = s.w / 2;
  auto out = TensorT<T>::zeros(Shape(s.n, s.c, oh, ow));

  auto argmax = std::make_shared<std::vector<std::int32_t>>(out.numel());
  const T* in = x.data();
  T* op = out.data();
  std::int32_t* am = argmax->data();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* ip = in + p * s.h * s.w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int iy = oy * 2, ix = ox * 2;
        std::int32_t best = iy * s.w + ix;
        T bv = ip[best];
        const std::int32_t cand[3] = {iy * s.w + ix + 1, (iy + 1) * s.w + ix,
                                      (iy + 1) * s.w + ix + 1};
        for (std::int32_t ci : cand)
          if (ip[ci] > bv) {
            bv = ip[ci];
            best = ci;
          }
        *op++ = bv;
        *am++ = best;
      }
    }
  }

  if (detail::record<T>({x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto& node = *out.impl();
    node.parents = {xi};
    const int h = s.h, w = s.w;
    node.backprop = [xi, argmax, h, w, oh, ow](TensorImpl<T>& self) {
      if (!xi->requires_grad) return;
      T* gi = xi->grad_data();
      const T* g = self.grad.data();
      const std::int32_t* am = argmax->data();
      const std::size_t planes = self.shape.numel() / (static_cast<std::size_t>(oh) * ow);
      const std::size_t oplane = static_cast<std::size_t>(oh) * ow;
      for (std::size_t p = 0; p < planes; ++p) {
        T* gip = gi + p * static_cast<std::size_t>(h) * w;
        const T* gp = g + p * oplane;
        const std::int32_t* ap = am + p * oplane;
        for (std::size_t i = 0; i < oplane; ++i) gip[ap[i]] += gp[i];
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// bilinear 2x upsampling, align-corners-false, border-replicated taps
// ---------------------------------------------------------------------------
namespace detail {

struct Up2xTap {
  int lo;     // lower source index (clamped)
  int hi;     // upper source index (clamped)
  double whi; // weight of the upper tap
};

inline std::vector<Up2xTap> up2x_taps(int src, int dst) {
  std::vector<Up2xTap> taps(dst);
  for (int o = 0; o < dst; ++o) {
    double sc = (o + 0.5) / 2.0 - 0.5;
    int lo = static_cast<int>(std::floor(sc));
    double t = sc - lo;
    int hi = lo + 1;
    taps[o].lo = std::clamp(lo, 0, src - 1);
    taps[o].hi = std::clamp(hi, 0, src - 1);
    taps[o].whi = t;
  }
  return taps;
}

}  // namespace detail

template <typename T>
TensorT<T> upsample_bilinear2x(const TensorT<T>& x) {
  const Shape& s = x.shape();
  const int oh = s.h * 2, ow = s.w * 2;
  auto out = TensorT<T>::zeros(Shape(s.n, s.c, oh, ow));

  const auto ty = detail::up2x_taps(s.h, oh);
  const auto tx = detail::up2x_taps(s.w, ow);
  const T* in = x.data();
  T* op = out.data();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* ip = in + p * s.h * s.w;
    T* o = op + p * static_cast<std::size_t>(oh) * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const T* r0 = ip + static_cast<std::size_t>(ty[oy].lo) * s.w;
      const T* r1 = ip + static_cast<std::size_t>(ty[oy].hi) * s.w;
      const T wy = static_cast<T>(ty[oy].whi);
      T* orow = o + static_cast<std::size_t>(oy) * ow;
      for (int ox = 0; ox < ow; ++ox) {
        const T wxv = static_cast<T>(tx[ox].whi);
        const T top = r0[tx[ox].lo] * (T(1) - wxv) + r0[tx[ox].hi] * wxv;
        const T bot = r1[tx[ox].lo] * (T(1) - wxv) + r1[tx[ox].hi] * wxv;
        orow[ox] = top * (T(1) - wy) + bot * wy;
      }
    }
  }

  if (detail::record<T>({x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto& node = *out.impl();
    node.parents = {xi};
    const int sh = s.h, sw = s.w;
    node.backprop = [xi, sh, sw, oh, ow](TensorImpl<T>& self) {
      if (!xi->requires_grad) return;
      const auto ty = detail::up2x_taps(sh, oh);
      const auto tx = detail::up2x_taps(sw, ow);
      T* gi = xi->grad_data();
      const T* g = self.grad.data();
      const std::size_t planes = xi->shape.numel() / (static_cast<std::size_t>(sh) * sw);
      for (std::size_t p = 0; p < planes; ++p) {
        T* gip = gi + p * static_cast<std::size_t>(sh) * sw;
        const T* gp = g + p * static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const T wy = static_cast<T>(ty[oy].whi);
          T* g0 = gip + static_cast<std::size_t>(ty[oy].lo) * sw;
          T* g1 = gip + static_cast<std::size_t>(ty[oy].hi) * sw;
          const T* grow = gp + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const T wxv = static_cast<T>(tx[ox].whi);
            const T gv = grow[ox];
            g0[tx[ox].lo] += gv * (T(1) - wy) * (T(1) - wxv);
            g0[tx[ox].hi] += gv * (T(1) - wy) * wxv;
            g1[tx[ox].lo] += gv * wy * (T(1) - wxv);
            g1[tx[ox].hi] += gv * wy * wxv;
          }
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------
template <typename T>
TensorT<T> activation(const TensorT<T>& x, Activation mode) {
  if (mode == Activation::none) return x;
  auto out = TensorT<T>::zeros(x.shape());
  const T* in = x.data();
  T* o = out.data();
  const std::size_t n = x.numel();
  switch (mode) {
    case Activation::relu:
      detail::Backend<T>::relu_fwd(in, o, n);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < n; ++i) o[i] = T(1) / (T(1) + std::exp(-in[i]));
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) o[i] = std::tanh(in[i]);
      break;
    case Activation::none:
      break;
  }

  if (detail::record<T>({x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto& node = *out.impl();
    node.parents = {xi};
    node.backprop = [xi, mode](TensorImpl<T>& self) {
      if (!xi->requires_grad) return;
      T* gi = xi->grad_data();
      const T* g = self.grad.data();
      const T* y = self.data.data();
      const std::size_t n = self.shape.numel();
      switch (mode) {
        case Activation::relu:
          detail::Backend<T>::relu_bwd(xi->data.data(), g, gi, n);
          break;
        case Activation::sigmoid:
          for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * y[i] * (T(1) - y[i]);
          break;
        case Activation::tanh:
          for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * (T(1) - y[i] * y[i]);
          break;
        case Activation::none:
          break;
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  return activation(x, Activation::relu);
}
template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  return activation(x, Activation::sigmoid);
}
template <typename T>
TensorT<T> tanh(const TensorT<T>& x) {
  return activation(x, Activation::tanh);
}

// ---------------------------------------------------------------------------
// channel concat / split (exact inverses)
// ---------------------------------------------------------------------------
template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_channels: no inputs");
  const Shape& s0 = parts[0].shape();
  int ctotal = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w)
      throw DimensionError("concat_channels: mismatched spatial dims " + s.str() + " vs " +
                           s0.str());
    ctotal += s.c;
  }
  auto out = TensorT<T>::zeros(Shape(s0.n, ctotal, s0.h, s0.w));
  const std::size_t plane = static_cast<std::size_t>(s0.h) * s0.w;
  T* o = out.data();
  for (int n = 0; n < s0.n; ++n) {
    std::size_t coff = 0;
    for (const auto& p : parts) {
      const int pc = p.shape().c;
      const T* src = p.data() + static_cast<std::size_t>(n) * pc * plane;
      std::copy(src, src + static_cast<std::size_t>(pc) * plane,
                o + (static_cast<std::size_t>(n) * ctotal + coff) * plane);
      coff += pc;
    }
  }

  if (detail::record<T>(parts)) {
    out.set_requires_grad(true);
    auto& node = *out.impl();
    std::vector<std::shared_ptr<TensorImpl<T>>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    node.parents.assign(impls.begin(), impls.end());
    const int N = s0.n;
    node.backprop = [impls, plane, ctotal, N](TensorImpl<T>& self) {
      const T* g = self.grad.data();
      for (int n = 0; n < N; ++n) {
        std::size_t coff = 0;
        for (const auto& pi : impls) {
          const int pc = pi->shape.c;
          if (pi->requires_grad) {
            T* gi = pi->grad_data() + static_cast<std::size_t>(n) * pc * plane;
            const T* gs = g + (static_cast<std::size_t>(n) * ctotal + coff) * plane;
            for (std::size_t i = 0; i < static_cast<std::size_t>(pc) * plane; ++i) gi[i] += gs[i];
          }
          coff += pc;
        }
      }
    };
  }
  return out;
}

template <typename T>
std::vector<TensorT<T>> split_channels(const TensorT<T>& x, const std::vector<int>& sizes) {
  const Shape& s = x.shape();
  int total = 0;
  for (int c : sizes) {
    if (c < 1) throw UsageError("split_channels: sizes must be >= 1");
    total += c;
  }
  if (total != s.c)
    throw DimensionError("split_channels: sizes sum " + std::to_string(total) +
                         " != channels " + std::to_string(s.c));

  std::vector<TensorT<T>> outs;
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const bool rec = detail::record<T>({x});
  int coff = 0;
  for (int c : sizes) {
    auto part = TensorT<T>::zeros(Shape(s.n, c, s.h, s.w));
    for (int n = 0; n < s.n; ++n) {
      const T* src = x.data() + (static_cast<std::size_t>(n) * s.c + coff) * plane;
      std::copy(src, src + static_cast<std::size_t>(c) * plane,
                part.data() + static_cast<std::size_t>(n) * c * plane);
    }
    if (rec) {
      part.set_requires_grad(true);
      auto xi = x.impl();
      auto& node = *part.impl();
      node.parents = {xi};
      const int off = coff, pc = c, N = s.n, CS = s.c;
      node.backprop = [xi, off, pc, N, CS, plane](TensorImpl<T>& self) {
        if (!xi->requires_grad) return;
        const T* g = self.grad.data();
        T* gi = xi->grad_data();
        for (int n = 0; n < N; ++n) {
          T* dst = gi + (static_cast<std::size_t>(n) * CS + off) * plane;
          const T* gs = g + static_cast<std::size_t>(n) * pc * plane;
          for (std::size_t i = 0; i < static_cast<std::size_t>(pc) * plane; ++i) dst[i] += gs[i];
        }
      };
    }
    outs.push_back(std::move(part));
    coff += c;
  }
  return outs;
}

// ---------------------------------------------------------------------------
// elementwise arithmetic
// ---------------------------------------------------------------------------
template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (!(a.shape() == b.shape()))
    throw DimensionError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  auto out = TensorT<T>::zeros(a.shape());
  detail::Backend<T>::add(a.data(), b.data(), out.data(), a.numel());
  if (detail::record<T>({a, b})) {
    out.set_requires_grad(true);
    auto ai = a.impl();
    auto bi = b.impl();
    auto& node = *out.impl();
    node.parents = {ai, bi};
    node.backprop = [ai, bi](TensorImpl<T>& self) {
      const T* g = self.grad.data();
      const std::size_t n = self.shape.numel();
      if (ai->requires_grad) detail::Backend<T>::axpy(T(1), g, ai->grad_data(), n);
      if (bi->requires_grad) detail::Backend<T>::axpy(T(1), g, bi->grad_data(), n);
    };
  }
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  if (!(a.shape() == b.shape()))
    throw DimensionError("mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  auto out = TensorT<T>::zeros(a.shape());
  detail::Backend<T>::mul(a.data(), b.data(), out.data(), a.numel());
  if (detail::record<T>({a, b})) {
    out.set_requires_grad(true);
    auto ai = a.impl();
    auto bi = b.impl();
    auto& node = *out.impl();
    node.parents = {ai, bi};
    node.backprop = [ai, bi](TensorImpl<T>& self) {
      const T* g = self.grad.data();
      const std::size_t n = self.shape.numel();
      if (ai->requires_grad) {
        T* gi = ai->grad_data();
        const T* bv = bi->data.data();
        for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * bv[i];
      }
      if (bi->requires_grad) {
        T* gi = bi->grad_data();
        const T* av = ai->data.data();
        for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * av[i];
      }
    };
  }
  return out;
}

// out[n,c,:,:] = x[n,c,:,:] * gate[n,0,:,:]; the 1-channel attention map
// broadcast over channels.
template <typename T>
TensorT<T> mul_channel_broadcast(const TensorT<T>& x, const TensorT<T>& gate) {
  const Shape& xs = x.shape();
  const Shape& gs = gate.shape();
  if (gs.c != 1 || gs.n != xs.n || gs.h != xs.h || gs.w != xs.w)
    throw DimensionError("mul_channel_broadcast: gate " + gs.str() + " vs x " + xs.str());
  auto out = TensorT<T>::zeros(xs);
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  for (int n = 0; n < xs.n; ++n) {
    const T* gp = gate.data() + static_cast<std::size_t>(n) * plane;
    for (int c = 0; c < xs.c; ++c) {
      const T* xp = x.data() + (static_cast<std::size_t>(n) * xs.c + c) * plane;
      T* op = out.data() + (static_cast<std::size_t>(n) * xs.c + c) * plane;
      detail::Backend<T>::mul(xp, gp, op, plane);
    }
  }
  if (detail::record<T>({x, gate})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto gi = gate.impl();
    auto& node = *out.impl();
    node.parents = {xi, gi};
    const int N = xs.n, C = xs.c;
    node.backprop = [xi, gi, plane, N, C](TensorImpl<T>& self) {
      const T* g = self.grad.data();
      for (int n = 0; n < N; ++n) {
        const std::size_t goff = static_cast<std::size_t>(n) * plane;
        for (int c = 0; c < C; ++c) {
          const std::size_t off = (static_cast<std::size_t>(n) * C + c) * plane;
          if (xi->requires_grad) {
            T* gx = xi->grad_data() + off;
            const T* gv = gi->data.data() + goff;
            for (std::size_t i = 0; i < plane; ++i) gx[i] += g[off + i] * gv[i];
          }
          if (gi->requires_grad) {
            T* gg = gi->grad_data() + goff;
            const T* xv = xi->data.data() + off;
            for (std::size_t i = 0; i < plane; ++i) gg[i] += g[off + i] * xv[i];
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& x, T alpha) {
  auto out = TensorT<T>::zeros(x.shape());
  const T* in = x.data();
  T* o = out.data();
  for (std::size_t i = 0, n = x.numel(); i < n; ++i) o[i] = alpha * in[i];
  if (detail::record<T>({x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto& node = *out.impl();
    node.parents = {xi};
    node.backprop = [xi, alpha](TensorImpl<T>& self) {
      if (!xi->requires_grad) return;
      detail::Backend<T>::axpy(alpha, self.grad.data(), xi->grad_data(), self.shape.numel());
    };
  }
  return out;
}

template <typename T>
TensorT<T> sum(const TensorT<T>& x) {
  T acc = 0;
  const T* in = x.data();
  for (std::size_t i = 0, n = x.numel(); i < n; ++i) acc += in[i];
  auto out = TensorT<T>::scalar(acc);
  if (detail::record<T>({x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto& node = *out.impl();
    node.parents = {xi};
    node.backprop = [xi](TensorImpl<T>& self) {
      if (!xi->requires_grad) return;
      const T g = self.grad[0];
      T* gi = xi->grad_data();
      for (std::size_t i = 0, n = xi->shape.numel(); i < n; ++i) gi[i] += g;
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// losses (targets never receive gradients)
// ---------------------------------------------------------------------------
template <typename T>
TensorT<T> mse_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  if (!(pred.shape() == target.shape()))
    throw DimensionError("mse_loss: shape mismatch " + pred.shape().str() + " vs " +
                         target.shape().str());
  const std::size_t n = pred.numel();
  const T* p = pred.data();
  const T* t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  auto out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  if (detail::record<T>({pred})) {
    out.set_requires_grad(true);
    auto pi = pred.impl();
    auto ti = target.impl();
    auto& node = *out.impl();
    node.parents = {pi};
    node.backprop = [pi, ti](TensorImpl<T>& self) {
      if (!pi->requires_grad) return;
      const T g = self.grad[0];
      const std::size_t n = pi->shape.numel();
      const T inv = T(2) / static_cast<T>(n);
      T* gp = pi->grad_data();
      const T* p = pi->data.data();
      const T* t = ti->data.data();
      for (std::size_t i = 0; i < n; ++i) gp[i] += g * inv * (p[i] - t[i]);
    };
  }
  return out;
}

template <typename T>
TensorT<T> l1_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  if (!(pred.shape() == target.shape()))
    throw DimensionError("l1_loss: shape mismatch");
  const std::size_t n = pred.numel();
  const T* p = pred.data();
  const T* t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(p[i]) - t[i]);
  auto out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  if (detail::record<T>({pred})) {
    out.set_requires_grad(true);
    auto pi = pred.impl();
    auto ti = target.impl();
    auto& node = *out.impl();
    node.parents = {pi};
    node.backprop = [pi, ti](TensorImpl<T>& self) {
      if (!pi->requires_grad) return;
      const T g = self.grad[0];
      const std::size_t n = pi->shape.numel();
      const T inv = T(1) / static_cast<T>(n);
      T* gp = pi->grad_data();
      const T* p = pi->data.data();
      const T* t = ti->data.data();
      for (std::size_t i = 0; i < n; ++i) {
        const T d = p[i] - t[i];
        if (d > T(0))
          gp[i] += g * inv;
        else if (d < T(0))
          gp[i] -= g * inv;
      }
    };
  }
  return out;
}

// Mean binary cross-entropy on probabilities. Predictions are clamped to
// [eps, 1-eps]; clamped entries get zero gradient (they sit on a flat
// piece of the clamped objective). N = pixel count.
template <typename T>
TensorT<T> bce_loss(const TensorT<T>& pred_prob, const TensorT<T>& target, T eps) {
  if (!(pred_prob.shape() == target.shape()))
    throw DimensionError("bce_loss: shape mismatch " + pred_prob.shape().str() + " vs " +
                         target.shape().str());
  if (!(eps > T(0) && eps < T(0.5))) throw UsageError("bce_loss: eps must be in (0, 0.5)");
  const std::size_t n = pred_prob.numel();
  const T* p = pred_prob.data();
  const T* t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pc = std::clamp(static_cast<double>(p[i]), static_cast<double>(eps),
                                 1.0 - static_cast<double>(eps));
    const double y = static_cast<double>(t[i]);
    acc -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
  }
  auto out = TensorT<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  if (detail::record<T>({pred_prob})) {
    out.set_requires_grad(true);
    auto pi = pred_prob.impl();
    auto ti = target.impl();
    auto& node = *out.impl();
    node.parents = {pi};
    node.backprop = [pi, ti, eps](TensorImpl<T>& self) {
      if (!pi->requires_grad) return;
      const T g = self.grad[0];
      const std::size_t n = pi->shape.numel();
      const T inv = T(1) / static_cast<T>(n);
      T* gp = pi->grad_data();
      const T* p = pi->data.data();
      const T* t = ti->data.data();
      for (std::size_t i = 0; i < n; ++i) {
        if (p[i] <= eps || p[i] >= T(1) - eps) continue;
        gp[i] += g * inv * (p[i] - t[i]) / (p[i] * (T(1) - p[i]));
      }
    };
  }
  return out;
}

}  // namespace dewarp::ops
