#pragma once

#include <cmath>
#include <cstddef>

#include "dewarp/kernels/api.hpp"

// Scalar reference kernels. These are the semantics every SIMD backend is
// tested against, and they serve double duty as the double-precision path
// for gradient checking (templated on the element type).
namespace dewarp::kernels::ref {

template <typename T>
void conv2d_fwd(const T* in, const T* w, const T* bias, T* out, const ConvDims& d) {
  const std::size_t in_plane = static_cast<std::size_t>(d.hin) * d.win;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int n = 0; n < d.n; ++n) {
    for (int oc = 0; oc < d.cout; ++oc) {
      T* outp = out + (static_cast<std::size_t>(n) * d.cout + oc) * out_plane;
      const T b = bias ? bias[oc] : T(0);
      for (std::size_t i = 0; i < out_plane; ++i) outp[i] = b;
      for (int ic = 0; ic < d.cin; ++ic) {
        const T* inp = in + (static_cast<std::size_t>(n) * d.cin + ic) * in_plane;
        const T* wk = w + ((static_cast<std::size_t>(oc) * d.cin + ic) * d.k) * d.k;
        for (int oy = 0; oy < d.hout; ++oy) {
          T* orow = outp + static_cast<std::size_t>(oy) * d.wout;
          for (int ky = 0; ky < d.k; ++ky) {
            const int iy = oy * d.stride - d.pad + ky;
            if (iy < 0 || iy >= d.hin) continue;
            const T* irow = inp + static_cast<std::size_t>(iy) * d.win;
            for (int kx = 0; kx < d.k; ++kx) {
              const T wv = wk[ky * d.k + kx];
              // ox range keeping ix = ox*stride - pad + kx inside [0, win)
              int lo = 0;
              if (d.pad - kx > 0) lo = (d.pad - kx + d.stride - 1) / d.stride;
              int hi = (d.win - 1 + d.pad - kx) / d.stride;  // inclusive
              if (hi > d.wout - 1) hi = d.wout - 1;
              const T* src = irow - d.pad + kx;
              for (int ox = lo; ox <= hi; ++ox) orow[ox] += wv * src[ox * d.stride];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_bwd_input(const T* gout, const T* w, T* gin, const ConvDims& d) {
  const std::size_t in_plane = static_cast<std::size_t>(d.hin) * d.win;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int n = 0; n < d.n; ++n) {
    for (int ic = 0; ic < d.cin; ++ic) {
      T* ginp = gin + (static_cast<std::size_t>(n) * d.cin + ic) * in_plane;
      for (int oc = 0; oc < d.cout; ++oc) {
        const T* goutp = gout + (static_cast<std::size_t>(n) * d.cout + oc) * out_plane;
        const T* wk = w + ((static_cast<std::size_t>(oc) * d.cin + ic) * d.k) * d.k;
        for (int oy = 0; oy < d.hout; ++oy) {
          const T* grow = goutp + static_cast<std::size_t>(oy) * d.wout;
          for (int ky = 0; ky < d.k; ++ky) {
            const int iy = oy * d.stride - d.pad + ky;
            if (iy < 0 || iy >= d.hin) continue;
            T* girow = ginp + static_cast<std::size_t>(iy) * d.win;
            for (int kx = 0; kx < d.k; ++kx) {
              const T wv = wk[ky * d.k + kx];
              int lo = 0;
              if (d.pad - kx > 0) lo = (d.pad - kx + d.stride - 1) / d.stride;
              int hi = (d.win - 1 + d.pad - kx) / d.stride;
              if (hi > d.wout - 1) hi = d.wout - 1;
              T* dst = girow - d.pad + kx;
              for (int ox = lo; ox <= hi; ++ox) dst[ox * d.stride] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_bwd_weights(const T* in, const T* gout, T* gw, T* gbias, const ConvDims& d) {
  const std::size_t in_plane = static_cast<std::size_t>(d.hin) * d.win;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int oc = 0; oc < d.cout; ++oc) {
    if (gbias) {
      T acc = 0;
      for (int n = 0; n < d.n; ++n) {
        const T* goutp = gout + (static_cast<std::size_t>(n) * d.cout + oc) * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) acc += goutp[i];
      }
      gbias[oc] += acc;
    }
    for (int ic = 0; ic < d.cin; ++ic) {
      T* wk = gw + ((static_cast<std::size_t>(oc) * d.cin + ic) * d.k) * d.k;
      for (int ky = 0; ky < d.k; ++ky) {
        for (int kx = 0; kx < d.k; ++kx) {
          T acc = 0;
          for (int n = 0; n < d.n; ++n) {
            const T* inp = in + (static_cast<std::size_t>(n) * d.cin + ic) * in_plane;
            const T* goutp = gout + (static_cast<std::size_t>(n) * d.cout + oc) * out_plane;
            for (int oy = 0; oy < d.hout; ++oy) {
              const int iy = oy * d.stride - d.pad + ky;
              if (iy < 0 || iy >= d.hin) continue;
              const T* irow = inp + static_cast<std::size_t>(iy) * d.win - d.pad + kx;
              const T* grow = goutp + static_cast<std::size_t>(oy) * d.wout;
              int lo = 0;
              if (d.pad - kx > 0) lo = (d.pad - kx + d.stride - 1) / d.stride;
              int hi = (d.win - 1 + d.pad - kx) / d.stride;
              if (hi > d.wout - 1) hi = d.wout - 1;
              for (int ox = lo; ox <= hi; ++ox) acc += grow[ox] * irow[ox * d.stride];
            }
          }
          wk[ky * d.k + kx] += acc;
        }
      }
    }
  }
}

template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(const T* x, T alpha, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <typename T>
void relu_fwd(const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_bwd(const T* x, const T* gout, T* gin, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > T(0)) gin[i] += gout[i];
}

template <typename T>
double reduce_sum(const T* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]);
  return acc;
}

template <typename T>
double dot(const T* a, const T* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

template <typename T>
void adam_step(T* p, const T* g, T* m, T* v, std::size_t n, T lr, T b1, T b2, T eps, T bc1,
               T bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    const T mhat = m[i] * bc1;
    const T vhat = v[i] * bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename T>
void sgd_step(T* p, const T* g, std::size_t n, T lr) {
  for (std::size_t i = 0; i < n; ++i) p[i] -= lr * g[i];
}

}  // namespace dewarp::kernels::ref
