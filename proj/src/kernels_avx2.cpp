// AVX2+FMA backend. This translation unit is the only one compiled with
// -mavx2 -mfma; the dispatcher never hands out this table unless the CPU
// reports both features at runtime.

#include "dewarp/kernels/api.hpp"
#include "dewarp/kernels/ref.hpp"

#if defined(DEWARP_BUILD_AVX2)

#include <immintrin.h>

#include <cmath>

namespace dewarp::kernels {
namespace {

inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

inline double hsum256d(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

// stride-1 fast path: per (ic,ky,kx) tap, FMA a broadcast weight against a
// shifted input row into the output row
void conv2d_fwd_avx2(const float* in, const float* w, const float* bias, float* out,
                     const ConvDims& d) {
  if (d.stride != 1) {
    ref::conv2d_fwd(in, w, bias, out, d);
    return;
  }
  const std::size_t in_plane = static_cast<std::size_t>(d.hin) * d.win;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int n = 0; n < d.n; ++n) {
    for (int oc = 0; oc < d.cout; ++oc) {
      float* outp = out + (static_cast<std::size_t>(n) * d.cout + oc) * out_plane;
      const float b = bias ? bias[oc] : 0.0f;
      {
        const __m256 vb = _mm256_set1_ps(b);
        std::size_t i = 0;
        for (; i + 8 <= out_plane; i += 8) _mm256_storeu_ps(outp + i, vb);
        for (; i < out_plane; ++i) outp[i] = b;
      }
      for (int ic = 0; ic < d.cin; ++ic) {
        const float* inp = in + (static_cast<std::size_t>(n) * d.cin + ic) * in_plane;
        const float* wk = w + ((static_cast<std::size_t>(oc) * d.cin + ic) * d.k) * d.k;
        for (int oy = 0; oy < d.hout; ++oy) {
          float* orow = outp + static_cast<std::size_t>(oy) * d.wout;
          for (int ky = 0; ky < d.k; ++ky) {
            const int iy = oy - d.pad + ky;
            if (iy < 0 || iy >= d.hin) continue;
            const float* irow = inp + static_cast<std::size_t>(iy) * d.win;
            for (int kx = 0; kx < d.k; ++kx) {
              const float wv = wk[ky * d.k + kx];
              int lo = d.pad - kx > 0 ? d.pad - kx : 0;
              int hi = d.win - 1 + d.pad - kx;  // inclusive
              if (hi > d.wout - 1) hi = d.wout - 1;
              const float* src = irow - d.pad + kx;
              const __m256 vw = _mm256_set1_ps(wv);
              int ox = lo;
              for (; ox + 8 <= hi + 1; ox += 8) {
                __m256 acc = _mm256_loadu_ps(orow + ox);
                acc = _mm256_fmadd_ps(vw, _mm256_loadu_ps(src + ox), acc);
                _mm256_storeu_ps(orow + ox, acc);
              }
              for (; ox <= hi; ++ox) orow[ox] += wv * src[ox];
            }
          }
        }
      }
    }
  }
}

void conv2d_bwd_input_avx2(const float* gout, const float* w, float* gin, const ConvDims& d) {
  if (d.stride != 1) {
    ref::conv2d_bwd_input(gout, w, gin, d);
    return;
  }
  const std::size_t in_plane = static_cast<std::size_t>(d.hin) * d.win;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int n = 0; n < d.n; ++n) {
    for (int ic = 0; ic < d.cin; ++ic) {
      float* ginp = gin + (static_cast<std::size_t>(n) * d.cin + ic) * in_plane;
      for (int oc = 0; oc < d.cout; ++oc) {
        const float* goutp = gout + (static_cast<std::size_t>(n) * d.cout + oc) * out_plane;
        const float* wk = w + ((static_cast<std::size_t>(oc) * d.cin + ic) * d.k) * d.k;
        for (int oy = 0; oy < d.hout; ++oy) {
          const float* grow = goutp + static_cast<std::size_t>(oy) * d.wout;
          for (int ky = 0; ky < d.k; ++ky) {
            const int iy = oy - d.pad + ky;
            if (iy < 0 || iy >= d.hin) continue;
            float* girow = ginp + static_cast<std::size_t>(iy) * d.win;
            for (int kx = 0; kx < d.k; ++kx) {
              const float wv = wk[ky * d.k + kx];
              int lo = d.pad - kx > 0 ? d.pad - kx : 0;
              int hi = d.win - 1 + d.pad - kx;
              if (hi > d.wout - 1) hi = d.wout - 1;
              float* dst = girow - d.pad + kx;
              const __m256 vw = _mm256_set1_ps(wv);
              int ox = lo;
              for (; ox + 8 <= hi + 1; ox += 8) {
                __m256 acc = _mm256_loadu_ps(dst + ox);
                acc = _mm256_fmadd_ps(vw, _mm256_loadu_ps(grow + ox), acc);
                _mm256_storeu_ps(dst + ox, acc);
              }
              for (; ox <= hi; ++ox) dst[ox] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
}

void conv2d_bwd_weights_avx2(const float* in, const float* gout, float* gw, float* gbias,
                             const ConvDims& d) {
  if (d.stride != 1) {
    ref::conv2d_bwd_weights(in, gout, gw, gbias, d);
    return;
  }
  const std::size_t in_plane = static_cast<std::size_t>(d.hin) * d.win;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int oc = 0; oc < d.cout; ++oc) {
    if (gbias) {
      __m256 vacc = _mm256_setzero_ps();
      float tail = 0.0f;
      for (int n = 0; n < d.n; ++n) {
        const float* goutp = gout + (static_cast<std::size_t>(n) * d.cout + oc) * out_plane;
        std::size_t i = 0;
        for (; i + 8 <= out_plane; i += 8) vacc = _mm256_add_ps(vacc, _mm256_loadu_ps(goutp + i));
        for (; i < out_plane; ++i) tail += goutp[i];
      }
      gbias[oc] += hsum256(vacc) + tail;
    }
    for (int ic = 0; ic < d.cin; ++ic) {
      float* wk = gw + ((static_cast<std::size_t>(oc) * d.cin + ic) * d.k) * d.k;
      for (int ky = 0; ky < d.k; ++ky) {
        for (int kx = 0; kx < d.k; ++kx) {
          __m256 vacc = _mm256_setzero_ps();
          float tail = 0.0f;
          for (int n = 0; n < d.n; ++n) {
            const float* inp = in + (static_cast<std::size_t>(n) * d.cin + ic) * in_plane;
            const float* goutp = gout + (static_cast<std::size_t>(n) * d.cout + oc) * out_plane;
            for (int oy = 0; oy < d.hout; ++oy) {
              const int iy = oy - d.pad + ky;
              if (iy < 0 || iy >= d.hin) continue;
              const float* irow = inp + static_cast<std::size_t>(iy) * d.win - d.pad + kx;
              const float* grow = goutp + static_cast<std::size_t>(oy) * d.wout;
              int lo = d.pad - kx > 0 ? d.pad - kx : 0;
              int hi = d.win - 1 + d.pad - kx;
              if (hi > d.wout - 1) hi = d.wout - 1;
              int ox = lo;
              for (; ox + 8 <= hi + 1; ox += 8)
                vacc = _mm256_fmadd_ps(_mm256_loadu_ps(grow + ox), _mm256_loadu_ps(irow + ox),
                                       vacc);
              for (; ox <= hi; ++ox) tail += grow[ox] * irow[ox];
            }
          }
          wk[ky * d.k + kx] += hsum256(vacc) + tail;
        }
      }
    }
  }
}

void add_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(const float* x, float alpha, float* out, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void relu_fwd_avx2(const float* x, float* out, std::size_t n) {
  const __m256 vz = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_max_ps(vz, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_avx2(const float* x, const float* gout, float* gin, std::size_t n) {
  const __m256 vz = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), vz, _CMP_GT_OQ);
    const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(gout + i));
    _mm256_storeu_ps(gin + i, _mm256_add_ps(_mm256_loadu_ps(gin + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f) gin[i] += gout[i];
}

double reduce_sum_avx2(const float* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm_loadu_ps(x + i)));
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i];
  return hsum256d(acc) + tail;
}

double dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
    const __m256d vb = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
    acc = _mm256_fmadd_pd(va, vb, acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += static_cast<double>(a[i]) * b[i];
  return hsum256d(acc) + tail;
}

void adam_step_avx2(float* p, const float* g, float* m, float* v, std::size_t n, float lr,
                    float b1, float b2, float eps, float bc1, float bc2) {
  const __m256 vb1 = _mm256_set1_ps(b1);
  const __m256 vb2 = _mm256_set1_ps(b2);
  const __m256 v1mb1 = _mm256_set1_ps(1.0f - b1);
  const __m256 v1mb2 = _mm256_set1_ps(1.0f - b2);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 veps = _mm256_set1_ps(eps);
  const __m256 vbc1 = _mm256_set1_ps(bc1);
  const __m256 vbc2 = _mm256_set1_ps(bc2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vg = _mm256_loadu_ps(g + i);
    __m256 vm = _mm256_loadu_ps(m + i);
    __m256 vv = _mm256_loadu_ps(v + i);
    vm = _mm256_fmadd_ps(vb1, vm, _mm256_mul_ps(v1mb1, vg));
    vv = _mm256_fmadd_ps(vb2, vv, _mm256_mul_ps(v1mb2, _mm256_mul_ps(vg, vg)));
    _mm256_storeu_ps(m + i, vm);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(vm, vbc1);
    const __m256 vhat = _mm256_mul_ps(vv, vbc2);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0f - b1) * g[i];
    v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
  }
}

void sgd_step_avx2(float* p, const float* g, std::size_t n, float lr) {
  const __m256 vlr = _mm256_set1_ps(lr);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 upd = _mm256_mul_ps(vlr, _mm256_loadu_ps(g + i));
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
  }
  for (; i < n; ++i) p[i] -= lr * g[i];
}

const KernelTable kAvx2Table = {
    "avx2",
    conv2d_fwd_avx2,
    conv2d_bwd_input_avx2,
    conv2d_bwd_weights_avx2,
    add_avx2,
    mul_avx2,
    axpy_avx2,
    scale_avx2,
    relu_fwd_avx2,
    relu_bwd_avx2,
    reduce_sum_avx2,
    dot_avx2,
    adam_step_avx2,
    sgd_step_avx2,
};

}  // namespace

const KernelTable* avx2_table_impl() {
#if defined(__GNUC__) || defined(__clang__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2Table;
#endif
  return nullptr;
}

}  // namespace dewarp::kernels

#else  // !DEWARP_BUILD_AVX2

namespace dewarp::kernels {
const KernelTable* avx2_table_impl() { return nullptr; }
}  // namespace dewarp::kernels

#endif
