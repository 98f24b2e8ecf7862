#pragma once

#include <cstddef>
#include <vector>

namespace dewarp::kernels {

// Geometry of one 2-D convolution call. NCHW planar layout everywhere.
struct ConvDims {
  int n = 1;     // batch
  int cin = 1;
  int hin = 1;
  int win = 1;
  int cout = 1;
  int hout = 1;
  int wout = 1;
  int k = 3;     // square kernel
  int stride = 1;
  int pad = 0;
};

// Table of float32 kernels. Every backend implements the identical contract;
// backends may differ in the last bits of floating-point results (FMA,
// vector re-association) but are equivalence-tested against the scalar
// reference within tight tolerances.
//
// Gradient kernels accumulate (+=) into their output buffers.
struct KernelTable {
  const char* name;

  void (*conv2d_fwd)(const float* in, const float* w, const float* bias, float* out,
                     const ConvDims& d);
  void (*conv2d_bwd_input)(const float* gout, const float* w, float* gin, const ConvDims& d);
  void (*conv2d_bwd_weights)(const float* in, const float* gout, float* gw, float* gbias,
                             const ConvDims& d);

  void (*add)(const float* a, const float* b, float* out, std::size_t n);
  void (*mul)(const float* a, const float* b, float* out, std::size_t n);
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);  // y += alpha*x
  void (*scale)(const float* x, float alpha, float* out, std::size_t n);
  void (*relu_fwd)(const float* x, float* out, std::size_t n);
  void (*relu_bwd)(const float* x, const float* gout, float* gin, std::size_t n);

  double (*reduce_sum)(const float* x, std::size_t n);
  double (*dot)(const float* a, const float* b, std::size_t n);

  // Adam with precomputed bias corrections bc1 = 1/(1-b1^t), bc2 = 1/(1-b2^t).
  void (*adam_step)(float* p, const float* g, float* m, float* v, std::size_t n, float lr,
                    float b1, float b2, float eps, float bc1, float bc2);
  void (*sgd_step)(float* p, const float* g, std::size_t n, float lr);
};

const KernelTable& scalar_table();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

// Backend selected once per process: DEWARP_SIMD={auto,scalar,avx2}, default
// auto (best available). Selection is fixed for the process lifetime so runs
// are reproducible.
const KernelTable& active();

// All backends usable on this machine; used by the equivalence tests.
std::vector<const KernelTable*> available_tables();

}  // namespace dewarp::kernels
