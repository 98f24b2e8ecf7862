#include <cstdlib>
#include <cstring>

#include "dewarp/errors.hpp"
#include "dewarp/kernels/api.hpp"
#include "dewarp/kernels/ref.hpp"

namespace dewarp::kernels {

// defined in kernels_avx2.cpp (returns nullptr when unsupported)
const KernelTable* avx2_table_impl();

namespace {

const KernelTable kScalarTable = {
    "scalar",
    ref::conv2d_fwd<float>,
    ref::conv2d_bwd_input<float>,
    ref::conv2d_bwd_weights<float>,
    ref::add<float>,
    ref::mul<float>,
    ref::axpy<float>,
    ref::scale<float>,
    ref::relu_fwd<float>,
    ref::relu_bwd<float>,
    ref::reduce_sum<float>,
    ref::dot<float>,
    ref::adam_step<float>,
    ref::sgd_step<float>,
};

const KernelTable& select() {
  const char* env = std::getenv("DEWARP_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return kScalarTable;
  const KernelTable* avx2 = avx2_table_impl();
  if (env && std::strcmp(env, "avx2") == 0) {
    if (!avx2) throw UsageError("DEWARP_SIMD=avx2 requested but AVX2+FMA is unavailable");
    return *avx2;
  }
  if (env && std::strcmp(env, "auto") != 0 && env[0] != '\0' &&
      std::strcmp(env, "scalar") != 0 && std::strcmp(env, "avx2") != 0)
    throw UsageError(std::string("unknown DEWARP_SIMD value: ") + env);
  return avx2 ? *avx2 : kScalarTable;
}

}  // namespace

const KernelTable& scalar_table() { return kScalarTable; }

const KernelTable* avx2_table() { return avx2_table_impl(); }

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> tables{&kScalarTable};
  if (const KernelTable* avx2 = avx2_table_impl()) tables.push_back(avx2);
  return tables;
}

}  // namespace dewarp::kernels
