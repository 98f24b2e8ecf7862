#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dewarp/ops.hpp"
#include "dewarp/rng.hpp"
#include "dewarp/tensor.hpp"

namespace dewarp {

template <typename T>
struct NamedParam {
  std::string name;
  TensorT<T> tensor;
};

// 2-D convolution layer. He-uniform weight init, zero bias.
template <typename T>
struct Conv2dLayer {
  TensorT<T> weight;  // (out_ch, in_ch, k, k)
  TensorT<T> bias;    // (1, out_ch, 1, 1)
  int stride = 1;
  int pad = 0;

  Conv2dLayer() = default;

  Conv2dLayer(int in_ch, int out_ch, int k, int pad_, Rng& rng) : pad(pad_) {
    if (k != 1 && k != 3) throw UsageError("Conv2dLayer: kernel must be 1 or 3");
    const double limit = std::sqrt(6.0 / (static_cast<double>(in_ch) * k * k));
    weight = TensorT<T>::uniform(Shape(out_ch, in_ch, k, k), rng, static_cast<T>(-limit),
                                 static_cast<T>(limit), true);
    bias = TensorT<T>::zeros(Shape(1, out_ch, 1, 1), true);
  }

  bool defined() const { return weight.defined(); }

  TensorT<T> forward(const TensorT<T>& x) const { return ops::conv2d(x, weight, bias, stride, pad); }

  void register_params(std::vector<NamedParam<T>>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

template <typename T>
std::size_t count_params(const std::vector<NamedParam<T>>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

template <typename T>
std::size_t count_params_with_prefix(const std::vector<NamedParam<T>>& params,
                                     const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& p : params)
    if (p.name.rfind(prefix, 0) == 0) n += p.tensor.numel();
  return n;
}

template <typename T>
void zero_grads(std::vector<NamedParam<T>>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace dewarp
