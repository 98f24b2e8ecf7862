#include "dewarp/gradcheck_suite.hpp"

#include "dewarp/loss.hpp"

namespace dewarp {

namespace {

using DTensor = TensorT<double>;
using Params = std::vector<std::pair<std::string, DTensor>>;

DTensor rand_tensor(const Shape& s, Rng& rng, double lo, double hi, bool rg = true) {
  return DTensor::uniform(s, rng, lo, hi, rg);
}

// values bounded away from zero so ReLU/maxpool kinks stay clear of the
// finite-difference step
DTensor rand_tensor_offzero(const Shape& s, Rng& rng, bool rg = true) {
  DTensor t = DTensor::zeros(s, rg);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double mag = rng.uniform(0.15, 1.0);
    t.data()[i] = rng.bernoulli(0.5) ? mag : -mag;
  }
  return t;
}

void run_case(GradCheckReport& report, const std::string& name, const Params& params,
              const std::function<DTensor()>& loss_fn, double rel_tol) {
  GradCheckReport one = grad_check(loss_fn, params, rel_tol);
  for (auto& item : one.items) {
    item.name = name + "/" + item.name;
    if (!item.pass) report.all_pass = false;
    report.items.push_back(item);
  }
}

}  // namespace

GradCheckReport layerwise_grad_check(double rel_tol, std::uint64_t seed) {
  GradCheckReport report;
  Rng rng(seed);

  {  // conv3x3 + bias, padding 1
    auto x = rand_tensor(Shape(1, 2, 6, 6), rng, -1.0, 1.0);
    auto w = rand_tensor(Shape(3, 2, 3, 3), rng, -0.5, 0.5);
    auto b = rand_tensor(Shape(1, 3, 1, 1), rng, -0.2, 0.2);
    auto target = rand_tensor(Shape(1, 3, 6, 6), rng, -1.0, 1.0, false);
    run_case(report, "conv3x3", {{"x", x}, {"w", w}, {"b", b}},
             [=] { return ops::mse_loss(ops::conv2d(x, w, b, 1, 1), target); }, rel_tol);
  }
  {  // conv1x1
    auto x = rand_tensor(Shape(1, 3, 5, 5), rng, -1.0, 1.0);
    auto w = rand_tensor(Shape(2, 3, 1, 1), rng, -0.5, 0.5);
    auto b = rand_tensor(Shape(1, 2, 1, 1), rng, -0.2, 0.2);
    auto target = rand_tensor(Shape(1, 2, 5, 5), rng, -1.0, 1.0, false);
    run_case(report, "conv1x1", {{"x", x}, {"w", w}, {"b", b}},
             [=] { return ops::mse_loss(ops::conv2d(x, w, b, 1, 0), target); }, rel_tol);
  }
  {  // conv3x3 with stride 2 (reference path)
    auto x = rand_tensor(Shape(1, 2, 8, 8), rng, -1.0, 1.0);
    auto w = rand_tensor(Shape(2, 2, 3, 3), rng, -0.5, 0.5);
    auto b = rand_tensor(Shape(1, 2, 1, 1), rng, -0.2, 0.2);
    auto target = rand_tensor(Shape(1, 2, 4, 4), rng, -1.0, 1.0, false);
    run_case(report, "conv3x3_s2", {{"x", x}, {"w", w}, {"b", b}},
             [=] { return ops::mse_loss(ops::conv2d(x, w, b, 2, 1), target); }, rel_tol);
  }
  {  // maxpool
    auto x = rand_tensor_offzero(Shape(1, 2, 6, 6), rng);
    auto target = rand_tensor(Shape(1, 2, 3, 3), rng, -1.0, 1.0, false);
    run_case(report, "maxpool2x2", {{"x", x}},
             [=] { return ops::mse_loss(ops::maxpool2x2(x), target); }, rel_tol);
  }
  {  // bilinear upsample
    auto x = rand_tensor(Shape(1, 2, 4, 4), rng, -1.0, 1.0);
    auto target = rand_tensor(Shape(1, 2, 8, 8), rng, -1.0, 1.0, false);
    run_case(report, "upsample2x", {{"x", x}},
             [=] { return ops::mse_loss(ops::upsample_bilinear2x(x), target); }, rel_tol);
  }
  {  // relu (inputs bounded away from the kink)
    auto x = rand_tensor_offzero(Shape(1, 2, 5, 5), rng);
    auto target = rand_tensor(Shape(1, 2, 5, 5), rng, -1.0, 1.0, false);
    run_case(report, "relu", {{"x", x}},
             [=] { return ops::mse_loss(ops::relu(x), target); }, rel_tol);
  }
  {  // sigmoid
    auto x = rand_tensor(Shape(1, 1, 5, 5), rng, -2.0, 2.0);
    auto target = rand_tensor(Shape(1, 1, 5, 5), rng, 0.0, 1.0, false);
    run_case(report, "sigmoid", {{"x", x}},
             [=] { return ops::mse_loss(ops::sigmoid(x), target); }, rel_tol);
  }
  {  // tanh
    auto x = rand_tensor(Shape(1, 1, 5, 5), rng, -2.0, 2.0);
    auto target = rand_tensor(Shape(1, 1, 5, 5), rng, -1.0, 1.0, false);
    run_case(report, "tanh", {{"x", x}},
             [=] { return ops::mse_loss(ops::tanh(x), target); }, rel_tol);
  }
  {  // concat + split round trip participates in one graph
    auto a = rand_tensor(Shape(1, 2, 4, 4), rng, -1.0, 1.0);
    auto b = rand_tensor(Shape(1, 3, 4, 4), rng, -1.0, 1.0);
    auto target = rand_tensor(Shape(1, 3, 4, 4), rng, -1.0, 1.0, false);
    run_case(report, "concat_split", {{"a", a}, {"b", b}},
             [=] {
               auto cat = ops::concat_channels<double>({a, b});
               auto parts = ops::split_channels(cat, {2, 3});
               return ops::mse_loss(parts[1], target);
             },
             rel_tol);
  }
  {  // channel-broadcast gate multiply
    auto x = rand_tensor(Shape(1, 3, 4, 4), rng, -1.0, 1.0);
    auto g = rand_tensor(Shape(1, 1, 4, 4), rng, -1.0, 1.0);
    auto target = rand_tensor(Shape(1, 3, 4, 4), rng, -1.0, 1.0, false);
    run_case(report, "mul_channel", {{"x", x}, {"g", g}},
             [=] { return ops::mse_loss(ops::mul_channel_broadcast(x, g), target); }, rel_tol);
  }
  {  // bce on probabilities away from the clamp
    auto x = rand_tensor(Shape(1, 1, 4, 4), rng, -1.5, 1.5);
    auto target = DTensor::zeros(Shape(1, 1, 4, 4));
    for (std::size_t i = 0; i < target.numel(); ++i)
      target.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    run_case(report, "bce", {{"x", x}},
             [=] { return ops::bce_loss(ops::sigmoid(x), target, 1e-7); }, rel_tol);
  }
  {  // full GCL block at 4x4 spatial
    model_detail::GatedConvLayer<double> gcl;
    {
      Rng lr(seed ^ 0x6c1);
      gcl = model_detail::GatedConvLayer<double>(3, 2, lr);
    }
    auto stream = rand_tensor(Shape(1, 3, 4, 4), rng, -1.0, 1.0);
    auto feat = rand_tensor(Shape(1, 2, 4, 4), rng, -1.0, 1.0);
    auto target = rand_tensor(Shape(1, 3, 4, 4), rng, -1.0, 1.0, false);
    Params params = {{"stream", stream},
                     {"feat", feat},
                     {"gate.w", gcl.gate.weight},
                     {"gate.b", gcl.gate.bias},
                     {"post.w", gcl.post.weight},
                     {"post.b", gcl.post.bias}};
    run_case(report, "gcl", params,
             [=] { return ops::mse_loss(gcl.forward(stream, feat), target); }, rel_tol);
  }
  return report;
}

GradCheckReport model_grad_check(const ModelConfig& cfg, double rel_tol, std::uint64_t seed,
                                 std::size_t max_coords) {
  GbsuNet<double> model(cfg, seed);
  Rng rng(seed ^ 0xfeed);
  const int S = cfg.input_size;
  auto input = DTensor::uniform(Shape(1, 3, S, S), rng, 0.0, 1.0, false);
  auto gt_grid = DTensor::uniform(Shape(1, 2, S, S), rng, -0.9, 0.9, false);
  auto gt_edges = DTensor::zeros(Shape(1, 1, S, S));
  for (std::size_t i = 0; i < gt_edges.numel(); ++i)
    gt_edges.data()[i] = rng.bernoulli(0.2) ? 1.0 : 0.0;

  ObjectiveConfig obj;
  auto loss_fn = [&, input, gt_grid, gt_edges]() {
    auto out = model.forward(input);
    auto lg = grid_loss(out.grid, gt_grid);
    TensorT<double> le;
    if (out.edge_logits.defined())
      le = edge_loss(ops::sigmoid(out.edge_logits), gt_edges, 1e-7);
    return combined_loss(lg, le, obj);
  };

  Params params;
  for (const auto& p : model.params()) params.emplace_back(p.name, p.tensor);
  return grad_check(loss_fn, params, rel_tol, 1e-4, max_coords, seed);
}

}  // namespace dewarp
