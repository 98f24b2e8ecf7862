#pragma once

#include "dewarp/config.hpp"
#include "dewarp/ops.hpp"

namespace dewarp {

struct ObjectiveConfig {
  double lambda = 0.9;
  double bce_epsilon = 1e-7;
  bool l1_grid = false;  // L1 alternative kept for ablation runs

  void validate() const {
    if (lambda < 0.0) throw UsageError("ObjectiveConfig: lambda must be >= 0");
    if (!(bce_epsilon > 0.0 && bce_epsilon < 0.5))
      throw UsageError("ObjectiveConfig: bce_epsilon must be in (0, 0.5)");
  }

  KeyValueConfig to_config(const std::string& prefix = "objective.") const {
    KeyValueConfig kv;
    kv.set_double(prefix + "lambda", lambda);
    kv.set_double(prefix + "bce_epsilon", bce_epsilon);
    kv.set_bool(prefix + "l1_grid", l1_grid);
    return kv;
  }
  static ObjectiveConfig from_config(const KeyValueConfig& kv,
                                     const std::string& prefix = "objective.") {
    ObjectiveConfig cfg;
    cfg.lambda = kv.get_double(prefix + "lambda", cfg.lambda);
    cfg.bce_epsilon = kv.get_double(prefix + "bce_epsilon", cfg.bce_epsilon);
    cfg.l1_grid = kv.get_bool(prefix + "l1_grid", cfg.l1_grid);
    cfg.validate();
    return cfg;
  }
};

// Pixel-wise binary cross entropy on edge probabilities; N = pixel count.
template <typename T>
TensorT<T> edge_loss(const TensorT<T>& pred_prob, const TensorT<T>& gt, T eps = T(1e-7)) {
  return ops::bce_loss(pred_prob, gt, eps);
}

// Mean-squared grid loss; N = element count (H*W*2).
template <typename T>
TensorT<T> grid_loss(const TensorT<T>& pred_grid, const TensorT<T>& gt_grid, bool l1 = false) {
  return l1 ? ops::l1_loss(pred_grid, gt_grid) : ops::mse_loss(pred_grid, gt_grid);
}

// L = L_g + lambda * L_e. Minimizing drives both terms down; with lambda 0
// (or no edge supervision) this is the pure grid loss.
template <typename T>
TensorT<T> combined_loss(const TensorT<T>& grid_l, const TensorT<T>& edge_l,
                         const ObjectiveConfig& cfg) {
  if (!edge_l.defined() || cfg.lambda == 0.0) return grid_l;
  return ops::add(grid_l, ops::scale(edge_l, static_cast<T>(cfg.lambda)));
}

}  // namespace dewarp
