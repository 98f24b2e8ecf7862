#pragma once

#include "dewarp/gradcheck.hpp"
#include "dewarp/model.hpp"

namespace dewarp {

// Finite-difference checks for every differentiable op in isolation
// (double precision, small tensors). rel_tol 1e-4 passes with margin.
GradCheckReport layerwise_grad_check(double rel_tol = 1e-4, std::uint64_t seed = 11);

// End-to-end check through the full stacked model and combined loss at a
// reduced configuration, probing a deterministic sample of coordinates per
// parameter tensor.
GradCheckReport model_grad_check(const ModelConfig& cfg, double rel_tol = 1e-3,
                                 std::uint64_t seed = 11, std::size_t max_coords = 4);

}  // namespace dewarp
