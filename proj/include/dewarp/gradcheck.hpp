#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dewarp/rng.hpp"
#include "dewarp/tensor.hpp"

namespace dewarp {

struct GradCheckItem {
  std::string name;
  double max_rel_err = 0.0;
  double rel_tol = 0.0;
  std::size_t coords_checked = 0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckItem> items;
  bool all_pass = true;

  std::string table() const {
    std::ostringstream ss;
    ss << "parameter                        max_rel_err    tol        result\n";
    for (const auto& it : items) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-32s %-14.3e %-10.1e %s\n", it.name.c_str(),
                    it.max_rel_err, it.rel_tol, it.pass ? "pass" : "FAIL");
      ss << buf;
    }
    ss << (all_pass ? "all gradients pass\n" : "GRADIENT CHECK FAILED\n");
    return ss.str();
  }
};

// Central finite differences against the recorded analytic gradients,
// double precision only.
//
// loss_fn must rebuild the graph from the current parameter values on every
// call and return a scalar. For parameters larger than max_coords, a
// deterministic random subset of coordinates is probed (seeded below), which
// keeps full-model checks tractable.
//
// Relative error uses denominator max(|analytic|, |numeric|, 1e-3): gradients
// below 1e-3 are compared absolutely, which keeps finite-difference roundoff
// from dominating near-zero entries.
inline GradCheckReport grad_check(
    const std::function<TensorT<double>()>& loss_fn,
    const std::vector<std::pair<std::string, TensorT<double>>>& params, double rel_tol,
    double step = 1e-4, std::size_t max_coords = 24, std::uint64_t seed = 2024) {
  GradCheckReport report;

  // analytic pass
  for (auto& [name, p] : params) {
    (void)name;
    const_cast<TensorT<double>&>(p).zero_grad();
  }
  TensorT<double> loss = loss_fn();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    (void)name;
    if (p.has_grad())
      analytic.push_back(p.grad_vec());
    else
      analytic.emplace_back(p.numel(), 0.0);
  }

  Rng rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, param] = params[pi];
    auto& p = const_cast<TensorT<double>&>(param);
    const std::size_t n = p.numel();

    std::vector<std::size_t> coords;
    if (n <= max_coords) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < max_coords; ++i) coords.push_back(rng.uniform_int(n));
    }

    GradCheckItem item;
    item.name = name;
    item.rel_tol = rel_tol;
    item.coords_checked = coords.size();
    for (std::size_t ci : coords) {
      const double saved = p.data()[ci];
      double fp, fm;
      {
        NoGradGuard ng;
        p.data()[ci] = saved + step;
        fp = loss_fn().item();
        p.data()[ci] = saved - step;
        fm = loss_fn().item();
        p.data()[ci] = saved;
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi][ci];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > item.max_rel_err) item.max_rel_err = rel;
    }
    item.pass = item.max_rel_err <= rel_tol;
    if (!item.pass) report.all_pass = false;
    report.items.push_back(std::move(item));
  }
  return report;
}

}  // namespace dewarp
