// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "corpg/error.hpp"
#include "corpg/tensor.hpp"

namespace corpg {

struct GradCheckReport {
  double max_rel_error = 0.0;  // |a - n| / max(|a|, |n|, 1)
  double max_abs_error = 0.0;
  std::size_t entries = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  bool passed = false;
};

/// Compares the taped gradient of a scalar computation against central
/// finite differences over every entry of `params`. `f` must rebuild the
/// computation from the current parameter values on each call.
inline GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                  double step = 1e-5, double tol = 1e-6) {
  if (!(step >= 1e-6 && step <= 1e-3)) {
    throw ContractError("grad_check: step must lie in [1e-6, 1e-3]");
  }
  for (auto& p : params) p.zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = f();
    if (loss.numel() != 1) throw DimensionError("grad_check: f must return a scalar");
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    tape.backward(loss);
    for (auto& p : params) {
      auto g = p.grad();
      analytic.emplace_back(g.begin(), g.end());
      analytic.back().resize(p.numel(), 0.0);
    }
    tape.clear();
  }

  GradCheckReport report;
  Tape::Pause pause;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + step;
      const double up = f().item();
      values[i] = orig - step;
      const double down = f().item();
      values[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite loss while perturbing parameter " +
                           std::to_string(pi) + " entry " + std::to_string(i));
      }
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1.0});
      ++report.entries;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_param = pi;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace corpg
