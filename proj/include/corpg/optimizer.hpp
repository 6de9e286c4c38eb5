// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "corpg/error.hpp"
#include "corpg/params.hpp"

namespace corpg {

enum class LrSchedule { inverse_sqrt, constant };

struct AdamConfig {
  double lr = 1e-3;  // base rate
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  int warmup = 0;
  double clip = 1.0;  // global gradient norm; <= 0 disables
  LrSchedule schedule = LrSchedule::inverse_sqrt;

  void validate() const {
    if (!(lr > 0.0)) throw ContractError("adam: lr must be positive");
    if (warmup < 0) throw ContractError("adam: warmup must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw ContractError("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ContractError("adam: eps must be positive");
  }
};

/// base * min(t^-0.5, t * warmup^-1.5); without warmup just base * t^-0.5.
inline double learning_rate(long step, const AdamConfig& cfg) {
  if (step < 1) throw ContractError("learning_rate: step must be >= 1");
  if (cfg.schedule == LrSchedule::constant) return cfg.lr;
  const double t = static_cast<double>(step);
  double factor = 1.0 / std::sqrt(t);
  if (cfg.warmup > 0) {
    factor = std::min(factor, t * std::pow(static_cast<double>(cfg.warmup), -1.5));
  }
  return cfg.lr * factor;
}

struct AdamState {
  long step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

struct AdamStepInfo {
  double lr = 0.0;
  double grad_norm = 0.0;  // before clipping
};

/// One Adam update from the gradients currently stored on the parameters.
/// Parameters that never received a gradient count as zero gradient.
inline AdamStepInfo adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  cfg.validate();
  double sq = 0.0;
  for (auto& [name, p] : params) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + name + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double clip_scale = (cfg.clip > 0.0 && norm > cfg.clip) ? cfg.clip / norm : 1.0;

  state.step += 1;
  const double lr = learning_rate(state.step, cfg);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != p.numel()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    auto grad = p.grad();
    auto value = p.mutable_values();
    const bool has = grad.size() == value.size();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = has ? grad[i] * clip_scale : 0.0;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  return {lr, norm};
}

inline void zero_grads(ParamStore& params) {
  for (auto& [_, p] : params) p.zero_grad();
}

}  // namespace corpg
