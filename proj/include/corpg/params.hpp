// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "corpg/error.hpp"
#include "corpg/random.hpp"
#include "corpg/tensor.hpp"

namespace corpg {

/// Named trainable tensors, iterated in name order.
class ParamStore {
 public:
  void add(const std::string& name, Tensor t) {
    if (tensors_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
    t.set_requires_grad(true);
    tensors_.emplace(name, std::move(t));
  }

  const Tensor& get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw DataError("missing parameter '" + name + "'");
    return it->second;
  }
  Tensor& get(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw DataError("missing parameter '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.numel();
    return n;
  }

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (const auto& [_, t] : tensors_) out.push_back(t);
    return out;
  }

  // Deep copy with fresh storage.
  ParamStore clone() const {
    ParamStore c;
    for (const auto& [name, t] : tensors_) c.add(name, t.clone());
    return c;
  }

 private:
  std::map<std::string, Tensor> tensors_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = uniform(rng, -bound, bound);
  return Tensor::parameter(Shape{fan_in, fan_out}, std::move(v));
}

inline Tensor constant_vector(std::size_t n, double value) {
  return Tensor::parameter(Shape{n}, std::vector<double>(n, value));
}

}  // namespace corpg
