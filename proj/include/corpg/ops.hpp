// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tensor operations. Every op computes its forward value
// eagerly and, when a tape is active and some input requires a gradient,
// records a closure that accumulates input gradients from the output
// gradient. Ops work on the 2-D view of their operands (see Shape::rows).
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "corpg/error.hpp"
#include "corpg/random.hpp"
#include "corpg/tensor.hpp"

namespace corpg {

// Boolean matrix selecting which entries of a row take part in a softmax.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool fill = true)
      : rows_(rows), cols_(cols), keep_(rows * cols, fill ? 1 : 0) {}

  static Mask causal(std::size_t n) {
    Mask m(n, n, false);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
    }
    return m;
  }

  bool allowed(std::size_t r, std::size_t c) const { return keep_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool on) { keep_[r * cols_ + c] = on ? 1 : 0; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> keep_;
};

enum class ElementwiseKind { add, sub, mul };
enum class ActivationKind { sigmoid, tanh, relu };

namespace detail {

using NodePtr = std::shared_ptr<Tensor::Node>;

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

inline std::vector<double>& grad_buffer(Tensor::Node& n) {
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

template <class Fn>
void record(Tensor& out, std::initializer_list<const Tensor*> inputs, Fn&& fn) {
  out.set_requires_grad(true);
  std::vector<NodePtr> nodes;
  nodes.reserve(inputs.size() + 1);
  nodes.push_back(out.handle());
  for (const Tensor* t : inputs) nodes.push_back(t->handle());
  Tape::active()->record(std::move(nodes), std::forward<Fn>(fn));
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Matrix product of the 2-D views: [m x k] * [k x n] -> [m x n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + a.shape().str() + " and " +
                         b.shape().str());
  }
  Tensor out(Shape{m, n});
  {
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* C = out.mutable_values().data();
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A[i * k + p];
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [o = out.handle(), an = a.handle(), bn = b.handle(), m, k, n] {
      if (o->grad.empty()) return;
      const double* dC = o->grad.data();
      if (an->requires_grad) {
        double* dA = detail::grad_buffer(*an).data();
        const double* B = bn->value.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            const double* brow = B + p * n;
            const double* grow = dC + i * n;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            dA[i * k + p] += s;
          }
        }
      }
      if (bn->requires_grad) {
        double* dB = detail::grad_buffer(*bn).data();
        const double* A = an->value.data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = dC + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            double* brow = dB + p * n;
            for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
        }
      }
    });
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(Shape{n, m});
  auto src = a.values();
  auto dst = out.mutable_values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  if (detail::should_record({&a})) {
    detail::record(out, {&a}, [o = out.handle(), an = a.handle(), m, n] {
      if (o->grad.empty()) return;
      auto& g = detail::grad_buffer(*an);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o->grad[j * m + i];
      }
    });
  }
  return out;
}

/// Same-shape elementwise add / sub / mul.
inline Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseKind kind) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError("elementwise: shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
  }
  Tensor out(a.shape());
  auto x = a.values();
  auto y = b.values();
  auto z = out.mutable_values();
  const std::size_t n = z.size();
  switch (kind) {
    case ElementwiseKind::add:
      for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
      break;
    case ElementwiseKind::sub:
      for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - y[i];
      break;
    case ElementwiseKind::mul:
      for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
      break;
  }
  if (detail::should_record({&a, &b})) {
    detail::record(out, {&a, &b}, [o = out.handle(), an = a.handle(), bn = b.handle(), kind, n] {
      if (o->grad.empty()) return;
      const auto& g = o->grad;
      if (an->requires_grad) {
        auto& ga = detail::grad_buffer(*an);
        if (kind == ElementwiseKind::mul) {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bn->value[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
        }
      }
      if (bn->requires_grad) {
        auto& gb = detail::grad_buffer(*bn);
        switch (kind) {
          case ElementwiseKind::add:
            for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
            break;
          case ElementwiseKind::sub:
            for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
            break;
          case ElementwiseKind::mul:
            for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * an->value[i];
            break;
        }
      }
    });
  }
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseKind::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseKind::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseKind::mul); }

/// Row-vector bias broadcast over rows: x[m x n] + bias[n].
inline Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.numel() != n) {
    throw DimensionError("add_bias: bias " + bias.shape().str() + " does not match columns of " +
                         x.shape().str());
  }
  Tensor out(x.shape());
  auto xv = x.values();
  auto bv = bias.values();
  auto z = out.mutable_values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) z[i * n + j] = xv[i * n + j] + bv[j];
  }
  if (detail::should_record({&x, &bias})) {
    detail::record(out, {&x, &bias}, [o = out.handle(), xn = x.handle(), bn = bias.handle(), m, n] {
      if (o->grad.empty()) return;
      const auto& g = o->grad;
      if (xn->requires_grad) {
        auto& gx = detail::grad_buffer(*xn);
        for (std::size_t i = 0; i < m * n; ++i) gx[i] += g[i];
      }
      if (bn->requires_grad) {
        auto& gb = detail::grad_buffer(*bn);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
      }
    });
  }
  return out;
}

/// alpha * x + beta, elementwise.
inline Tensor affine(const Tensor& x, double alpha, double beta) {
  Tensor out(x.shape());
  auto xv = x.values();
  auto z = out.mutable_values();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = alpha * xv[i] + beta;
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle(), alpha] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += alpha * o->grad[i];
    });
  }
  return out;
}

inline Tensor scale(const Tensor& x, double c) { return affine(x, c, 0.0); }
inline Tensor one_minus(const Tensor& x) { return affine(x, -1.0, 1.0); }

inline Tensor activation(const Tensor& x, ActivationKind kind) {
  Tensor out(x.shape());
  auto xv = x.values();
  auto y = out.mutable_values();
  const std::size_t n = y.size();
  switch (kind) {
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < n; ++i) y[i] = detail::stable_sigmoid(xv[i]);
      break;
    case ActivationKind::tanh:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(xv[i]);
      break;
    case ActivationKind::relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
      break;
  }
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle(), kind, n] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      const auto& g = o->grad;
      const auto& y = o->value;
      switch (kind) {
        case ActivationKind::sigmoid:
          for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
          break;
        case ActivationKind::tanh:
          for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
          break;
        case ActivationKind::relu:
          // subgradient 0 at x == 0
          for (std::size_t i = 0; i < n; ++i) gx[i] += xn->value[i] > 0.0 ? g[i] : 0.0;
          break;
      }
    });
  }
  return out;
}

inline Tensor sigmoid(const Tensor& x) { return activation(x, ActivationKind::sigmoid); }
inline Tensor tanh(const Tensor& x) { return activation(x, ActivationKind::tanh); }
inline Tensor relu(const Tensor& x) { return activation(x, ActivationKind::relu); }

/// Row-wise softmax. Masked entries are exactly 0 and a fully masked row is
/// all zeros.
inline Tensor softmax_rows(const Tensor& x, const Mask* mask = nullptr) {
  const std::size_t m = x.rows(), n = x.cols();
  if (mask != nullptr && (mask->rows() != m || mask->cols() != n)) {
    throw DimensionError("softmax_rows: mask " + std::to_string(mask->rows()) + "x" +
                         std::to_string(mask->cols()) + " does not match " + x.shape().str());
  }
  Tensor out(x.shape());
  auto xv = x.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !mask->allowed(i, j)) continue;
      any = true;
      mx = std::max(mx, xv[i * n + j]);
    }
    if (!any) continue;  // sink row stays zero
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !mask->allowed(i, j)) continue;
      const double e = std::exp(xv[i * n + j] - mx);
      y[i * n + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= total;
  }
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle(), m, n] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      const auto& g = o->grad;
      const auto& y = o->value;
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
      }
    });
  }
  return out;
}

/// Per-row standardization (population variance) followed by gain and bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
  const std::size_t m = x.rows(), d = x.cols();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias " + gain.shape().str() + "/" + bias.shape().str() +
                         " do not match " + x.shape().str());
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  Tensor out(x.shape());
  std::vector<double> xhat(m * d);
  std::vector<double> inv_std(m);
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xv[i * d + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv[i * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xv[i * d + j] - mean) * inv;
      xhat[i * d + j] = h;
      y[i * d + j] = h * gv[j] + bv[j];
    }
  }
  if (detail::should_record({&x, &gain, &bias})) {
    detail::record(out, {&x, &gain, &bias},
                   [o = out.handle(), xn = x.handle(), gn = gain.handle(), bn = bias.handle(),
                    xhat = std::move(xhat), inv_std = std::move(inv_std), m, d] {
                     if (o->grad.empty()) return;
                     const auto& g = o->grad;
                     if (gn->requires_grad) {
                       auto& gg = detail::grad_buffer(*gn);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * xhat[i * d + j];
                       }
                     }
                     if (bn->requires_grad) {
                       auto& gb = detail::grad_buffer(*bn);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
                       }
                     }
                     if (xn->requires_grad) {
                       auto& gx = detail::grad_buffer(*xn);
                       const auto& gv = gn->value;
                       const double dd = static_cast<double>(d);
                       for (std::size_t i = 0; i < m; ++i) {
                         double s1 = 0.0, s2 = 0.0;
                         for (std::size_t j = 0; j < d; ++j) {
                           const double dh = g[i * d + j] * gv[j];
                           s1 += dh;
                           s2 += dh * xhat[i * d + j];
                         }
                         for (std::size_t j = 0; j < d; ++j) {
                           const double dh = g[i * d + j] * gv[j];
                           gx[i * d + j] +=
                               inv_std[i] / dd * (dd * dh - s1 - xhat[i * d + j] * s2);
                         }
                       }
                     }
                   });
  }
  return out;
}

/// Gathers rows of `table`; the reverse pass scatter-adds into them.
inline Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  const std::size_t vocab = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(vocab) + ")");
    }
  }
  Tensor out(Shape{ids.size(), d});
  auto tv = table.values();
  auto y = out.mutable_values();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const std::size_t src = static_cast<std::size_t>(ids[r]) * d;
    for (std::size_t j = 0; j < d; ++j) y[r * d + j] = tv[src + j];
  }
  if (detail::should_record({&table})) {
    detail::record(out, {&table},
                   [o = out.handle(), tn = table.handle(), idv = std::vector<int>(ids.begin(), ids.end()), d] {
                     if (o->grad.empty()) return;
                     auto& gt = detail::grad_buffer(*tn);
                     for (std::size_t r = 0; r < idv.size(); ++r) {
                       const std::size_t dst = static_cast<std::size_t>(idv[r]) * d;
                       for (std::size_t j = 0; j < d; ++j) gt[dst + j] += o->grad[r * d + j];
                     }
                   });
  }
  return out;
}

inline Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  return embedding_lookup(table, std::span<const int>(ids));
}

/// Column concatenation of equally tall blocks.
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + parts.front().shape().str() + " vs " +
                           p.shape().str());
    }
    total += p.cols();
  }
  Tensor out(Shape{m, total});
  auto y = out.mutable_values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    auto pv = p.values();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < c; ++j) y[i * total + offset + j] = pv[i * c + j];
    }
    offset += c;
  }
  bool track = false;
  if (Tape::active() != nullptr) {
    for (const auto& p : parts) track = track || p.requires_grad();
  }
  if (track) {
    out.set_requires_grad(true);
    std::vector<detail::NodePtr> nodes{out.handle()};
    for (const auto& p : parts) nodes.push_back(p.handle());
    Tape::active()->record(nodes, [nodes, m, total] {
      const auto& o = nodes[0];
      if (o->grad.empty()) return;
      std::size_t offset = 0;
      for (std::size_t k = 1; k < nodes.size(); ++k) {
        auto& pn = *nodes[k];
        const std::size_t c = pn.shape.cols();
        if (pn.requires_grad) {
          auto& gp = detail::grad_buffer(pn);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += o->grad[i * total + offset + j];
          }
        }
        offset += c;
      }
    });
  }
  return out;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) { return concat_cols(std::vector<Tensor>{a, b}); }

/// Row concatenation of equally wide blocks.
inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw DimensionError("concat_rows: column mismatch " + parts.front().shape().str() + " vs " +
                           p.shape().str());
    }
    total += p.rows();
  }
  Tensor out(Shape{total, n});
  auto y = out.mutable_values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto pv = p.values();
    std::copy(pv.begin(), pv.end(), y.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += pv.size();
  }
  bool track = false;
  if (Tape::active() != nullptr) {
    for (const auto& p : parts) track = track || p.requires_grad();
  }
  if (track) {
    out.set_requires_grad(true);
    std::vector<detail::NodePtr> nodes{out.handle()};
    for (const auto& p : parts) nodes.push_back(p.handle());
    Tape::active()->record(nodes, [nodes] {
      const auto& o = nodes[0];
      if (o->grad.empty()) return;
      std::size_t offset = 0;
      for (std::size_t k = 1; k < nodes.size(); ++k) {
        auto& pn = *nodes[k];
        const std::size_t len = pn.value.size();
        if (pn.requires_grad) {
          auto& gp = detail::grad_buffer(pn);
          for (std::size_t i = 0; i < len; ++i) gp[i] += o->grad[offset + i];
        }
        offset += len;
      }
    });
  }
  return out;
}

inline Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  const std::size_t n = x.cols();
  if (begin + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + x.shape().str());
  }
  auto xv = x.values();
  Tensor out(Shape{count, n},
             std::vector<double>(xv.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                 xv.begin() + static_cast<std::ptrdiff_t>((begin + count) * n)));
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle(), begin, n] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      for (std::size_t i = 0; i < o->grad.size(); ++i) gx[begin * n + i] += o->grad[i];
    });
  }
  return out;
}

inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  const std::size_t m = x.rows(), n = x.cols();
  if (begin + count > n) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + x.shape().str());
  }
  Tensor out(Shape{m, count});
  auto xv = x.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < count; ++j) y[i * count + j] = xv[i * n + begin + j];
  }
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle(), begin, count, m, n] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < count; ++j) gx[i * n + begin + j] += o->grad[i * count + j];
      }
    });
  }
  return out;
}

/// Column means: [m x d] -> [1 x d].
inline Tensor mean_rows(const Tensor& x) {
  const std::size_t m = x.rows(), d = x.cols();
  if (m == 0) throw DimensionError("mean_rows: no rows in " + x.shape().str());
  Tensor out(Shape{1, d});
  auto xv = x.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) y[j] += xv[i * d + j];
  }
  for (std::size_t j = 0; j < d; ++j) y[j] /= static_cast<double>(m);
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle(), m, d] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      const double inv = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += o->grad[j] * inv;
      }
    });
  }
  return out;
}

/// Means of consecutive row blocks: block k spans lengths[k] rows.
inline Tensor segment_mean(const Tensor& x, std::span<const std::size_t> lengths) {
  const std::size_t d = x.cols();
  std::size_t total = 0;
  for (std::size_t len : lengths) {
    if (len == 0) throw DimensionError("segment_mean: empty segment");
    total += len;
  }
  if (total != x.rows()) {
    throw DimensionError("segment_mean: segments cover " + std::to_string(total) + " rows of " +
                         x.shape().str());
  }
  Tensor out(Shape{lengths.size(), d});
  auto xv = x.values();
  auto y = out.mutable_values();
  std::size_t row = 0;
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    for (std::size_t r = 0; r < lengths[k]; ++r, ++row) {
      for (std::size_t j = 0; j < d; ++j) y[k * d + j] += xv[row * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) y[k * d + j] /= static_cast<double>(lengths[k]);
  }
  if (detail::should_record({&x})) {
    detail::record(out, {&x},
                   [o = out.handle(), xn = x.handle(),
                    lv = std::vector<std::size_t>(lengths.begin(), lengths.end()), d] {
                     if (o->grad.empty()) return;
                     auto& gx = detail::grad_buffer(*xn);
                     std::size_t row = 0;
                     for (std::size_t k = 0; k < lv.size(); ++k) {
                       const double inv = 1.0 / static_cast<double>(lv[k]);
                       for (std::size_t r = 0; r < lv[k]; ++r, ++row) {
                         for (std::size_t j = 0; j < d; ++j) gx[row * d + j] += o->grad[k * d + j] * inv;
                       }
                     }
                   });
  }
  return out;
}

/// Row sums: [m x n] -> [m x 1].
inline Tensor row_sum(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out(Shape{m, 1});
  auto xv = x.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += xv[i * n + j];
    y[i] = s;
  }
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle(), m, n] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += o->grad[i];
      }
    });
  }
  return out;
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor out = Tensor::scalar(s);
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle()] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      for (double& g : gx) g += o->grad[0];
    });
  }
  return out;
}

inline Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

/// Scales row i of x[m x n] by g[i] (g is [m x 1]).
inline Tensor scale_rows(const Tensor& x, const Tensor& g) {
  const std::size_t m = x.rows(), n = x.cols();
  if (g.numel() != m) {
    throw DimensionError("scale_rows: factor " + g.shape().str() + " does not match rows of " +
                         x.shape().str());
  }
  Tensor out(x.shape());
  auto xv = x.values();
  auto gv = g.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = xv[i * n + j] * gv[i];
  }
  if (detail::should_record({&x, &g})) {
    detail::record(out, {&x, &g}, [o = out.handle(), xn = x.handle(), gn = g.handle(), m, n] {
      if (o->grad.empty()) return;
      const auto& go = o->grad;
      if (xn->requires_grad) {
        auto& gx = detail::grad_buffer(*xn);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[i * n + j] * gn->value[i];
        }
      }
      if (gn->requires_grad) {
        auto& gg = detail::grad_buffer(*gn);
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += go[i * n + j] * xn->value[i * n + j];
          gg[i] += s;
        }
      }
    });
  }
  return out;
}

/// out[t, ids[s]] += x[t, s]: folds per-position weights onto vocabulary ids.
inline Tensor scatter_cols(const Tensor& x, std::span<const int> ids, std::size_t width) {
  const std::size_t m = x.rows(), n = x.cols();
  if (ids.size() != n) {
    throw DimensionError("scatter_cols: " + std::to_string(ids.size()) + " ids for " +
                         x.shape().str());
  }
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= width) {
      throw IndexError("scatter_cols: id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(width) + ")");
    }
  }
  Tensor out(Shape{m, width});
  auto xv = x.values();
  auto y = out.mutable_values();
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      y[t * width + static_cast<std::size_t>(ids[s])] += xv[t * n + s];
    }
  }
  if (detail::should_record({&x})) {
    detail::record(out, {&x},
                   [o = out.handle(), xn = x.handle(), idv = std::vector<int>(ids.begin(), ids.end()), m, n,
                    width] {
                     if (o->grad.empty()) return;
                     auto& gx = detail::grad_buffer(*xn);
                     for (std::size_t t = 0; t < m; ++t) {
                       for (std::size_t s = 0; s < n; ++s) {
                         gx[t * n + s] += o->grad[t * width + static_cast<std::size_t>(idv[s])];
                       }
                     }
                   });
  }
  return out;
}

/// Inverted dropout. Identity (same tensor) when not training or p == 0.
inline Tensor dropout(const Tensor& x, double p, std::uint64_t seed, bool train) {
  if (!(p >= 0.0 && p < 1.0)) throw ContractError("dropout: rate must be in [0, 1)");
  if (!train || p == 0.0) return x;
  Rng rng(seed);
  std::vector<double> keep(x.numel());
  const double s = 1.0 / (1.0 - p);
  for (double& k : keep) k = uniform01(rng) < p ? 0.0 : s;
  Tensor out(x.shape());
  auto xv = x.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * keep[i];
  if (detail::should_record({&x})) {
    detail::record(out, {&x}, [o = out.handle(), xn = x.handle(), keep = std::move(keep)] {
      if (o->grad.empty()) return;
      auto& gx = detail::grad_buffer(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i] * keep[i];
    });
  }
  return out;
}

/// Mean over rows t of weights[t] * -log(max(P[t, targets[t]], floor)).
/// Weights are constants.
inline Tensor weighted_nll(const Tensor& probs, std::span<const int> targets,
                           std::span<const double> weights, double floor = 1e-12) {
  const std::size_t steps = probs.rows(), width = probs.cols();
  if (targets.size() != steps || weights.size() != steps) {
    throw DimensionError("weighted_nll: " + std::to_string(targets.size()) + " targets and " +
                         std::to_string(weights.size()) + " weights for " + probs.shape().str());
  }
  if (steps == 0) throw DimensionError("weighted_nll: no steps");
  auto pv = probs.values();
  double total = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const int y = targets[t];
    if (y < 0 || static_cast<std::size_t>(y) >= width) {
      throw IndexError("weighted_nll: target " + std::to_string(y) + " out of range at step " +
                       std::to_string(t));
    }
    const double p = std::max(pv[t * width + static_cast<std::size_t>(y)], floor);
    const double term = -std::log(p) * weights[t];
    if (!std::isfinite(term)) {
      throw NumericError("weighted_nll: non-finite loss at step " + std::to_string(t));
    }
    total += term;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(steps));
  if (detail::should_record({&probs})) {
    detail::record(out, {&probs},
                   [o = out.handle(), pn = probs.handle(), tv = std::vector<int>(targets.begin(), targets.end()),
                    wv = std::vector<double>(weights.begin(), weights.end()), steps, width, floor] {
                     if (o->grad.empty()) return;
                     auto& gp = detail::grad_buffer(*pn);
                     const double scale = o->grad[0] / static_cast<double>(steps);
                     for (std::size_t t = 0; t < steps; ++t) {
                       const std::size_t idx = t * width + static_cast<std::size_t>(tv[t]);
                       const double p = pn->value[idx];
                       if (p > floor) gp[idx] -= scale * wv[t] / p;
                     }
                   });
  }
  return out;
}

/// Mean logistic loss of logits [m x 1] against 0/1 labels.
inline Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  const std::size_t m = logits.numel();
  if (labels.size() != m) {
    throw DimensionError("bce_with_logits: " + std::to_string(labels.size()) + " labels for " +
                         logits.shape().str());
  }
  if (m == 0) throw DimensionError("bce_with_logits: empty batch");
  auto xv = logits.values();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = xv[i];
    // softplus(x) - y * x, computed without overflow
    total += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) - labels[i] * x;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(m));
  if (detail::should_record({&logits})) {
    detail::record(out, {&logits},
                   [o = out.handle(), xn = logits.handle(),
                    lv = std::vector<double>(labels.begin(), labels.end()), m] {
                     if (o->grad.empty()) return;
                     auto& gx = detail::grad_buffer(*xn);
                     const double s = o->grad[0] / static_cast<double>(m);
                     for (std::size_t i = 0; i < m; ++i) {
                       gx[i] += s * (detail::stable_sigmoid(xn->value[i]) - lv[i]);
                     }
                   });
  }
  return out;
}

}  // namespace corpg
