// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fairview/array_store.hpp"
#include "fairview/nn/layers.hpp"
#include "fairview/sha256.hpp"

namespace fairview::nn {

template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L* add(const std::string& name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    names_.push_back(name);
    layers_.push_back(std::move(layer));
    return raw;
  }

  void init(Rng& rng) {
    for (auto& l : layers_) l->init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, bool keep_cache = true) {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, train, keep_cache);
    return h;
  }

  /// Backward through the whole stack; requires a preceding cached forward.
  Tensor<T> backward(const Tensor<T>& dy, bool accumulate_param_grads = true) {
    Tensor<T> g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;)
      g = layers_[i]->backward(g, accumulate_param_grads);
    return g;
  }

  std::vector<ParamRef<T>> state() {
    std::vector<ParamRef<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(names_[i], out);
    return out;
  }

  /// Trainable parameters only (entries with gradients).
  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (auto& p : state())
      if (p.grad != nullptr) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) p.grad->fill(T(0));
  }

  void save_into(ArrayStore& store, const std::string& prefix) {
    for (auto& p : state()) {
      std::vector<float> data(p.value->size());
      for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = static_cast<float>((*p.value)[i]);
      store.add(prefix + "." + p.name, p.value->shape(), std::move(data));
    }
  }

  void load_from(const ArrayStore& store, const std::string& prefix) {
    for (auto& p : state()) {
      const auto& entry = store.get(prefix + "." + p.name);
      require(entry.data.size() == p.value->size(), Errc::manifest_payload_mismatch,
              "array size mismatch for " + p.name);
      for (std::size_t i = 0; i < entry.data.size(); ++i)
        (*p.value)[i] = static_cast<T>(entry.data[i]);
    }
  }

  /// SHA-256 over all state tensors (parameters and running statistics).
  std::string state_checksum() {
    std::string blob;
    for (auto& p : state()) {
      blob += p.name;
      blob.append(reinterpret_cast<const char*>(p.value->data()),
                  p.value->size() * sizeof(T));
    }
    return sha256_hex(blob.data(), blob.size());
  }

  std::size_t layer_count() const { return layers_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Adam with bias correction. State arrays are keyed by parameter order,
/// which is fixed by network construction order.
template <typename T>
class Adam {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(Config cfg = {}) : cfg_(cfg) {}

  void step(std::vector<ParamRef<T>>& params) {
    if (m_.empty()) {
      for (auto& p : params) {
        m_.emplace_back(p.value->shape());
        v_.emplace_back(p.value->shape());
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto& value = *params[pi].value;
      auto& grad = *params[pi].grad;
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        value[i] = static_cast<T>(static_cast<double>(value[i]) -
                                  cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps));
      }
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

 private:
  Config cfg_;
  std::uint64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

/// Numerically stable row-wise softmax for (N, K) tensors.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const T* in = logits.data() + r * k;
    T* o = out.data() + r * k;
    T mx = in[0];
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, in[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      o[i] = static_cast<T>(std::exp(static_cast<double>(in[i] - mx)));
      sum += static_cast<double>(o[i]);
    }
    for (std::size_t i = 0; i < k; ++i) o[i] = static_cast<T>(static_cast<double>(o[i]) / sum);
  }
  return out;
}

/// softplus(x) = log(1 + e^x), computed without overflow.
template <typename T>
T softplus(T x) {
  if (x > T(30)) return x;
  if (x < T(-30)) return std::exp(x);
  return std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace fairview::nn
