// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fairview/common.hpp"

namespace fairview::classifier {

enum class NeighborMetric { js, l2 };

namespace detail {
// x * log(x / m) with the 0 log 0 = 0 convention.
template <typename T>
double xlogx_over(T x, T m) {
  if (x <= T(0)) return 0.0;
  return static_cast<double>(x) * std::log(static_cast<double>(x) / static_cast<double>(m));
}
}  // namespace detail

template <typename T>
void require_distribution(std::span<const T> p) {
  double sum = 0.0;
  for (auto v : p) {
    require(std::isfinite(static_cast<double>(v)) && v >= T(0), Errc::config_invalid,
            "JS divergence requires nonnegative probabilities");
    sum += static_cast<double>(v);
  }
  require(std::abs(sum - 1.0) < 1e-6, Errc::config_invalid,
          "JS divergence requires distributions summing to 1");
}

/// Jensen-Shannon divergence with natural log: JSD(P,Q) = KL(P||M)/2 +
/// KL(Q||M)/2, M = (P+Q)/2. Symmetric, bounded by ln 2, zero iff P == Q.
template <typename T>
double jsd(std::span<const T> p, std::span<const T> q) {
  require(p.size() == q.size(), Errc::config_invalid, "JSD dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const T m = (p[k] + q[k]) / T(2);
    acc += 0.5 * detail::xlogx_over(p[k], m) + 0.5 * detail::xlogx_over(q[k], m);
  }
  return std::max(0.0, acc);
}

/// d JSD / d P_k = log(P_k / M_k) / 2. Probabilities are clamped away from
/// zero inside the log only; exact zeros in the value path stay exact.
template <typename T>
void jsd_grad_p(std::span<const T> p, std::span<const T> q, T* grad) {
  constexpr double tiny = 1e-12;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = std::max(static_cast<double>(p[k]), tiny);
    const double mk = std::max(0.5 * (static_cast<double>(p[k]) + static_cast<double>(q[k])), tiny);
    grad[k] = static_cast<T>(0.5 * std::log(pk / mk));
  }
}

/// Sum of distances between one source vector and its m neighbor vectors.
/// JS treats inputs as distributions (validated); L2 is the squared norm on
/// raw vectors. Neighbors are constants for differentiation.
template <typename T>
double neighbor_loss(std::span<const T> src, const std::vector<std::vector<T>>& neighbors,
                     NeighborMetric metric) {
  double acc = 0.0;
  if (metric == NeighborMetric::js) {
    require_distribution(src);
    for (const auto& nb : neighbors) {
      require_distribution(std::span<const T>(nb));
      acc += jsd(src, std::span<const T>(nb));
    }
  } else {
    for (const auto& nb : neighbors) {
      require(nb.size() == src.size(), Errc::config_invalid, "embedding dimension mismatch");
      for (std::size_t k = 0; k < src.size(); ++k) {
        const double d = static_cast<double>(src[k]) - static_cast<double>(nb[k]);
        acc += d * d;
      }
    }
  }
  return acc;
}

/// Label-smoothed cross entropy on logits; fills dlogits with softmax - t.
/// Binary targets with smoothing 0.1 are (0.95, 0.05).
template <typename T>
double smoothed_cross_entropy(std::span<const T> logits, int label, double smoothing,
                              T* dlogits) {
  const std::size_t k = logits.size();
  double mx = static_cast<double>(logits[0]);
  for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, static_cast<double>(logits[i]));
  double lse = 0.0;
  for (std::size_t i = 0; i < k; ++i) lse += std::exp(static_cast<double>(logits[i]) - mx);
  lse = mx + std::log(lse);

  const double t_wrong = smoothing / static_cast<double>(k);
  const double t_right = 1.0 - smoothing * static_cast<double>(k - 1) / static_cast<double>(k);
  double loss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double t = (static_cast<int>(i) == label) ? t_right : t_wrong;
    const double logp = static_cast<double>(logits[i]) - lse;
    loss -= t * logp;
    if (dlogits) dlogits[i] = static_cast<T>(std::exp(logp) - t);
  }
  return loss;
}

/// Smoothed target vector, exposed for tests.
inline std::vector<double> smoothed_targets(int label, std::size_t k, double smoothing) {
  std::vector<double> t(k, smoothing / static_cast<double>(k));
  t[static_cast<std::size_t>(label)] =
      1.0 - smoothing * static_cast<double>(k - 1) / static_cast<double>(k);
  return t;
}

}  // namespace fairview::classifier
