// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <vector>

#include "fairview/common.hpp"

namespace fairview::evidential {

/// Dirichlet head quantities for one sample: alpha = e + 1, S = sum(alpha),
/// p_hat = alpha / S, u = K / S.
template <typename T>
struct DirichletOutput {
  std::vector<T> evidence;
  std::vector<T> alpha;
  T strength = T(0);
  std::vector<T> p_hat;
  T uncertainty = T(0);
};

template <typename T>
DirichletOutput<T> evidence_to_dirichlet(const std::vector<T>& evidence) {
  DirichletOutput<T> out;
  out.evidence = evidence;
  out.alpha.resize(evidence.size());
  T s = T(0);
  for (std::size_t k = 0; k < evidence.size(); ++k) {
    require(std::isfinite(static_cast<double>(evidence[k])) && evidence[k] >= T(0),
            Errc::config_invalid, "evidence must be finite and nonnegative");
    out.alpha[k] = evidence[k] + T(1);
    s += out.alpha[k];
  }
  out.strength = s;
  out.p_hat.resize(evidence.size());
  for (std::size_t k = 0; k < evidence.size(); ++k) out.p_hat[k] = out.alpha[k] / s;
  out.uncertainty = static_cast<T>(evidence.size()) / s;
  return out;
}

/// Per-sample evidential loss: sum_k (y_k - p_k)^2 + p_k (1 - p_k) / (S + 1).
template <typename T>
T edl_sample_loss(const std::vector<T>& y_onehot, const std::vector<T>& alpha) {
  require(y_onehot.size() == alpha.size(), Errc::config_invalid,
          "one-hot / alpha dimension mismatch");
  T hits = T(0);
  for (auto v : y_onehot) {
    require(v == T(0) || v == T(1), Errc::config_invalid, "y must be one-hot");
    hits += v;
  }
  require(hits == T(1), Errc::config_invalid, "y must be one-hot");
  T s = T(0);
  for (auto a : alpha) {
    require(a >= T(1), Errc::config_invalid, "alpha entries must be >= 1");
    s += a;
  }
  T loss = T(0);
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    const T p = alpha[k] / s;
    const T d = y_onehot[k] - p;
    loss += d * d + p * (T(1) - p) / (s + T(1));
  }
  return loss;
}

/// d(edl_sample_loss)/d(alpha_j), analytic.
template <typename T>
std::vector<T> edl_sample_loss_grad(const std::vector<T>& y_onehot,
                                    const std::vector<T>& alpha) {
  const std::size_t K = alpha.size();
  T s = T(0);
  for (auto a : alpha) s += a;
  std::vector<T> p(K), dLdp(K);
  T dLdS_at_fixed_p = T(0);
  for (std::size_t k = 0; k < K; ++k) {
    p[k] = alpha[k] / s;
    dLdp[k] = T(-2) * (y_onehot[k] - p[k]) + (T(1) - T(2) * p[k]) / (s + T(1));
    dLdS_at_fixed_p -= p[k] * (T(1) - p[k]) / ((s + T(1)) * (s + T(1)));
  }
  std::vector<T> grad(K);
  for (std::size_t j = 0; j < K; ++j) {
    T acc = dLdS_at_fixed_p;  // dS/dalpha_j = 1
    for (std::size_t k = 0; k < K; ++k) {
      const T dpk = ((j == k ? T(1) : T(0)) - p[k]) / s;
      acc += dLdp[k] * dpk;
    }
    grad[j] = acc;
  }
  return grad;
}

/// KL( Dir(alpha_tilde) || Dir(1,...,1) ), closed form.
template <typename T>
T kl_to_uniform(const std::vector<T>& alpha_tilde) {
  const std::size_t K = alpha_tilde.size();
  T s = T(0);
  for (auto a : alpha_tilde) {
    require(a >= T(1), Errc::config_invalid, "alpha_tilde entries must be >= 1");
    s += a;
  }
  double kl = std::lgamma(static_cast<double>(s)) -
              std::lgamma(static_cast<double>(K));
  const double psi_s = boost::math::digamma(static_cast<double>(s));
  for (std::size_t k = 0; k < K; ++k) {
    const double a = static_cast<double>(alpha_tilde[k]);
    kl -= std::lgamma(a);
    kl += (a - 1.0) * (boost::math::digamma(a) - psi_s);
  }
  return static_cast<T>(kl);
}

/// d(kl_to_uniform)/d(alpha_tilde_j) = (a_j - 1) psi'(a_j) - (S - K) psi'(S).
template <typename T>
std::vector<T> kl_to_uniform_grad(const std::vector<T>& alpha_tilde) {
  const std::size_t K = alpha_tilde.size();
  T s = T(0);
  for (auto a : alpha_tilde) s += a;
  const double tri_s = boost::math::trigamma(static_cast<double>(s));
  const double common = (static_cast<double>(s) - static_cast<double>(K)) * tri_s;
  std::vector<T> grad(K);
  for (std::size_t j = 0; j < K; ++j) {
    const double a = static_cast<double>(alpha_tilde[j]);
    grad[j] = static_cast<T>((a - 1.0) * boost::math::trigamma(a) - common);
  }
  return grad;
}

struct AnnealSchedule {
  enum class Mode { off, linear };
  Mode mode = Mode::off;
  double anneal_epochs = 10.0;  // T in lambda_t = min(1, t / T)

  double lambda_at(double t) const {
    if (mode == Mode::off) return 0.0;
    if (anneal_epochs <= 0.0) return 1.0;
    return std::min(1.0, t / anneal_epochs);
  }
};

/// Misleading-evidence removal: alpha_tilde = y + (1 - y) * alpha.
template <typename T>
std::vector<T> remove_correct_evidence(const std::vector<T>& y_onehot,
                                       const std::vector<T>& alpha) {
  std::vector<T> out(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k)
    out[k] = y_onehot[k] + (T(1) - y_onehot[k]) * alpha[k];
  return out;
}

/// Batch total: sum_i L_i + lambda sum_i KL(alpha_tilde_i). Plain sums, no
/// hidden normalization. Optionally accumulates d(total)/d(alpha) rows.
template <typename T>
T edl_total_loss_lambda(const std::vector<std::vector<T>>& ys,
                        const std::vector<std::vector<T>>& alphas, double lambda_value,
                        std::vector<std::vector<T>>* grad_alpha = nullptr) {
  require(ys.size() == alphas.size(), Errc::config_invalid,
          "batch size mismatch between labels and alphas");
  const T lambda = static_cast<T>(lambda_value);
  T total = T(0);
  if (grad_alpha) grad_alpha->assign(alphas.size(), {});
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    total += edl_sample_loss(ys[i], alphas[i]);
    std::vector<T> grad;
    if (grad_alpha) grad = edl_sample_loss_grad(ys[i], alphas[i]);
    if (lambda > T(0)) {
      const auto tilde = remove_correct_evidence(ys[i], alphas[i]);
      total += lambda * kl_to_uniform(tilde);
      if (grad_alpha) {
        const auto kg = kl_to_uniform_grad(tilde);
        for (std::size_t k = 0; k < grad.size(); ++k)
          grad[k] += lambda * kg[k] * (T(1) - ys[i][k]);  // d alpha_tilde / d alpha
      }
    }
    if (grad_alpha) (*grad_alpha)[i] = std::move(grad);
  }
  return total;
}

/// Schedule-driven form of Eq. 4: lambda_t comes from the anneal schedule at
/// time t (epochs); mode "off" fixes lambda_t = 0.
template <typename T>
T edl_total_loss(const std::vector<std::vector<T>>& ys,
                 const std::vector<std::vector<T>>& alphas, const AnnealSchedule& schedule,
                 double t, std::vector<std::vector<T>>* grad_alpha = nullptr) {
  return edl_total_loss_lambda(ys, alphas, schedule.lambda_at(t), grad_alpha);
}

}  // namespace fairview::evidential
