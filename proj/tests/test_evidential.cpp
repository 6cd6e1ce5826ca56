// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "fairview/evidential/edl.hpp"
#include "fairview/rng.hpp"

using namespace fairview;
using namespace fairview::evidential;

namespace {

// Independent Monte-Carlo oracle: KL(Dir(a) || Dir(1)) estimated from draws
// p ~ Dir(a) of log Dir(p|a) minus log Dir(p|1) = lgamma(K).
double mc_kl_to_uniform(const std::vector<double>& alpha, std::size_t draws,
                        std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  const std::size_t k = alpha.size();
  double s = 0.0;
  for (auto a : alpha) s += a;
  double log_norm = std::lgamma(s);
  for (auto a : alpha) log_norm -= std::lgamma(a);

  double acc = 0.0;
  std::vector<double> g(k);
  for (std::size_t d = 0; d < draws; ++d) {
    double tot = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      std::gamma_distribution<double> gamma(alpha[i], 1.0);
      g[i] = gamma(engine);
      tot += g[i];
    }
    double logpdf = log_norm;
    for (std::size_t i = 0; i < k; ++i) logpdf += (alpha[i] - 1.0) * std::log(g[i] / tot);
    acc += logpdf;
  }
  return acc / static_cast<double>(draws) - std::lgamma(static_cast<double>(k));
}

}  // namespace

TEST_CASE("evidence_to_dirichlet: zero and (8,0) fixtures") {
  const auto zero = evidence_to_dirichlet<double>({0.0, 0.0});
  CHECK(zero.alpha == std::vector<double>{1.0, 1.0});
  CHECK(zero.strength == doctest::Approx(2.0));
  CHECK(zero.p_hat[0] == doctest::Approx(0.5));
  CHECK(zero.p_hat[1] == doctest::Approx(0.5));
  CHECK(zero.uncertainty == doctest::Approx(1.0));

  const auto strong = evidence_to_dirichlet<double>({8.0, 0.0});
  CHECK(strong.strength == doctest::Approx(10.0));
  CHECK(strong.p_hat[0] == doctest::Approx(0.9));
  CHECK(strong.p_hat[1] == doctest::Approx(0.1));
  CHECK(strong.uncertainty == doctest::Approx(0.2));
}

TEST_CASE("evidence scaling decreases uncertainty, keeps the argmax") {
  const auto a = evidence_to_dirichlet<double>({3.0, 1.0});
  const auto b = evidence_to_dirichlet<double>({30.0, 10.0});
  CHECK(b.uncertainty < a.uncertainty);
  CHECK((a.p_hat[0] > a.p_hat[1]) == (b.p_hat[0] > b.p_hat[1]));
}

TEST_CASE("evidence validation") {
  CHECK_THROWS_AS(evidence_to_dirichlet<double>({-0.1, 0.0}), Error);
  CHECK_THROWS_AS(evidence_to_dirichlet<double>({std::nan(""), 0.0}), Error);
}

TEST_CASE("u*S == K identically; u decreases in any evidence") {
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> e = {rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0, 20)};
    const auto d = evidence_to_dirichlet<double>(e);
    CHECK(d.uncertainty * d.strength == doctest::Approx(3.0).epsilon(1e-12));
    double psum = 0.0;
    for (auto p : d.p_hat) psum += p;
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-9));
    auto e2 = e;
    e2[t % 3] += 0.5;
    CHECK(evidence_to_dirichlet<double>(e2).uncertainty < d.uncertainty);
  }
}

TEST_CASE("edl_sample_loss: hand fixture 1/3") {
  const double loss = edl_sample_loss<double>({1.0, 0.0}, {2.0, 1.0});
  CHECK(loss == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("edl_sample_loss: confident-correct limit approaches zero") {
  CHECK(edl_sample_loss<double>({1.0, 0.0}, {1e7, 1.0}) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("edl_sample_loss: nonnegative on 1000 random draws") {
  Rng rng(17);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 2 + rng.uniform_index(3);
    std::vector<double> y(k, 0.0);
    y[rng.uniform_index(k)] = 1.0;
    std::vector<double> alpha(k);
    for (auto& a : alpha) a = 1.0 + rng.uniform(0, 30);
    CHECK(edl_sample_loss<double>(y, alpha) >= 0.0);
  }
}

TEST_CASE("edl_sample_loss decreases in correct-class alpha") {
  double prev = 1e300;
  for (double a = 1.0; a <= 50.0; a += 0.5) {
    const double l = edl_sample_loss<double>({1.0, 0.0}, {a, 2.0});
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("kl_to_uniform: fixtures") {
  CHECK(kl_to_uniform<double>({1.0, 1.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kl_to_uniform<double>({2.0, 1.0}) ==
        doctest::Approx(std::log(2.0) - 0.5).epsilon(1e-9));
}

TEST_CASE("kl_to_uniform: nonnegative on 1000 random draws") {
  Rng rng(23);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 2 + rng.uniform_index(3);
    std::vector<double> alpha(k);
    for (auto& a : alpha) a = 1.0 + rng.uniform(0, 20);
    CHECK(kl_to_uniform<double>(alpha) >= -1e-12);
  }
}

TEST_CASE("kl_to_uniform matches Monte-Carlo estimates within 1e-2") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> alpha = {1.0 + rng.uniform(0, 4), 1.0 + rng.uniform(0, 4)};
    const double closed = kl_to_uniform<double>(alpha);
    const double mc = mc_kl_to_uniform(alpha, 1000000, 100 + static_cast<std::uint64_t>(t));
    CHECK(std::abs(closed - mc) < 1e-2);
  }
}

TEST_CASE("edl_total_loss: off schedule equals plain sum; composition fixture") {
  AnnealSchedule off;
  const std::vector<std::vector<double>> ys = {{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<std::vector<double>> alphas = {{2.0, 1.0}, {1.5, 3.0}};
  const double total = edl_total_loss(ys, alphas, off, 5.0);
  const double expect =
      edl_sample_loss<double>(ys[0], alphas[0]) + edl_sample_loss<double>(ys[1], alphas[1]);
  CHECK(total == doctest::Approx(expect).epsilon(1e-15));

  // single sample, lambda = 1: KL(alpha_tilde = (1,1)) = 0
  const double single =
      edl_total_loss_lambda<double>({{1.0, 0.0}}, {{2.0, 1.0}}, 1.0);
  CHECK(single == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("anneal schedule shape") {
  AnnealSchedule lin;
  lin.mode = AnnealSchedule::Mode::linear;
  lin.anneal_epochs = 10.0;
  CHECK(lin.lambda_at(0.0) == doctest::Approx(0.0));
  CHECK(lin.lambda_at(5.0) == doctest::Approx(0.5));
  CHECK(lin.lambda_at(20.0) == doctest::Approx(1.0));
  AnnealSchedule off;
  CHECK(off.lambda_at(100.0) == doctest::Approx(0.0));
}

TEST_CASE("edl gradients match central finite differences") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(2);
    std::vector<std::vector<double>> ys(3), alphas(3);
    for (std::size_t i = 0; i < 3; ++i) {
      ys[i].assign(k, 0.0);
      ys[i][rng.uniform_index(k)] = 1.0;
      alphas[i].resize(k);
      for (auto& a : alphas[i]) a = 1.05 + rng.uniform(0, 6);
    }
    const double lambda = trial % 2 == 0 ? 0.7 : 0.0;
    std::vector<std::vector<double>> grads;
    edl_total_loss_lambda<double>(ys, alphas, lambda, &grads);

    const double eps = 1e-6;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double orig = alphas[i][j];
        alphas[i][j] = orig + eps;
        const double up = edl_total_loss_lambda<double>(ys, alphas, lambda);
        alphas[i][j] = orig - eps;
        const double down = edl_total_loss_lambda<double>(ys, alphas, lambda);
        alphas[i][j] = orig;
        const double fd = (up - down) / (2 * eps);
        const double rel = std::abs(grads[i][j] - fd) /
                           std::max(1e-8, std::abs(grads[i][j]) + std::abs(fd));
        CHECK(rel < 1e-4);
      }
    }
  }
}

TEST_CASE("class permutation equivariance of p_hat") {
  const auto d = evidence_to_dirichlet<double>({5.0, 2.0, 0.5});
  const auto dp = evidence_to_dirichlet<double>({0.5, 5.0, 2.0});
  CHECK(d.p_hat[0] == doctest::Approx(dp.p_hat[1]));
  CHECK(d.p_hat[1] == doctest::Approx(dp.p_hat[2]));
  CHECK(d.p_hat[2] == doctest::Approx(dp.p_hat[0]));
}
