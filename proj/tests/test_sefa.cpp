// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "fairview/rng.hpp"
#include "fairview/common.hpp"
#include "fairview/semantics/sefa.hpp"

using namespace fairview;
using namespace fairview::semantics;

namespace {

std::vector<double> random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  std::vector<double> m(rows * cols);
  for (auto& v : m) v = rng.normal();
  return m;
}

Eigen::MatrixXd to_eigen(const std::vector<double>& m, std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m[r * cols + c];
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

TEST_CASE("factorize: diag(3,1) hand fixture") {
  const std::vector<double> a = {3.0, 0.0, 0.0, 1.0};
  const auto basis = factorize(a, 2, 2, 2);
  CHECK(basis.eigenvalues[0] == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(basis.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(basis.directions[0][0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(basis.directions[0][1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(basis.directions[1][0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(basis.directions[1][1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("factorize: identity input has a degenerate, orthonormal spectrum") {
  const std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const auto basis = factorize(eye, 3, 3, 3);
  for (auto ev : basis.eigenvalues) CHECK(ev == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(dot(basis.directions[i], basis.directions[j]) ==
            doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
  // deterministic: same input twice gives the identical basis
  const auto again = factorize(eye, 3, 3, 3);
  CHECK(again.directions == basis.directions);
}

TEST_CASE("factorize: spectral reconstruction of AtA on a random 8x4 matrix") {
  Rng rng(13);
  const auto a = random_matrix(rng, 8, 4);
  const auto basis = factorize(a, 8, 4, 4);
  const Eigen::MatrixXd am = to_eigen(a, 8, 4);
  const Eigen::MatrixXd ata = am.transpose() * am;

  Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(4, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    Eigen::VectorXd v(4);
    for (std::size_t j = 0; j < 4; ++j) v[static_cast<Eigen::Index>(j)] = basis.directions[i][j];
    recon += basis.eigenvalues[i] * v * v.transpose();
  }
  CHECK((recon - ata).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("factorize: 50 random matrices satisfy the basis contract") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cols = 2 + rng.uniform_index(63);  // up to 64
    const std::size_t rows = cols + rng.uniform_index(64);
    const auto a = random_matrix(rng, rows, cols);
    const auto basis = factorize(a, rows, cols, cols);
    const Eigen::MatrixXd am = to_eigen(a, rows, cols);
    const Eigen::MatrixXd ata = am.transpose() * am;

    for (std::size_t i = 0; i < cols; ++i) {
      // descending order
      if (i + 1 < cols) CHECK(basis.eigenvalues[i] >= basis.eigenvalues[i + 1] - 1e-9);
      // orthonormality
      for (std::size_t j = i; j < cols; ++j)
        CHECK(std::abs(dot(basis.directions[i], basis.directions[j]) -
                       (i == j ? 1.0 : 0.0)) < 1e-6);
      // eigen-residual bound
      Eigen::VectorXd v(static_cast<Eigen::Index>(cols));
      for (std::size_t j = 0; j < cols; ++j)
        v[static_cast<Eigen::Index>(j)] = basis.directions[i][j];
      const double residual = (ata * v - basis.eigenvalues[i] * v).norm();
      CHECK(residual <= 1e-6 * std::max(1.0, basis.eigenvalues[i]));
      // sign convention
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      CHECK(v[arg] > 0.0);
    }
  }
}

TEST_CASE("factorize: invariant to orthogonal left-multiplication") {
  Rng rng(37);
  const std::size_t rows = 12, cols = 6;
  const auto a = random_matrix(rng, rows, cols);
  const Eigen::MatrixXd am = to_eigen(a, rows, cols);
  // random orthogonal Q from QR of a Gaussian matrix
  const Eigen::MatrixXd gauss = to_eigen(random_matrix(rng, rows, rows), rows, rows);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  const Eigen::MatrixXd qa = q * am;
  std::vector<double> qa_flat(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      qa_flat[r * cols + c] = qa(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));

  const auto b1 = factorize(a, rows, cols, cols);
  const auto b2 = factorize(qa_flat, rows, cols, cols);
  for (std::size_t i = 0; i < cols; ++i) {
    CHECK(b1.eigenvalues[i] == doctest::Approx(b2.eigenvalues[i]).epsilon(1e-9));
    for (std::size_t j = 0; j < cols; ++j)
      CHECK(std::abs(b1.directions[i][j] - b2.directions[i][j]) < 1e-6);
  }
}

TEST_CASE("factorize: scaling A scales eigenvalues by c^2, directions fixed") {
  Rng rng(43);
  const auto a = random_matrix(rng, 10, 5);
  auto scaled = a;
  for (auto& v : scaled) v *= 2.5;
  const auto b1 = factorize(a, 10, 5, 5);
  const auto b2 = factorize(scaled, 10, 5, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(b2.eigenvalues[i] == doctest::Approx(6.25 * b1.eigenvalues[i]).epsilon(1e-9));
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(std::abs(b1.directions[i][j] - b2.directions[i][j]) < 1e-7);
  }
}

TEST_CASE("factorize: argument validation") {
  const std::vector<double> a = {1.0, 0.0, 0.0, 1.0};
  CHECK_THROWS_AS(factorize(a, 2, 2, 3), Error);
  const std::vector<double> bad = {1.0, std::nan(""), 0.0, 1.0};
  CHECK_THROWS_AS(factorize(bad, 2, 2, 2), Error);
}

TEST_CASE("perturb: identity, unit length, pythagoras, linearity") {
  const std::vector<double> a = {3.0, 0.0, 0.0, 1.0};
  const auto basis = factorize(a, 2, 2, 2);
  const std::vector<float> w = {0.5f, -1.0f};

  SUBCASE("empty subset is the identity") {
    CHECK(perturb(w, basis, {}, {}) == w);
  }
  SUBCASE("single unit direction moves by |t|") {
    const auto w2 = perturb(w, basis, {0}, {-2.5});
    double norm = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      norm += (w2[i] - w[i]) * (w2[i] - w[i]);
    CHECK(std::sqrt(norm) == doctest::Approx(2.5).epsilon(1e-6));
  }
  SUBCASE("orthonormal pair obeys pythagoras") {
    const auto w2 = perturb(w, basis, {0, 1}, {3.0, 4.0});
    double norm = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      norm += (w2[i] - w[i]) * (w2[i] - w[i]);
    CHECK(norm == doctest::Approx(25.0).epsilon(1e-6));
  }
  SUBCASE("linear in distances") {
    const auto w1 = perturb(w, basis, {0}, {1.0});
    const auto w3 = perturb(w, basis, {0}, {3.0});
    for (std::size_t i = 0; i < w.size(); ++i)
      CHECK(w3[i] - w[i] == doctest::Approx(3.0 * (w1[i] - w[i])).epsilon(1e-5));
  }
  SUBCASE("index out of range") {
    CHECK_THROWS_AS(perturb(w, basis, {5}, {1.0}), Error);
  }
}

TEST_CASE("basis save/load round trip preserves checksum") {
  Rng rng(51);
  const auto a = random_matrix(rng, 16, 8);
  auto basis = factorize(a, 16, 8, 4);
  basis.source_checksum = "deadbeef";
  const auto path = std::filesystem::temp_directory_path() / "fairview_basis.json";
  basis.save(path);
  const auto back = DirectionBasis::load(path);
  CHECK(back.checksum() == basis.checksum());
  CHECK(back.directions == basis.directions);
  CHECK(back.eigenvalues == basis.eigenvalues);
}
