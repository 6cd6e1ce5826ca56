// SPDX-License-Identifier: Apache-2.0
#include "fairview/semantics/sefa.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "fairview/array_store.hpp"
#include "fairview/common.hpp"
#include "fairview/sha256.hpp"

namespace fairview::semantics {

namespace {

DirectionBasis factorize_impl(const Eigen::MatrixXd& a, std::size_t k) {
  const auto d_w = static_cast<std::size_t>(a.cols());
  require(k >= 1 && k <= d_w, Errc::config_invalid,
          "k must be in [1, d_w]; got k=" + std::to_string(k));
  require(a.allFinite(), Errc::config_invalid, "factorize: non-finite entries in A");

  const Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(ata);
  require(solver.info() == Eigen::Success, Errc::stage_failure, "eigendecomposition failed");

  // Eigen returns ascending eigenvalues; take the top k from the back.
  DirectionBasis basis;
  basis.d_w = d_w;
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(d_w - 1 - i);
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    // Sign convention: largest-magnitude component positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    basis.directions.emplace_back(v.data(), v.data() + v.size());
    basis.eigenvalues.push_back(std::max(0.0, solver.eigenvalues()[col]));
  }
  return basis;
}

}  // namespace

DirectionBasis factorize(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                         std::size_t k) {
  require(a.size() == rows * cols, Errc::config_invalid, "A size/shape mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a[r * cols + c];
  return factorize_impl(m, k);
}

DirectionBasis factorize(const std::vector<float>& a, std::size_t rows, std::size_t cols,
                         std::size_t k) {
  std::vector<double> d(a.begin(), a.end());
  return factorize(d, rows, cols, k);
}

std::vector<float> perturb(const std::vector<float>& w, const DirectionBasis& basis,
                           const std::vector<std::size_t>& subset,
                           const std::vector<double>& distances) {
  require(w.size() == basis.d_w, Errc::config_invalid, "style code dimension mismatch");
  require(subset.size() == distances.size(), Errc::config_invalid,
          "subset/distances length mismatch");
  std::vector<double> acc(w.begin(), w.end());
  for (std::size_t j = 0; j < subset.size(); ++j) {
    require(subset[j] < basis.directions.size(), Errc::config_invalid,
            "direction index out of range");
    const auto& dir = basis.directions[subset[j]];
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += distances[j] * dir[i];
  }
  return std::vector<float>(acc.begin(), acc.end());
}

void DirectionBasis::save(const std::filesystem::path& path) const {
  json j;
  j["format"] = "fairview-basis";
  j["version"] = 1;
  j["d_w"] = d_w;
  j["directions"] = directions;
  j["eigenvalues"] = eigenvalues;
  j["source_checksum"] = source_checksum;
  write_json_file(path, j);
}

DirectionBasis DirectionBasis::load(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  require(j.value("format", "") == "fairview-basis", Errc::bad_container_header,
          "not a direction basis: " + path.string());
  DirectionBasis basis;
  basis.d_w = j.at("d_w").get<std::size_t>();
  basis.directions = j.at("directions").get<std::vector<std::vector<double>>>();
  basis.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  basis.source_checksum = j.at("source_checksum").get<std::string>();
  for (const auto& d : basis.directions)
    require(d.size() == basis.d_w, Errc::manifest_payload_mismatch,
            "direction dimension mismatch in " + path.string());
  return basis;
}

std::string DirectionBasis::checksum() const {
  json j;
  j["d_w"] = d_w;
  j["directions"] = directions;
  j["eigenvalues"] = eigenvalues;
  j["source_checksum"] = source_checksum;
  return sha256_hex(j.dump());
}

}  // namespace fairview::semantics
