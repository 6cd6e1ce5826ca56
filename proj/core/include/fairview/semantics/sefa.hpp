// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fairview::semantics {

/// Top-k semantic latent directions: unit eigenvectors of A^T A sorted by
/// descending eigenvalue, sign-normalized so each vector's largest-magnitude
/// component is positive (first such index on ties). Ties in eigenvalue keep
/// the eigensolver's deterministic output order.
struct DirectionBasis {
  std::size_t d_w = 0;
  std::vector<std::vector<double>> directions;  // k unit vectors, length d_w
  std::vector<double> eigenvalues;              // k values, descending
  std::string source_checksum;                  // generator checkpoint checksum

  void save(const std::filesystem::path& path) const;
  static DirectionBasis load(const std::filesystem::path& path);
  std::string checksum() const;
};

/// Closed-form factorization of the first latent-consuming affine weight.
/// `a` is row-major with shape (rows=d_feat, cols=d_w); k <= d_w.
DirectionBasis factorize(const std::vector<float>& a, std::size_t rows, std::size_t cols,
                         std::size_t k);
DirectionBasis factorize(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                         std::size_t k);

/// w' = w + sum_j distances[j] * direction[subset[j]]. Pure.
std::vector<float> perturb(const std::vector<float>& w, const DirectionBasis& basis,
                           const std::vector<std::size_t>& subset,
                           const std::vector<double>& distances);

}  // namespace fairview::semantics
