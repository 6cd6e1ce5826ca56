// SPDX-License-Identifier: Apache-2.0
#include "fairview/rng.hpp"

#include "fairview/sha256.hpp"

namespace fairview {

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  if (k > n) k = n;
  // Partial Fisher-Yates: first k entries after k swap steps.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::uint64_t derive_seed(std::uint64_t root_seed, const std::string& label) {
  return sha256_seed64(std::to_string(root_seed) + "/" + label);
}

}  // namespace fairview
