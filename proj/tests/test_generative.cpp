// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fairview/generative/gan.hpp"
#include "fairview/rng.hpp"

using namespace fairview;
using namespace fairview::generative;
namespace fs = std::filesystem;

namespace {

datagen::Dataset tiny_dataset(std::uint64_t seed) {
  datagen::DatasetConfig cfg;
  cfg.groups = 2;
  cfg.per_group_count = {16, 16};
  cfg.label_noise_by_group = {0.0, 0.0};
  cfg.difficulty_by_group = {0.0, 0.0};
  cfg.seed = seed;
  return datagen::generate_dataset(cfg);
}

GanConfig tiny_gan_cfg() {
  GanConfig cfg;
  cfg.base_channels = 24;
  cfg.steps = 4;
  cfg.batch = 4;
  cfg.seed = 3;
  return cfg;
}

GeneratorBundle random_bundle(std::uint64_t seed) {
  GeneratorBundle b = GeneratorBundle::build(tiny_gan_cfg(), 32);
  Rng rng(seed);
  b.mapping.init(rng);
  b.synthesis.init(rng);
  b.discriminator.init(rng);
  return b;
}

}  // namespace

TEST_CASE("map_latent: zeroed final layer maps everything to w = 0") {
  auto b = random_bundle(1);
  for (auto& p : b.mapping.state()) {
    if (p.name == "map_fc2.weight" || p.name == "map_fc2.bias") p.value->fill(0.0f);
  }
  TensorF z({3, 64});
  Rng rng(2);
  for (auto& v : z.vec()) v = static_cast<float>(rng.normal());
  const TensorF w = b.map_latent(z);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == 0.0f);
}

TEST_CASE("map_latent: deterministic and batched") {
  auto b = random_bundle(5);
  TensorF z({4, 64});
  Rng rng(6);
  for (auto& v : z.vec()) v = static_cast<float>(rng.normal());
  const TensorF w1 = b.map_latent(z);
  const TensorF w2 = b.map_latent(z);
  CHECK(w1.vec() == w2.vec());

  for (std::size_t i = 0; i < 4; ++i) {
    TensorF zi({1, 64});
    std::copy(z.data() + i * 64, z.data() + (i + 1) * 64, zi.data());
    const TensorF wi = b.map_latent(zi);
    for (std::size_t k = 0; k < 64; ++k)
      CHECK(wi[k] == doctest::Approx(w1[i * 64 + k]).epsilon(1e-6));
  }

  TensorF bad({2, 16});
  CHECK_THROWS_AS(b.map_latent(bad), Error);
}

TEST_CASE("generate: shape contract, determinism, range") {
  auto b = random_bundle(7);
  TensorF w({2, 64});
  Rng rng(8);
  for (auto& v : w.vec()) v = static_cast<float>(rng.normal());
  const TensorF img = b.generate(w);
  CHECK(img.shape() == std::vector<std::size_t>{2, 3, 32, 32});
  for (auto v : img.vec()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(b.generate(w).vec() == img.vec());
}

TEST_CASE("generate: output varies continuously along a fixed direction") {
  auto b = random_bundle(9);
  TensorF w({1, 64});
  Rng rng(10);
  for (auto& v : w.vec()) v = static_cast<float>(rng.normal());
  std::vector<float> dir(64);
  double norm = 0.0;
  for (auto& v : dir) {
    v = static_cast<float>(rng.normal());
    norm += static_cast<double>(v) * v;
  }
  for (auto& v : dir) v = static_cast<float>(v / std::sqrt(norm));

  const TensorF base = b.generate(w);
  double prev = 1e300;
  for (const double eps : {1e-1, 1e-2, 1e-3}) {
    TensorF w2 = w;
    for (std::size_t i = 0; i < 64; ++i) w2[i] += static_cast<float>(eps * dir[i]);
    const TensorF img = b.generate(w2);
    double diff = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double d = static_cast<double>(img[i]) - base[i];
      diff += d * d;
    }
    diff = std::sqrt(diff);
    CHECK(diff < prev);
    prev = diff;
  }
}

TEST_CASE("style affine weight is exposed with the right shape") {
  auto b = random_bundle(11);
  std::size_t rows = 0, cols = 0;
  const auto a = b.style_affine_weight(&rows, &cols);
  CHECK(rows == 2 * 24);  // scale and shift rows
  CHECK(cols == 64);
  CHECK(a.size() == rows * cols);
}

TEST_CASE("train_gan: lr = 0 leaves parameters at initialization") {
  const auto ds = tiny_dataset(21);
  GanConfig cfg = tiny_gan_cfg();
  cfg.lr = 0.0;
  auto result = train_gan(ds, cfg);
  auto reference = GeneratorBundle::build(cfg, 32);
  Rng init_rng(derive_seed(cfg.seed, "gan/init"));
  reference.mapping.init(init_rng);
  reference.synthesis.init(init_rng);
  reference.discriminator.init(init_rng);
  CHECK(result.bundle.checksum() == reference.checksum());
}

TEST_CASE("train_gan: identical cfg+seed reproduce the checkpoint checksum") {
  const auto ds = tiny_dataset(22);
  const GanConfig cfg = tiny_gan_cfg();
  auto a = train_gan(ds, cfg);
  auto b = train_gan(ds, cfg);
  CHECK(a.bundle.checksum() == b.bundle.checksum());
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].loss_d == b.history[i].loss_d);
}

TEST_CASE("train_gan: r1 toggle trains and changes the trajectory") {
  const auto ds = tiny_dataset(23);
  GanConfig cfg = tiny_gan_cfg();
  auto base = train_gan(ds, cfg);
  cfg.r1_enabled = true;
  auto with_r1 = train_gan(ds, cfg);
  CHECK(base.bundle.checksum() != with_r1.bundle.checksum());
  for (const auto& row : with_r1.history) CHECK(std::isfinite(row.loss_d));
}

TEST_CASE("bundle save/load round trip preserves outputs") {
  auto b = random_bundle(31);
  const auto dir = fs::temp_directory_path() / "fairview_gan_bundle";
  fs::remove_all(dir);
  b.manifest["note"] = "test";
  b.save(dir);
  auto back = GeneratorBundle::load(dir);
  CHECK(back.checksum() == b.checksum());

  TensorF z({2, 64});
  Rng rng(32);
  for (auto& v : z.vec()) v = static_cast<float>(rng.normal());
  const TensorF w1 = b.map_latent(z);
  const TensorF w2 = back.map_latent(z);
  CHECK(w1.vec() == w2.vec());
}

TEST_CASE("quality report: identity distance zero, degenerate set positive") {
  const auto ds = tiny_dataset(41);
  SUBCASE("identical pixel sets have zero statistic distance") {
    CHECK(channel_stat_distance(ds.images, ds.images) == doctest::Approx(0.0));
  }
  SUBCASE("all-black set is strictly positive") {
    std::vector<float> black(ds.images.size(), 0.0f);
    CHECK(channel_stat_distance(black, ds.images) > 0.0);
  }
}

TEST_CASE("discriminator accuracy is a valid fraction") {
  const auto ds = tiny_dataset(51);
  auto b = random_bundle(52);
  const double acc = discriminator_accuracy(b, ds, 16, 53);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}
