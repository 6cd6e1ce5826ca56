// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "fairview/inversion/encoder.hpp"
#include "fairview/rng.hpp"

using namespace fairview;
using namespace fairview::inversion;

namespace {

datagen::Dataset tiny_dataset(std::uint64_t seed) {
  datagen::DatasetConfig cfg;
  cfg.groups = 2;
  cfg.per_group_count = {12, 12};
  cfg.label_noise_by_group = {0.0, 0.0};
  cfg.difficulty_by_group = {0.0, 0.0};
  cfg.seed = seed;
  return datagen::generate_dataset(cfg);
}

generative::GeneratorBundle tiny_gan(std::uint64_t seed) {
  generative::GanConfig cfg;
  cfg.base_channels = 24;
  cfg.seed = seed;
  auto b = generative::GeneratorBundle::build(cfg, 32);
  Rng rng(seed);
  b.mapping.init(rng);
  b.synthesis.init(rng);
  b.discriminator.init(rng);
  return b;
}

EncoderConfig tiny_cfg(std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.steps = 4;
  cfg.batch = 4;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("train_encoder keeps the generator bit-unchanged") {
  const auto ds = tiny_dataset(61);
  auto gan = tiny_gan(62);
  const std::string before = gan.checksum();
  auto result = train_encoder(gan, ds, tiny_cfg(63));
  CHECK(gan.checksum() == before);
  CHECK(result.loss_history.size() == 4);
}

TEST_CASE("train_encoder: lr = 0 leaves the encoder at initialization") {
  const auto ds = tiny_dataset(64);
  auto gan = tiny_gan(65);
  EncoderConfig cfg = tiny_cfg(66);
  cfg.lr = 0.0;
  auto result = train_encoder(gan, ds, cfg);
  auto reference = EncoderBundle::build(cfg, gan.cfg.d_w, 32);
  Rng init_rng(derive_seed(cfg.seed, "encoder/init"));
  reference.encoder.init(init_rng);
  CHECK(result.bundle.checksum() == reference.checksum());
}

TEST_CASE("train_encoder: deterministic under fixed seed") {
  const auto ds = tiny_dataset(67);
  auto gan = tiny_gan(68);
  auto a = train_encoder(gan, ds, tiny_cfg(69));
  auto b = train_encoder(gan, ds, tiny_cfg(69));
  CHECK(a.bundle.checksum() == b.bundle.checksum());
}

TEST_CASE("invert: reconstruction is exactly generate(G, E(x))") {
  const auto ds = tiny_dataset(71);
  auto gan = tiny_gan(72);
  auto enc = train_encoder(gan, ds, tiny_cfg(73)).bundle;

  const auto idx = std::vector<std::size_t>{0, 1, 2};
  const TensorF x = datagen::make_batch_chw(ds, idx);
  const auto r1 = invert(enc, gan, x);
  const auto r2 = invert(enc, gan, x);
  CHECK(r1.w.vec() == r2.w.vec());
  CHECK(r1.reconstruction.vec() == r2.reconstruction.vec());

  const TensorF direct = gan.generate(enc.encode(x));
  CHECK(r1.reconstruction.vec() == direct.vec());
  for (auto d : r1.distortion) CHECK(d >= 0.0);
}

TEST_CASE("distortion metric: identity, symmetry, positivity") {
  Rng rng(74);
  TensorF a({1, 3, 4, 4}), b({1, 3, 4, 4});
  for (auto& v : a.vec()) v = static_cast<float>(rng.uniform());
  for (auto& v : b.vec()) v = static_cast<float>(rng.uniform());
  CHECK(image_mse(a, a) == doctest::Approx(0.0));
  CHECK(image_mse(a, b) == doctest::Approx(image_mse(b, a)).epsilon(1e-12));
  CHECK(image_mse(a, b) > 0.0);
}

TEST_CASE("encoder bundle save/load round trip") {
  const auto ds = tiny_dataset(75);
  auto gan = tiny_gan(76);
  auto enc = train_encoder(gan, ds, tiny_cfg(77)).bundle;
  const auto dir = std::filesystem::temp_directory_path() / "fairview_enc_bundle";
  std::filesystem::remove_all(dir);
  enc.save(dir);
  auto back = EncoderBundle::load(dir);
  CHECK(back.checksum() == enc.checksum());
}
