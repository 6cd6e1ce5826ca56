// SPDX-License-Identifier: Apache-2.0
#include "fairview/inversion/encoder.hpp"

#include "fairview/rng.hpp"

namespace fairview::inversion {

void EncoderConfig::validate() const {
  require(steps >= 0 && batch >= 1, Errc::config_invalid, "steps/batch out of range");
  require(lr >= 0.0 && lambda_latent >= 0.0, Errc::config_invalid,
          "lr and lambda_latent must be >= 0");
}

json EncoderConfig::to_json() const {
  json j;
  j["steps"] = steps;
  j["batch"] = batch;
  j["lr"] = lr;
  j["lambda_latent"] = lambda_latent;
  j["seed"] = seed;
  return j;
}

EncoderConfig EncoderConfig::from_json(const json& j) {
  EncoderConfig cfg;
  cfg.steps = j.at("steps").get<int>();
  cfg.batch = j.at("batch").get<int>();
  cfg.lr = j.at("lr").get<double>();
  cfg.lambda_latent = j.at("lambda_latent").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

EncoderBundle EncoderBundle::build(const EncoderConfig& cfg, std::size_t d_w, int image_size) {
  cfg.validate();
  require(image_size == 32, Errc::config_invalid, "encoder trunk is built for 32x32 input");
  EncoderBundle b;
  b.cfg = cfg;
  b.d_w = d_w;
  b.image_size = image_size;
  b.encoder.add<nn::Conv2d<float>>("e_conv1", 3, 16, 2);
  b.encoder.add<nn::LeakyReLU<float>>("e_act1", 0.2f);
  b.encoder.add<nn::Conv2d<float>>("e_conv2", 16, 32, 2);
  b.encoder.add<nn::LeakyReLU<float>>("e_act2", 0.2f);
  b.encoder.add<nn::Conv2d<float>>("e_conv3", 32, 48, 2);
  b.encoder.add<nn::LeakyReLU<float>>("e_act3", 0.2f);
  b.encoder.add<nn::Flatten<float>>("e_flat");
  b.encoder.add<nn::Dense<float>>("e_fc", 48 * 4 * 4, d_w);
  return b;
}

TensorF EncoderBundle::encode(const TensorF& images) {
  require(images.rank() == 4 && images.dim(1) == 3 &&
              images.dim(2) == static_cast<std::size_t>(image_size),
          Errc::config_invalid, "encoder input shape mismatch");
  return encoder.forward(images, false, false);
}

void EncoderBundle::save(const std::filesystem::path& dir) {
  ArrayStore store;
  store.manifest = manifest;
  store.manifest["kind"] = "encoder-bundle";
  store.manifest["config"] = cfg.to_json();
  store.manifest["d_w"] = d_w;
  store.manifest["image_size"] = image_size;
  encoder.save_into(store, "encoder");
  store.save(dir);
}

EncoderBundle EncoderBundle::load(const std::filesystem::path& dir) {
  ArrayStore store = ArrayStore::load(dir);
  require(store.manifest.value("kind", "") == "encoder-bundle", Errc::bad_container_header,
          "not an encoder bundle: " + dir.string());
  EncoderBundle b = build(EncoderConfig::from_json(store.manifest.at("config")),
                          store.manifest.at("d_w"), store.manifest.at("image_size"));
  b.manifest = store.manifest;
  b.encoder.load_from(store, "encoder");
  return b;
}

std::string EncoderBundle::checksum() { return encoder.state_checksum(); }

TrainEncoderResult train_encoder(generative::GeneratorBundle& gan,
                                 const datagen::Dataset& ds, const EncoderConfig& cfg) {
  cfg.validate();
  require(ds.size() > 0, Errc::config_invalid, "train_encoder on empty dataset");
  require(ds.cfg.image_size == gan.image_size, Errc::config_invalid,
          "generator/dataset image size mismatch");

  EncoderBundle bundle = EncoderBundle::build(cfg, gan.cfg.d_w, gan.image_size);
  Rng init_rng(derive_seed(cfg.seed, "encoder/init"));
  bundle.encoder.init(init_rng);
  bundle.manifest["generator_checksum"] = gan.checksum();
  bundle.manifest["dataset_fingerprint"] = ds.fingerprint();
  bundle.manifest["seed"] = cfg.seed;

  Rng data_rng(derive_seed(cfg.seed, "encoder/data"));
  nn::Adam<float> opt({cfg.lr, 0.9, 0.999, 1e-8});
  auto params = bundle.encoder.params();

  const std::size_t batch = static_cast<std::size_t>(cfg.batch);
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = static_cast<std::size_t>(data_rng.uniform_index(ds.size()));
    TensorF x = datagen::make_batch_chw(ds, idx);

    TensorF w = bundle.encoder.forward(x, true, true);
    TensorF recon_tanh = gan.synthesis.forward(w, false, true);

    // loss = mean_pixel (recon01 - x)^2 + lambda * mean_b ||w||^2
    const std::size_t pix = x.count();
    double loss = 0.0;
    TensorF d_tanh(recon_tanh.shape());
    for (std::size_t i = 0; i < pix; ++i) {
      const float r01 = 0.5f * (recon_tanh[i] + 1.0f);
      const float d = r01 - x[i];
      loss += static_cast<double>(d) * d;
      // d/d tanh_out = 2 d / pix * 0.5
      d_tanh[i] = d / static_cast<float>(pix);
    }
    loss /= static_cast<double>(pix);
    TensorF dw = gan.synthesis.backward(d_tanh, /*accumulate=*/false);  // G frozen
    const float lam = static_cast<float>(cfg.lambda_latent);
    for (std::size_t i = 0; i < w.size(); ++i) {
      loss += static_cast<double>(lam) * w[i] * w[i] / static_cast<double>(batch);
      dw[i] += 2.0f * lam * w[i] / static_cast<float>(batch);
    }
    bundle.encoder.zero_grads();
    bundle.encoder.backward(dw, true);
    opt.step(params);

    if (!std::isfinite(loss))
      fail(Errc::stage_failure, "encoder training diverged at step " + std::to_string(step));
    history.push_back(loss);
  }
  return {std::move(bundle), std::move(history)};
}

InversionResult invert(EncoderBundle& encoder, generative::GeneratorBundle& gan,
                       const TensorF& images) {
  InversionResult out;
  out.w = encoder.encode(images);
  out.reconstruction = gan.generate(out.w);
  const std::size_t n = images.dim(0), per = images.count() / n;
  out.distortion.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      const double d = static_cast<double>(out.reconstruction[i * per + k]) -
                       static_cast<double>(images[i * per + k]);
      acc += d * d;
    }
    out.distortion[i] = acc / static_cast<double>(per);
  }
  return out;
}

double image_mse(const TensorF& a, const TensorF& b) {
  require(a.same_shape(b), Errc::config_invalid, "image_mse shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double mean_distortion(EncoderBundle& encoder, generative::GeneratorBundle& gan,
                       const datagen::Dataset& ds, std::size_t n) {
  n = std::min(n, ds.size());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  TensorF x = datagen::make_batch_chw(ds, idx);
  const auto result = invert(encoder, gan, x);
  double acc = 0.0;
  for (auto d : result.distortion) acc += d;
  return acc / static_cast<double>(n);
}

}  // namespace fairview::inversion
