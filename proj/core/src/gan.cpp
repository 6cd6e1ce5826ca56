// SPDX-License-Identifier: Apache-2.0
#include "fairview/generative/gan.hpp"

#include <algorithm>
#include <cmath>

#include "fairview/rng.hpp"

namespace fairview::generative {

namespace {

using nn::Sequential;

TensorF sample_z(Rng& rng, std::size_t n, std::size_t d_z) {
  TensorF z({n, d_z});
  for (auto& v : z.vec()) v = static_cast<float>(rng.normal());
  return z;
}

TensorF concat_batches(const std::vector<const TensorF*>& parts) {
  std::vector<std::size_t> shape = parts.front()->shape();
  std::size_t total = 0;
  for (auto* p : parts) total += p->dim(0);
  shape[0] = total;
  TensorF out(shape);
  std::size_t per = parts.front()->count() / parts.front()->dim(0);
  std::size_t at = 0;
  for (auto* p : parts) {
    std::copy(p->data(), p->data() + p->count(), out.data() + at * per);
    at += p->dim(0);
  }
  return out;
}

}  // namespace

void GanConfig::validate() const {
  require(d_z >= 1 && d_w >= 1, Errc::config_invalid, "latent dimensions must be >= 1");
  require(steps >= 0 && batch >= 1, Errc::config_invalid, "steps/batch out of range");
  require(lr >= 0.0, Errc::config_invalid, "lr must be >= 0");
  require(checkpoint_every >= 1, Errc::config_invalid, "checkpoint_every must be >= 1");
}

json GanConfig::to_json() const {
  json j;
  j["d_z"] = d_z;
  j["d_w"] = d_w;
  j["base_channels"] = base_channels;
  j["map_hidden"] = map_hidden;
  j["steps"] = steps;
  j["batch"] = batch;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["checkpoint_every"] = checkpoint_every;
  j["r1_enabled"] = r1_enabled;
  j["r1_gamma"] = r1_gamma;
  j["r1_eps"] = r1_eps;
  j["seed"] = seed;
  return j;
}

GanConfig GanConfig::from_json(const json& j) {
  GanConfig cfg;
  cfg.d_z = j.at("d_z").get<std::size_t>();
  cfg.d_w = j.at("d_w").get<std::size_t>();
  cfg.base_channels = j.at("base_channels").get<std::size_t>();
  cfg.map_hidden = j.at("map_hidden").get<std::size_t>();
  cfg.steps = j.at("steps").get<int>();
  cfg.batch = j.at("batch").get<int>();
  cfg.lr = j.at("lr").get<double>();
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
  cfg.r1_enabled = j.at("r1_enabled").get<bool>();
  cfg.r1_gamma = j.at("r1_gamma").get<double>();
  cfg.r1_eps = j.at("r1_eps").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

GeneratorBundle GeneratorBundle::build(const GanConfig& cfg, int image_size) {
  cfg.validate();
  require(image_size == 32, Errc::config_invalid,
          "the synthesis decoder is built for 32x32 output");
  GeneratorBundle b;
  b.cfg = cfg;
  b.image_size = image_size;

  b.mapping.add<nn::Dense<float>>("map_fc1", cfg.d_z, cfg.map_hidden);
  b.mapping.add<nn::LeakyReLU<float>>("map_act1", 0.2f);
  b.mapping.add<nn::Dense<float>>("map_fc2", cfg.map_hidden, cfg.d_w);

  // Style enters once, at the 8x8 root; the decoder upsamples twice.
  const std::size_t c0 = cfg.base_channels;
  b.synthesis.add<nn::StyleInput<float>>("style", cfg.d_w, c0, 8);
  b.synthesis.add<nn::Conv2d<float>>("syn_conv0", c0, (c0 * 3) / 4, 1);
  b.synthesis.add<nn::LeakyReLU<float>>("syn_act0", 0.2f);
  b.synthesis.add<nn::Upsample2x<float>>("syn_up1");
  b.synthesis.add<nn::Conv2d<float>>("syn_conv1", (c0 * 3) / 4, c0 / 2, 1);
  b.synthesis.add<nn::LeakyReLU<float>>("syn_act1", 0.2f);
  b.synthesis.add<nn::Upsample2x<float>>("syn_up2");
  b.synthesis.add<nn::Conv2d<float>>("syn_conv2", c0 / 2, c0 / 3, 1);
  b.synthesis.add<nn::LeakyReLU<float>>("syn_act2", 0.2f);
  b.synthesis.add<nn::Conv2d<float>>("syn_out", c0 / 3, 3, 1);
  b.synthesis.add<nn::Tanh<float>>("syn_tanh");

  b.discriminator.add<nn::Conv2d<float>>("d_conv1", 3, 24, 2);
  b.discriminator.add<nn::LeakyReLU<float>>("d_act1", 0.2f);
  b.discriminator.add<nn::Conv2d<float>>("d_conv2", 24, 48, 2);
  b.discriminator.add<nn::LeakyReLU<float>>("d_act2", 0.2f);
  b.discriminator.add<nn::Conv2d<float>>("d_conv3", 48, 64, 2);
  b.discriminator.add<nn::LeakyReLU<float>>("d_act3", 0.2f);
  b.discriminator.add<nn::Flatten<float>>("d_flat");
  b.discriminator.add<nn::Dense<float>>("d_fc", 64 * 4 * 4, 1);
  return b;
}

TensorF GeneratorBundle::map_latent(const TensorF& z) {
  require(z.rank() == 2 && z.dim(1) == cfg.d_z, Errc::config_invalid,
          "latent dimension mismatch: expected d_z=" + std::to_string(cfg.d_z));
  return mapping.forward(z, /*train=*/false, /*keep_cache=*/false);
}

TensorF GeneratorBundle::generate(const TensorF& w) {
  require(w.rank() == 2 && w.dim(1) == cfg.d_w, Errc::config_invalid,
          "style dimension mismatch: expected d_w=" + std::to_string(cfg.d_w));
  TensorF img = synthesis.forward(w, false, false);
  for (auto& v : img.vec()) v = 0.5f * (v + 1.0f);
  return img;
}

std::vector<float> GeneratorBundle::style_affine_weight(std::size_t* rows, std::size_t* cols) {
  for (auto& p : synthesis.state()) {
    if (p.name == "style.affine_weight") {
      *rows = p.value->dim(0);
      *cols = p.value->dim(1);
      return p.value->vec();
    }
  }
  fail(Errc::stage_failure, "style affine weight not found in synthesis network");
}

void GeneratorBundle::save(const std::filesystem::path& dir) {
  ArrayStore store;
  store.manifest = manifest;
  store.manifest["kind"] = "generator-bundle";
  store.manifest["config"] = cfg.to_json();
  store.manifest["image_size"] = image_size;
  mapping.save_into(store, "mapping");
  synthesis.save_into(store, "synthesis");
  discriminator.save_into(store, "discriminator");
  store.save(dir);
}

GeneratorBundle GeneratorBundle::load(const std::filesystem::path& dir) {
  ArrayStore store = ArrayStore::load(dir);
  require(store.manifest.value("kind", "") == "generator-bundle", Errc::bad_container_header,
          "not a generator bundle: " + dir.string());
  GeneratorBundle b =
      build(GanConfig::from_json(store.manifest.at("config")), store.manifest.at("image_size"));
  b.manifest = store.manifest;
  b.mapping.load_from(store, "mapping");
  b.synthesis.load_from(store, "synthesis");
  b.discriminator.load_from(store, "discriminator");
  return b;
}

std::string GeneratorBundle::checksum() {
  return sha256_hex(mapping.state_checksum() + synthesis.state_checksum() +
                    discriminator.state_checksum());
}

TrainGanResult train_gan(const datagen::Dataset& ds, const GanConfig& cfg,
                         const std::filesystem::path& checkpoint_dir) {
  cfg.validate();
  require(ds.size() > 0, Errc::config_invalid, "train_gan on empty dataset");

  GeneratorBundle bundle = GeneratorBundle::build(cfg, ds.cfg.image_size);
  Rng init_rng(derive_seed(cfg.seed, "gan/init"));
  bundle.mapping.init(init_rng);
  bundle.synthesis.init(init_rng);
  bundle.discriminator.init(init_rng);
  bundle.manifest["dataset_fingerprint"] = ds.fingerprint();
  bundle.manifest["seed"] = cfg.seed;
  bundle.manifest["steps_trained"] = 0;

  Rng data_rng(derive_seed(cfg.seed, "gan/data"));
  Rng z_rng(derive_seed(cfg.seed, "gan/z"));

  nn::Adam<float> opt_g({cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  nn::Adam<float> opt_d({cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  auto g_params = bundle.mapping.params();
  {
    auto syn = bundle.synthesis.params();
    g_params.insert(g_params.end(), syn.begin(), syn.end());
  }
  auto d_params = bundle.discriminator.params();

  const std::size_t batch = static_cast<std::size_t>(cfg.batch);
  std::vector<GanHistoryRow> history;
  history.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    // --- discriminator update ---
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = static_cast<std::size_t>(data_rng.uniform_index(ds.size()));
    TensorF real = datagen::make_batch_chw(ds, idx);

    TensorF z = sample_z(z_rng, batch, cfg.d_z);
    TensorF w = bundle.mapping.forward(z, true, false);
    TensorF fake_tanh = bundle.synthesis.forward(w, true, false);
    TensorF fake(fake_tanh.shape());
    for (std::size_t i = 0; i < fake.size(); ++i) fake[i] = 0.5f * (fake_tanh[i] + 1.0f);

    std::vector<const TensorF*> parts = {&real, &fake};
    TensorF real_shift;
    if (cfg.r1_enabled) {
      real_shift = real;
      Rng dir_rng(derive_seed(cfg.seed, "gan/r1/" + std::to_string(step)));
      double norm = 0.0;
      std::vector<float> u(real.count() / batch);
      // one random unit direction per step, shared across the batch
      for (auto& v : u) {
        v = static_cast<float>(dir_rng.normal());
        norm += static_cast<double>(v) * v;
      }
      norm = std::sqrt(std::max(norm, 1e-12));
      for (auto& v : u) v = static_cast<float>(v / norm * cfg.r1_eps);
      const std::size_t per = u.size();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < per; ++i) real_shift[n * per + i] += u[i];
      parts.push_back(&real_shift);
    }
    TensorF d_in = concat_batches(parts);
    TensorF d_out = bundle.discriminator.forward(d_in, true, true);

    double loss_d = 0.0;
    TensorF d_grad(d_out.shape());
    const float inv_b = 1.0f / static_cast<float>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      loss_d += nn::softplus(-static_cast<double>(d_out[i]));
      d_grad[i] = -nn::sigmoid(-d_out[i]) * inv_b;
    }
    for (std::size_t i = 0; i < batch; ++i) {
      loss_d += nn::softplus(static_cast<double>(d_out[batch + i]));
      d_grad[batch + i] = nn::sigmoid(d_out[batch + i]) * inv_b;
    }
    loss_d /= static_cast<double>(batch);
    if (cfg.r1_enabled) {
      // penalty = gamma/2 * mean_b ((D(x+eps u) - D(x)) / eps)^2
      const float scale =
          static_cast<float>(cfg.r1_gamma / (cfg.r1_eps * cfg.r1_eps)) * inv_b;
      for (std::size_t i = 0; i < batch; ++i) {
        const float delta = d_out[2 * batch + i] - d_out[i];
        loss_d += 0.5 * cfg.r1_gamma *
                  static_cast<double>(delta / cfg.r1_eps) * (delta / cfg.r1_eps) /
                  static_cast<double>(batch);
        d_grad[2 * batch + i] += scale * delta;
        d_grad[i] -= scale * delta;
      }
    }
    bundle.discriminator.zero_grads();
    bundle.discriminator.backward(d_grad, true);
    opt_d.step(d_params);

    // --- generator update ---
    TensorF z2 = sample_z(z_rng, batch, cfg.d_z);
    TensorF w2 = bundle.mapping.forward(z2, true, true);
    TensorF fake2_tanh = bundle.synthesis.forward(w2, true, true);
    TensorF fake2(fake2_tanh.shape());
    for (std::size_t i = 0; i < fake2.size(); ++i) fake2[i] = 0.5f * (fake2_tanh[i] + 1.0f);
    TensorF g_out = bundle.discriminator.forward(fake2, true, true);

    double loss_g = 0.0;
    TensorF g_grad(g_out.shape());
    for (std::size_t i = 0; i < batch; ++i) {
      loss_g += nn::softplus(-static_cast<double>(g_out[i])) / static_cast<double>(batch);
      g_grad[i] = -nn::sigmoid(-g_out[i]) * inv_b;
    }
    TensorF d_input_grad = bundle.discriminator.backward(g_grad, /*accumulate=*/false);
    for (auto& v : d_input_grad.vec()) v *= 0.5f;  // d fake01 / d tanh_out
    bundle.mapping.zero_grads();
    bundle.synthesis.zero_grads();
    TensorF dw = bundle.synthesis.backward(d_input_grad, true);
    bundle.mapping.backward(dw, true);
    opt_g.step(g_params);

    if (!std::isfinite(loss_d) || !std::isfinite(loss_g)) {
      bundle.manifest["steps_trained"] = step + 1;
      bundle.manifest["diverged_at_step"] = step;
      if (!checkpoint_dir.empty()) bundle.save(checkpoint_dir / "gan_diverged");
      fail(Errc::stage_failure,
           "GAN diverged at step " + std::to_string(step) + " (non-finite loss)");
    }
    history.push_back({step, loss_d, loss_g});
    if (!checkpoint_dir.empty() && (step + 1) % cfg.checkpoint_every == 0) {
      bundle.manifest["steps_trained"] = step + 1;
      bundle.save(checkpoint_dir / "gan_last");
    }
  }
  bundle.manifest["steps_trained"] = cfg.steps;
  return {std::move(bundle), std::move(history)};
}

double discriminator_accuracy(GeneratorBundle& bundle, const datagen::Dataset& held_out,
                              std::size_t n_per_side, std::uint64_t seed) {
  require(held_out.size() > 0, Errc::config_invalid, "empty held-out set");
  Rng rng(derive_seed(seed, "gan/eval"));
  n_per_side = std::min(n_per_side, held_out.size());
  std::vector<std::size_t> idx(n_per_side);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(held_out.size()));
  TensorF real = datagen::make_batch_chw(held_out, idx);
  TensorF z = sample_z(rng, n_per_side, bundle.cfg.d_z);
  TensorF fake = bundle.generate(bundle.map_latent(z));

  TensorF real_out = bundle.discriminator.forward(real, false, false);
  TensorF fake_out = bundle.discriminator.forward(fake, false, false);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n_per_side; ++i) {
    if (real_out[i] > 0.0f) ++correct;
    if (fake_out[i] <= 0.0f) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(2 * n_per_side);
}

double channel_stat_distance(const std::vector<float>& a_hwc, const std::vector<float>& b_hwc) {
  require(a_hwc.size() % 3 == 0 && b_hwc.size() % 3 == 0, Errc::config_invalid,
          "pixel buffers must be HWC with 3 channels");
  auto stats = [](const std::vector<float>& px) {
    std::array<double, 3> mean{};
    std::array<double, 9> cov{};
    const std::size_t n = px.size() / 3;
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) mean[static_cast<std::size_t>(c)] += px[i * 3 + c];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          cov[static_cast<std::size_t>(r * 3 + c)] +=
              (px[i * 3 + r] - mean[static_cast<std::size_t>(r)]) *
              (px[i * 3 + c] - mean[static_cast<std::size_t>(c)]);
    for (auto& v : cov) v /= static_cast<double>(n);
    return std::make_pair(mean, cov);
  };
  const auto [ma, ca] = stats(a_hwc);
  const auto [mb, cb] = stats(b_hwc);
  double d = 0.0;
  for (int i = 0; i < 3; ++i) d += (ma[i] - mb[i]) * (ma[i] - mb[i]);
  for (int i = 0; i < 9; ++i) d += (ca[i] - cb[i]) * (ca[i] - cb[i]);
  return d;
}

json QualityReport::to_json() const {
  json j;
  j["stat_distance"] = stat_distance;
  j["memorization_score"] = memorization_score;
  j["n_generated"] = n_generated;
  j["n_real"] = n_real;
  return j;
}

QualityReport sample_quality_report(GeneratorBundle& bundle, const datagen::Dataset& ds,
                                    std::size_t n_samples, std::uint64_t seed) {
  require(ds.size() > 0, Errc::config_invalid, "empty dataset");
  Rng rng(derive_seed(seed, "gan/quality"));
  TensorF z = sample_z(rng, n_samples, bundle.cfg.d_z);
  TensorF gen = bundle.generate(bundle.map_latent(z));

  const auto s = static_cast<std::size_t>(ds.cfg.image_size);
  const std::size_t elems = ds.image_elems();
  std::vector<float> gen_hwc(n_samples * elems);
  for (std::size_t i = 0; i < n_samples; ++i)
    datagen::chw_to_hwc(gen.data() + i * elems, s, s, 3, gen_hwc.data() + i * elems);

  QualityReport report;
  report.n_generated = n_samples;
  report.n_real = ds.size();
  report.stat_distance = channel_stat_distance(gen_hwc, ds.images);

  double mem = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const float* g = gen_hwc.data() + i * elems;
    double best = std::numeric_limits<double>::max();
    for (std::size_t r = 0; r < ds.size(); ++r) {
      const float* p = ds.image_ptr(r);
      double acc = 0.0;
      for (std::size_t k = 0; k < elems; ++k) {
        const double d = static_cast<double>(g[k]) - p[k];
        acc += d * d;
        if (acc >= best) break;
      }
      best = std::min(best, acc);
    }
    mem += best / static_cast<double>(elems);
  }
  report.memorization_score = mem / static_cast<double>(n_samples);
  return report;
}

}  // namespace fairview::generative
