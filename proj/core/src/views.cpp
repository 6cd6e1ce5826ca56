// SPDX-License-Identifier: Apache-2.0
#include "fairview/semantics/views.hpp"

#include <algorithm>
#include <cmath>

namespace fairview::semantics {

namespace {
constexpr char kViewsMagic[8] = {'F', 'V', 'V', 'I', 'W', '0', '1', '\n'};
}

void TraversalConfig::validate() const {
  require(m >= 1, Errc::config_invalid, "m must be >= 1");
  require(n_candidates >= m, Errc::config_invalid, "n_candidates must be >= m");
  require(dirs_per_view >= 1, Errc::config_invalid, "dirs_per_view must be >= 1");
  require(distance_sigma > 0.0, Errc::config_invalid, "distance_sigma must be > 0");
  require(top_k >= dirs_per_view, Errc::config_invalid, "top_k must be >= dirs_per_view");
  require(filter_threshold >= 0.0, Errc::config_invalid, "filter_threshold must be >= 0");
}

json TraversalConfig::to_json() const {
  json j;
  j["m"] = m;
  j["n_candidates"] = n_candidates;
  j["dirs_per_view"] = dirs_per_view;
  j["distance_sigma"] = distance_sigma;
  j["scale_by_sqrt_eigenvalue"] = scale_by_sqrt_eigenvalue;
  j["top_k"] = top_k;
  j["filter_threshold"] = filter_threshold;
  j["seed"] = seed;
  return j;
}

TraversalConfig TraversalConfig::from_json(const json& j) {
  TraversalConfig tc;
  tc.m = j.at("m").get<int>();
  tc.n_candidates = j.at("n_candidates").get<int>();
  tc.dirs_per_view = j.at("dirs_per_view").get<int>();
  tc.distance_sigma = j.at("distance_sigma").get<double>();
  tc.scale_by_sqrt_eigenvalue = j.at("scale_by_sqrt_eigenvalue").get<bool>();
  tc.top_k = j.at("top_k").get<int>();
  tc.filter_threshold = j.at("filter_threshold").get<double>();
  tc.seed = j.at("seed").get<std::uint64_t>();
  return tc;
}

FilterBundle FilterBundle::build(int image_size) {
  require(image_size == 32, Errc::config_invalid, "validity filter is built for 32x32 input");
  FilterBundle f;
  f.image_size = image_size;
  f.net.add<nn::Conv2d<float>>("f_conv1", 3, 8, 2);
  f.net.add<nn::LeakyReLU<float>>("f_act1", 0.2f);
  f.net.add<nn::Conv2d<float>>("f_conv2", 8, 16, 2);
  f.net.add<nn::LeakyReLU<float>>("f_act2", 0.2f);
  f.net.add<nn::GlobalAvgPool<float>>("f_pool");
  f.net.add<nn::Dense<float>>("f_fc", 16, 1);
  return f;
}

std::vector<float> FilterBundle::score(const TensorF& images) {
  TensorF logits = net.forward(images, false, false);
  std::vector<float> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = nn::sigmoid(logits[i]);
  return out;
}

void FilterBundle::save(const std::filesystem::path& dir) {
  ArrayStore store;
  store.manifest = manifest;
  store.manifest["kind"] = "validity-filter";
  store.manifest["image_size"] = image_size;
  net.save_into(store, "filter");
  store.save(dir);
}

FilterBundle FilterBundle::load(const std::filesystem::path& dir) {
  ArrayStore store = ArrayStore::load(dir);
  require(store.manifest.value("kind", "") == "validity-filter", Errc::bad_container_header,
          "not a validity filter: " + dir.string());
  FilterBundle f = build(store.manifest.at("image_size"));
  f.manifest = store.manifest;
  f.net.load_from(store, "filter");
  return f;
}

std::string FilterBundle::checksum() { return net.state_checksum(); }

std::vector<float> corrupt_image(const float* hwc, int size, int kind, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(size) * size * 3;
  std::vector<float> out(hwc, hwc + n);
  switch (kind % 3) {
    case 0: {  // destroy structure: shuffle pixel triples
      std::vector<std::size_t> order(static_cast<std::size_t>(size) * size);
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      for (std::size_t i = 0; i < order.size(); ++i)
        for (int c = 0; c < 3; ++c) out[i * 3 + static_cast<std::size_t>(c)] =
            hwc[order[i] * 3 + static_cast<std::size_t>(c)];
      break;
    }
    case 1:  // uniform noise
      for (auto& v : out) v = static_cast<float>(rng.uniform());
      break;
    default:  // heavy salt noise on top of the original
      for (auto& v : out)
        if (rng.uniform() < 0.5) v = rng.uniform() < 0.5 ? 0.0f : 1.0f;
      break;
  }
  return out;
}

FilterBundle train_validity_filter(const datagen::Dataset& ds, std::uint64_t seed, int steps,
                                   int batch, double lr) {
  require(ds.size() > 0, Errc::config_invalid, "train_validity_filter on empty dataset");
  FilterBundle filter = FilterBundle::build(ds.cfg.image_size);
  Rng init_rng(derive_seed(seed, "filter/init"));
  filter.net.init(init_rng);
  filter.manifest["dataset_fingerprint"] = ds.fingerprint();
  filter.manifest["seed"] = seed;

  Rng rng(derive_seed(seed, "filter/data"));
  nn::Adam<float> opt({lr, 0.9, 0.999, 1e-8});
  auto params = filter.net.params();
  const auto img_size = static_cast<std::size_t>(ds.cfg.image_size);
  const std::size_t half = static_cast<std::size_t>(batch) / 2;

  for (int step = 0; step < steps; ++step) {
    TensorF x({2 * half, 3, img_size, img_size});
    std::vector<float> labels(2 * half);
    for (std::size_t i = 0; i < half; ++i) {
      const auto idx = static_cast<std::size_t>(rng.uniform_index(ds.size()));
      datagen::hwc_to_chw(ds.image_ptr(idx), img_size, img_size, 3,
                          x.data() + i * 3 * img_size * img_size);
      labels[i] = 1.0f;
    }
    for (std::size_t i = 0; i < half; ++i) {
      const auto idx = static_cast<std::size_t>(rng.uniform_index(ds.size()));
      const int kind = static_cast<int>(rng.uniform_index(3));
      const auto junk = corrupt_image(ds.image_ptr(idx), ds.cfg.image_size, kind, rng);
      datagen::hwc_to_chw(junk.data(), img_size, img_size, 3,
                          x.data() + (half + i) * 3 * img_size * img_size);
      labels[half + i] = 0.0f;
    }
    TensorF logits = filter.net.forward(x, true, true);
    TensorF grad(logits.shape());
    for (std::size_t i = 0; i < 2 * half; ++i) {
      const float p = nn::sigmoid(logits[i]);
      grad[i] = (p - labels[i]) / static_cast<float>(2 * half);
    }
    filter.net.zero_grads();
    filter.net.backward(grad, true);
    opt.step(params);
  }
  return filter;
}

std::vector<bool> validity_filter(const std::vector<float>& scores, double threshold) {
  std::vector<bool> mask(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    mask[i] = static_cast<double>(scores[i]) >= threshold;
  return mask;
}

std::size_t ViewCache::index_of(std::int64_t sample_id) const {
  if (id_index_.empty()) {
    for (std::size_t i = 0; i < sample_ids.size(); ++i) id_index_[sample_ids[i]] = i;
  }
  const auto it = id_index_.find(sample_id);
  require(it != id_index_.end(), Errc::stage_failure,
          "sample id missing from view cache: " + std::to_string(sample_id));
  return it->second;
}

double ViewCache::mean_pass_rate() const {
  double acc = 0.0;
  for (auto r : pass_rates) acc += r;
  return pass_rates.empty() ? 0.0 : acc / static_cast<double>(pass_rates.size());
}

void ViewCache::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_f32_file(dir / "views.bin", kViewsMagic, payload.data(), payload.size());

  json samples = json::array();
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    json s;
    s["id"] = sample_ids[i];
    s["offset"] = kPayloadHeaderBytes + i * sample_stride() * sizeof(float);
    s["pass_rate"] = pass_rates[i];
    s["starved"] = static_cast<bool>(starved[i]);
    samples.push_back(s);
  }
  json manifest;
  manifest["format"] = "fairview-views";
  manifest["version"] = 1;
  manifest["traversal"] = tc.to_json();
  manifest["d_w"] = d_w;
  manifest["image_size"] = image_size;
  manifest["provenance"] = provenance;
  manifest["samples"] = samples;
  write_json_file(dir / "views_manifest.json", manifest);
  write_checksum_file(dir, {"views_manifest.json", "views.bin"});
}

ViewCache ViewCache::load(const std::filesystem::path& dir) {
  verify_checksum_file(dir);
  const json manifest = read_json_file(dir / "views_manifest.json");
  require(manifest.value("format", "") == "fairview-views", Errc::bad_container_header,
          "not a view cache: " + dir.string());
  ViewCache cache;
  cache.tc = TraversalConfig::from_json(manifest.at("traversal"));
  cache.d_w = manifest.at("d_w").get<std::size_t>();
  cache.image_size = manifest.at("image_size").get<int>();
  cache.provenance = manifest.at("provenance");
  cache.payload = read_f32_file(dir / "views.bin", kViewsMagic);
  const auto& samples = manifest.at("samples");
  require(samples.size() * cache.sample_stride() == cache.payload.size(),
          Errc::manifest_payload_mismatch, "view manifest/payload mismatch");
  for (const auto& s : samples) {
    cache.sample_ids.push_back(s.at("id").get<std::int64_t>());
    cache.pass_rates.push_back(s.at("pass_rate").get<double>());
    cache.starved.push_back(s.at("starved").get<bool>() ? 1 : 0);
  }
  return cache;
}

std::string ViewCache::checksum() const {
  std::string blob = tc.to_json().dump() + provenance.dump();
  blob.append(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(float));
  return sha256_hex(blob.data(), blob.size());
}

ViewCache generate_views(const datagen::Dataset& ds, inversion::EncoderBundle& encoder,
                         generative::GeneratorBundle& gan, const DirectionBasis& basis,
                         const TraversalConfig& tc, FilterBundle& filter) {
  tc.validate();
  require(static_cast<std::size_t>(tc.top_k) <= basis.directions.size(), Errc::config_invalid,
          "traversal top_k exceeds basis size");
  require(basis.d_w == gan.cfg.d_w, Errc::config_invalid, "basis/generator d_w mismatch");

  ViewCache cache;
  cache.tc = tc;
  cache.d_w = gan.cfg.d_w;
  cache.image_size = ds.cfg.image_size;
  cache.provenance["dataset_fingerprint"] = ds.fingerprint();
  cache.provenance["encoder_checksum"] = encoder.checksum();
  cache.provenance["generator_checksum"] = gan.checksum();
  cache.provenance["basis_checksum"] = basis.checksum();
  cache.provenance["filter_checksum"] = filter.checksum();

  const std::size_t n = ds.size();
  cache.sample_ids.resize(n);
  cache.pass_rates.resize(n);
  cache.starved.assign(n, 0);
  cache.payload.assign(n * cache.sample_stride(), 0.0f);

  // Invert all sources once, in manifest order.
  const auto img_size = static_cast<std::size_t>(ds.cfg.image_size);
  const std::size_t elems = ds.image_elems();
  const std::size_t m = static_cast<std::size_t>(tc.m);
  const std::size_t cand = static_cast<std::size_t>(tc.n_candidates);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
    const auto i = static_cast<std::size_t>(si);
    Rng rng(derive_seed(tc.seed, "views/sample/" + std::to_string(ds.meta[i].id)));

    TensorF x({1, 3, img_size, img_size});
    datagen::hwc_to_chw(ds.image_ptr(i), img_size, img_size, 3, x.data());
    TensorF w0 = encoder.encode(x);
    std::vector<float> w_base(w0.data(), w0.data() + cache.d_w);

    std::vector<std::vector<float>> passing_latents;
    std::vector<std::vector<float>> passing_images;  // HWC
    std::size_t generated = 0;

    for (int round = 0; round < 2 && passing_latents.size() < m; ++round) {
      TensorF w_batch({cand, cache.d_w});
      std::vector<std::vector<float>> latents(cand);
      for (std::size_t c = 0; c < cand; ++c) {
        const auto subset = rng.sample_without_replacement(
            static_cast<std::size_t>(tc.top_k), static_cast<std::size_t>(tc.dirs_per_view));
        std::vector<double> distances(subset.size());
        for (std::size_t j = 0; j < subset.size(); ++j) {
          double sigma = tc.distance_sigma;
          if (tc.scale_by_sqrt_eigenvalue)
            sigma *= std::sqrt(std::max(0.0, basis.eigenvalues[subset[j]]));
          distances[j] = rng.normal(0.0, sigma);
        }
        latents[c] = perturb(w_base, basis, subset, distances);
        std::copy(latents[c].begin(), latents[c].end(), w_batch.data() + c * cache.d_w);
      }
      TensorF imgs = gan.generate(w_batch);
      const auto scores = filter.score(imgs);
      const auto mask = validity_filter(scores, tc.filter_threshold);
      generated += cand;
      for (std::size_t c = 0; c < cand; ++c) {
        if (!mask[c]) continue;
        std::vector<float> hwc(elems);
        datagen::chw_to_hwc(imgs.data() + c * elems, img_size, img_size, 3, hwc.data());
        passing_images.push_back(std::move(hwc));
        passing_latents.push_back(latents[c]);
      }
    }

    cache.sample_ids[i] = ds.meta[i].id;
    cache.pass_rates[i] =
        static_cast<double>(passing_latents.size()) / static_cast<double>(generated);

    std::vector<std::size_t> chosen;
    if (passing_latents.size() >= m) {
      chosen = rng.sample_without_replacement(passing_latents.size(), m);
    } else {
      cache.starved[i] = 1;
      if (passing_latents.empty()) {
        // Nothing survived filtering: fall back to the reconstruction itself.
        TensorF recon = gan.generate(w0);
        std::vector<float> hwc(elems);
        datagen::chw_to_hwc(recon.data(), img_size, img_size, 3, hwc.data());
        passing_images.push_back(std::move(hwc));
        passing_latents.push_back(w_base);
      }
      for (std::size_t j = 0; chosen.size() < m; ++j) chosen.push_back(j % passing_latents.size());
    }

    float* img_dst = cache.payload.data() + i * cache.sample_stride();
    float* lat_dst = img_dst + m * elems;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& img = passing_images[chosen[j]];
      const auto& lat = passing_latents[chosen[j]];
      std::copy(img.begin(), img.end(), img_dst + j * elems);
      std::copy(lat.begin(), lat.end(), lat_dst + j * cache.d_w);
    }
  }
  return cache;
}

}  // namespace fairview::semantics
