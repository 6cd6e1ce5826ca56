// SPDX-License-Identifier: Apache-2.0
#include "fairview/datagen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fairview/common.hpp"
#include "fairview/rng.hpp"
#include "fairview/sha256.hpp"

namespace fairview::datagen {

namespace fs = std::filesystem;

namespace {
constexpr char kImagesMagic[8] = {'F', 'V', 'I', 'M', 'G', '0', '1', '\n'};

json factors_to_json(const FactorVector& f) {
  json j;
  j["class"] = f.class_factor;
  j["group"] = f.group_factor;
  j["nuisance"] = f.nuisance;
  return j;
}

FactorVector factors_from_json(const json& j) {
  FactorVector f;
  f.class_factor = j.at("class").get<int>();
  f.group_factor = j.at("group").get<int>();
  const auto nu = j.at("nuisance").get<std::vector<double>>();
  require(nu.size() == kNuisanceDims, Errc::manifest_payload_mismatch,
          "bad nuisance dimension in manifest");
  std::copy(nu.begin(), nu.end(), f.nuisance.begin());
  return f;
}
}  // namespace

void DatasetConfig::validate() const {
  require(groups >= 1, Errc::config_invalid, "groups must be >= 1");
  require(static_cast<int>(per_group_count.size()) == groups, Errc::config_invalid,
          "per_group_count must have one entry per group");
  require(static_cast<int>(label_noise_by_group.size()) == groups, Errc::config_invalid,
          "label_noise_by_group must have one entry per group");
  require(static_cast<int>(difficulty_by_group.size()) == groups, Errc::config_invalid,
          "difficulty_by_group must have one entry per group");
  for (auto c : per_group_count)
    require(c > 0, Errc::config_invalid, "per_group_count entries must be > 0");
  for (auto r : label_noise_by_group)
    require(r >= 0.0 && r < 0.5, Errc::config_invalid, "label noise must be in [0, 0.5)");
  for (auto d : difficulty_by_group)
    require(d >= 0.0 && d <= 1.0, Errc::config_invalid, "difficulty must be in [0, 1]");
  require(image_size >= 8, Errc::config_invalid, "image_size must be >= 8");
}

json DatasetConfig::to_json() const {
  json j;
  j["groups"] = groups;
  j["per_group_count"] = per_group_count;
  j["label_noise_by_group"] = label_noise_by_group;
  j["difficulty_by_group"] = difficulty_by_group;
  j["image_size"] = image_size;
  j["seed"] = seed;
  return j;
}

DatasetConfig DatasetConfig::from_json(const json& j) {
  DatasetConfig cfg;
  cfg.groups = j.at("groups").get<int>();
  cfg.per_group_count = j.at("per_group_count").get<std::vector<std::int64_t>>();
  cfg.label_noise_by_group = j.at("label_noise_by_group").get<std::vector<double>>();
  cfg.difficulty_by_group = j.at("difficulty_by_group").get<std::vector<double>>();
  cfg.image_size = j.at("image_size").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

std::string Dataset::fingerprint() const {
  std::string blob = cfg.to_json().dump();
  for (const auto& m : meta) {
    blob += "|" + std::to_string(m.id) + "," + std::to_string(m.y) + "," +
            std::to_string(m.y_prenoise) + "," + std::to_string(m.g);
  }
  const std::string meta_sha = sha256_hex(blob);
  const std::string img_sha =
      sha256_hex(images.data(), images.size() * sizeof(float));
  return sha256_hex(meta_sha + img_sha);
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.cfg = cfg;
  out.meta.reserve(indices.size());
  out.images.reserve(indices.size() * image_elems());
  for (auto i : indices) {
    out.meta.push_back(meta[i]);
    const float* p = image_ptr(i);
    out.images.insert(out.images.end(), p, p + image_elems());
  }
  return out;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.cfg = cfg;
  std::int64_t next_id = 0;
  for (int g = 0; g < cfg.groups; ++g) {
    Rng rng(derive_seed(cfg.seed, "datagen/group/" + std::to_string(g)));
    const auto count = cfg.per_group_count[static_cast<std::size_t>(g)];
    for (std::int64_t j = 0; j < count; ++j) {
      FactorVector f;
      f.class_factor = static_cast<int>(j % 2);  // exact class balance per group
      f.group_factor = g;
      f.nuisance[0] = rng.uniform(kPosRange[0], kPosRange[1]);
      f.nuisance[1] = rng.uniform(kPosRange[0], kPosRange[1]);
      f.nuisance[2] = rng.uniform(kScaleRange[0], kScaleRange[1]);
      f.nuisance[3] = rng.uniform(kRotRange[0], kRotRange[1]);
      f.nuisance[4] = rng.uniform(kContrastRange[0], kContrastRange[1]);
      f.nuisance[5] = rng.uniform(kBlurRange[0], kBlurRange[1]);
      f.nuisance[6] = rng.uniform(kHueJitterRange[0], kHueJitterRange[1]);

      SampleMeta m;
      m.id = next_id++;
      m.g = g;
      m.factors = f;
      m.y_prenoise = f.class_factor;
      const double noise = cfg.label_noise_by_group[static_cast<std::size_t>(g)];
      const bool flip = rng.uniform() < noise;
      m.y = flip ? 1 - m.y_prenoise : m.y_prenoise;
      m.offset = 0;  // assigned at write time
      ds.meta.push_back(m);

      const auto img = render_sample(f, cfg);
      ds.images.insert(ds.images.end(), img.begin(), img.end());
    }
  }
  return ds;
}

SplitResult split(const Dataset& ds, const std::array<double, 3>& fractions,
                  std::uint64_t seed) {
  double sum = 0.0;
  int parts = 0;
  for (auto f : fractions) {
    require(f >= 0.0, Errc::config_invalid, "split fractions must be nonnegative");
    sum += f;
    if (f > 0.0) ++parts;
  }
  require(std::abs(sum - 1.0) < 1e-9, Errc::config_invalid, "split fractions must sum to 1");
  require(parts >= 1, Errc::config_invalid, "at least one split fraction must be positive");

  // Cells keyed by (y, g); shuffled independently, partitioned by cumulative
  // fraction boundaries so the three parts are disjoint and exhaustive.
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < ds.size(); ++i)
    cells[{ds.meta[i].y, ds.meta[i].g}].push_back(i);

  std::vector<std::size_t> train_idx, val_idx, test_idx;
  for (auto& [key, idx] : cells) {
    require(idx.size() >= static_cast<std::size_t>(parts), Errc::config_invalid,
            "cell (y=" + std::to_string(key.first) + ",g=" + std::to_string(key.second) +
                ") has fewer samples than split parts");
    Rng rng(derive_seed(seed, "split/" + std::to_string(key.first) + "/" +
                                  std::to_string(key.second)));
    rng.shuffle(idx);
    const auto n = idx.size();
    const auto b1 = static_cast<std::size_t>(std::llround(fractions[0] * n));
    const auto b2 = static_cast<std::size_t>(
        std::min<long long>(static_cast<long long>(n),
                            std::llround((fractions[0] + fractions[1]) * n)));
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + b1);
    val_idx.insert(val_idx.end(), idx.begin() + b1, idx.begin() + b2);
    test_idx.insert(test_idx.end(), idx.begin() + b2, idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {ds.subset(train_idx), ds.subset(val_idx), ds.subset(test_idx)};
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const std::size_t elems = ds.image_elems();

  F32Writer writer(dir / "images.bin", kImagesMagic);
  json samples = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    json s;
    s["id"] = ds.meta[i].id;
    s["y"] = ds.meta[i].y;
    s["y_prenoise"] = ds.meta[i].y_prenoise;
    s["g"] = ds.meta[i].g;
    s["factors"] = factors_to_json(ds.meta[i].factors);
    s["offset"] = writer.offset();
    samples.push_back(s);
    writer.append(ds.image_ptr(i), elems);
  }
  writer.finish();

  json manifest;
  manifest["format"] = "fairview-dataset";
  manifest["version"] = 1;
  manifest["image"] = {{"height", ds.cfg.image_size},
                       {"width", ds.cfg.image_size},
                       {"channels", 3},
                       {"layout", "hwc-f32le"}};
  manifest["groups"] = ds.cfg.groups;
  manifest["config"] = ds.cfg.to_json();
  manifest["samples"] = samples;
  write_json_file(dir / "manifest.json", manifest);
  write_checksum_file(dir, {"manifest.json", "images.bin"});
}

Dataset read_dataset(const fs::path& dir) {
  verify_checksum_file(dir);
  const json manifest = read_json_file(dir / "manifest.json");
  require(manifest.value("format", "") == "fairview-dataset", Errc::bad_container_header,
          "not a fairview dataset: " + dir.string());

  Dataset ds;
  ds.cfg = DatasetConfig::from_json(manifest.at("config"));
  const std::size_t elems = ds.image_elems();
  std::vector<float> payload = read_f32_file(dir / "images.bin", kImagesMagic);
  const auto& samples = manifest.at("samples");
  require(samples.size() * elems == payload.size(), Errc::manifest_payload_mismatch,
          "manifest/payload mismatch: manifest lists " + std::to_string(samples.size()) +
              " samples, payload holds " + std::to_string(payload.size() / elems));

  ds.meta.reserve(samples.size());
  for (const auto& s : samples) {
    SampleMeta m;
    m.id = s.at("id").get<std::int64_t>();
    m.y = s.at("y").get<int>();
    m.y_prenoise = s.at("y_prenoise").get<int>();
    m.g = s.at("g").get<int>();
    m.factors = factors_from_json(s.at("factors"));
    m.offset = s.at("offset").get<std::uint64_t>();
    const std::uint64_t expect =
        kPayloadHeaderBytes + static_cast<std::uint64_t>(ds.meta.size()) * elems * sizeof(float);
    require(m.offset == expect, Errc::manifest_payload_mismatch,
            "sample offset out of order in manifest");
    ds.meta.push_back(m);
  }
  ds.images = std::move(payload);
  return ds;
}

void hwc_to_chw(const float* src, std::size_t h, std::size_t w, std::size_t c, float* dst) {
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        dst[ch * h * w + y * w + x] = src[(y * w + x) * c + ch];
}

void chw_to_hwc(const float* src, std::size_t h, std::size_t w, std::size_t c, float* dst) {
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        dst[(y * w + x) * c + ch] = src[ch * h * w + y * w + x];
}

TensorF make_batch_chw(const Dataset& ds, const std::vector<std::size_t>& indices) {
  const auto s = static_cast<std::size_t>(ds.cfg.image_size);
  TensorF batch({indices.size(), 3, s, s});
  for (std::size_t i = 0; i < indices.size(); ++i)
    hwc_to_chw(ds.image_ptr(indices[i]), s, s, 3, batch.data() + i * 3 * s * s);
  return batch;
}

}  // namespace fairview::datagen
