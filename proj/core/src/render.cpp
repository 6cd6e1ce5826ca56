// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "fairview/common.hpp"
#include "fairview/datagen/dataset.hpp"

namespace fairview::datagen {

namespace {

struct Rgb {
  float r, g, b;
};

// h in [0,1) on the hue wheel; s, v in [0,1].
Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

bool in_range(double v, const double range[2]) { return v >= range[0] && v <= range[1]; }

// Separable Gaussian blur with clamp-to-edge sampling.
void gaussian_blur(std::vector<float>& img, int size, double sigma) {
  if (sigma <= 1e-6) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (auto& k : kernel) k = static_cast<float>(k / sum);

  std::vector<float> tmp(img.size());
  const auto idx = [size](int y, int x, int c) {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(size) +
            static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c);
  };
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = std::clamp(x + k, 0, size - 1);
          acc += static_cast<double>(kernel[static_cast<std::size_t>(k + radius)]) *
                 img[idx(y, xx, c)];
        }
        tmp[idx(y, x, c)] = static_cast<float>(acc);
      }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = std::clamp(y + k, 0, size - 1);
          acc += static_cast<double>(kernel[static_cast<std::size_t>(k + radius)]) *
                 tmp[idx(yy, x, c)];
        }
        img[idx(y, x, c)] = static_cast<float>(acc);
      }
}

}  // namespace

std::vector<float> render_sample(const FactorVector& f, const DatasetConfig& cfg) {
  require(f.class_factor == 0 || f.class_factor == 1, Errc::config_invalid,
          "class_factor must be 0 or 1");
  require(f.group_factor >= 0 && f.group_factor < cfg.groups, Errc::config_invalid,
          "group_factor out of range");
  require(in_range(f.pos_x(), kPosRange) && in_range(f.pos_y(), kPosRange),
          Errc::config_invalid, "position nuisance out of range");
  require(in_range(f.scale(), kScaleRange), Errc::config_invalid, "scale out of range");
  require(in_range(f.rotation(), kRotRange), Errc::config_invalid, "rotation out of range");
  require(in_range(f.contrast(), kContrastRange), Errc::config_invalid,
          "contrast out of range");
  require(in_range(f.blur_sigma(), kBlurRange), Errc::config_invalid, "blur out of range");
  require(in_range(f.hue_jitter(), kHueJitterRange), Errc::config_invalid,
          "hue jitter out of range");

  const int size = cfg.image_size;
  const double difficulty = cfg.difficulty_by_group.at(static_cast<std::size_t>(f.group_factor));

  const double hue = static_cast<double>(f.group_factor) / cfg.groups + f.hue_jitter();
  const Rgb fg = hsv_to_rgb(hue, 0.80, 0.90);
  const Rgb bg{0.18f, 0.18f, 0.18f};

  const double cx = (0.5 + f.pos_x()) * size;
  const double cy = (0.5 + f.pos_y()) * size;
  const double radius = f.scale() * size;
  const double cos_r = std::cos(f.rotation());
  const double sin_r = std::sin(f.rotation());
  const double edge = 1.0;  // soft edge width in pixels

  std::vector<float> img(static_cast<std::size_t>(size) * size * 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5 - cx;
      const double py = y + 0.5 - cy;
      // signed distance to the shape boundary, negative inside
      double d;
      if (f.class_factor == 0) {
        d = std::sqrt(px * px + py * py) - radius;
      } else {
        const double rx = cos_r * px + sin_r * py;
        const double ry = -sin_r * px + cos_r * py;
        d = std::max(std::abs(rx), std::abs(ry)) - radius * 0.82;
      }
      const double coverage = std::clamp(0.5 - d / edge, 0.0, 1.0);
      const std::size_t base =
          (static_cast<std::size_t>(y) * static_cast<std::size_t>(size) +
           static_cast<std::size_t>(x)) * 3;
      img[base + 0] = static_cast<float>(bg.r + coverage * (fg.r - bg.r));
      img[base + 1] = static_cast<float>(bg.g + coverage * (fg.g - bg.g));
      img[base + 2] = static_cast<float>(bg.b + coverage * (fg.b - bg.b));
    }
  }

  // Per-group degradation: difficulty adds blur and removes contrast.
  const double blur = f.blur_sigma() + 1.5 * difficulty;
  gaussian_blur(img, size, blur);
  const double contrast = f.contrast() * (1.0 - 0.45 * difficulty);
  for (auto& v : img)
    v = std::clamp(static_cast<float>(0.5 + contrast * (static_cast<double>(v) - 0.5)), 0.0f,
                   1.0f);
  return img;
}

}  // namespace fairview::datagen
