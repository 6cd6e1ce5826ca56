// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "fairview/classifier/losses.hpp"
#include "fairview/evidential/edl.hpp"
#include "fairview/nn/net.hpp"

namespace fairview::classifier {

struct ArchConfig {
  std::vector<std::size_t> channels = {16, 32, 64, 128};  // four conv blocks
  std::size_t embed_dim = 128;
  int image_size = 32;
  int n_classes = 2;
  bool edl = false;          // evidential head (softplus evidence) vs logits
  bool mt = false;           // auxiliary group head
  int groups = 4;

  json to_json() const {
    json j;
    j["channels"] = channels;
    j["embed_dim"] = embed_dim;
    j["image_size"] = image_size;
    j["n_classes"] = n_classes;
    j["edl"] = edl;
    j["mt"] = mt;
    j["groups"] = groups;
    return j;
  }
  static ArchConfig from_json(const json& j) {
    ArchConfig a;
    a.channels = j.at("channels").get<std::vector<std::size_t>>();
    a.embed_dim = j.at("embed_dim").get<std::size_t>();
    a.image_size = j.at("image_size").get<int>();
    a.n_classes = j.at("n_classes").get<int>();
    a.edl = j.at("edl").get<bool>();
    a.mt = j.at("mt").get<bool>();
    a.groups = j.at("groups").get<int>();
    return a;
  }
};

/// Per-step loss weights; lambda_t is the evidential KL coefficient supplied
/// by the anneal schedule.
struct LossConfig {
  double alpha = 2.0;
  NeighborMetric metric = NeighborMetric::js;
  double label_smoothing = 0.1;
  bool mt_enabled = false;
  double mt_weight = 0.5;
  bool edl_enabled = false;
  double lambda_t = 0.0;
  bool backprop_views = false;
  bool normalize_by_batch = true;
};

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double neighbor = 0.0;  // already weighted by alpha
  double group = 0.0;     // already weighted by mt_weight
};

/// Detached neighbor references: per source, m probability vectors (JS) or
/// m embedding vectors (L2), captured from eval-statistics forwards.
template <typename T>
struct NeighborRefs {
  std::vector<std::vector<std::vector<T>>> per_source;
};

template <typename T>
struct HeadOutputs {
  Tensor<T> embeddings;  // (N, embed_dim)
  Tensor<T> class_out;   // (N, K): logits, or evidence in EDL mode
  Tensor<T> group_out;   // (N, G) when the group head exists, else empty
};

template <typename T>
class ClassifierNet {
 public:
  ArchConfig arch;

  static ClassifierNet build(const ArchConfig& arch) {
    require(arch.channels.size() >= 1, Errc::config_invalid, "need at least one conv block");
    ClassifierNet net;
    net.arch = arch;
    std::size_t prev = 3;
    for (std::size_t i = 0; i < arch.channels.size(); ++i) {
      const std::string tag = std::to_string(i + 1);
      net.backbone_.template add<nn::Conv2d<T>>("conv" + tag, prev, arch.channels[i], 2);
      net.backbone_.template add<nn::BatchNorm2d<T>>("bn" + tag, arch.channels[i]);
      net.backbone_.template add<nn::LeakyReLU<T>>("act" + tag, T(0.2));
      prev = arch.channels[i];
    }
    net.backbone_.template add<nn::GlobalAvgPool<T>>("pool");
    net.embed_.template add<nn::Dense<T>>("fc", prev, arch.embed_dim);
    net.embed_.template add<nn::LeakyReLU<T>>("act", T(0.2));
    net.class_head_.template add<nn::Dense<T>>("fc", arch.embed_dim,
                                               static_cast<std::size_t>(arch.n_classes));
    if (arch.edl) net.class_head_.template add<nn::Softplus<T>>("evidence");
    if (arch.mt)
      net.group_head_.template add<nn::Dense<T>>("fc", arch.embed_dim,
                                                 static_cast<std::size_t>(arch.groups));
    return net;
  }

  void init(Rng& rng) {
    backbone_.init(rng);
    embed_.init(rng);
    class_head_.init(rng);
    if (arch.mt) group_head_.init(rng);
  }

  /// collect_stats controls batch-normalization statistics only: true keeps
  /// train-mode batch statistics and updates the running buffers; false uses
  /// the running buffers and leaves them bit-unchanged.
  HeadOutputs<T> forward(const Tensor<T>& x, bool collect_stats, bool keep_cache) {
    HeadOutputs<T> out;
    Tensor<T> feat = backbone_.forward(x, collect_stats, keep_cache);
    out.embeddings = embed_.forward(feat, collect_stats, keep_cache);
    out.class_out = class_head_.forward(out.embeddings, collect_stats, keep_cache);
    if (arch.mt) out.group_out = group_head_.forward(out.embeddings, collect_stats, keep_cache);
    return out;
  }

  /// Probability vector the JS neighbor distance operates on: softmax of the
  /// logits, or alpha/S of the evidential head.
  std::vector<T> class_distribution(const T* class_out_row) const {
    const auto k = static_cast<std::size_t>(arch.n_classes);
    std::vector<T> p(k);
    if (arch.edl) {
      T s = T(0);
      for (std::size_t i = 0; i < k; ++i) s += class_out_row[i] + T(1);
      for (std::size_t i = 0; i < k; ++i) p[i] = (class_out_row[i] + T(1)) / s;
    } else {
      T mx = class_out_row[0];
      for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, class_out_row[i]);
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        p[i] = static_cast<T>(std::exp(static_cast<double>(class_out_row[i] - mx)));
        sum += static_cast<double>(p[i]);
      }
      for (std::size_t i = 0; i < k; ++i)
        p[i] = static_cast<T>(static_cast<double>(p[i]) / sum);
    }
    return p;
  }

  /// Chains d(loss)/d(distribution) back to d(loss)/d(class_out row).
  void chain_distribution_grad(const T* class_out_row, const std::vector<T>& p,
                               const std::vector<T>& dLdp, T* dclass_row) const {
    const auto k = static_cast<std::size_t>(arch.n_classes);
    if (arch.edl) {
      T s = T(0);
      for (std::size_t i = 0; i < k; ++i) s += class_out_row[i] + T(1);
      T dot = T(0);
      for (std::size_t i = 0; i < k; ++i) dot += dLdp[i] * p[i];
      for (std::size_t i = 0; i < k; ++i) dclass_row[i] += (dLdp[i] - dot) / s;
    } else {
      T dot = T(0);
      for (std::size_t i = 0; i < k; ++i) dot += dLdp[i] * p[i];
      for (std::size_t i = 0; i < k; ++i) dclass_row[i] += p[i] * (dLdp[i] - dot);
    }
  }

  /// Eval-statistics forwards over pre-assembled neighbor batches; returns
  /// detached per-source references (probability vectors or embeddings).
  NeighborRefs<T> reference_neighbors(const Tensor<T>& neighbor_images, std::size_t n_sources,
                                      std::size_t m, NeighborMetric metric,
                                      std::size_t chunk = 128) {
    NeighborRefs<T> refs;
    refs.per_source.assign(n_sources, {});
    const std::size_t total = neighbor_images.dim(0);
    require(total == n_sources * m, Errc::config_invalid,
            "neighbor batch size must be n_sources * m");
    const std::size_t per = neighbor_images.count() / total;
    for (std::size_t at = 0; at < total; at += chunk) {
      const std::size_t len = std::min(chunk, total - at);
      std::vector<std::size_t> shape = neighbor_images.shape();
      shape[0] = len;
      Tensor<T> part(shape);
      std::copy(neighbor_images.data() + at * per, neighbor_images.data() + (at + len) * per,
                part.data());
      HeadOutputs<T> h = forward(part, /*collect_stats=*/false, /*keep_cache=*/false);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t src = (at + i) / m;
        if (metric == NeighborMetric::js) {
          refs.per_source[src].push_back(
              class_distribution(h.class_out.data() + i * static_cast<std::size_t>(arch.n_classes)));
        } else {
          const T* e = h.embeddings.data() + i * arch.embed_dim;
          refs.per_source[src].emplace_back(e, e + arch.embed_dim);
        }
      }
    }
    return refs;
  }

  /// One structured-training loss evaluation with gradient accumulation:
  /// L_total = L_cls + alpha * sum_j L_N(source, neighbor_j) (+ mt_weight *
  /// group CE). Neighbors enter as detached references; gradients flow only
  /// through source activations, and neighbor forwards never touched the
  /// normalization buffers (they ran with collect_stats=false).
  LossBreakdown total_loss_step(const Tensor<T>& images, const std::vector<int>& labels,
                                const std::vector<int>& groups,
                                const NeighborRefs<T>* neighbors, const LossConfig& cfg,
                                bool accumulate_grads = true) {
    const std::size_t b = images.dim(0);
    require(labels.size() == b, Errc::config_invalid, "labels/batch mismatch");
    const auto k = static_cast<std::size_t>(arch.n_classes);
    const double scale = cfg.normalize_by_batch ? 1.0 / static_cast<double>(b) : 1.0;

    HeadOutputs<T> heads = forward(images, /*collect_stats=*/true, /*keep_cache=*/true);

    LossBreakdown out;
    Tensor<T> dclass(heads.class_out.shape());
    Tensor<T> demb_direct({b, arch.embed_dim});
    Tensor<T> dgroup;
    if (arch.mt) dgroup = Tensor<T>(heads.group_out.shape());

    // Classification term.
    if (cfg.edl_enabled) {
      require(arch.edl, Errc::config_invalid, "EDL loss requires an evidential head");
      std::vector<std::vector<T>> ys(b), alphas(b);
      for (std::size_t i = 0; i < b; ++i) {
        ys[i].assign(k, T(0));
        ys[i][static_cast<std::size_t>(labels[i])] = T(1);
        alphas[i].resize(k);
        for (std::size_t j = 0; j < k; ++j)
          alphas[i][j] = heads.class_out[i * k + j] + T(1);
      }
      std::vector<std::vector<T>> grad_alpha;
      const T total =
          evidential::edl_total_loss_lambda<T>(ys, alphas, cfg.lambda_t, &grad_alpha);
      out.cls = static_cast<double>(total) * scale;
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < k; ++j)
          dclass[i * k + j] = static_cast<T>(static_cast<double>(grad_alpha[i][j]) * scale);
    } else {
      std::vector<T> drow(k);
      for (std::size_t i = 0; i < b; ++i) {
        const double ce = smoothed_cross_entropy<T>(
            std::span<const T>(heads.class_out.data() + i * k, k), labels[i],
            cfg.label_smoothing, drow.data());
        out.cls += ce * scale;
        for (std::size_t j = 0; j < k; ++j)
          dclass[i * k + j] = static_cast<T>(static_cast<double>(drow[j]) * scale);
      }
    }

    // Auxiliary group head (multi-task mode).
    if (cfg.mt_enabled) {
      require(arch.mt, Errc::config_invalid, "MT loss requires a group head");
      require(groups.size() == b, Errc::config_invalid, "groups/batch mismatch");
      const auto gk = static_cast<std::size_t>(arch.groups);
      std::vector<T> dg(gk);
      for (std::size_t i = 0; i < b; ++i) {
        const double ce = smoothed_cross_entropy<T>(
            std::span<const T>(heads.group_out.data() + i * gk, gk), groups[i], 0.0, dg.data());
        out.group += cfg.mt_weight * ce * scale;
        for (std::size_t j = 0; j < gk; ++j)
          dgroup[i * gk + j] = static_cast<T>(cfg.mt_weight * static_cast<double>(dg[j]) * scale);
      }
    }

    // Neighbor-consistency term on detached references.
    if (neighbors != nullptr && cfg.alpha > 0.0) {
      require(neighbors->per_source.size() == b, Errc::config_invalid,
              "neighbor refs/batch mismatch");
      for (std::size_t i = 0; i < b; ++i) {
        const auto& nbs = neighbors->per_source[i];
        if (nbs.empty()) continue;
        if (cfg.metric == NeighborMetric::js) {
          const std::vector<T> p = class_distribution(heads.class_out.data() + i * k);
          std::vector<T> dLdp(k, T(0)), tmp(k);
          double l = 0.0;
          for (const auto& q : nbs) {
            l += jsd(std::span<const T>(p), std::span<const T>(q));
            jsd_grad_p(std::span<const T>(p), std::span<const T>(q), tmp.data());
            for (std::size_t j = 0; j < k; ++j) dLdp[j] += tmp[j];
          }
          out.neighbor += cfg.alpha * l * scale;
          for (auto& v : dLdp) v = static_cast<T>(static_cast<double>(v) * cfg.alpha * scale);
          chain_distribution_grad(heads.class_out.data() + i * k, p, dLdp, dclass.data() + i * k);
        } else {
          const T* e = heads.embeddings.data() + i * arch.embed_dim;
          double l = 0.0;
          for (const auto& q : nbs) {
            for (std::size_t j = 0; j < arch.embed_dim; ++j) {
              const double d = static_cast<double>(e[j]) - static_cast<double>(q[j]);
              l += d * d;
              demb_direct[i * arch.embed_dim + j] +=
                  static_cast<T>(2.0 * d * cfg.alpha * scale);
            }
          }
          out.neighbor += cfg.alpha * l * scale;
        }
      }
    }

    out.total = out.cls + out.neighbor + out.group;
    if (accumulate_grads) backward_from_heads(dclass, dgroup, demb_direct);
    return out;
  }

  /// Backprop-through-views variant for the ablation arm: sources and
  /// neighbors share one train-mode forward (batch statistics include the
  /// neighbors) and gradients flow through both sides of each JS/L2 pair.
  LossBreakdown total_loss_step_backprop_views(const Tensor<T>& images,
                                               const Tensor<T>& neighbor_images,
                                               const std::vector<int>& labels,
                                               const std::vector<int>& groups, std::size_t m,
                                               const LossConfig& cfg) {
    const std::size_t b = images.dim(0);
    const auto k = static_cast<std::size_t>(arch.n_classes);
    const double scale = cfg.normalize_by_batch ? 1.0 / static_cast<double>(b) : 1.0;
    require(neighbor_images.dim(0) == b * m, Errc::config_invalid,
            "neighbor batch size must be B * m");

    // Concatenate sources first, then neighbors grouped by source.
    std::vector<std::size_t> shape = images.shape();
    shape[0] = b + b * m;
    Tensor<T> all(shape);
    const std::size_t per = images.count() / b;
    std::copy(images.data(), images.data() + images.count(), all.data());
    std::copy(neighbor_images.data(), neighbor_images.data() + neighbor_images.count(),
              all.data() + images.count());

    HeadOutputs<T> heads = forward(all, /*collect_stats=*/true, /*keep_cache=*/true);
    (void)per;

    LossBreakdown out;
    Tensor<T> dclass(heads.class_out.shape());
    Tensor<T> demb_direct({b + b * m, arch.embed_dim});
    Tensor<T> dgroup;
    if (arch.mt) dgroup = Tensor<T>(heads.group_out.shape());

    std::vector<T> drow(k);
    for (std::size_t i = 0; i < b; ++i) {
      const double ce = smoothed_cross_entropy<T>(
          std::span<const T>(heads.class_out.data() + i * k, k), labels[i],
          cfg.label_smoothing, drow.data());
      out.cls += ce * scale;
      for (std::size_t j = 0; j < k; ++j)
        dclass[i * k + j] = static_cast<T>(static_cast<double>(drow[j]) * scale);
    }
    if (cfg.mt_enabled) {
      const auto gk = static_cast<std::size_t>(arch.groups);
      std::vector<T> dg(gk);
      for (std::size_t i = 0; i < b; ++i) {
        const double ce = smoothed_cross_entropy<T>(
            std::span<const T>(heads.group_out.data() + i * gk, gk), groups[i], 0.0, dg.data());
        out.group += cfg.mt_weight * ce * scale;
        for (std::size_t j = 0; j < gk; ++j)
          dgroup[i * gk + j] = static_cast<T>(cfg.mt_weight * static_cast<double>(dg[j]) * scale);
      }
    }
    if (cfg.alpha > 0.0) {
      std::vector<T> tmp(k);
      for (std::size_t i = 0; i < b; ++i) {
        const std::vector<T> p = class_distribution(heads.class_out.data() + i * k);
        std::vector<T> dLdp(k, T(0));
        double l = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t row = b + i * m + j;
          if (cfg.metric == NeighborMetric::js) {
            const std::vector<T> q = class_distribution(heads.class_out.data() + row * k);
            l += jsd(std::span<const T>(p), std::span<const T>(q));
            jsd_grad_p(std::span<const T>(p), std::span<const T>(q), tmp.data());
            for (std::size_t t = 0; t < k; ++t) dLdp[t] += tmp[t];
            // gradient through the neighbor side (JSD is symmetric)
            jsd_grad_p(std::span<const T>(q), std::span<const T>(p), tmp.data());
            for (auto& v : tmp) v = static_cast<T>(static_cast<double>(v) * cfg.alpha * scale);
            chain_distribution_grad(heads.class_out.data() + row * k, q, tmp,
                                    dclass.data() + row * k);
          } else {
            const T* e = heads.embeddings.data() + i * arch.embed_dim;
            const T* q = heads.embeddings.data() + row * arch.embed_dim;
            for (std::size_t t = 0; t < arch.embed_dim; ++t) {
              const double d = static_cast<double>(e[t]) - static_cast<double>(q[t]);
              l += d * d;
              demb_direct[i * arch.embed_dim + t] += static_cast<T>(2.0 * d * cfg.alpha * scale);
              demb_direct[row * arch.embed_dim + t] -=
                  static_cast<T>(2.0 * d * cfg.alpha * scale);
            }
          }
        }
        out.neighbor += cfg.alpha * l * scale;
        if (cfg.metric == NeighborMetric::js) {
          for (auto& v : dLdp) v = static_cast<T>(static_cast<double>(v) * cfg.alpha * scale);
          chain_distribution_grad(heads.class_out.data() + i * k, p, dLdp, dclass.data() + i * k);
        }
      }
    }
    out.total = out.cls + out.neighbor + out.group;
    backward_from_heads(dclass, dgroup, demb_direct);
    return out;
  }

  struct Prediction {
    std::vector<double> probs;
    int predicted = 0;
    std::optional<double> uncertainty;
  };

  std::vector<Prediction> predict(const Tensor<T>& images) {
    HeadOutputs<T> heads = forward(images, /*collect_stats=*/false, /*keep_cache=*/false);
    const std::size_t n = images.dim(0);
    const auto k = static_cast<std::size_t>(arch.n_classes);
    std::vector<Prediction> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<T> p = class_distribution(heads.class_out.data() + i * k);
      out[i].probs.assign(p.begin(), p.end());
      out[i].predicted = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (p[j] > p[static_cast<std::size_t>(out[i].predicted)])
          out[i].predicted = static_cast<int>(j);
      if (arch.edl) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j)
          s += static_cast<double>(heads.class_out[i * k + j]) + 1.0;
        out[i].uncertainty = static_cast<double>(k) / s;
      }
    }
    return out;
  }

  std::vector<nn::ParamRef<T>> params() {
    auto out = backbone_.params();
    auto e = embed_.params();
    auto c = class_head_.params();
    out.insert(out.end(), e.begin(), e.end());
    out.insert(out.end(), c.begin(), c.end());
    if (arch.mt) {
      auto g = group_head_.params();
      out.insert(out.end(), g.begin(), g.end());
    }
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) p.grad->fill(T(0));
  }

  std::string state_checksum() {
    std::string s = backbone_.state_checksum() + embed_.state_checksum() +
                    class_head_.state_checksum();
    if (arch.mt) s += group_head_.state_checksum();
    return sha256_hex(s);
  }

  std::string norm_stats_checksum() {
    std::string blob;
    for (auto& p : backbone_.state()) {
      if (p.grad != nullptr) continue;  // buffers only
      blob += p.name;
      blob.append(reinterpret_cast<const char*>(p.value->data()), p.value->size() * sizeof(T));
    }
    return sha256_hex(blob.data(), blob.size());
  }

  void save_into(ArrayStore& store) {
    backbone_.save_into(store, "backbone");
    embed_.save_into(store, "embed");
    class_head_.save_into(store, "class_head");
    if (arch.mt) group_head_.save_into(store, "group_head");
  }

  void load_from(const ArrayStore& store) {
    backbone_.load_from(store, "backbone");
    embed_.load_from(store, "embed");
    class_head_.load_from(store, "class_head");
    if (arch.mt) group_head_.load_from(store, "group_head");
  }

 private:
  void backward_from_heads(const Tensor<T>& dclass, const Tensor<T>& dgroup,
                           const Tensor<T>& demb_direct) {
    Tensor<T> demb = class_head_.backward(dclass, true);
    if (arch.mt && dgroup.size() > 0) {
      Tensor<T> demb_g = group_head_.backward(dgroup, true);
      for (std::size_t i = 0; i < demb.size(); ++i) demb[i] += demb_g[i];
    }
    for (std::size_t i = 0; i < demb.size(); ++i) demb[i] += demb_direct[i];
    Tensor<T> dfeat = embed_.backward(demb, true);
    backbone_.backward(dfeat, true);
  }

  nn::Sequential<T> backbone_;
  nn::Sequential<T> embed_;
  nn::Sequential<T> class_head_;
  nn::Sequential<T> group_head_;
};

}  // namespace fairview::classifier
