// SPDX-License-Identifier: Apache-2.0
#include "fairview/classifier/train.hpp"

#include <algorithm>
#include <cmath>

#include "fairview/rng.hpp"

namespace fairview::classifier {

void TrainConfig::validate() const {
  require(alpha >= 0.0, Errc::config_invalid, "alpha must be >= 0");
  require(m >= 0, Errc::config_invalid, "m must be >= 0");
  require(lazy_n >= 1, Errc::config_invalid, "lazy_n must be >= 1");
  require(mt_weight >= 0.0, Errc::config_invalid, "mt_weight must be >= 0");
  require(label_smoothing >= 0.0 && label_smoothing < 1.0, Errc::config_invalid,
          "label_smoothing must be in [0, 1)");
  require(epochs >= 1 && batch >= 1, Errc::config_invalid, "epochs/batch out of range");
  require(lr >= 0.0, Errc::config_invalid, "lr must be >= 0");
  require(!channels.empty(), Errc::config_invalid, "need at least one conv block");
}

json TrainConfig::to_json() const {
  json j;
  j["alpha"] = alpha;
  j["m"] = m;
  j["lazy_n"] = lazy_n;
  j["metric"] = metric == NeighborMetric::js ? "js" : "l2";
  j["mt"] = mt_enabled;
  j["mt_weight"] = mt_weight;
  j["edl"] = edl_enabled;
  j["kl_anneal"] =
      kl_schedule.mode == evidential::AnnealSchedule::Mode::off ? "off" : "linear";
  j["kl_anneal_epochs"] = kl_schedule.anneal_epochs;
  j["label_smoothing"] = label_smoothing;
  j["backprop_views"] = backprop_views;
  j["epochs"] = epochs;
  j["batch"] = batch;
  j["lr"] = lr;
  j["lr_decay"] = lr_decay;
  j["lr_decay_at"] = lr_decay_at;
  j["normalize_by_batch"] = normalize_by_batch;
  j["seed"] = seed;
  j["channels"] = channels;
  j["embed_dim"] = embed_dim;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig cfg;
  cfg.alpha = j.at("alpha").get<double>();
  cfg.m = j.at("m").get<int>();
  cfg.lazy_n = j.at("lazy_n").get<int>();
  cfg.metric = j.at("metric").get<std::string>() == "l2" ? NeighborMetric::l2
                                                         : NeighborMetric::js;
  cfg.mt_enabled = j.at("mt").get<bool>();
  cfg.mt_weight = j.at("mt_weight").get<double>();
  cfg.edl_enabled = j.at("edl").get<bool>();
  cfg.kl_schedule.mode = j.at("kl_anneal").get<std::string>() == "linear"
                             ? evidential::AnnealSchedule::Mode::linear
                             : evidential::AnnealSchedule::Mode::off;
  cfg.kl_schedule.anneal_epochs = j.at("kl_anneal_epochs").get<double>();
  cfg.label_smoothing = j.at("label_smoothing").get<double>();
  cfg.backprop_views = j.at("backprop_views").get<bool>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch = j.at("batch").get<int>();
  cfg.lr = j.at("lr").get<double>();
  cfg.lr_decay = j.at("lr_decay").get<double>();
  cfg.lr_decay_at = j.at("lr_decay_at").get<double>();
  cfg.normalize_by_batch = j.at("normalize_by_batch").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.channels = j.at("channels").get<std::vector<std::size_t>>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  return cfg;
}

void ClassifierBundle::save(const std::filesystem::path& dir) {
  ArrayStore store;
  store.manifest = manifest;
  store.manifest["kind"] = "classifier-bundle";
  store.manifest["config"] = cfg.to_json();
  store.manifest["arch"] = net.arch.to_json();
  net.save_into(store);
  store.save(dir);
}

ClassifierBundle ClassifierBundle::load(const std::filesystem::path& dir) {
  ArrayStore store = ArrayStore::load(dir);
  require(store.manifest.value("kind", "") == "classifier-bundle", Errc::bad_container_header,
          "not a classifier bundle: " + dir.string());
  ClassifierBundle b;
  b.cfg = TrainConfig::from_json(store.manifest.at("config"));
  b.net = ClassifierNet<float>::build(ArchConfig::from_json(store.manifest.at("arch")));
  b.net.load_from(store);
  b.manifest = store.manifest;
  return b;
}

namespace {

struct ValMetrics {
  double acc = 0.0, dob = 0.0, ser = 0.0;
};

ValMetrics evaluate(ClassifierNet<float>& net, const datagen::Dataset& ds) {
  const auto s = static_cast<std::size_t>(ds.cfg.image_size);
  std::vector<fairness::PredictionRecord> records;
  records.reserve(ds.size());
  const std::size_t chunk = 256;
  for (std::size_t at = 0; at < ds.size(); at += chunk) {
    const std::size_t len = std::min(chunk, ds.size() - at);
    TensorF x({len, 3, s, s});
    for (std::size_t i = 0; i < len; ++i)
      datagen::hwc_to_chw(ds.image_ptr(at + i), s, s, 3, x.data() + i * 3 * s * s);
    const auto preds = net.predict(x);
    for (std::size_t i = 0; i < len; ++i) {
      fairness::PredictionRecord r;
      r.sample_id = ds.meta[at + i].id;
      r.predicted = preds[i].predicted;
      r.probs = preds[i].probs;
      r.uncertainty = preds[i].uncertainty;
      r.y = ds.meta[at + i].y_prenoise;
      r.g = ds.meta[at + i].g;
      records.push_back(std::move(r));
    }
  }
  const auto table = fairness::group_accuracies(records);
  ValMetrics m;
  m.acc = table.micro_pct;
  const auto accs = fairness::cell_accuracies(table);
  m.dob = accs.size() >= 2 ? fairness::dob(accs) : 0.0;
  m.ser = fairness::ser(accs);
  return m;
}

}  // namespace

TrainClassifierResult train_classifier(const datagen::Dataset& train,
                                       const semantics::ViewCache* views,
                                       const datagen::Dataset& val, const TrainConfig& cfg,
                                       int groups) {
  cfg.validate();
  require(train.size() > 0 && val.size() > 0, Errc::config_invalid,
          "train/val datasets must be non-empty");
  if (views != nullptr) {
    require(views->provenance.value("dataset_fingerprint", "") == train.fingerprint(),
            Errc::stale_artifact,
            "view cache was built for a different dataset (fingerprint mismatch)");
    require(cfg.m <= views->tc.m, Errc::config_invalid,
            "cfg.m exceeds the cached neighbor count");
  }

  ArchConfig arch;
  arch.channels = cfg.channels;
  arch.embed_dim = cfg.embed_dim;
  arch.image_size = train.cfg.image_size;
  arch.n_classes = 2;
  arch.edl = cfg.edl_enabled;
  arch.mt = cfg.mt_enabled;
  arch.groups = groups;

  ClassifierBundle bundle;
  bundle.cfg = cfg;
  bundle.net = ClassifierNet<float>::build(arch);
  Rng init_rng(derive_seed(cfg.seed, "cls/init"));
  bundle.net.init(init_rng);
  bundle.manifest["dataset_fingerprint"] = train.fingerprint();
  bundle.manifest["view_cache_checksum"] = views ? views->checksum() : "";
  bundle.manifest["seed"] = cfg.seed;

  Rng shuffle_rng(derive_seed(cfg.seed, "cls/shuffle"));
  nn::Adam<float> opt({cfg.lr, 0.9, 0.999, 1e-8});
  auto params = bundle.net.params();

  const auto s = static_cast<std::size_t>(train.cfg.image_size);
  const std::size_t elems = train.image_elems();
  const std::size_t b_cfg = static_cast<std::size_t>(cfg.batch);
  const std::size_t m = static_cast<std::size_t>(cfg.m);
  const bool use_views = views != nullptr && cfg.m > 0;

  std::vector<EpochStats> history;
  ArrayStore best_state;
  double best_acc = -1.0;
  int best_epoch = -1;
  std::uint64_t global_step = 0;
  const int decay_epoch = static_cast<int>(std::ceil(cfg.lr_decay_at * cfg.epochs));

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch == decay_epoch && cfg.lr_decay != 1.0) opt.set_lr(cfg.lr * cfg.lr_decay);
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t steps = 0;

    for (std::size_t at = 0; at < train.size(); at += b_cfg) {
      const std::size_t b = std::min(b_cfg, train.size() - at);
      TensorF x({b, 3, s, s});
      std::vector<int> y(b), g(b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto idx = order[at + i];
        datagen::hwc_to_chw(train.image_ptr(idx), s, s, 3, x.data() + i * 3 * s * s);
        y[i] = train.meta[idx].y;
        g[i] = train.meta[idx].g;
      }

      // 1-based step index: with lazy_n = n, steps n, 2n, ... are regularized.
      const bool regularized =
          use_views && ((global_step + 1) % static_cast<std::uint64_t>(cfg.lazy_n) == 0);

      LossConfig lc;
      lc.alpha = cfg.alpha;
      lc.metric = cfg.metric;
      lc.label_smoothing = cfg.label_smoothing;
      lc.mt_enabled = cfg.mt_enabled;
      lc.mt_weight = cfg.mt_weight;
      lc.edl_enabled = cfg.edl_enabled;
      lc.lambda_t = cfg.kl_schedule.lambda_at(static_cast<double>(epoch));
      lc.backprop_views = cfg.backprop_views;
      lc.normalize_by_batch = cfg.normalize_by_batch;

      bundle.net.zero_grads();
      LossBreakdown loss;
      if (regularized) {
        TensorF nb({b * m, 3, s, s});
        for (std::size_t i = 0; i < b; ++i) {
          const auto idx = order[at + i];
          const auto vi = views->index_of(train.meta[idx].id);
          const float* src = views->views_of(vi);
          for (std::size_t j = 0; j < m; ++j)
            datagen::hwc_to_chw(src + j * elems, s, s, 3,
                                nb.data() + (i * m + j) * 3 * s * s);
        }
        if (cfg.backprop_views) {
          loss = bundle.net.total_loss_step_backprop_views(x, nb, y, g, m, lc);
        } else {
          const auto refs = bundle.net.reference_neighbors(nb, b, m, cfg.metric);
          loss = bundle.net.total_loss_step(x, y, g, &refs, lc);
        }
      } else {
        loss = bundle.net.total_loss_step(x, y, g, nullptr, lc);
      }
      require(std::isfinite(loss.total), Errc::stage_failure,
              "classifier training diverged at step " + std::to_string(global_step));
      opt.step(params);
      epoch_loss += loss.total;
      ++steps;
      ++global_step;
    }

    const ValMetrics vm = evaluate(bundle.net, val);
    history.push_back({epoch, epoch_loss / static_cast<double>(steps), vm.acc, vm.dob, vm.ser});
    if (vm.acc > best_acc) {
      best_acc = vm.acc;
      best_epoch = epoch;
      best_state = ArrayStore();
      bundle.net.save_into(best_state);
    }
  }

  bundle.net.load_from(best_state);
  bundle.manifest["best_epoch"] = best_epoch;
  bundle.manifest["best_val_acc"] = best_acc;
  return {std::move(bundle), std::move(history), best_epoch};
}

std::vector<fairness::PredictionRecord> predict_records(ClassifierBundle& bundle,
                                                        const datagen::Dataset& ds,
                                                        EvalLabels labels, std::size_t chunk) {
  const auto s = static_cast<std::size_t>(ds.cfg.image_size);
  std::vector<fairness::PredictionRecord> records;
  records.reserve(ds.size());
  for (std::size_t at = 0; at < ds.size(); at += chunk) {
    const std::size_t len = std::min(chunk, ds.size() - at);
    TensorF x({len, 3, s, s});
    for (std::size_t i = 0; i < len; ++i)
      datagen::hwc_to_chw(ds.image_ptr(at + i), s, s, 3, x.data() + i * 3 * s * s);
    const auto preds = bundle.net.predict(x);
    for (std::size_t i = 0; i < len; ++i) {
      fairness::PredictionRecord r;
      r.sample_id = ds.meta[at + i].id;
      r.predicted = preds[i].predicted;
      r.probs = preds[i].probs;
      r.uncertainty = preds[i].uncertainty;
      r.y = labels == EvalLabels::prenoise ? ds.meta[at + i].y_prenoise : ds.meta[at + i].y;
      r.g = ds.meta[at + i].g;
      records.push_back(std::move(r));
    }
  }
  return records;
}

}  // namespace fairview::classifier
