// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fairview/classifier/train.hpp"
#include "grad_check.hpp"

using namespace fairview;
using namespace fairview::classifier;

namespace {

TensorD random_images(Rng& rng, std::size_t n, std::size_t size) {
  TensorD t({n, 3, size, size});
  for (auto& v : t.vec()) v = rng.uniform();
  return t;
}

ArchConfig tiny_arch(bool edl, bool mt) {
  ArchConfig arch;
  arch.channels = {4, 6};
  arch.embed_dim = 8;
  arch.image_size = 8;
  arch.edl = edl;
  arch.mt = mt;
  arch.groups = 3;
  return arch;
}

// Small real dataset + a handcrafted view cache whose views are mild noise
// around each source image.
datagen::Dataset tiny_dataset(std::uint64_t seed, std::int64_t per_group = 24) {
  datagen::DatasetConfig cfg;
  cfg.groups = 2;
  cfg.per_group_count = {per_group, per_group};
  cfg.label_noise_by_group = {0.0, 0.2};
  cfg.difficulty_by_group = {0.0, 0.4};
  cfg.seed = seed;
  return datagen::generate_dataset(cfg);
}

semantics::ViewCache fake_view_cache(const datagen::Dataset& ds, int m, std::uint64_t seed) {
  semantics::ViewCache cache;
  cache.tc.m = m;
  cache.tc.n_candidates = m;
  cache.tc.seed = seed;
  cache.d_w = 4;
  cache.image_size = ds.cfg.image_size;
  cache.provenance["dataset_fingerprint"] = ds.fingerprint();
  const std::size_t elems = ds.image_elems();
  cache.sample_ids.resize(ds.size());
  cache.pass_rates.assign(ds.size(), 1.0);
  cache.starved.assign(ds.size(), 0);
  cache.payload.assign(ds.size() * cache.sample_stride(), 0.0f);
  Rng rng(seed);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    cache.sample_ids[i] = ds.meta[i].id;
    float* dst = cache.payload.data() + i * cache.sample_stride();
    for (int j = 0; j < m; ++j) {
      const float* src = ds.image_ptr(i);
      for (std::size_t k = 0; k < elems; ++k) {
        const float v = src[k] + 0.05f * static_cast<float>(rng.normal());
        dst[j * elems + k] = std::min(1.0f, std::max(0.0f, v));
      }
    }
  }
  return cache;
}

TrainConfig tiny_train_cfg(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.channels = {4, 6, 8, 8};
  cfg.embed_dim = 8;
  cfg.epochs = 2;
  cfg.batch = 8;
  cfg.lr = 1e-3;
  cfg.lr_decay = 1.0;
  cfg.m = 3;
  cfg.lazy_n = 2;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("jsd: fixtures and bounds") {
  const std::vector<double> p50 = {0.5, 0.5};
  const std::vector<double> one0 = {1.0, 0.0};
  const std::vector<double> zero1 = {0.0, 1.0};
  CHECK(jsd<double>(one0, zero1) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(jsd<double>(p50, p50) == doctest::Approx(0.0));
  CHECK(jsd<double>(p50, one0) == doctest::Approx(0.215762).epsilon(1e-5));
}

TEST_CASE("jsd properties on 1000 random distribution pairs") {
  Rng rng(211);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 2 + rng.uniform_index(4);
    std::vector<double> p(k), q(k);
    double ps = 0, qs = 0;
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = rng.uniform() + 1e-9;
      q[i] = rng.uniform() + 1e-9;
      ps += p[i];
      qs += q[i];
    }
    for (std::size_t i = 0; i < k; ++i) {
      p[i] /= ps;
      q[i] /= qs;
    }
    const double pq = jsd<double>(p, q);
    const double qp = jsd<double>(q, p);
    CHECK(pq == doctest::Approx(qp).epsilon(1e-10));
    CHECK(pq >= 0.0);
    CHECK(pq <= std::log(2.0) + 1e-12);
    CHECK(jsd<double>(p, p) == doctest::Approx(0.0));
  }
}

TEST_CASE("neighbor_loss: identity and composite fixture") {
  const std::vector<double> src = {0.5, 0.5};
  const std::vector<std::vector<double>> same = {{0.5, 0.5}, {0.5, 0.5}};
  CHECK(neighbor_loss<double>(src, same, NeighborMetric::js) == doctest::Approx(0.0));

  const std::vector<std::vector<double>> mixed = {{0.5, 0.5}, {1.0, 0.0}};
  CHECK(neighbor_loss<double>(src, mixed, NeighborMetric::js) ==
        doctest::Approx(0.215762).epsilon(1e-5));

  const std::vector<double> e = {1.0, 2.0};
  const std::vector<std::vector<double>> nb = {{0.0, 0.0}, {1.0, 1.0}};
  CHECK(neighbor_loss<double>(e, nb, NeighborMetric::l2) == doctest::Approx(5.0 + 1.0));
}

TEST_CASE("neighbor_loss: non-distribution input rejected in JS mode") {
  const std::vector<double> bad = {0.7, 0.7};
  const std::vector<std::vector<double>> nb = {{0.5, 0.5}};
  CHECK_THROWS_AS(neighbor_loss<double>(bad, nb, NeighborMetric::js), Error);
  CHECK_NOTHROW(neighbor_loss<double>(bad, nb, NeighborMetric::l2));
}

TEST_CASE("label smoothing produces (0.95, 0.05) binary targets") {
  const auto t = smoothed_targets(0, 2, 0.1);
  CHECK(t[0] == doctest::Approx(0.95));
  CHECK(t[1] == doctest::Approx(0.05));
  // loss at uniform logits equals cross entropy against the smoothed target
  std::vector<double> logits = {0.0, 0.0};
  const double ce = smoothed_cross_entropy<double>(logits, 0, 0.1, nullptr);
  CHECK(ce == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("predict: symmetric logits and zero evidence fixtures") {
  Rng rng(301);
  SUBCASE("softmax head: logits (0,0) -> (0.5, 0.5)") {
    auto net = ClassifierNet<double>::build(tiny_arch(false, false));
    net.init(rng);
    const std::vector<double> p = net.class_distribution(std::vector<double>{0.0, 0.0}.data());
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
  }
  SUBCASE("evidential head: zero evidence -> u = 1, p = (0.5, 0.5)") {
    auto net = ClassifierNet<double>::build(tiny_arch(true, false));
    net.init(rng);
    const std::vector<double> p = net.class_distribution(std::vector<double>{0.0, 0.0}.data());
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
  }
  SUBCASE("probabilities sum to one on random batches") {
    auto net = ClassifierNet<float>::build(tiny_arch(true, false));
    net.init(rng);
    TensorF x({5, 3, 8, 8});
    for (auto& v : x.vec()) v = static_cast<float>(rng.uniform());
    const auto preds = net.predict(x);
    for (const auto& pr : preds) {
      CHECK(pr.probs[0] + pr.probs[1] == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(pr.uncertainty.has_value());
      CHECK(*pr.uncertainty > 0.0);
      CHECK(*pr.uncertainty <= 1.0);
    }
  }
}

namespace {

// Shared scaffolding for the Eq.-1 gradient checks: fixed neighbor references
// (stop-gradient semantics make them constants of the loss).
testutil::GradCheckReport check_total_loss(bool edl, NeighborMetric metric, bool mt,
                                           double lambda, std::uint64_t seed) {
  Rng rng(seed);
  auto net = ClassifierNet<double>::build(tiny_arch(edl, mt));
  net.init(rng);

  const std::size_t b = 3, m = 2;
  const TensorD x = random_images(rng, b, 8);
  const TensorD nb = random_images(rng, b * m, 8);
  std::vector<int> y(b), g(b);
  for (auto& v : y) v = static_cast<int>(rng.uniform_index(2));
  for (auto& v : g) v = static_cast<int>(rng.uniform_index(3));

  const auto refs = net.reference_neighbors(nb, b, m, metric);

  LossConfig lc;
  lc.alpha = 2.0;
  lc.metric = metric;
  lc.mt_enabled = mt;
  lc.edl_enabled = edl;
  lc.lambda_t = lambda;
  lc.label_smoothing = edl ? 0.0 : 0.1;

  net.zero_grads();
  net.total_loss_step(x, y, g, &refs, lc, true);
  return testutil::check_gradients(net.params(), [&] {
    return net.total_loss_step(x, y, g, &refs, lc, false).total;
  });
}

}  // namespace

TEST_CASE("total-loss gradients match finite differences (JS mode, 20 trials)") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto report = check_total_loss(false, NeighborMetric::js, trial % 3 == 0, 0.0,
                                         400 + trial);
    CHECK_MESSAGE(report.failed == 0, "trial ", trial, " worst ", report.worst_param, " rel ",
                  report.worst_rel);
  }
}

TEST_CASE("total-loss gradients match finite differences (L2 mode, 20 trials)") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto report = check_total_loss(false, NeighborMetric::l2, false, 0.0, 500 + trial);
    CHECK_MESSAGE(report.failed == 0, "trial ", trial, " worst ", report.worst_param, " rel ",
                  report.worst_rel);
  }
}

TEST_CASE("evidential total-loss gradients match finite differences (20 trials)") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto report = check_total_loss(true, NeighborMetric::js, false,
                                         trial % 2 == 0 ? 0.5 : 0.0, 600 + trial);
    CHECK_MESSAGE(report.failed == 0, "trial ", trial, " worst ", report.worst_param, " rel ",
                  report.worst_rel);
  }
}

TEST_CASE("backprop-views step gradients match finite differences") {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Rng rng(700 + trial);
    auto net = ClassifierNet<double>::build(tiny_arch(false, false));
    net.init(rng);
    const std::size_t b = 2, m = 2;
    const TensorD x = random_images(rng, b, 8);
    const TensorD nb = random_images(rng, b * m, 8);
    std::vector<int> y = {0, 1}, g = {0, 1};
    LossConfig lc;
    lc.alpha = 1.5;
    lc.backprop_views = true;

    net.zero_grads();
    net.total_loss_step_backprop_views(x, nb, y, g, m, lc);
    // FD over the same concatenated-forward loss, without accumulating grads:
    // rebuild the loss via a scratch call that zeroes already-checked grads.
    auto report = testutil::check_gradients(net.params(), [&] {
      auto& scratch = net;
      // evaluate loss only; gradient side effects are discarded afterwards
      std::vector<TensorD> saved;
      for (auto& p : scratch.params()) saved.push_back(*p.grad);
      const double loss = scratch.total_loss_step_backprop_views(x, nb, y, g, m, lc).total;
      auto params = scratch.params();
      for (std::size_t i = 0; i < params.size(); ++i) *params[i].grad = saved[i];
      return loss;
    });
    CHECK_MESSAGE(report.failed == 0, "trial ", trial, " worst ", report.worst_param, " rel ",
                  report.worst_rel);
  }
}

TEST_CASE("stop-gradient: detached copies reproduce implementation gradients") {
  Rng rng(801);
  auto net = ClassifierNet<double>::build(tiny_arch(false, false));
  net.init(rng);
  const std::size_t b = 2, m = 3;
  const TensorD x = random_images(rng, b, 8);
  const TensorD nb = random_images(rng, b * m, 8);
  std::vector<int> y = {1, 0}, g = {0, 1};
  LossConfig lc;
  lc.alpha = 2.0;

  const auto refs = net.reference_neighbors(nb, b, m, NeighborMetric::js);
  net.zero_grads();
  net.total_loss_step(x, y, g, &refs, lc, true);
  std::vector<TensorD> grads_a;
  for (auto& p : net.params()) grads_a.push_back(*p.grad);

  // deep-copied references (explicitly detached constants)
  auto detached = refs;
  net.zero_grads();
  net.total_loss_step(x, y, g, &detached, lc, true);
  auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t k = 0; k < params[i].grad->size(); ++k)
      CHECK((*params[i].grad)[k] == grads_a[i][k]);
}

TEST_CASE("training contracts on a tiny dataset") {
  const auto full = tiny_dataset(900);
  const auto parts = datagen::split(full, {0.75, 0.25, 0.0}, 7);
  const auto cache = fake_view_cache(parts.train, 3, 901);

  SUBCASE("alpha = 0 with views is bit-identical to the baseline without views") {
    TrainConfig cfg = tiny_train_cfg(11);
    cfg.alpha = 0.0;
    auto with_views = train_classifier(parts.train, &cache, parts.val, cfg, 2);
    auto baseline = train_classifier(parts.train, nullptr, parts.val, cfg, 2);
    CHECK(with_views.bundle.checksum() == baseline.bundle.checksum());
  }

  SUBCASE("lazy_n beyond the horizon equals the alpha = 0 trajectory") {
    TrainConfig reg = tiny_train_cfg(12);
    reg.alpha = 2.0;
    reg.lazy_n = 1000000000;
    TrainConfig base = tiny_train_cfg(12);
    base.alpha = 0.0;
    auto never_reg = train_classifier(parts.train, &cache, parts.val, reg, 2);
    auto baseline = train_classifier(parts.train, nullptr, parts.val, base, 2);
    CHECK(never_reg.bundle.checksum() == baseline.bundle.checksum());
  }

  SUBCASE("same cfg and seed reproduce the best checkpoint bit-for-bit") {
    TrainConfig cfg = tiny_train_cfg(13);
    auto a = train_classifier(parts.train, &cache, parts.val, cfg, 2);
    auto b = train_classifier(parts.train, &cache, parts.val, cfg, 2);
    CHECK(a.bundle.checksum() == b.bundle.checksum());
    CHECK(a.best_epoch == b.best_epoch);
  }

  SUBCASE("lr = 0 leaves parameters at initialization") {
    TrainConfig cfg = tiny_train_cfg(14);
    cfg.lr = 0.0;
    cfg.epochs = 1;
    auto trained = train_classifier(parts.train, &cache, parts.val, cfg, 2);

    ArchConfig arch;
    arch.channels = cfg.channels;
    arch.embed_dim = cfg.embed_dim;
    arch.image_size = parts.train.cfg.image_size;
    arch.edl = false;
    arch.mt = false;
    arch.groups = 2;
    auto reference = ClassifierNet<float>::build(arch);
    Rng init_rng(derive_seed(cfg.seed, "cls/init"));
    reference.init(init_rng);
    // parameters identical; only BN running buffers move during forward
    auto tp = trained.bundle.net.params();
    auto rp = reference.params();
    for (std::size_t i = 0; i < tp.size(); ++i)
      for (std::size_t k = 0; k < tp[i].value->size(); ++k)
        CHECK((*tp[i].value)[k] == (*rp[i].value)[k]);
  }

  SUBCASE("norm statistics are bit-identical with and without neighbor forwards") {
    Rng rng(902);
    auto net = ClassifierNet<float>::build(tiny_arch(false, false));
    net.init(rng);
    TensorF x({4, 3, 8, 8});
    for (auto& v : x.vec()) v = static_cast<float>(rng.uniform());
    TensorF nb({8, 3, 8, 8});
    for (auto& v : nb.vec()) v = static_cast<float>(rng.uniform());
    std::vector<int> y = {0, 1, 0, 1}, g = {0, 1, 2, 0};
    LossConfig lc;
    lc.alpha = 2.0;

    auto net2 = ClassifierNet<float>::build(tiny_arch(false, false));
    Rng rng2(902);
    net2.init(rng2);
    REQUIRE(net.state_checksum() == net2.state_checksum());

    const auto refs = net.reference_neighbors(nb, 4, 2, NeighborMetric::js);
    net.zero_grads();
    net.total_loss_step(x, y, g, &refs, lc, true);
    net2.zero_grads();
    net2.total_loss_step(x, y, g, nullptr, lc, true);
    CHECK(net.norm_stats_checksum() == net2.norm_stats_checksum());
  }

  SUBCASE("view cache for a different dataset is refused") {
    TrainConfig cfg = tiny_train_cfg(15);
    const auto other = tiny_dataset(999);
    const auto other_parts = datagen::split(other, {0.75, 0.25, 0.0}, 7);
    try {
      train_classifier(other_parts.train, &cache, other_parts.val, cfg, 2);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::stale_artifact);
    }
  }

  SUBCASE("bundle save/load round trip preserves the checksum") {
    TrainConfig cfg = tiny_train_cfg(16);
    cfg.epochs = 1;
    auto trained = train_classifier(parts.train, &cache, parts.val, cfg, 2);
    const auto dir = std::filesystem::temp_directory_path() / "fairview_cls_bundle";
    std::filesystem::remove_all(dir);
    trained.bundle.save(dir);
    auto back = ClassifierBundle::load(dir);
    CHECK(back.checksum() == trained.bundle.checksum());
  }
}
