// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "fairview/classifier/model.hpp"
#include "fairview/datagen/dataset.hpp"
#include "fairview/evidential/edl.hpp"
#include "fairview/generative/gan.hpp"
#include "fairview/rng.hpp"
#include "fairview/semantics/sefa.hpp"

using namespace fairview;

namespace {

datagen::FactorVector bench_factors() {
  datagen::FactorVector f;
  f.class_factor = 0;
  f.group_factor = 0;
  f.nuisance = {0.05, -0.03, 0.3, 0.4, 0.8, 0.6, 0.01};
  return f;
}

void BM_RenderSample(benchmark::State& state) {
  datagen::DatasetConfig cfg;
  cfg.groups = 4;
  cfg.per_group_count = {1, 1, 1, 1};
  cfg.label_noise_by_group = {0, 0, 0, 0};
  cfg.difficulty_by_group = {0.3, 0.3, 0.3, 0.3};
  const auto f = bench_factors();
  for (auto _ : state) {
    auto img = datagen::render_sample(f, cfg);
    benchmark::DoNotOptimize(img.data());
  }
}
BENCHMARK(BM_RenderSample);

void BM_ClassifierForward(benchmark::State& state) {
  classifier::ArchConfig arch;
  auto net = classifier::ClassifierNet<float>::build(arch);
  Rng rng(1);
  net.init(rng);
  const auto b = static_cast<std::size_t>(state.range(0));
  TensorF x({b, 3, 32, 32});
  for (auto& v : x.vec()) v = static_cast<float>(rng.uniform());
  for (auto _ : state) {
    auto heads = net.forward(x, false, false);
    benchmark::DoNotOptimize(heads.class_out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClassifierForward)->Arg(16)->Arg(64)->Arg(256);

void BM_GeneratorForward(benchmark::State& state) {
  generative::GanConfig cfg;
  auto bundle = generative::GeneratorBundle::build(cfg, 32);
  Rng rng(2);
  bundle.mapping.init(rng);
  bundle.synthesis.init(rng);
  const auto b = static_cast<std::size_t>(state.range(0));
  TensorF w({b, cfg.d_w});
  for (auto& v : w.vec()) v = static_cast<float>(rng.normal());
  for (auto _ : state) {
    auto img = bundle.generate(w);
    benchmark::DoNotOptimize(img.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GeneratorForward)->Arg(16)->Arg(56);

void BM_Factorize(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> a(n * n);
  for (auto& v : a) v = rng.normal();
  for (auto _ : state) {
    auto basis = semantics::factorize(a, n, n, n);
    benchmark::DoNotOptimize(basis.eigenvalues.data());
  }
}
BENCHMARK(BM_Factorize)->Arg(16)->Arg(64);

void BM_JsdNeighborLoss(benchmark::State& state) {
  Rng rng(4);
  std::vector<double> src = {0.7, 0.3};
  std::vector<std::vector<double>> nbs(7, std::vector<double>(2));
  for (auto& nb : nbs) {
    nb[0] = rng.uniform();
    nb[1] = 1.0 - nb[0];
  }
  for (auto _ : state) {
    const double l = classifier::neighbor_loss<double>(src, nbs, classifier::NeighborMetric::js);
    benchmark::DoNotOptimize(l);
  }
}
BENCHMARK(BM_JsdNeighborLoss);

void BM_EdlTotalLoss(benchmark::State& state) {
  Rng rng(5);
  const std::size_t b = 64;
  std::vector<std::vector<double>> ys(b), alphas(b);
  for (std::size_t i = 0; i < b; ++i) {
    ys[i] = {1.0, 0.0};
    alphas[i] = {1.0 + rng.uniform(0, 10), 1.0 + rng.uniform(0, 10)};
  }
  std::vector<std::vector<double>> grads;
  for (auto _ : state) {
    const double l = evidential::edl_total_loss_lambda(ys, alphas, 0.5, &grads);
    benchmark::DoNotOptimize(l);
  }
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_EdlTotalLoss);

}  // namespace

BENCHMARK_MAIN();
