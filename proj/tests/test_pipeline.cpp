// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fairview/csv.hpp"
#include "fairview/pipeline/ablate.hpp"
#include "fairview/pipeline/plots.hpp"
#include "fairview/pipeline/stages.hpp"

using namespace fairview;
using namespace fairview::pipeline;
namespace fs = std::filesystem;

namespace {

ExperimentConfig mini_config(const fs::path& out, std::uint64_t seed) {
  const std::string doc = R"(
seed = )" + std::to_string(seed) + R"(
out = ")" + out.string() + R"("

[datagen]
groups = 2
per_group = [16, 16]
label_noise = [0.0, 0.1]
difficulty = [0.0, 0.3]
split = [0.5, 0.25, 0.25]

[gan]
base_channels = 24
steps = 6
batch = 4
checkpoint_every = 3

[encoder]
steps = 6
batch = 4

[views]
m = 2
candidates = 4
dirs_per_view = 2
top_k = 8
filter_threshold = 0.0
filter_steps = 10

[classifier]
alpha = 2.0
m = 2
lazy_n = 2
epochs = 1
batch = 8
channels = [4, 6, 8]
embed_dim = 8
edl = true

[eval]
tau_step = 0.25
)";
  return ExperimentConfig::from_toml(parse_toml_string(doc, "<mini>"));
}

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("fairview_pipe_" + tag);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("experiment config: defaults carry the paper hyperparameters") {
  const auto cfg = ExperimentConfig::from_toml(
      parse_toml_string(default_config_toml(), "<defaults>"));
  CHECK(cfg.cls.alpha == doctest::Approx(2.0));
  CHECK(cfg.cls.m == 7);
  CHECK(cfg.cls.lazy_n == 2);
  CHECK(cfg.cls.label_smoothing == doctest::Approx(0.1));
  CHECK(cfg.views.n_candidates == 56);
  CHECK(cfg.views.m == 7);
  CHECK(cfg.cls.kl_schedule.mode == evidential::AnnealSchedule::Mode::off);
  CHECK(cfg.dataset.groups == 4);
}

TEST_CASE("experiment config: stage seeds derive from the root seed") {
  auto cfg = ExperimentConfig::from_toml(parse_toml_string("seed = 7", "<t>"));
  CHECK(cfg.dataset.seed == derive_seed(7, "datagen"));
  CHECK(cfg.gan.seed == derive_seed(7, "gan"));
  CHECK(cfg.cls.seed == derive_seed(7, "classifier"));
  CHECK(cfg.dataset.seed != cfg.gan.seed);
}

TEST_CASE("experiment config: stage fingerprints isolate stage settings") {
  auto a = ExperimentConfig::from_toml(parse_toml_string("seed = 1", "<t>"));
  auto b = ExperimentConfig::from_toml(
      parse_toml_string("seed = 1\n[classifier]\nalpha = 0.0", "<t>"));
  CHECK(a.stage_fingerprint("datagen") == b.stage_fingerprint("datagen"));
  CHECK(a.stage_fingerprint("train-cls") != b.stage_fingerprint("train-cls"));
}

TEST_CASE("mini pipeline: runs, skips when fresh, rebuilds on dataset change") {
  const auto out = temp_dir("mini");
  auto cfg = mini_config(out, 5);

  Runner runner(cfg);
  const auto first = runner.run_pipeline(false);
  for (const auto& o : first) CHECK(!o.skipped);
  CHECK(fs::exists(out / "eval" / "fairness.csv"));
  CHECK(fs::exists(out / "eval" / "sweep.csv"));  // EDL mode

  SUBCASE("second run skips everything") {
    Runner again(cfg);
    for (const auto& o : again.run_pipeline(false)) CHECK(o.skipped);
  }
  SUBCASE("provenance chain validates end to end") {
    Runner::validate_provenance(out);
  }
  SUBCASE("dataset seed change rebuilds every downstream stage") {
    auto cfg2 = mini_config(out, 6);
    Runner changed(cfg2);
    for (const auto& o : changed.run_pipeline(false)) CHECK(!o.skipped);
  }
  SUBCASE("no-rebuild mode refuses on staleness") {
    auto cfg3 = mini_config(out, 7);
    Runner refuser(cfg3);
    try {
      refuser.run_pipeline(false, /*rebuild_stale=*/false);
      FAIL("expected staleness refusal");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::stale_artifact);
    }
  }
  SUBCASE("tampered artifact fails provenance validation") {
    std::fstream f(out / "gan" / "weights.bin",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(64);
    const float junk = 123.0f;
    f.write(reinterpret_cast<const char*>(&junk), sizeof(junk));
    f.close();
    CHECK_THROWS_AS(Runner::validate_provenance(out), Error);
  }
}

TEST_CASE("plots: derived artifacts are byte-identical across re-emission") {
  const auto out = temp_dir("plots");
  auto cfg = mini_config(out, 9);
  Runner runner(cfg);
  runner.run_pipeline(false);

  const auto files = emit_plots(out);
  REQUIRE(!files.empty());
  std::vector<std::string> first;
  for (const auto& f : files) {
    std::ifstream in(f);
    first.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  for (const auto& f : files) fs::remove(f);
  const auto again = emit_plots(out);
  REQUIRE(again.size() == files.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    std::ifstream in(again[i]);
    const std::string bytes{std::istreambuf_iterator<char>(in),
                            std::istreambuf_iterator<char>()};
    CHECK(bytes == first[i]);
  }
}

TEST_CASE("plots: schema violations name the offending column or file") {
  const auto out = temp_dir("plots_schema");
  auto cfg = mini_config(out, 10);
  Runner runner(cfg);
  runner.run_pipeline(false);

  SUBCASE("renamed sweep column") {
    auto table = read_csv(out / "eval" / "sweep.csv");
    table.header[0] = "threshold";  // was tau
    write_csv(out / "eval" / "sweep.csv", table);
    try {
      emit_plots(out);
      FAIL("expected schema error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("tau") != std::string::npos);
      CHECK(e.code() == Errc::schema_mismatch);
    }
  }
  SUBCASE("missing fairness.csv") {
    fs::remove(out / "eval" / "fairness.csv");
    try {
      emit_plots(out);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("fairness.csv") != std::string::npos);
    }
  }
}

TEST_CASE("single-point sweep renders without error") {
  Series s{"coverage", {0.5}, {0.8}};
  const std::string svg = render_line_chart("t", "tau", {s});
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("circle") != std::string::npos);
}

TEST_CASE("ablation: shape contract and shared view cache") {
  const auto out = temp_dir("ablate");
  auto cfg = mini_config(out, 11);
  cfg.cls.epochs = 1;

  AblationSpec spec;
  spec.axis = "neighbor_size";
  spec.values = {"1", "2"};
  spec.seeds = {3, 4};
  const auto result = run_ablation(cfg, spec);
  CHECK(result.rows.size() == 2);
  CHECK(result.runs.size() == 4);
  for (const auto& row : result.rows) CHECK(row.n_seeds == 2);
  CHECK(fs::exists(out / "ablation_neighbor_size_summary.csv"));
  CHECK(fs::exists(out / "ablation_neighbor_size_runs.csv"));

  SUBCASE("identical seeds reproduce identical checkpoints per value") {
    AblationSpec again = spec;
    const auto r2 = run_ablation(cfg, again);
    for (std::size_t i = 0; i < result.runs.size(); ++i)
      CHECK(r2.runs[i].checkpoint_checksum == result.runs[i].checkpoint_checksum);
  }
}

TEST_CASE("ablation: invalid axis and values rejected") {
  AblationSpec bad;
  bad.axis = "nope";
  bad.values = {"1"};
  bad.seeds = {1};
  CHECK_THROWS_AS(bad.validate(), Error);

  AblationSpec empty;
  empty.axis = "lazy_n";
  CHECK_THROWS_AS(empty.validate(), Error);
}
