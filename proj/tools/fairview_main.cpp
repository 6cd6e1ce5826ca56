// SPDX-License-Identifier: Apache-2.0
//
// fairview command-line driver. Subcommands mirror the pipeline stages:
//   datagen | train-gan | train-encoder | make-views | train-cls | eval |
//   reject-sweep | ablate | pipeline | plots
// Exit codes: 0 success, 2 config error, 3 stage failure, 4 staleness refusal.

#include <CLI11.hpp>
#include <iostream>

#include "fairview/fairness/report.hpp"
#include "fairview/pipeline/ablate.hpp"
#include "fairview/pipeline/plots.hpp"
#include "fairview/pipeline/stages.hpp"

namespace fv = fairview;
namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::int64_t seed = -1;
  std::string out;
  bool force = false;
};

fv::pipeline::ExperimentConfig load_config(const GlobalOpts& g) {
  fv::pipeline::ExperimentConfig cfg =
      g.config_path.empty()
          ? fv::pipeline::ExperimentConfig::from_toml(
                fv::parse_toml_string(fv::pipeline::default_config_toml(), "<defaults>"))
          : fv::pipeline::ExperimentConfig::load(g.config_path);
  if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
  if (!g.out.empty()) cfg.out_dir = g.out;
  cfg.derive_stage_seeds();
  return cfg;
}

int exit_code_for(const fv::Error& e) {
  switch (e.code()) {
    case fv::Errc::config_invalid: return 2;
    case fv::Errc::stale_artifact: return 4;
    default: return 3;
  }
}

void report_outcomes(const std::vector<fv::pipeline::StageOutcome>& outcomes) {
  for (const auto& o : outcomes)
    std::cout << (o.skipped ? "skipped " : "ran     ") << o.name << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GAN neighbor-view consistency training with evidential rejection"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config (TOML)");
  app.add_option("--seed", g.seed, "root seed override");
  app.add_option("--out", g.out, "artifact directory override");
  app.add_flag("--force", g.force, "rebuild even when artifacts are fresh");

  auto* cmd_datagen = app.add_subcommand("datagen", "generate the synthetic dataset");

  auto* cmd_gan = app.add_subcommand("train-gan", "train the style-based GAN");
  std::int64_t gan_steps = -1, gan_dz = -1, gan_dw = -1, gan_ckpt_every = -1;
  double gan_lr = -1.0;
  cmd_gan->add_option("--steps", gan_steps, "training steps");
  cmd_gan->add_option("--dz", gan_dz, "z dimension");
  cmd_gan->add_option("--dw", gan_dw, "w dimension");
  cmd_gan->add_option("--lr", gan_lr, "learning rate");
  cmd_gan->add_option("--checkpoint-every", gan_ckpt_every, "rolling checkpoint period");

  auto* cmd_enc = app.add_subcommand("train-encoder", "train the inversion encoder");
  std::string enc_gan_ckpt;
  std::int64_t enc_steps = -1;
  double enc_lambda = -1.0;
  cmd_enc->add_option("--gan-checkpoint", enc_gan_ckpt, "generator bundle to invert");
  cmd_enc->add_option("--steps", enc_steps, "training steps");
  cmd_enc->add_option("--lambda-latent", enc_lambda, "latent norm weight");

  auto* cmd_views = app.add_subcommand("make-views", "factorize directions and build the view cache");
  std::int64_t v_m = -1, v_cand = -1, v_dirs = -1;
  double v_sigma = -1.0;
  cmd_views->add_option("--m", v_m, "neighbors per sample");
  cmd_views->add_option("--candidates", v_cand, "candidates before filtering");
  cmd_views->add_option("--sigma", v_sigma, "traversal distance sigma");
  cmd_views->add_option("--dirs-per-view", v_dirs, "directions per view");

  auto* cmd_cls = app.add_subcommand("train-cls", "train the classifier");
  double c_alpha = -1.0;
  std::int64_t c_m = -1, c_lazy = -1;
  std::string c_metric, c_mt, c_edl, c_bpv;
  cmd_cls->add_option("--alpha", c_alpha, "neighbor loss weight");
  cmd_cls->add_option("--m", c_m, "neighbors per sample");
  cmd_cls->add_option("--lazy-n", c_lazy, "lazy regularization period");
  cmd_cls->add_option("--metric", c_metric, "js|l2");
  cmd_cls->add_option("--mt", c_mt, "on|off group head");
  cmd_cls->add_option("--edl", c_edl, "on|off evidential head");
  cmd_cls->add_option("--backprop-views", c_bpv, "on|off");

  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint and write the fairness report");
  std::string eval_ckpt, eval_dataset;
  cmd_eval->add_option("--checkpoint", eval_ckpt, "classifier bundle (default <out>/classifier)");
  cmd_eval->add_option("--dataset", eval_dataset,
                       "dataset container evaluated in full (default: test split of <out>/dataset)");

  auto* cmd_sweep = app.add_subcommand("reject-sweep", "recompute the uncertainty reject sweep");
  double sweep_step = 0.05;
  cmd_sweep->add_option("--tau-step", sweep_step, "threshold grid step");

  auto* cmd_ablate = app.add_subcommand("ablate", "train one classifier per (value, seed)");
  std::string ab_axis;
  std::vector<std::string> ab_values;
  std::vector<std::uint64_t> ab_seeds;
  cmd_ablate->add_option("--axis", ab_axis,
                         "neighbor_size|lazy_n|distance_metric|backprop_views")->required();
  cmd_ablate->add_option("--values", ab_values, "axis values")->required()->delimiter(',');
  cmd_ablate->add_option("--seeds", ab_seeds, "classifier seeds")->required()->delimiter(',');

  auto* cmd_pipeline = app.add_subcommand("pipeline", "run all stages in order");
  bool no_rebuild = false;
  cmd_pipeline->add_flag("--no-rebuild", no_rebuild, "refuse instead of rebuilding stale stages");

  auto* cmd_plots = app.add_subcommand("plots", "render SVG plots from the eval CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    fv::pipeline::ExperimentConfig cfg = load_config(g);

    if (cmd_gan->parsed()) {
      if (gan_steps >= 0) cfg.gan.steps = static_cast<int>(gan_steps);
      if (gan_dz > 0) cfg.gan.d_z = static_cast<std::size_t>(gan_dz);
      if (gan_dw > 0) cfg.gan.d_w = static_cast<std::size_t>(gan_dw);
      if (gan_lr >= 0) cfg.gan.lr = gan_lr;
      if (gan_ckpt_every > 0) cfg.gan.checkpoint_every = static_cast<int>(gan_ckpt_every);
    }
    if (cmd_enc->parsed()) {
      if (enc_steps >= 0) cfg.encoder.steps = static_cast<int>(enc_steps);
      if (enc_lambda >= 0) cfg.encoder.lambda_latent = enc_lambda;
    }
    if (cmd_views->parsed()) {
      if (v_m > 0) cfg.views.m = static_cast<int>(v_m);
      if (v_cand > 0) cfg.views.n_candidates = static_cast<int>(v_cand);
      if (v_dirs > 0) cfg.views.dirs_per_view = static_cast<int>(v_dirs);
      if (v_sigma > 0) cfg.views.distance_sigma = v_sigma;
    }
    if (cmd_cls->parsed()) {
      if (c_alpha >= 0) cfg.cls.alpha = c_alpha;
      if (c_m >= 0) cfg.cls.m = static_cast<int>(c_m);
      if (c_lazy > 0) cfg.cls.lazy_n = static_cast<int>(c_lazy);
      if (!c_metric.empty())
        cfg.cls.metric = c_metric == "l2" ? fv::classifier::NeighborMetric::l2
                                          : fv::classifier::NeighborMetric::js;
      if (!c_mt.empty()) cfg.cls.mt_enabled = c_mt == "on";
      if (!c_edl.empty()) cfg.cls.edl_enabled = c_edl == "on";
      if (!c_bpv.empty()) cfg.cls.backprop_views = c_bpv == "on";
    }

    fv::pipeline::Runner runner(cfg);

    if (cmd_datagen->parsed()) {
      report_outcomes({runner.run_stage("datagen", g.force)});
    } else if (cmd_gan->parsed()) {
      report_outcomes({runner.run_stage("train-gan", g.force)});
    } else if (cmd_enc->parsed()) {
      if (!enc_gan_ckpt.empty() && fs::path(enc_gan_ckpt) != cfg.out_dir / "gan") {
        auto imported = fv::generative::GeneratorBundle::load(enc_gan_ckpt);
        imported.save(cfg.out_dir / "gan");
      }
      report_outcomes({runner.run_stage("train-encoder", g.force)});
    } else if (cmd_views->parsed()) {
      report_outcomes({runner.run_stage("make-views", g.force)});
    } else if (cmd_cls->parsed()) {
      report_outcomes({runner.run_stage("train-cls", g.force)});
    } else if (cmd_eval->parsed()) {
      if (!eval_ckpt.empty() || !eval_dataset.empty()) {
        auto bundle = fv::classifier::ClassifierBundle::load(
            eval_ckpt.empty() ? cfg.out_dir / "classifier" : fs::path(eval_ckpt));
        fv::datagen::Dataset ds = fv::datagen::read_dataset(
            eval_dataset.empty() ? cfg.out_dir / "dataset" : fs::path(eval_dataset));
        const auto records = fv::classifier::predict_records(
            bundle, ds,
            cfg.eval_prenoise_labels ? fv::classifier::EvalLabels::prenoise
                                     : fv::classifier::EvalLabels::observed);
        const auto report = fv::fairness::make_report(records, cfg.stage_fingerprint("eval"));
        std::vector<fv::fairness::RejectSweepRow> sweep;
        if (bundle.cfg.edl_enabled)
          sweep = fv::fairness::reject_sweep(
              records, fv::fairness::default_threshold_grid(cfg.tau_step));
        fv::fairness::write_report_files(cfg.out_dir / "eval", report, sweep);
        fv::fairness::write_predictions_csv(cfg.out_dir / "eval" / "predictions.csv", records);
        std::cout << "ran     eval\n";
      } else {
        report_outcomes({runner.run_stage("eval", g.force)});
      }
    } else if (cmd_sweep->parsed()) {
      const auto records =
          fv::fairness::read_predictions_csv(cfg.out_dir / "eval" / "predictions.csv");
      const auto rows =
          fv::fairness::reject_sweep(records, fv::fairness::default_threshold_grid(sweep_step));
      fv::CsvTable sw;
      sw.header = {"tau", "coverage", "accuracy", "dob", "flags"};
      for (const auto& row : rows)
        sw.rows.push_back({fv::format_fixed6(row.tau), fv::format_fixed6(row.coverage),
                           std::isnan(row.accuracy_pct) ? "nan"
                                                        : fv::format_fixed6(row.accuracy_pct),
                           std::isnan(row.dob) ? "nan" : fv::format_fixed6(row.dob),
                           row.flags});
      fv::write_csv(cfg.out_dir / "eval" / "sweep.csv", sw);
      std::cout << "ran     reject-sweep (" << rows.size() << " thresholds)\n";
    } else if (cmd_ablate->parsed()) {
      fv::pipeline::AblationSpec spec{ab_axis, ab_values, ab_seeds};
      const auto result = fv::pipeline::run_ablation(cfg, spec);
      std::cout << "ran     ablate (" << result.runs.size() << " runs)\n";
    } else if (cmd_pipeline->parsed()) {
      report_outcomes(runner.run_pipeline(g.force, !no_rebuild));
    } else if (cmd_plots->parsed()) {
      const auto files = fv::pipeline::emit_plots(cfg.out_dir);
      for (const auto& f : files) std::cout << "wrote   " << f.string() << "\n";
    }
    return 0;
  } catch (const fv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
