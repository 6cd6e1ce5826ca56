// SPDX-License-Identifier: Apache-2.0
#include "fairview/pipeline/ablate.hpp"

#include <cmath>

#include "fairview/csv.hpp"
#include "fairview/rng.hpp"

namespace fairview::pipeline {

namespace {

void apply_axis(classifier::TrainConfig& cfg, const std::string& axis,
                const std::string& value) {
  if (axis == "neighbor_size") {
    cfg.m = std::stoi(value);
    require(cfg.m >= 0, Errc::config_invalid, "neighbor_size must be >= 0");
  } else if (axis == "lazy_n") {
    cfg.lazy_n = std::stoi(value);
    require(cfg.lazy_n >= 1, Errc::config_invalid, "lazy_n must be >= 1");
  } else if (axis == "distance_metric") {
    require(value == "js" || value == "l2", Errc::config_invalid,
            "distance_metric values must be 'js' or 'l2'");
    cfg.metric = value == "js" ? classifier::NeighborMetric::js
                               : classifier::NeighborMetric::l2;
  } else if (axis == "backprop_views") {
    require(value == "on" || value == "off", Errc::config_invalid,
            "backprop_views values must be 'on' or 'off'");
    cfg.backprop_views = value == "on";
  } else {
    fail(Errc::config_invalid, "unknown ablation axis: " + axis);
  }
}

struct Agg {
  double mean = 0.0, stddev = 0.0;
};

Agg aggregate(const std::vector<double>& xs) {
  Agg a;
  for (auto x : xs) a.mean += x;
  a.mean /= static_cast<double>(xs.size());
  for (auto x : xs) a.stddev += (x - a.mean) * (x - a.mean);
  a.stddev = std::sqrt(a.stddev / static_cast<double>(xs.size()));
  return a;
}

}  // namespace

void AblationSpec::validate() const {
  require(axis == "neighbor_size" || axis == "lazy_n" || axis == "distance_metric" ||
              axis == "backprop_views",
          Errc::config_invalid, "unknown ablation axis: " + axis);
  require(!values.empty(), Errc::config_invalid, "ablation needs at least one value");
  require(!seeds.empty(), Errc::config_invalid, "ablation needs at least one seed");
}

AblationResult run_ablation(const ExperimentConfig& base, const AblationSpec& spec) {
  spec.validate();

  // Shared upstream artifacts.
  Runner runner(base);
  for (const auto& stage : {"datagen", "train-gan", "train-encoder", "make-views"})
    runner.run_stage(stage, false);

  const auto out = runner.out_dir();
  datagen::Dataset full = datagen::read_dataset(out / "dataset");
  const auto parts = datagen::split(full, base.split_fractions, derive_seed(base.seed, "split"));
  const auto cache = semantics::ViewCache::load(out / "views");
  const std::string cache_checksum = cache.checksum();

  AblationResult result;
  for (const auto& value : spec.values) {
    std::vector<double> accs, dobs, sers;
    for (const auto seed : spec.seeds) {
      classifier::TrainConfig cfg = base.cls;
      apply_axis(cfg, spec.axis, value);
      cfg.seed = seed;
      const bool use_views = cfg.alpha > 0.0 && cfg.m > 0;
      auto trained = classifier::train_classifier(parts.train, use_views ? &cache : nullptr,
                                                  parts.val, cfg, base.dataset.groups);
      const auto records = classifier::predict_records(
          trained.bundle, parts.test,
          base.eval_prenoise_labels ? classifier::EvalLabels::prenoise
                                    : classifier::EvalLabels::observed);
      const auto table = fairness::group_accuracies(records);
      const auto cell_accs = fairness::cell_accuracies(table);

      AblationRun run;
      run.value = value;
      run.seed = seed;
      run.acc = table.micro_pct;
      run.dob = cell_accs.size() >= 2 ? fairness::dob(cell_accs) : 0.0;
      run.ser = fairness::ser(cell_accs);
      run.checkpoint_checksum = trained.bundle.checksum();
      accs.push_back(run.acc);
      dobs.push_back(run.dob);
      sers.push_back(run.ser);
      result.runs.push_back(std::move(run));
    }
    const Agg a = aggregate(accs), d = aggregate(dobs), s = aggregate(sers);
    result.rows.push_back(
        {value, spec.seeds.size(), a.mean, a.stddev, d.mean, d.stddev, s.mean, s.stddev});
  }

  CsvTable runs;
  runs.header = {"axis", "value", "seed", "acc", "dob", "ser", "checkpoint_checksum"};
  for (const auto& r : result.runs)
    runs.rows.push_back({spec.axis, r.value, std::to_string(r.seed), format_fixed6(r.acc),
                         format_fixed6(r.dob), format_fixed6(r.ser), r.checkpoint_checksum});
  write_csv(out / ("ablation_" + spec.axis + "_runs.csv"), runs);

  CsvTable summary;
  summary.header = {"axis",     "value",    "seeds",    "acc_mean", "acc_std",
                    "dob_mean", "dob_std",  "ser_mean", "ser_std"};
  for (const auto& r : result.rows)
    summary.rows.push_back({spec.axis, r.value, std::to_string(r.n_seeds),
                            format_fixed6(r.acc_mean), format_fixed6(r.acc_std),
                            format_fixed6(r.dob_mean), format_fixed6(r.dob_std),
                            format_fixed6(r.ser_mean), format_fixed6(r.ser_std)});
  write_csv(out / ("ablation_" + spec.axis + "_summary.csv"), summary);

  // Both arms of any axis consume the identical cached views.
  json meta;
  meta["axis"] = spec.axis;
  meta["view_cache_checksum"] = cache_checksum;
  write_json_file(out / ("ablation_" + spec.axis + "_meta.json"), meta);
  return result;
}

}  // namespace fairview::pipeline
