// SPDX-License-Identifier: Apache-2.0
#include "fairview/pipeline/stages.hpp"

#include <fstream>

#include "fairview/fairness/report.hpp"
#include "fairview/rng.hpp"
#include "fairview/semantics/sefa.hpp"
#include "fairview/sha256.hpp"

namespace fairview::pipeline {

namespace fs = std::filesystem;

std::string artifact_checksum(const fs::path& path) {
  if (fs::is_directory(path)) {
    verify_checksum_file(path);
    return sha256_file(path / "sha256sums.txt");
  }
  require(fs::exists(path), Errc::stage_failure, "missing artifact: " + path.string());
  return sha256_file(path);
}

Runner::Runner(ExperimentConfig cfg) : cfg_(std::move(cfg)), out_(cfg_.out_dir) {
  fs::create_directories(out_);
  const fs::path mpath = out_ / "run_manifest.json";
  if (fs::exists(mpath)) {
    manifest_ = read_json_file(mpath);
  } else {
    manifest_ = json{{"format", "fairview-run"}, {"version", 1}, {"stages", json::object()}};
  }
  manifest_["config"] = cfg_.to_json();
  write_json_file(out_ / "config_resolved.json", cfg_.to_json());
}

json Runner::manifest_stage(const std::string& name) const {
  const auto& stages = manifest_.at("stages");
  if (!stages.contains(name)) return json();
  return stages.at(name);
}

json Runner::current_outputs_of(const std::string& name) const {
  const json entry = manifest_stage(name);
  if (entry.is_null()) return json();
  return entry.value("outputs", json());
}

void Runner::record_stage(const std::string& name, const json& inputs, const json& outputs) {
  json entry;
  entry["fingerprint"] = cfg_.stage_fingerprint(name);
  entry["inputs"] = inputs;
  entry["outputs"] = outputs;
  manifest_["stages"][name] = entry;
  write_json_file(out_ / "run_manifest.json", manifest_);
}

bool Runner::stage_fresh(const std::string& name) const {
  const json entry = manifest_stage(name);
  if (entry.is_null()) return false;
  if (entry.value("fingerprint", "") != cfg_.stage_fingerprint(name)) return false;
  // Inputs must still be what the producing stages currently provide.
  const json inputs = entry.value("inputs", json::object());
  for (const auto& [key, want] : inputs.items()) {
    const auto slash = key.find('/');
    const std::string producer = key.substr(0, slash);
    const std::string artifact = key.substr(slash + 1);
    const json outs = current_outputs_of(producer);
    if (outs.is_null() || !outs.contains(artifact)) return false;
    if (outs.at(artifact).get<std::string>() != want.get<std::string>()) return false;
  }
  // Outputs must exist on disk with unchanged checksums.
  try {
    const json outputs = entry.value("outputs", json::object());
    for (const auto& [rel, want] : outputs.items()) {
      if (artifact_checksum(out_ / rel) != want.get<std::string>()) return false;
    }
  } catch (const Error&) {
    return false;
  }
  return true;
}

StageOutcome Runner::run_stage(const std::string& name, bool force) {
  if (!force && stage_fresh(name)) return {name, true};
  if (name == "datagen") {
    do_datagen();
  } else if (name == "train-gan") {
    do_train_gan();
  } else if (name == "train-encoder") {
    do_train_encoder();
  } else if (name == "make-views") {
    do_make_views();
  } else if (name == "train-cls") {
    do_train_cls();
  } else if (name == "eval") {
    do_eval();
  } else {
    fail(Errc::config_invalid, "unknown stage: " + name);
  }
  return {name, false};
}

std::vector<StageOutcome> Runner::run_pipeline(bool force, bool rebuild_stale) {
  std::vector<StageOutcome> outcomes;
  for (const auto& name : kStageOrder) {
    const bool fresh = !force && stage_fresh(name);
    if (!fresh && !rebuild_stale && !manifest_stage(name).is_null())
      fail(Errc::stale_artifact, "stage '" + name + "' is stale and rebuilds are disabled");
    outcomes.push_back(run_stage(name, force));
    // A rebuilt stage invalidates downstream fingerprints via input hashes.
  }
  return outcomes;
}

void Runner::do_datagen() {
  datagen::Dataset ds = datagen::generate_dataset(cfg_.dataset);
  datagen::write_dataset(ds, out_ / "dataset");
  json outputs;
  outputs["dataset"] = artifact_checksum(out_ / "dataset");
  record_stage("datagen", json::object(), outputs);
}

void Runner::do_train_gan() {
  datagen::Dataset full = datagen::read_dataset(out_ / "dataset");
  const auto parts = datagen::split(full, cfg_.split_fractions, derive_seed(cfg_.seed, "split"));
  auto result = generative::train_gan(parts.train, cfg_.gan, out_);
  result.bundle.save(out_ / "gan");

  CsvTable history;
  history.header = {"step", "loss_d", "loss_g"};
  for (const auto& row : result.history)
    history.rows.push_back({std::to_string(row.step), format_fixed6(row.loss_d),
                            format_fixed6(row.loss_g)});
  write_csv(out_ / "gan_history.csv", history);

  const double d_acc = generative::discriminator_accuracy(
      result.bundle, parts.val.size() ? parts.val : parts.train, 256,
      derive_seed(cfg_.seed, "gan-eval"));
  const auto quality = generative::sample_quality_report(result.bundle, parts.train,
                                                         std::min<std::size_t>(256, parts.train.size()),
                                                         derive_seed(cfg_.seed, "gan-quality"));
  json qj = quality.to_json();
  qj["discriminator_heldout_accuracy"] = d_acc;
  write_json_file(out_ / "gan_quality.json", qj);

  json inputs;
  inputs["datagen/dataset"] = current_outputs_of("datagen").at("dataset");
  json outputs;
  outputs["gan"] = artifact_checksum(out_ / "gan");
  outputs["gan_history.csv"] = artifact_checksum(out_ / "gan_history.csv");
  outputs["gan_quality.json"] = artifact_checksum(out_ / "gan_quality.json");
  record_stage("train-gan", inputs, outputs);
}

void Runner::do_train_encoder() {
  datagen::Dataset full = datagen::read_dataset(out_ / "dataset");
  const auto parts = datagen::split(full, cfg_.split_fractions, derive_seed(cfg_.seed, "split"));
  auto gan = generative::GeneratorBundle::load(out_ / "gan");
  const std::string g_before = gan.checksum();
  auto result = inversion::train_encoder(gan, parts.train, cfg_.encoder);
  require(gan.checksum() == g_before, Errc::stage_failure,
          "generator parameters changed during encoder training");
  result.bundle.save(out_ / "encoder");

  CsvTable history;
  history.header = {"step", "loss"};
  for (std::size_t i = 0; i < result.loss_history.size(); ++i)
    history.rows.push_back({std::to_string(i), format_fixed6(result.loss_history[i])});
  write_csv(out_ / "encoder_history.csv", history);

  json inputs;
  inputs["datagen/dataset"] = current_outputs_of("datagen").at("dataset");
  inputs["train-gan/gan"] = current_outputs_of("train-gan").at("gan");
  json outputs;
  outputs["encoder"] = artifact_checksum(out_ / "encoder");
  outputs["encoder_history.csv"] = artifact_checksum(out_ / "encoder_history.csv");
  record_stage("train-encoder", inputs, outputs);
}

void Runner::do_make_views() {
  datagen::Dataset full = datagen::read_dataset(out_ / "dataset");
  const auto parts = datagen::split(full, cfg_.split_fractions, derive_seed(cfg_.seed, "split"));
  auto gan = generative::GeneratorBundle::load(out_ / "gan");
  auto encoder = inversion::EncoderBundle::load(out_ / "encoder");

  std::size_t rows = 0, cols = 0;
  const auto affine = gan.style_affine_weight(&rows, &cols);
  auto basis = semantics::factorize(affine, rows, cols,
                                    static_cast<std::size_t>(cfg_.views.top_k));
  basis.source_checksum = gan.checksum();
  basis.save(out_ / "basis.json");

  auto filter = semantics::train_validity_filter(parts.train, derive_seed(cfg_.seed, "filter"),
                                                 cfg_.filter_steps);
  filter.save(out_ / "filter");

  auto cache = semantics::generate_views(parts.train, encoder, gan, basis, cfg_.views, filter);
  cache.save(out_ / "views");

  json inputs;
  inputs["datagen/dataset"] = current_outputs_of("datagen").at("dataset");
  inputs["train-gan/gan"] = current_outputs_of("train-gan").at("gan");
  inputs["train-encoder/encoder"] = current_outputs_of("train-encoder").at("encoder");
  json outputs;
  outputs["basis.json"] = artifact_checksum(out_ / "basis.json");
  outputs["filter"] = artifact_checksum(out_ / "filter");
  outputs["views"] = artifact_checksum(out_ / "views");
  record_stage("make-views", inputs, outputs);
}

void Runner::do_train_cls() {
  datagen::Dataset full = datagen::read_dataset(out_ / "dataset");
  const auto parts = datagen::split(full, cfg_.split_fractions, derive_seed(cfg_.seed, "split"));

  const bool use_views = cfg_.cls.alpha > 0.0 && cfg_.cls.m > 0;
  semantics::ViewCache cache;
  if (use_views) cache = semantics::ViewCache::load(out_ / "views");

  auto result = classifier::train_classifier(parts.train, use_views ? &cache : nullptr,
                                             parts.val, cfg_.cls, cfg_.dataset.groups);
  result.bundle.save(out_ / "classifier");

  CsvTable history;
  history.header = {"epoch", "train_loss", "val_acc", "val_DoB", "val_SeR"};
  for (const auto& row : result.history)
    history.rows.push_back({std::to_string(row.epoch), format_fixed6(row.train_loss),
                            format_fixed6(row.val_acc), format_fixed6(row.val_dob),
                            format_fixed6(row.val_ser)});
  write_csv(out_ / "classifier_history.csv", history);

  json inputs;
  inputs["datagen/dataset"] = current_outputs_of("datagen").at("dataset");
  if (use_views) inputs["make-views/views"] = current_outputs_of("make-views").at("views");
  json outputs;
  outputs["classifier"] = artifact_checksum(out_ / "classifier");
  outputs["classifier_history.csv"] = artifact_checksum(out_ / "classifier_history.csv");
  record_stage("train-cls", inputs, outputs);
}

void Runner::do_eval() {
  datagen::Dataset full = datagen::read_dataset(out_ / "dataset");
  const auto parts = datagen::split(full, cfg_.split_fractions, derive_seed(cfg_.seed, "split"));
  auto bundle = classifier::ClassifierBundle::load(out_ / "classifier");

  const auto labels = cfg_.eval_prenoise_labels ? classifier::EvalLabels::prenoise
                                                : classifier::EvalLabels::observed;
  const auto records = classifier::predict_records(bundle, parts.test, labels);
  const auto report = fairness::make_report(records, cfg_.stage_fingerprint("eval"));
  std::vector<fairness::RejectSweepRow> sweep;
  if (bundle.cfg.edl_enabled)
    sweep = fairness::reject_sweep(records, fairness::default_threshold_grid(cfg_.tau_step));
  fairness::write_report_files(out_ / "eval", report, sweep);
  fairness::write_predictions_csv(out_ / "eval" / "predictions.csv", records);

  json inputs;
  inputs["datagen/dataset"] = current_outputs_of("datagen").at("dataset");
  inputs["train-cls/classifier"] = current_outputs_of("train-cls").at("classifier");
  json outputs;
  outputs["eval/fairness.csv"] = artifact_checksum(out_ / "eval" / "fairness.csv");
  outputs["eval/report.json"] = artifact_checksum(out_ / "eval" / "report.json");
  outputs["eval/predictions.csv"] = artifact_checksum(out_ / "eval" / "predictions.csv");
  if (bundle.cfg.edl_enabled)
    outputs["eval/sweep.csv"] = artifact_checksum(out_ / "eval" / "sweep.csv");
  record_stage("eval", inputs, outputs);
}

void Runner::validate_provenance(const fs::path& out_dir) {
  const json manifest = read_json_file(out_dir / "run_manifest.json");
  require(manifest.value("format", "") == "fairview-run", Errc::bad_container_header,
          "not a fairview run directory: " + out_dir.string());
  const auto& stages = manifest.at("stages");

  // 1. Every recorded artifact checksum matches the bits on disk.
  for (const auto& [stage, entry] : stages.items()) {
    const json outputs = entry.value("outputs", json::object());
    for (const auto& [rel, want] : outputs.items()) {
      const std::string got = artifact_checksum(out_dir / rel);
      require(got == want.get<std::string>(), Errc::checksum_mismatch,
              "artifact " + rel + " of stage " + stage + " does not match the run manifest");
    }
    // 2. Inputs match the producing stage's recorded outputs.
    const json inputs = entry.value("inputs", json::object());
    for (const auto& [key, want] : inputs.items()) {
      const auto slash = key.find('/');
      const std::string producer = key.substr(0, slash);
      const std::string artifact = key.substr(slash + 1);
      require(stages.contains(producer), Errc::checksum_mismatch,
              "missing producer stage " + producer);
      const auto& outs = stages.at(producer).at("outputs");
      require(outs.contains(artifact) &&
                  outs.at(artifact).get<std::string>() == want.get<std::string>(),
              Errc::checksum_mismatch,
              "input " + key + " of stage " + stage + " does not match its producer");
    }
  }

  // 3. Deep links embedded in artifact manifests.
  if (stages.contains("make-views")) {
    const auto cache = semantics::ViewCache::load(out_dir / "views");
    auto gan = generative::GeneratorBundle::load(out_dir / "gan");
    auto encoder = inversion::EncoderBundle::load(out_dir / "encoder");
    const auto basis = semantics::DirectionBasis::load(out_dir / "basis.json");
    require(cache.provenance.value("generator_checksum", "") == gan.checksum(),
            Errc::checksum_mismatch, "view cache does not reference the stored generator");
    require(cache.provenance.value("encoder_checksum", "") == encoder.checksum(),
            Errc::checksum_mismatch, "view cache does not reference the stored encoder");
    require(cache.provenance.value("basis_checksum", "") == basis.checksum(),
            Errc::checksum_mismatch, "view cache does not reference the stored basis");
    require(basis.source_checksum == gan.checksum(), Errc::checksum_mismatch,
            "direction basis does not reference the stored generator");
  }
}

}  // namespace fairview::pipeline
