// SPDX-License-Identifier: Apache-2.0
#include "fairview/pipeline/config.hpp"

#include "fairview/rng.hpp"
#include "fairview/sha256.hpp"

namespace fairview::pipeline {

void ExperimentConfig::derive_stage_seeds() {
  dataset.seed = derive_seed(seed, "datagen");
  gan.seed = derive_seed(seed, "gan");
  encoder.seed = derive_seed(seed, "encoder");
  views.seed = derive_seed(seed, "views");
  cls.seed = derive_seed(seed, "classifier");
}

ExperimentConfig ExperimentConfig::from_toml(const TomlTable& t) {
  ExperimentConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(t.get_int("", "seed", 1));
  cfg.out_dir = t.get_string("", "out", "runs/default");

  cfg.dataset.groups = static_cast<int>(t.get_int("datagen", "groups", 4));
  cfg.dataset.per_group_count =
      t.get_int_array("datagen", "per_group", std::vector<std::int64_t>(
                                                  static_cast<std::size_t>(cfg.dataset.groups), 1000));
  cfg.dataset.label_noise_by_group =
      t.get_double_array("datagen", "label_noise", {0.0, 0.0, 0.15, 0.15});
  cfg.dataset.difficulty_by_group =
      t.get_double_array("datagen", "difficulty", {0.0, 0.15, 0.35, 0.55});
  cfg.dataset.image_size = static_cast<int>(t.get_int("datagen", "image_size", 32));
  const auto fr = t.get_double_array("datagen", "split", {0.8, 0.1, 0.1});
  require(fr.size() == 3, Errc::config_invalid, "datagen.split must have three fractions");
  cfg.split_fractions = {fr[0], fr[1], fr[2]};

  cfg.gan.d_z = static_cast<std::size_t>(t.get_int("gan", "dz", 64));
  cfg.gan.d_w = static_cast<std::size_t>(t.get_int("gan", "dw", 64));
  cfg.gan.base_channels = static_cast<std::size_t>(t.get_int("gan", "base_channels", 64));
  cfg.gan.map_hidden = static_cast<std::size_t>(t.get_int("gan", "map_hidden", 64));
  cfg.gan.steps = static_cast<int>(t.get_int("gan", "steps", 4000));
  cfg.gan.batch = static_cast<int>(t.get_int("gan", "batch", 16));
  cfg.gan.lr = t.get_double("gan", "lr", 2e-4);
  cfg.gan.checkpoint_every = static_cast<int>(t.get_int("gan", "checkpoint_every", 500));
  cfg.gan.r1_enabled = t.get_bool("gan", "r1", false);
  cfg.gan.r1_gamma = t.get_double("gan", "r1_gamma", 1.0);

  cfg.encoder.steps = static_cast<int>(t.get_int("encoder", "steps", 2500));
  cfg.encoder.batch = static_cast<int>(t.get_int("encoder", "batch", 16));
  cfg.encoder.lr = t.get_double("encoder", "lr", 1e-3);
  cfg.encoder.lambda_latent = t.get_double("encoder", "lambda_latent", 1e-4);

  cfg.views.m = static_cast<int>(t.get_int("views", "m", 7));
  cfg.views.n_candidates = static_cast<int>(t.get_int("views", "candidates", 56));
  cfg.views.dirs_per_view = static_cast<int>(t.get_int("views", "dirs_per_view", 3));
  cfg.views.distance_sigma = t.get_double("views", "sigma", 1.0);
  cfg.views.scale_by_sqrt_eigenvalue = t.get_bool("views", "scale_by_sqrt_eigenvalue", false);
  cfg.views.top_k = static_cast<int>(t.get_int("views", "top_k", 16));
  cfg.views.filter_threshold = t.get_double("views", "filter_threshold", 0.5);
  cfg.filter_steps = static_cast<int>(t.get_int("views", "filter_steps", 300));

  cfg.cls.alpha = t.get_double("classifier", "alpha", 2.0);
  cfg.cls.m = static_cast<int>(t.get_int("classifier", "m", 7));
  cfg.cls.lazy_n = static_cast<int>(t.get_int("classifier", "lazy_n", 2));
  const std::string metric = t.get_string("classifier", "metric", "js");
  require(metric == "js" || metric == "l2", Errc::config_invalid,
          "classifier.metric must be 'js' or 'l2'");
  cfg.cls.metric =
      metric == "js" ? classifier::NeighborMetric::js : classifier::NeighborMetric::l2;
  cfg.cls.mt_enabled = t.get_bool("classifier", "mt", false);
  cfg.cls.mt_weight = t.get_double("classifier", "mt_weight", 0.5);
  cfg.cls.edl_enabled = t.get_bool("classifier", "edl", false);
  const std::string anneal = t.get_string("classifier", "kl_anneal", "off");
  require(anneal == "off" || anneal == "linear", Errc::config_invalid,
          "classifier.kl_anneal must be 'off' or 'linear'");
  cfg.cls.kl_schedule.mode = anneal == "linear" ? evidential::AnnealSchedule::Mode::linear
                                                : evidential::AnnealSchedule::Mode::off;
  cfg.cls.kl_schedule.anneal_epochs =
      t.get_double("classifier", "kl_anneal_epochs", 10.0);
  cfg.cls.label_smoothing = t.get_double("classifier", "label_smoothing", 0.1);
  cfg.cls.backprop_views = t.get_bool("classifier", "backprop_views", false);
  cfg.cls.epochs = static_cast<int>(t.get_int("classifier", "epochs", 12));
  cfg.cls.batch = static_cast<int>(t.get_int("classifier", "batch", 64));
  cfg.cls.lr = t.get_double("classifier", "lr", 2e-3);
  cfg.cls.lr_decay = t.get_double("classifier", "lr_decay", 0.1);
  cfg.cls.lr_decay_at = t.get_double("classifier", "lr_decay_at", 0.75);
  const auto ch = t.get_int_array("classifier", "channels", {16, 32, 64, 128});
  cfg.cls.channels.assign(ch.begin(), ch.end());
  cfg.cls.embed_dim = static_cast<std::size_t>(t.get_int("classifier", "embed_dim", 128));

  cfg.tau_step = t.get_double("eval", "tau_step", 0.05);
  const std::string labels = t.get_string("eval", "labels", "prenoise");
  require(labels == "prenoise" || labels == "observed", Errc::config_invalid,
          "eval.labels must be 'prenoise' or 'observed'");
  cfg.eval_prenoise_labels = labels == "prenoise";

  cfg.derive_stage_seeds();
  cfg.dataset.validate();
  cfg.gan.validate();
  cfg.encoder.validate();
  cfg.views.validate();
  cfg.cls.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_toml(parse_toml_file(path));
}

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["out"] = out_dir.string();
  j["dataset"] = dataset.to_json();
  j["split"] = split_fractions;
  j["gan"] = gan.to_json();
  j["encoder"] = encoder.to_json();
  j["views"] = views.to_json();
  j["filter_steps"] = filter_steps;
  j["classifier"] = cls.to_json();
  j["tau_step"] = tau_step;
  j["eval_prenoise_labels"] = eval_prenoise_labels;
  return j;
}

std::string ExperimentConfig::stage_fingerprint(const std::string& stage) const {
  json j;
  j["stage"] = stage;
  j["seed"] = seed;
  if (stage == "datagen") {
    j["cfg"] = dataset.to_json();
    j["split"] = split_fractions;
  } else if (stage == "train-gan") {
    j["cfg"] = gan.to_json();
  } else if (stage == "train-encoder") {
    j["cfg"] = encoder.to_json();
  } else if (stage == "make-views") {
    j["cfg"] = views.to_json();
    j["filter_steps"] = filter_steps;
  } else if (stage == "train-cls") {
    j["cfg"] = cls.to_json();
  } else if (stage == "eval") {
    j["tau_step"] = tau_step;
    j["prenoise"] = eval_prenoise_labels;
  } else {
    fail(Errc::config_invalid, "unknown stage: " + stage);
  }
  return sha256_hex(j.dump());
}

std::string default_config_toml() {
  return R"(# fairview experiment configuration
seed = 1
out = "runs/default"

[datagen]
groups = 4
per_group = [1000, 1000, 1000, 1000]
label_noise = [0.0, 0.0, 0.15, 0.15]
difficulty = [0.0, 0.15, 0.35, 0.55]
image_size = 32
split = [0.8, 0.1, 0.1]

[gan]
dz = 64
dw = 64
base_channels = 64
steps = 4000
batch = 16
lr = 2e-4
checkpoint_every = 500
r1 = false

[encoder]
steps = 2500
batch = 16
lr = 1e-3
lambda_latent = 1e-4

[views]
m = 7              # paper default
candidates = 56    # paper default
dirs_per_view = 3
sigma = 1.0
top_k = 16
filter_threshold = 0.5
filter_steps = 300

[classifier]
alpha = 2.0        # paper default
m = 7              # paper default
lazy_n = 2         # paper default
metric = "js"
mt = false
mt_weight = 0.5
edl = false
kl_anneal = "off"
label_smoothing = 0.1  # paper default
backprop_views = false
epochs = 12
batch = 64
lr = 2e-3
lr_decay = 0.1
lr_decay_at = 0.75
channels = [16, 32, 64, 128]
embed_dim = 128

[eval]
tau_step = 0.05
labels = "prenoise"
)";
}

}  // namespace fairview::pipeline
