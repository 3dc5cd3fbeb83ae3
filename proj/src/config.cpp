#include "indivaid/config.hpp"

#include <fstream>
#include <set>

#include "indivaid/common.hpp"

namespace indivaid {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::indivaid: return "indivaid";
    case Mode::clip_ft: return "clip_ft";
    case Mode::clip_zs: return "clip_zs";
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  if (name == "indivaid") return Mode::indivaid;
  if (name == "clip_ft") return Mode::clip_ft;
  if (name == "clip_zs") return Mode::clip_zs;
  throw InputError("unknown mode '" + std::string(name) + "' (expected indivaid, clip_ft, clip_zs)");
}

Stage2Schedule TrainConfig::stage2_schedule() const {
  return {stage2_lr_start, stage2_lr_peak, warmup_epochs, decay_factor, decay_epochs};
}

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw InputError("stage must be 1 or 2");
  if (epochs < 0) throw InputError("epochs must be non-negative");
  if (!(stage1_lr > 0 && stage2_lr_start > 0 && stage2_lr_peak > 0))
    throw InputError("learning rates must be positive");
  if (stage1_batch_size < 1) throw InputError("stage1_batch_size must be positive");
  if (!(tau >= 0)) throw InputError("tau must be non-negative");
  if (!(epsilon >= 0 && epsilon < 1)) throw InputError("epsilon must lie in [0, 1)");
  if (warmup_epochs < 0) throw InputError("warmup_epochs must be non-negative");
  if (!(decay_factor > 0)) throw InputError("decay_factor must be positive");
  if (I < 2 || K < 2) throw InputError("I and K must be at least 2 (triplet loss needs positives and negatives)");
  if (loss_flags.empty()) throw InputError("loss_flags must enable at least one term");
  if (mode == Mode::clip_ft && (loss_flags.count(LossTerm::i2t) || loss_flags.count(LossTerm::t2i)))
    throw InputError("clip_ft mode supports id, tri and i2tce terms only");
  encoder.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"stage", c.stage},
          {"epochs", c.epochs},
          {"stage1_lr", c.stage1_lr},
          {"stage1_batch_size", c.stage1_batch_size},
          {"stage2_lr_start", c.stage2_lr_start},
          {"stage2_lr_peak", c.stage2_lr_peak},
          {"warmup_epochs", c.warmup_epochs},
          {"decay_factor", c.decay_factor},
          {"decay_epochs", c.decay_epochs},
          {"tau", c.tau},
          {"epsilon", c.epsilon},
          {"I", c.I},
          {"K", c.K},
          {"seed", c.seed},
          {"loss_flags", loss_flag_names(c.loss_flags)},
          {"mode", to_string(c.mode)},
          {"validate_each_epoch", c.validate_each_epoch},
          {"encoder", to_json(c.encoder)},
          {"prompt",
           {{"num_context", c.prompt.num_context},
            {"init_phrase", c.prompt.init_phrase},
            {"species", c.prompt.species},
            {"per_identity_context", c.prompt.per_identity_context}}},
          {"augment",
           {{"flip_prob", c.augment.flip_prob},
            {"pad", c.augment.pad},
            {"erase_prob", c.augment.erase_prob},
            {"erase_area_min", c.augment.erase_area_min},
            {"erase_area_max", c.augment.erase_area_max},
            {"erase_aspect_min", c.augment.erase_aspect_min}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "stage", "epochs", "stage1_lr", "stage1_batch_size", "stage2_lr_start", "stage2_lr_peak",
      "warmup_epochs", "decay_factor", "decay_epochs", "tau", "epsilon", "I", "K", "seed",
      "loss_flags", "mode", "validate_each_epoch", "encoder", "prompt", "augment"};
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw InputError("unknown config key '" + key + "'");

  TrainConfig c;
  try {
    c.stage = j.value("stage", c.stage);
    c.epochs = j.value("epochs", c.epochs);
    c.stage1_lr = j.value("stage1_lr", c.stage1_lr);
    c.stage1_batch_size = j.value("stage1_batch_size", c.stage1_batch_size);
    c.stage2_lr_start = j.value("stage2_lr_start", c.stage2_lr_start);
    c.stage2_lr_peak = j.value("stage2_lr_peak", c.stage2_lr_peak);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.decay_epochs = j.value("decay_epochs", c.decay_epochs);
    c.tau = j.value("tau", c.tau);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.I = j.value("I", c.I);
    c.K = j.value("K", c.K);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss_flags")) c.loss_flags = parse_loss_flags(j.at("loss_flags").get<std::vector<std::string>>());
    c.mode = parse_mode(j.value("mode", std::string(to_string(c.mode))));
    c.validate_each_epoch = j.value("validate_each_epoch", c.validate_each_epoch);
    if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
    if (j.contains("prompt")) {
      const auto& p = j.at("prompt");
      c.prompt.num_context = p.value("num_context", c.prompt.num_context);
      c.prompt.init_phrase = p.value("init_phrase", c.prompt.init_phrase);
      c.prompt.species = p.value("species", c.prompt.species);
      c.prompt.per_identity_context = p.value("per_identity_context", c.prompt.per_identity_context);
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      c.augment.flip_prob = a.value("flip_prob", c.augment.flip_prob);
      c.augment.pad = a.value("pad", c.augment.pad);
      c.augment.erase_prob = a.value("erase_prob", c.augment.erase_prob);
      c.augment.erase_area_min = a.value("erase_area_min", c.augment.erase_area_min);
      c.augment.erase_area_max = a.value("erase_area_max", c.augment.erase_area_max);
      c.augment.erase_aspect_min = a.value("erase_aspect_min", c.augment.erase_aspect_min);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return train_config_from_json(j);
}

std::string config_hash(const TrainConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

}  // namespace indivaid
