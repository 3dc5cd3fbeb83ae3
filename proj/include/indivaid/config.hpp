#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "indivaid/augment.hpp"
#include "indivaid/encoder.hpp"
#include "indivaid/losses.hpp"
#include "indivaid/prompt.hpp"
#include "indivaid/schedule.hpp"

namespace indivaid {

enum class Mode { indivaid, clip_ft, clip_zs };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

// Every knob of a training run. JSON keys are the field names; the config
// file is a JSON object with the same hierarchy (encoder, augment and
// prompt are nested objects).
struct TrainConfig {
  int stage = 1;
  int epochs = 20;
  double stage1_lr = 3.5e-4;
  int stage1_batch_size = 32;
  double stage2_lr_start = 5e-7;
  double stage2_lr_peak = 5e-6;
  int warmup_epochs = 10;
  double decay_factor = 0.1;
  std::vector<int> decay_epochs = {40, 70};
  double tau = 0.3;
  double epsilon = 0.1;
  int I = 4;
  int K = 4;
  std::uint64_t seed = 0;
  LossFlags loss_flags = default_loss_flags();
  Mode mode = Mode::indivaid;
  // Evaluate on gallery/query after every Stage-Two epoch and keep the best
  // checkpoint by mAP.
  bool validate_each_epoch = false;

  EncoderConfig encoder;
  PromptConfig prompt;
  AugmentConfig augment;

  Stage2Schedule stage2_schedule() const;
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

// Hash of the canonical JSON form, hex encoded.
std::string config_hash(const TrainConfig& c);

}  // namespace indivaid
