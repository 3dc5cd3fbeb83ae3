#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "indivaid/config.hpp"
#include "indivaid/dataset.hpp"
#include "indivaid/image.hpp"
#include "indivaid/metrics.hpp"
#include "indivaid/model.hpp"

namespace indivaid {

struct RunOptions {
  // Written at the end of every epoch when set.
  std::filesystem::path checkpoint_dir;
  // Called with every JSON-lines log record.
  std::function<void(const nlohmann::json&)> on_log;
  // Stop after this many optimizer steps (< 0: no limit).
  long max_steps = -1;
  // Adam state to resume from (the "optimizer" group of a checkpoint).
  std::optional<TensorMap> optimizer_state;
  // Stage-Two description bank to resume with (the "description_bank"
  // group); rebuilt from the generator when absent.
  std::optional<TensorMap> description_bank;
};

struct StageResult {
  std::vector<nlohmann::json> log;
  long steps = 0;
  std::optional<MetricsReport> best;  // when validate_each_epoch is on
};

// Stage One: trains only the prompt generator against frozen encoders with
// the symmetric image/description contrastive loss. Image i in a batch is
// paired with its own generated description.
StageResult run_stage1(const TrainConfig& config, const DatasetScan& data, ReidModel& model,
                       ImageCache& images, const RunOptions& options = {});

// Stage Two: builds the description bank once from the frozen generator,
// then fine-tunes the image encoder, classifier head, attention merge and
// temperature on identity-balanced augmented batches. In clip_ft mode every
// identity shares the fixed description "A photo of a <species>." and
// there is no attention merge.
StageResult run_stage2(const TrainConfig& config, const DatasetScan& data, ReidModel& model,
                       ImageCache& images, const RunOptions& options = {});

// clip_zs: no training (returns nullopt). clip_ft: the Stage-Two loop with
// fixed descriptions. indivaid is rejected.
std::optional<StageResult> run_baseline(const TrainConfig& config, const DatasetScan& data, ReidModel& model,
                                        ImageCache& images, const RunOptions& options = {});

// Encoding of "<init phrase> <species>." by the frozen text encoder, [d].
torch::Tensor fixed_description(Encoder& encoder, const PromptConfig& prompt);

}  // namespace indivaid
