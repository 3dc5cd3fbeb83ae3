#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "indivaid/checkpoint.hpp"
#include "indivaid/config.hpp"
#include "indivaid/dataset.hpp"
#include "indivaid/encoder.hpp"
#include "indivaid/merge.hpp"
#include "indivaid/prompt.hpp"

namespace indivaid {

// Everything a run trains or freezes. Which parts exist depends on the
// mode: indivaid has all of them, clip_ft lacks the prompt generator and
// attention, clip_zs is the bare encoder.
struct ReidModel {
  TrainConfig config;
  IdentityIndex train_index;
  std::shared_ptr<Encoder> encoder;
  PromptGenerator prompt{nullptr};
  AttentionMerge attention{nullptr};
  torch::nn::Linear classifier{nullptr};  // embed_dim -> N, Stage Two only
  int stage = 0;                          // last completed stage (0: none)
  int epoch = 0;                          // epochs completed in that stage

  // Parameter groups by checkpoint name: image_encoder, text_encoder,
  // temperature, prompt, attention, classifier.
  std::map<std::string, TensorMap> groups() const;
  std::map<std::string, std::uint64_t> checksums() const;
};

ReidModel create_model(const TrainConfig& config, const IdentityIndex& train_index);

// Directory layout: meta.json plus params/<group>.bin. `extra` groups
// (e.g. optimizer state) are written alongside.
void save_checkpoint(const std::filesystem::path& dir, const ReidModel& model,
                     const std::map<std::string, TensorMap>& extra = {});

struct LoadedCheckpoint {
  ReidModel model;
  nlohmann::json meta;
  std::map<std::string, TensorMap> extra;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace indivaid
