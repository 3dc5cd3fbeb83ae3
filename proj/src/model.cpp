#include "indivaid/model.hpp"

#include <fstream>

#include <ATen/CPUGeneratorImpl.h>

#include "indivaid/common.hpp"

namespace fs = std::filesystem;

namespace indivaid {

namespace {

const char* kKnownGroups[] = {"image_encoder", "text_encoder", "temperature",
                              "prompt",        "attention",    "classifier"};

}  // namespace

std::map<std::string, TensorMap> ReidModel::groups() const {
  std::map<std::string, TensorMap> g;
  g["image_encoder"] = module_tensors(encoder->visual());
  g["text_encoder"] = module_tensors(encoder->text());
  g["temperature"] = {{"logit_scale", encoder->logit_scale()}};
  if (prompt) g["prompt"] = module_tensors(*prompt);
  if (attention) g["attention"] = module_tensors(*attention);
  if (classifier) g["classifier"] = module_tensors(*classifier);
  return g;
}

std::map<std::string, std::uint64_t> ReidModel::checksums() const {
  std::map<std::string, std::uint64_t> out;
  for (const auto& [name, tensors] : groups()) out[name] = checksum(tensors);
  return out;
}

ReidModel create_model(const TrainConfig& config, const IdentityIndex& train_index) {
  ReidModel m;
  m.config = config;
  m.train_index = train_index;
  m.encoder = make_encoder(config.encoder);
  const int n = train_index.size();
  const auto dtype = config.encoder.dtype();
  if (config.mode == Mode::indivaid) {
    m.prompt = PromptGenerator(*m.encoder, n, config.prompt, mix_seed(config.seed, 1));
    m.attention = AttentionMerge(config.encoder.embed_dim, dtype);
  }
  if (config.mode != Mode::clip_zs) {
    m.classifier = torch::nn::Linear(config.encoder.embed_dim, n);
    m.classifier->to(dtype);
    torch::NoGradGuard no_grad;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(mix_seed(config.seed, 2));
    m.classifier->weight.copy_(torch::randn(m.classifier->weight.sizes(), gen,
                                            torch::TensorOptions().dtype(dtype)) * 0.001);
    m.classifier->bias.zero_();
  }
  return m;
}

void save_checkpoint(const fs::path& dir, const ReidModel& model,
                     const std::map<std::string, TensorMap>& extra) {
  fs::create_directories(dir / "params");
  nlohmann::json meta;
  meta["format"] = 1;
  meta["stage"] = model.stage;
  meta["epoch"] = model.epoch;
  meta["mode"] = to_string(model.config.mode);
  meta["backend"] = to_string(model.config.encoder.backend);
  meta["seed"] = model.config.seed;
  meta["config_hash"] = config_hash(model.config);
  meta["config"] = to_json(model.config);
  meta["train_identities"] = model.train_index.labels();
  for (const auto& [name, tensors] : model.groups()) {
    write_tensor_blob(dir / "params" / (name + ".bin"), tensors);
    meta["params"][name] = hex64(checksum(tensors));
  }
  for (const auto& [name, tensors] : extra) {
    write_tensor_blob(dir / "params" / (name + ".bin"), tensors);
    meta["extra"][name] = hex64(checksum(tensors));
  }
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw InputError("no checkpoint at " + dir.string() + " (missing meta.json)");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt checkpoint meta " + (dir / "meta.json").string() + ": " + e.what());
  }

  TrainConfig config = train_config_from_json(meta.at("config"));
  // Everything comes from the blobs; skip reading pretrained weights.
  config.encoder.weights.clear();
  IdentityIndex index(meta.at("train_identities").get<std::vector<std::string>>());

  LoadedCheckpoint out{create_model(config, index), meta, {}};
  ReidModel& m = out.model;
  m.config.encoder.weights = meta.at("config").at("encoder").value("weights", std::string());
  m.stage = meta.at("stage").get<int>();
  m.epoch = meta.value("epoch", 0);

  for (const auto& name : kKnownGroups) {
    if (!meta.at("params").contains(name)) continue;
    auto tensors = read_tensor_blob(dir / "params" / (std::string(name) + ".bin"));
    if (hex64(checksum(tensors)) != meta["params"][name].get<std::string>())
      throw RuntimeFailure("checksum mismatch for parameter group '" + std::string(name) + "'");
    const std::string g = name;
    if (g == "image_encoder") assign_module_tensors(m.encoder->visual(), tensors, g);
    else if (g == "text_encoder") assign_module_tensors(m.encoder->text(), tensors, g);
    else if (g == "temperature") {
      torch::NoGradGuard no_grad;
      m.encoder->logit_scale().copy_(tensors.at("logit_scale"));
    } else if (g == "prompt" && m.prompt) assign_module_tensors(*m.prompt, tensors, g);
    else if (g == "attention" && m.attention) assign_module_tensors(*m.attention, tensors, g);
    else if (g == "classifier" && m.classifier) assign_module_tensors(*m.classifier, tensors, g);
  }
  if (meta.contains("extra"))
    for (const auto& [name, _] : meta["extra"].items())
      out.extra[name] = read_tensor_blob(dir / "params" / (name + ".bin"));
  return out;
}

}  // namespace indivaid
