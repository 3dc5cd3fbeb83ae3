#include "indivaid/encoder.hpp"

#include <cmath>
#include <cstdlib>

#include "indivaid/clip_encoder.hpp"
#include "indivaid/common.hpp"
#include "indivaid/toy_encoder.hpp"

namespace indivaid {

void EncoderConfig::validate() const {
  if (embed_dim <= 0) throw InputError("embed_dim must be positive");
  if (context_length < 8) throw InputError("context_length must be at least 8");
  if (image_width <= 0 || text_width <= 0) throw InputError("encoder widths must be positive");
  if (vocab_size <= 3) throw InputError("vocab_size must exceed 3");
  if (patch_size <= 0 || image_size % patch_size != 0)
    throw InputError("image_size must be a multiple of patch_size");
  if (backend == Backend::pretrained) {
    if (vision_heads <= 0 || image_width % vision_heads != 0)
      throw InputError("image_width must be divisible by vision_heads");
    if (text_heads <= 0 || text_width % text_heads != 0)
      throw InputError("text_width must be divisible by text_heads");
  }
}

std::filesystem::path cache_dir() {
  if (const char* env = std::getenv("INDIVAID_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home)
    return std::filesystem::path(home) / ".cache" / "indivaid";
  return ".indivaid_cache";
}

EncoderConfig pretrained_config() {
  EncoderConfig c;
  c.backend = Backend::pretrained;
  c.image_size = 224;
  c.patch_size = 16;
  c.image_width = 768;
  c.embed_dim = 512;
  c.text_width = 512;
  c.context_length = 77;
  c.vocab_size = 49408;
  c.vision_layers = 12;
  c.vision_heads = 12;
  c.text_layers = 12;
  c.text_heads = 8;
  c.weights = (cache_dir() / "ViT-B-16" / "state_dict.pt").string();
  c.bpe_vocab = (cache_dir() / "bpe_simple_vocab_16e6.txt.gz").string();
  return c;
}

EncoderConfig toy_config(int embed_dim, std::uint64_t seed) {
  EncoderConfig c;
  c.backend = Backend::toy;
  c.embed_dim = embed_dim;
  c.text_width = embed_dim;
  c.image_width = 2 * embed_dim;
  c.toy_seed = seed;
  return c;
}

std::string_view to_string(Backend b) { return b == Backend::toy ? "toy" : "pretrained"; }

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"backend", to_string(c.backend)}, {"image_size", c.image_size},
          {"patch_size", c.patch_size},      {"image_width", c.image_width},
          {"embed_dim", c.embed_dim},        {"text_width", c.text_width},
          {"context_length", c.context_length}, {"vocab_size", c.vocab_size},
          {"toy_seed", c.toy_seed},          {"vision_layers", c.vision_layers},
          {"vision_heads", c.vision_heads},  {"text_layers", c.text_layers},
          {"text_heads", c.text_heads},      {"weights", c.weights},
          {"bpe_vocab", c.bpe_vocab}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  const std::string backend = j.value("backend", "toy");
  if (backend != "toy" && backend != "pretrained")
    throw InputError("unknown encoder backend '" + backend + "'");
  EncoderConfig c = backend == "toy" ? toy_config(j.value("embed_dim", 32)) : pretrained_config();
  c.image_size = j.value("image_size", c.image_size);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.image_width = j.value("image_width", c.image_width);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.text_width = j.value("text_width", c.text_width);
  c.context_length = j.value("context_length", c.context_length);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.toy_seed = j.value("toy_seed", c.toy_seed);
  c.vision_layers = j.value("vision_layers", c.vision_layers);
  c.vision_heads = j.value("vision_heads", c.vision_heads);
  c.text_layers = j.value("text_layers", c.text_layers);
  c.text_heads = j.value("text_heads", c.text_heads);
  c.weights = j.value("weights", c.weights);
  c.bpe_vocab = j.value("bpe_vocab", c.bpe_vocab);
  c.validate();
  return c;
}

FeatureVector FeatureVector::unit(const torch::Tensor& v) {
  auto norm = v.norm();
  if (norm.item<double>() == 0.0) throw InputError("cannot normalize a zero vector");
  return {v / norm, true};
}

Encoder::Encoder(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.backend == Backend::pretrained && !config_.bpe_vocab.empty())
    tokenizer_ = std::make_unique<BpeTokenizer>(config_.bpe_vocab);
  else
    tokenizer_ = std::make_unique<HashTokenizer>(config_.vocab_size);
  logit_scale_ = register_parameter(
      "logit_scale",
      torch::full({}, std::log(1.0 / 0.07), torch::TensorOptions().dtype(config_.dtype())));
}

torch::Tensor Encoder::encode_image(const torch::Tensor& images, bool trainable) {
  const int s = config_.image_size;
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != s || images.size(3) != s)
    throw InputError("encode_image expects [B,3," + std::to_string(s) + "," + std::to_string(s) +
                     "], got " + c10::str(images.sizes()));
  auto x = images.to(config_.dtype());
  if (trainable) return image_forward(x);
  torch::NoGradGuard no_grad;
  return image_forward(x);
}

FeatureVector Encoder::encode_image_one(const torch::Tensor& image) {
  return {encode_image(image.unsqueeze(0), false).squeeze(0), false};
}

torch::Tensor Encoder::encode_text(const torch::Tensor& token_embeddings, const torch::Tensor& eos) {
  if (token_embeddings.dim() != 3 || token_embeddings.size(1) != config_.context_length ||
      token_embeddings.size(2) != config_.text_width)
    throw InputError("encode_text expects [B," + std::to_string(config_.context_length) + "," +
                     std::to_string(config_.text_width) + "], got " +
                     c10::str(token_embeddings.sizes()));
  if (eos.dim() != 1 || eos.size(0) != token_embeddings.size(0))
    throw InputError("encode_text expects one eos position per sequence");
  auto e = eos.to(torch::kLong);
  if (e.numel() > 0 &&
      (e.min().item<int64_t>() <= 0 || e.max().item<int64_t>() >= config_.context_length))
    throw InputError("eos position out of range (0, " + std::to_string(config_.context_length) + ")");
  return text_forward(token_embeddings.to(config_.dtype()), e);
}

torch::Tensor Encoder::word_embed(const std::vector<int64_t>& ids) {
  for (auto id : ids)
    if (id < 0 || id >= config_.vocab_size)
      throw InputError("token id " + std::to_string(id) + " out of range");
  auto idx = torch::tensor(ids, torch::kLong);
  return embedding_table().index_select(0, idx);
}

std::pair<std::vector<int64_t>, int64_t> Encoder::tokenize_prompt(const std::string& text) const {
  std::vector<int64_t> ids{tokenizer_->start_id()};
  for (auto id : tokenizer_->encode(text)) ids.push_back(id);
  ids.push_back(tokenizer_->end_id());
  if (static_cast<int>(ids.size()) > config_.context_length)
    throw InputError("prompt '" + text + "' exceeds the context length");
  const int64_t eos = static_cast<int64_t>(ids.size()) - 1;
  ids.resize(config_.context_length, tokenizer_->pad_id());
  return {ids, eos};
}

torch::Tensor Encoder::temperature() const { return logit_scale_.exp().clamp_max(100.0); }

std::shared_ptr<Encoder> make_encoder(const EncoderConfig& config) {
  if (config.backend == Backend::toy) return std::make_shared<ToyEncoder>(config);
  return std::make_shared<ClipEncoder>(config);
}

void set_requires_grad(torch::nn::Module& module, bool flag) {
  for (auto& p : module.parameters()) p.set_requires_grad(flag);
}

std::uint64_t module_checksum(const torch::nn::Module& module) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& item : module.named_parameters()) {
    h = fnv1a64(item.key(), h);
    h = tensor_checksum(item.value(), h);
  }
  for (const auto& item : module.named_buffers()) {
    h = fnv1a64(item.key(), h);
    h = tensor_checksum(item.value(), h);
  }
  return h;
}

}  // namespace indivaid
