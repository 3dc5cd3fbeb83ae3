#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "indivaid/tokenizer.hpp"

namespace indivaid {

enum class Backend { pretrained, toy };

struct EncoderConfig {
  Backend backend = Backend::toy;
  int image_size = 224;
  int patch_size = 16;
  int image_width = 64;  // pre-projection image feature width
  int embed_dim = 32;    // shared image/text space
  int text_width = 32;   // token embedding width (word_dim)
  int context_length = 16;
  int vocab_size = 1024;
  std::uint64_t toy_seed = 0;
  // Transformer shape, pretrained backend only.
  int vision_layers = 12;
  int vision_heads = 12;
  int text_layers = 12;
  int text_heads = 8;
  // Pretrained backend: state dict and BPE merges. Empty weights means
  // random initialization from toy_seed (architecture tests only); empty
  // bpe_vocab falls back to the hashed word tokenizer.
  std::string weights;
  std::string bpe_vocab;

  torch::Dtype dtype() const { return backend == Backend::toy ? torch::kFloat64 : torch::kFloat32; }
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

// Shape of the published ViT-B/16 vision-language model, with weight paths
// resolved under $INDIVAID_CACHE (default ~/.cache/indivaid).
EncoderConfig pretrained_config();
EncoderConfig toy_config(int embed_dim = 32, std::uint64_t seed = 0);
std::filesystem::path cache_dir();

nlohmann::json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
std::string_view to_string(Backend b);

// An image or text feature. `normalized` records whether the values have
// been scaled to unit Euclidean norm.
struct FeatureVector {
  torch::Tensor values;  // 1-D, length embed_dim
  bool normalized = false;

  static FeatureVector unit(const torch::Tensor& v);
  int64_t size() const { return values.numel(); }
};

// Image and text towers sharing one embedding space, plus the learnable
// similarity scale. Subclasses register their image tower as submodule
// "visual" and their text tower as "text".
class Encoder : public torch::nn::Module {
 public:
  explicit Encoder(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }

  // images: normalized [B,3,S,S]. Returns unnormalized [B,embed_dim]. With
  // trainable=false the call runs without building a graph.
  torch::Tensor encode_image(const torch::Tensor& images, bool trainable);
  FeatureVector encode_image_one(const torch::Tensor& image);

  // token_embeddings: [B,context_length,text_width]; eos: [B] positions.
  // Returns the projected feature at each eos position, [B,embed_dim].
  torch::Tensor encode_text(const torch::Tensor& token_embeddings, const torch::Tensor& eos);

  // Embedding-table lookup, [ids.size(), text_width].
  torch::Tensor word_embed(const std::vector<int64_t>& ids);

  // Token sequence [start, ..text.., end, pad...] and its end position.
  std::pair<std::vector<int64_t>, int64_t> tokenize_prompt(const std::string& text) const;

  const Tokenizer& tokenizer() const { return *tokenizer_; }

  // exp(logit_scale) clamped to at most 100.
  torch::Tensor temperature() const;
  torch::Tensor& logit_scale() { return logit_scale_; }

  torch::nn::Module& visual() { return *named_children()["visual"]; }
  torch::nn::Module& text() { return *named_children()["text"]; }

 protected:
  virtual torch::Tensor image_forward(const torch::Tensor& images) = 0;
  virtual torch::Tensor text_forward(const torch::Tensor& token_embeddings,
                                     const torch::Tensor& eos) = 0;
  virtual torch::Tensor embedding_table() const = 0;

  EncoderConfig config_;
  std::unique_ptr<Tokenizer> tokenizer_;
  torch::Tensor logit_scale_;
};

std::shared_ptr<Encoder> make_encoder(const EncoderConfig& config);

void set_requires_grad(torch::nn::Module& module, bool flag);
std::uint64_t module_checksum(const torch::nn::Module& module);

}  // namespace indivaid
