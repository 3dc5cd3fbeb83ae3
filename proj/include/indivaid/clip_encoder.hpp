#pragma once

#include <map>
#include <string>

#include "indivaid/encoder.hpp"

namespace indivaid {

struct ResidualBlockImpl : torch::nn::Module {
  ResidualBlockImpl(int width, int heads);
  // x: [L, B, width] (sequence first); mask: additive [L, L] or undefined.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

  torch::nn::MultiheadAttention attn{nullptr};
  torch::nn::LayerNorm ln_1{nullptr}, ln_2{nullptr};
  torch::nn::Linear c_fc{nullptr}, c_proj{nullptr};
};
TORCH_MODULE(ResidualBlock);

struct TransformerImpl : torch::nn::Module {
  TransformerImpl(int width, int layers, int heads);
  torch::Tensor forward(torch::Tensor x, const torch::Tensor& mask = {});

  torch::nn::ModuleList resblocks;
};
TORCH_MODULE(Transformer);

struct VisionTransformerImpl : torch::nn::Module {
  explicit VisionTransformerImpl(const EncoderConfig& c);
  torch::Tensor forward(const torch::Tensor& images);

  torch::nn::Conv2d conv1{nullptr};
  torch::Tensor class_embedding, positional_embedding, proj;
  torch::nn::LayerNorm ln_pre{nullptr}, ln_post{nullptr};
  Transformer transformer{nullptr};
};
TORCH_MODULE(VisionTransformer);

struct TextTransformerImpl : torch::nn::Module {
  explicit TextTransformerImpl(const EncoderConfig& c);
  torch::Tensor forward(const torch::Tensor& token_embeddings, const torch::Tensor& eos);

  torch::nn::Embedding token_embedding{nullptr};
  torch::Tensor positional_embedding, text_projection, causal_mask;
  Transformer transformer{nullptr};
  torch::nn::LayerNorm ln_final{nullptr};
};
TORCH_MODULE(TextTransformer);

// ViT-B/16-class vision-language backbone. Parameter names follow the
// published state dict (visual.*, transformer.*, token_embedding.weight, ...)
// with the text tower nested under "text.".
class ClipEncoder final : public Encoder {
 public:
  explicit ClipEncoder(const EncoderConfig& config);

  // Copies tensors from a {name -> tensor} state dict saved with torch.save.
  void load_state_dict_file(const std::filesystem::path& path);
  void load_state_dict(const std::map<std::string, torch::Tensor>& state);

 protected:
  torch::Tensor image_forward(const torch::Tensor& images) override;
  torch::Tensor text_forward(const torch::Tensor& token_embeddings, const torch::Tensor& eos) override;
  torch::Tensor embedding_table() const override { return text_->token_embedding->weight; }

 private:
  VisionTransformer visual_{nullptr};
  TextTransformer text_{nullptr};
};

// Reads a torch.save'd dict of tensors.
std::map<std::string, torch::Tensor> read_state_dict(const std::filesystem::path& path);

}  // namespace indivaid
