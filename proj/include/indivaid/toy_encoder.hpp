#pragma once

#include "indivaid/encoder.hpp"

namespace indivaid {

// Image tower: patch-mean pooling (fixed), Linear -> tanh, then a linear
// projection into the shared space.
struct ToyVisualImpl : torch::nn::Module {
  ToyVisualImpl(const EncoderConfig& c, torch::Generator& gen);
  torch::Tensor forward(const torch::Tensor& images);

  int patch_size;
  torch::Tensor backbone_weight, backbone_bias, proj;
};
TORCH_MODULE(ToyVisual);

// Text tower: per-position tanh(W x_p + pos_p), causal mean over positions
// up to eos, linear projection. Positions after eos never reach the output.
struct ToyTextImpl : torch::nn::Module {
  ToyTextImpl(const EncoderConfig& c, torch::Generator& gen);
  torch::Tensor forward(const torch::Tensor& token_embeddings, const torch::Tensor& eos);

  torch::Tensor token_embedding, positional_embedding, in_weight, text_projection;
};
TORCH_MODULE(ToyText);

// Small, fast, fully deterministic stand-in for the pretrained backbone with
// the same interface. All weights are drawn from toy_seed.
class ToyEncoder final : public Encoder {
 public:
  explicit ToyEncoder(const EncoderConfig& config);

 protected:
  torch::Tensor image_forward(const torch::Tensor& images) override;
  torch::Tensor text_forward(const torch::Tensor& token_embeddings, const torch::Tensor& eos) override;
  torch::Tensor embedding_table() const override { return text_->token_embedding; }

 private:
  ToyVisual visual_{nullptr};
  ToyText text_{nullptr};
};

}  // namespace indivaid
