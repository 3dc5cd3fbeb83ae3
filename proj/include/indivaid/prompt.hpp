#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

#include "indivaid/dataset.hpp"
#include "indivaid/encoder.hpp"

namespace indivaid {

struct PromptConfig {
  int num_context = 4;
  std::string init_phrase = "A photo of a";
  std::string species = "animal";
  // Experimental: one set of context tokens per identity instead of a
  // shared set.
  bool per_identity_context = false;
};

// Hidden width of the Meta-Net: the image feature compressed 16x, at least 1.
int meta_hidden_width(int embed_dim);

// Text description generator. Owns the learnable context tokens, one
// learnable token per identity, and the Meta-Net that turns an image
// feature into a meta-token added to every context token.
//
// Assembled sequence (positions):
//   0: start | 1..m: context + meta | m+1: identity | m+2: "." | m+3: end | pad...
class PromptGeneratorImpl : public torch::nn::Module {
 public:
  // Context tokens start from the word embeddings of `init_phrase`; every
  // identity token starts from the embedding of the species word's first
  // token; Meta-Net weights ~ N(0, 0.02), zero bias.
  PromptGeneratorImpl(Encoder& encoder, int num_identities, PromptConfig config, std::uint64_t seed);

  // [B,embed_dim] -> [B,text_width]; also accepts a single 1-D feature.
  torch::Tensor meta_forward(const torch::Tensor& image_features);

  // identities [B] (long), meta [B,text_width] ->
  // (token embeddings [B,context_length,text_width], eos [B]).
  std::pair<torch::Tensor, torch::Tensor> assemble(const torch::Tensor& identities,
                                                   const torch::Tensor& meta);

  // Per-image description features [B,embed_dim] (unnormalized).
  torch::Tensor describe(Encoder& encoder, const torch::Tensor& image_features,
                         const torch::Tensor& identities);

  int num_identities() const { return static_cast<int>(identity_tokens.size(0)); }
  int num_context() const { return config_.num_context; }
  int64_t eos_position() const { return config_.num_context + 3; }
  const PromptConfig& config() const { return config_; }

  torch::Tensor context_tokens;   // [m,W] or [N,m,W]
  torch::Tensor identity_tokens;  // [N,W]
  torch::nn::Linear meta_linear1{nullptr}, meta_linear2{nullptr};

 private:
  PromptConfig config_;
  int context_length_;
  // Frozen embeddings of the start, period, end and pad tokens.
  torch::Tensor start_embedding_, period_embedding_, end_embedding_, pad_embedding_;
};
TORCH_MODULE(PromptGenerator);

}  // namespace indivaid
