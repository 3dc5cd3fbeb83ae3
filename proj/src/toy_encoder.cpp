#include "indivaid/toy_encoder.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

namespace indivaid {

namespace {

torch::Tensor randn(std::vector<int64_t> shape, double std, torch::Generator& gen) {
  return torch::randn(shape, gen, torch::TensorOptions().dtype(torch::kFloat64)) * std;
}

}  // namespace

ToyVisualImpl::ToyVisualImpl(const EncoderConfig& c, torch::Generator& gen)
    : patch_size(c.patch_size) {
  const int64_t grid = c.image_size / c.patch_size;
  const int64_t in = 3 * grid * grid;
  backbone_weight = register_parameter(
      "backbone_weight", randn({c.image_width, in}, 1.0 / std::sqrt(static_cast<double>(in)), gen));
  backbone_bias = register_parameter("backbone_bias", randn({c.image_width}, 0.1, gen));
  proj = register_parameter(
      "proj", randn({c.image_width, c.embed_dim}, 1.0 / std::sqrt(static_cast<double>(c.image_width)), gen));
}

torch::Tensor ToyVisualImpl::forward(const torch::Tensor& images) {
  auto pooled = torch::avg_pool2d(images, patch_size).flatten(1);
  auto hidden = torch::tanh(torch::addmm(backbone_bias, pooled, backbone_weight.t()));
  return hidden.matmul(proj);
}

ToyTextImpl::ToyTextImpl(const EncoderConfig& c, torch::Generator& gen) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(c.text_width));
  token_embedding = register_parameter("token_embedding", randn({c.vocab_size, c.text_width}, 1.0, gen));
  positional_embedding =
      register_parameter("positional_embedding", randn({c.context_length, c.text_width}, 0.1, gen));
  in_weight = register_parameter("in_weight", randn({c.text_width, c.text_width}, inv, gen));
  text_projection = register_parameter("text_projection", randn({c.text_width, c.embed_dim}, inv, gen));
}

torch::Tensor ToyTextImpl::forward(const torch::Tensor& token_embeddings, const torch::Tensor& eos) {
  const int64_t length = token_embeddings.size(1);
  auto hidden = torch::tanh(token_embeddings.matmul(in_weight.t()) + positional_embedding);
  // mask[b, p] = 1 for p <= eos[b]
  auto positions = torch::arange(length, torch::kLong).unsqueeze(0);
  auto mask = (positions <= eos.unsqueeze(1)).to(hidden.dtype());
  auto pooled = (hidden * mask.unsqueeze(2)).sum(1) / mask.sum(1, true);
  return pooled.matmul(text_projection);
}

ToyEncoder::ToyEncoder(const EncoderConfig& config) : Encoder(config) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(config.toy_seed);
  visual_ = register_module("visual", ToyVisual(config_, gen));
  text_ = register_module("text", ToyText(config_, gen));
}

torch::Tensor ToyEncoder::image_forward(const torch::Tensor& images) { return visual_->forward(images); }

torch::Tensor ToyEncoder::text_forward(const torch::Tensor& token_embeddings, const torch::Tensor& eos) {
  return text_->forward(token_embeddings, eos);
}

}  // namespace indivaid
