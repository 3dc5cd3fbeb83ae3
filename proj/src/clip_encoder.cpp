#include "indivaid/clip_encoder.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "indivaid/common.hpp"

namespace indivaid {

namespace {

torch::Tensor quick_gelu(const torch::Tensor& x) { return x * torch::sigmoid(1.702 * x); }

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(int width, int heads) {
  attn = register_module("attn", torch::nn::MultiheadAttention(
                                     torch::nn::MultiheadAttentionOptions(width, heads)));
  ln_1 = register_module("ln_1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  // The reference keeps the MLP in a submodule named "mlp"; mirror that so
  // state-dict keys line up.
  auto mlp = register_module("mlp", std::make_shared<torch::nn::Module>());
  c_fc = mlp->register_module("c_fc", torch::nn::Linear(width, 4 * width));
  c_proj = mlp->register_module("c_proj", torch::nn::Linear(4 * width, width));
  ln_2 = register_module("ln_2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
  auto h = ln_1(x);
  auto attended = std::get<0>(attn->forward(h, h, h, torch::Tensor(), false, mask));
  auto y = x + attended;
  return y + c_proj(quick_gelu(c_fc(ln_2(y))));
}

TransformerImpl::TransformerImpl(int width, int layers, int heads) {
  resblocks = register_module("resblocks", torch::nn::ModuleList());
  for (int i = 0; i < layers; ++i) resblocks->push_back(ResidualBlock(width, heads));
}

torch::Tensor TransformerImpl::forward(torch::Tensor x, const torch::Tensor& mask) {
  for (const auto& block : *resblocks) x = block->as<ResidualBlock>()->forward(x, mask);
  return x;
}

VisionTransformerImpl::VisionTransformerImpl(const EncoderConfig& c) {
  const int w = c.image_width;
  const int grid = c.image_size / c.patch_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(w));
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, w, c.patch_size).stride(c.patch_size).bias(false)));
  class_embedding = register_parameter("class_embedding", torch::randn({w}) * scale);
  positional_embedding =
      register_parameter("positional_embedding", torch::randn({grid * grid + 1, w}) * scale);
  ln_pre = register_module("ln_pre", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));
  transformer = register_module("transformer", Transformer(w, c.vision_layers, c.vision_heads));
  ln_post = register_module("ln_post", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));
  proj = register_parameter("proj", torch::randn({w, c.embed_dim}) * scale);
}

torch::Tensor VisionTransformerImpl::forward(const torch::Tensor& images) {
  auto x = conv1(images).flatten(2).transpose(1, 2);  // [B, grid^2, w]
  auto cls = class_embedding.view({1, 1, -1}).expand({x.size(0), 1, x.size(2)});
  x = torch::cat({cls, x}, 1) + positional_embedding;
  x = ln_pre(x).transpose(0, 1);
  x = transformer(x).transpose(0, 1);
  return ln_post(x.select(1, 0)).matmul(proj);
}

TextTransformerImpl::TextTransformerImpl(const EncoderConfig& c) {
  const int w = c.text_width;
  token_embedding = register_module("token_embedding", torch::nn::Embedding(c.vocab_size, w));
  torch::nn::init::normal_(token_embedding->weight, 0.0, 0.02);
  positional_embedding = register_parameter("positional_embedding", torch::randn({c.context_length, w}) * 0.01);
  transformer = register_module("transformer", Transformer(w, c.text_layers, c.text_heads));
  ln_final = register_module("ln_final", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));
  text_projection = register_parameter(
      "text_projection", torch::randn({w, c.embed_dim}) / std::sqrt(static_cast<double>(w)));
  causal_mask = register_buffer(
      "causal_mask",
      torch::full({c.context_length, c.context_length}, -std::numeric_limits<float>::infinity())
          .triu(1));
}

torch::Tensor TextTransformerImpl::forward(const torch::Tensor& token_embeddings, const torch::Tensor& eos) {
  auto x = (token_embeddings + positional_embedding).transpose(0, 1);
  x = transformer(x, causal_mask.to(x.dtype())).transpose(0, 1);
  x = ln_final(x);
  auto rows = torch::arange(x.size(0), torch::kLong);
  return x.index({rows, eos}).matmul(text_projection);
}

ClipEncoder::ClipEncoder(const EncoderConfig& config) : Encoder(config) {
  {
    // Random initialization only matters for architecture tests; real runs
    // overwrite everything from the state dict.
    torch::manual_seed(config_.toy_seed);
    visual_ = register_module("visual", VisionTransformer(config_));
    text_ = register_module("text", TextTransformer(config_));
  }
  to(config_.dtype());
  if (!config_.weights.empty()) load_state_dict_file(config_.weights);
}

torch::Tensor ClipEncoder::image_forward(const torch::Tensor& images) { return visual_->forward(images); }

torch::Tensor ClipEncoder::text_forward(const torch::Tensor& token_embeddings, const torch::Tensor& eos) {
  return text_->forward(token_embeddings, eos);
}

std::map<std::string, torch::Tensor> read_state_dict(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InputError("pretrained weights not found at " + path.string() +
                     " (set INDIVAID_CACHE or run tools/export_clip_weights.py)");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  auto value = torch::pickle_load(bytes);
  if (!value.isGenericDict()) throw InputError(path.string() + " does not hold a state dict");
  std::map<std::string, torch::Tensor> out;
  for (const auto& kv : value.toGenericDict()) out[kv.key().toStringRef()] = kv.value().toTensor();
  return out;
}

void ClipEncoder::load_state_dict_file(const std::filesystem::path& path) {
  load_state_dict(read_state_dict(path));
}

void ClipEncoder::load_state_dict(const std::map<std::string, torch::Tensor>& state) {
  torch::NoGradGuard no_grad;
  auto assign = [&](const std::string& name, torch::Tensor& target) {
    // Our text tower lives under "text."; the reference keeps it top-level.
    std::string key = name.rfind("text.", 0) == 0 ? name.substr(5) : name;
    auto it = state.find(key);
    if (it == state.end()) throw InputError("state dict is missing '" + key + "'");
    if (it->second.sizes() != target.sizes())
      throw InputError("state dict entry '" + key + "' has shape " + c10::str(it->second.sizes()) +
                       ", expected " + c10::str(target.sizes()));
    target.copy_(it->second.to(target.dtype()));
  };
  for (auto& item : named_parameters()) assign(item.key(), item.value());
}

}  // namespace indivaid
