#include "indivaid/prompt.hpp"

#include <algorithm>

#include <ATen/CPUGeneratorImpl.h>

#include "indivaid/common.hpp"

namespace indivaid {

int meta_hidden_width(int embed_dim) { return std::max(1, embed_dim / 16); }

PromptGeneratorImpl::PromptGeneratorImpl(Encoder& encoder, int num_identities, PromptConfig config,
                                         std::uint64_t seed)
    : config_(std::move(config)), context_length_(encoder.config().context_length) {
  const auto& ec = encoder.config();
  const int m = config_.num_context;
  if (m < 1) throw InputError("need at least one context token");
  if (num_identities < 1) throw InputError("need at least one identity");
  if (m + 4 > context_length_) throw InputError("context_length too small for the prompt layout");

  torch::NoGradGuard no_grad;
  const auto& tok = encoder.tokenizer();
  const auto opts = torch::TensorOptions().dtype(ec.dtype());
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);

  auto phrase_ids = tok.encode(config_.init_phrase);
  auto ctx = torch::randn({m, ec.text_width}, gen, opts) * 0.02;
  const int copied = std::min<int>(m, static_cast<int>(phrase_ids.size()));
  if (copied > 0) {
    std::vector<int64_t> head(phrase_ids.begin(), phrase_ids.begin() + copied);
    ctx.slice(0, 0, copied).copy_(encoder.word_embed(head));
  }
  if (config_.per_identity_context)
    ctx = ctx.unsqueeze(0).repeat({num_identities, 1, 1});
  context_tokens = register_parameter("context_tokens", ctx.clone());

  auto species_ids = tok.encode(config_.species);
  if (species_ids.empty()) throw InputError("species word '" + config_.species + "' has no tokens");
  identity_tokens = register_parameter(
      "identity_tokens", encoder.word_embed({species_ids.front()}).repeat({num_identities, 1}).clone());

  const int hidden = meta_hidden_width(ec.embed_dim);
  meta_linear1 = register_module("meta_linear1", torch::nn::Linear(ec.embed_dim, hidden));
  meta_linear2 = register_module("meta_linear2", torch::nn::Linear(hidden, ec.text_width));
  for (auto* lin : {&meta_linear1, &meta_linear2}) {
    (*lin)->to(ec.dtype());
    (*lin)->weight.copy_(torch::randn((*lin)->weight.sizes(), gen, opts) * 0.02);
    (*lin)->bias.zero_();
  }

  auto period = tok.encode(".");
  if (period.size() != 1) throw InputError("tokenizer must map '.' to one token");
  start_embedding_ = register_buffer("start_embedding", encoder.word_embed({tok.start_id()}).squeeze(0).clone());
  period_embedding_ = register_buffer("period_embedding", encoder.word_embed(period).squeeze(0).clone());
  end_embedding_ = register_buffer("end_embedding", encoder.word_embed({tok.end_id()}).squeeze(0).clone());
  pad_embedding_ = register_buffer("pad_embedding", encoder.word_embed({tok.pad_id()}).squeeze(0).clone());
}

torch::Tensor PromptGeneratorImpl::meta_forward(const torch::Tensor& image_features) {
  const int64_t in = meta_linear1->weight.size(1);
  if (image_features.size(-1) != in)
    throw InputError("Meta-Net expects features of width " + std::to_string(in) + ", got " +
                     std::to_string(image_features.size(-1)));
  return meta_linear2(torch::relu(meta_linear1(image_features)));
}

std::pair<torch::Tensor, torch::Tensor> PromptGeneratorImpl::assemble(const torch::Tensor& identities,
                                                                      const torch::Tensor& meta) {
  const int64_t batch = identities.size(0);
  const int64_t n = identity_tokens.size(0);
  const int64_t w = identity_tokens.size(1);
  const int m = config_.num_context;
  if (identities.numel() > 0 &&
      (identities.min().item<int64_t>() < 0 || identities.max().item<int64_t>() >= n))
    throw InputError("identity out of range [0, " + std::to_string(n) + ")");
  if (meta.dim() != 2 || meta.size(0) != batch || meta.size(1) != w)
    throw InputError("meta-token batch does not match identities");

  auto ids = identities.to(torch::kLong);
  auto ctx = config_.per_identity_context ? context_tokens.index_select(0, ids)
                                          : context_tokens.unsqueeze(0).expand({batch, m, w});
  ctx = ctx + meta.unsqueeze(1);
  auto ident = identity_tokens.index_select(0, ids).unsqueeze(1);
  auto fixed = [&](const torch::Tensor& e, int64_t count) {
    return e.view({1, 1, w}).expand({batch, count, w});
  };
  const int64_t pad = context_length_ - (m + 4);
  std::vector<torch::Tensor> parts{fixed(start_embedding_, 1), ctx, ident, fixed(period_embedding_, 1),
                                   fixed(end_embedding_, 1)};
  if (pad > 0) parts.push_back(fixed(pad_embedding_, pad));
  auto eos = torch::full({batch}, eos_position(), torch::kLong);
  return {torch::cat(parts, 1), eos};
}

torch::Tensor PromptGeneratorImpl::describe(Encoder& encoder, const torch::Tensor& image_features,
                                            const torch::Tensor& identities) {
  auto [tokens, eos] = assemble(identities, meta_forward(image_features));
  return encoder.encode_text(tokens, eos);
}

}  // namespace indivaid
