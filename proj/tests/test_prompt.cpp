#include "support/testing.hpp"

#include "indivaid/checkpoint.hpp"
#include "indivaid/common.hpp"
#include "indivaid/encoder.hpp"
#include "indivaid/losses.hpp"
#include "indivaid/prompt.hpp"
#include "support/gradcheck.hpp"

using namespace indivaid;

namespace {

struct Setup {
  EncoderConfig cfg;
  std::shared_ptr<Encoder> encoder;
  PromptGenerator prompt{nullptr};

  explicit Setup(int embed_dim = 32, int identities = 3) {
    cfg = toy_config(embed_dim, 1);
    cfg.image_size = 16;
    cfg.patch_size = 4;
    encoder = make_encoder(cfg);
    set_requires_grad(*encoder, false);
    prompt = PromptGenerator(*encoder, identities, PromptConfig{}, 2);
  }

  torch::Tensor features(int b, std::uint64_t seed) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    return encoder->encode_image(torch::rand({b, 3, 16, 16}, gen, torch::kFloat64), false);
  }
};

}  // namespace

TEST_CASE("meta-net hidden width is a 16x compression") {
  CHECK(meta_hidden_width(512) == 32);
  CHECK(meta_hidden_width(32) == 2);
  CHECK(meta_hidden_width(8) == 1);
  Setup s;
  CHECK(s.prompt->meta_linear1->weight.size(0) == 2);
  CHECK(s.prompt->meta_linear2->weight.size(1) == 2);
}

TEST_CASE("meta-net with zero weights gives a zero meta-token") {
  Setup s;
  {
    torch::NoGradGuard guard;
    for (auto& p : s.prompt->parameters()) p.zero_();
  }
  auto meta = s.prompt->meta_forward(s.features(2, 1));
  CHECK(meta.sizes() == torch::IntArrayRef({2, s.cfg.text_width}));
  CHECK(meta.abs().max().item<double>() == 0.0);
}

TEST_CASE("meta-tokens differ for different images and are small at init") {
  Setup s;
  auto f = s.features(2, 3);
  auto meta = s.prompt->meta_forward(f);
  CHECK_FALSE(torch::equal(meta[0], meta[1]));
  const double ctx_norm = s.prompt->context_tokens.norm(2, 1).min().item<double>();
  CHECK(meta.norm(2, 1).max().item<double>() < 0.1 * ctx_norm);
  CHECK_THROWS_AS(s.prompt->meta_forward(torch::zeros({1, 5}, torch::kFloat64)), InputError);
}

TEST_CASE("initialization copies the phrase and species embeddings") {
  Setup s;
  auto phrase = s.encoder->word_embed(s.encoder->tokenizer().encode("A photo of a"));
  CHECK(torch::equal(s.prompt->context_tokens, phrase));
  auto species = s.encoder->word_embed({s.encoder->tokenizer().encode("animal").front()});
  for (int i = 0; i < s.prompt->num_identities(); ++i) CHECK(torch::equal(s.prompt->identity_tokens[i], species[0]));
  auto& l1 = s.prompt->meta_linear1;
  CHECK(l1->bias.abs().max().item<double>() == 0.0);
  CHECK(l1->weight.std().item<double>() == doctest::Approx(0.02).epsilon(0.5));
}

TEST_CASE("assembled layout and eos position") {
  Setup s;
  CHECK(s.prompt->eos_position() == 7);
  const int W = s.cfg.text_width;
  auto zero = torch::zeros({1, W}, torch::kFloat64);
  auto [tokens, eos] = s.prompt->assemble(torch::tensor({1}, torch::kLong), zero);
  CHECK(eos[0].item<int64_t>() == 7);
  CHECK(tokens.sizes() == torch::IntArrayRef({1, s.cfg.context_length, W}));
  auto& tok = s.encoder->tokenizer();
  CHECK(torch::equal(tokens[0][0], s.encoder->word_embed({tok.start_id()})[0]));
  CHECK(torch::equal(tokens[0].slice(0, 1, 5), s.prompt->context_tokens));
  CHECK(torch::equal(tokens[0][5], s.prompt->identity_tokens[1]));
  CHECK(torch::equal(tokens[0][6], s.encoder->word_embed(tok.encode("."))[0]));
  CHECK(torch::equal(tokens[0][7], s.encoder->word_embed({tok.end_id()})[0]));
  CHECK(torch::equal(tokens[0][8], s.encoder->word_embed({tok.pad_id()})[0]));
  CHECK_THROWS_AS(s.prompt->assemble(torch::tensor({3}, torch::kLong), zero), InputError);
}

TEST_CASE("assembly is linear in the meta-token") {
  Setup s;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(4);
  auto pi = torch::randn({1, s.cfg.text_width}, gen, torch::kFloat64);
  auto id = torch::tensor({0}, torch::kLong);
  auto a = s.prompt->assemble(id, pi).first[0];
  auto b = s.prompt->assemble(id, 2 * pi).first[0];
  auto diff = b - a;
  for (int j = 1; j <= 4; ++j) CHECK(torch::allclose(diff[j], pi[0], 0, 1e-15));
  CHECK(diff.slice(0, 5).abs().max().item<double>() == 0.0);
  CHECK(diff[0].abs().max().item<double>() == 0.0);
}

TEST_CASE("two identities with the same image differ only at the identity slot") {
  Setup s;
  {
    torch::NoGradGuard guard;
    s.prompt->identity_tokens[2] += 1.0;
  }
  auto meta = s.prompt->meta_forward(s.features(1, 5)).repeat({2, 1});
  auto tokens = s.prompt->assemble(torch::tensor({0, 2}, torch::kLong), meta).first;
  auto differs = (tokens[0] != tokens[1]).any(1);
  CHECK(differs.sum().item<int64_t>() == 1);
  CHECK(differs[5].item<bool>());
}

TEST_CASE("descriptions are deterministic and embed_dim wide") {
  Setup s;
  auto f = s.features(3, 6);
  auto ids = torch::tensor({0, 1, 2}, torch::kLong);
  auto d = s.prompt->describe(*s.encoder, f, ids);
  CHECK(d.sizes() == torch::IntArrayRef({3, s.cfg.embed_dim}));
  CHECK(torch::equal(d, s.prompt->describe(*s.encoder, f, ids)));
}

TEST_CASE("per-identity context tokens keep the layout") {
  auto cfg = toy_config(16, 1);
  cfg.image_size = 16;
  cfg.patch_size = 4;
  auto enc = make_encoder(cfg);
  PromptConfig pc;
  pc.per_identity_context = true;
  PromptGenerator prompt(*enc, 2, pc, 0);
  CHECK(prompt->context_tokens.sizes() == torch::IntArrayRef({2, 4, cfg.text_width}));
  auto [tokens, eos] = prompt->assemble(torch::tensor({1}, torch::kLong), torch::zeros({1, cfg.text_width}, torch::kFloat64));
  CHECK(torch::equal(tokens[0].slice(0, 1, 5), prompt->context_tokens[1]));
}

TEST_CASE("stage-one loss gradients match central differences for every prompt group") {
  Setup s(8, 3);
  auto f = s.features(5, 8);
  auto ids = torch::tensor({0, 1, 2, 0, 1}, torch::kLong);
  auto loss = [&] {
    auto d = s.prompt->describe(*s.encoder, f, ids);
    return stage1_loss(similarity_matrix(f, d, s.encoder->temperature()));
  };
  for (const auto& item : s.prompt->named_parameters()) {
    auto r = gradcheck::check(loss, item.value());
    CHECK_MESSAGE(r.rel_error <= 1e-4, item.key(), " rel error ", r.rel_error);
    CHECK(r.analytic_norm > 0);
  }
}
