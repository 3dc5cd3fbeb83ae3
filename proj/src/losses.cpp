#include "indivaid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "indivaid/common.hpp"

namespace indivaid {

double cosine_sim(const FeatureVector& v, const FeatureVector& t) {
  if (v.size() != t.size()) throw InputError("cosine_sim: length mismatch");
  auto a = v.values.to(torch::kFloat64), b = t.values.to(torch::kFloat64);
  const double na = a.norm().item<double>(), nb = b.norm().item<double>();
  if (na == 0.0 || nb == 0.0) throw InputError("cosine_sim: zero-norm input");
  return std::clamp(a.dot(b).item<double>() / (na * nb), -1.0, 1.0);
}

torch::Tensor similarity_matrix(const torch::Tensor& images, const torch::Tensor& texts,
                                const torch::Tensor& temperature) {
  auto v = images / images.norm(2, 1, true);
  auto t = texts / texts.norm(2, 1, true);
  return temperature * v.matmul(t.t());
}

namespace {

void require_square(const torch::Tensor& s) {
  if (s.dim() != 2 || s.size(0) != s.size(1))
    throw InputError("contrastive loss needs a square similarity matrix, got " + c10::str(s.sizes()));
}

}  // namespace

torch::Tensor i2t_loss(const torch::Tensor& similarity) {
  require_square(similarity);
  return -torch::log_softmax(similarity, 1).diagonal().mean();
}

torch::Tensor t2i_loss(const torch::Tensor& similarity) {
  require_square(similarity);
  return -torch::log_softmax(similarity, 0).diagonal().mean();
}

torch::Tensor stage1_loss(const torch::Tensor& similarity) {
  return i2t_loss(similarity) + t2i_loss(similarity);
}

SmoothedTargets smoothed_targets(int y, int num_classes, double epsilon) {
  if (num_classes < 1) throw InputError("smoothed_targets: need at least one class");
  if (y < 0 || y >= num_classes) throw InputError("smoothed_targets: class out of range");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InputError("smoothed_targets: epsilon must lie in [0, 1)");
  auto q = torch::full({num_classes}, epsilon / num_classes, torch::kFloat64);
  q[y] = (1.0 - epsilon) + epsilon / num_classes;
  return {q, epsilon, y};
}

torch::Tensor identity_loss(const torch::Tensor& logits, const torch::Tensor& labels, double epsilon) {
  auto z = logits.dim() == 1 ? logits.unsqueeze(0) : logits;
  auto y = labels.dim() == 0 ? labels.unsqueeze(0) : labels;
  if (z.dim() != 2 || y.dim() != 1 || z.size(0) != y.size(0))
    throw InputError("identity_loss: logits [B,N] and labels [B] disagree");
  if (!torch::isfinite(z).all().item<bool>()) throw InputError("identity_loss: non-finite logits");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InputError("identity_loss: epsilon must lie in [0, 1)");
  const int64_t n = z.size(1);
  auto yl = y.to(torch::kLong);
  if (yl.numel() > 0 && (yl.min().item<int64_t>() < 0 || yl.max().item<int64_t>() >= n))
    throw InputError("identity_loss: label out of range");
  // log_softmax subtracts the row max internally.
  auto logp = torch::log_softmax(z, 1);
  auto q = torch::full_like(logp, epsilon / static_cast<double>(n));
  q.scatter_(1, yl.unsqueeze(1), (1.0 - epsilon) + epsilon / static_cast<double>(n));
  return -(q * logp).sum(1).mean();
}

double triplet_hinge(double d_pos, double d_neg, double margin) {
  return std::max(0.0, d_pos - d_neg + margin);
}

torch::Tensor triplet_loss(const torch::Tensor& features, const torch::Tensor& labels, double margin) {
  if (features.dim() != 2 || labels.dim() != 1 || features.size(0) != labels.size(0))
    throw InputError("triplet_loss: features [B,d] and labels [B] disagree");
  auto y = labels.to(torch::kLong);
  auto same = y.unsqueeze(0) == y.unsqueeze(1);
  auto self = torch::eye(y.size(0), torch::kBool);
  auto positive = same & ~self;
  auto negative = ~same;
  if (!positive.any(1).all().item<bool>() || !negative.any(1).all().item<bool>())
    throw InputError("triplet_loss: every label needs a positive and a negative in the batch");

  // Pairwise differences instead of the |a|^2 + |b|^2 - 2ab expansion, so
  // distances are exactly translation invariant up to rounding.
  auto diff = features.unsqueeze(1) - features.unsqueeze(0);
  auto dist = diff.pow(2).sum(2).clamp_min(1e-12).sqrt();
  const double inf = std::numeric_limits<double>::infinity();
  auto d_pos = std::get<0>(dist.masked_fill(~positive, -inf).max(1));
  auto d_neg = std::get<0>(dist.masked_fill(~negative, inf).min(1));
  return torch::relu(d_pos - d_neg + margin).mean();
}

torch::Tensor i2tce_loss(const torch::Tensor& images, const torch::Tensor& descriptions,
                         const torch::Tensor& labels, double epsilon, const torch::Tensor& temperature) {
  if (descriptions.dim() != 2 || images.dim() != 2 || images.size(1) != descriptions.size(1))
    throw InputError("i2tce_loss: image and description widths differ");
  auto y = labels.to(torch::kLong);
  if (y.numel() > 0 && y.max().item<int64_t>() >= descriptions.size(0))
    throw InputError("i2tce_loss: descriptions must cover all " +
                     std::to_string(y.max().item<int64_t>() + 1) + "+ identities");
  return identity_loss(similarity_matrix(images, descriptions, temperature), y, epsilon);
}

LossFlags parse_loss_flags(const std::vector<std::string>& names) {
  LossFlags flags;
  for (const auto& n : names) {
    if (n == "id") flags.insert(LossTerm::id);
    else if (n == "tri") flags.insert(LossTerm::tri);
    else if (n == "i2tce") flags.insert(LossTerm::i2tce);
    else if (n == "i2t") flags.insert(LossTerm::i2t);
    else if (n == "t2i") flags.insert(LossTerm::t2i);
    else throw InputError("unknown loss term '" + n + "' (expected id, tri, i2tce, i2t, t2i)");
  }
  return flags;
}

std::vector<std::string> loss_flag_names(const LossFlags& flags) {
  static const char* names[] = {"id", "tri", "i2tce", "i2t", "t2i"};
  std::vector<std::string> out;
  for (auto f : flags) out.emplace_back(names[static_cast<int>(f)]);
  return out;
}

LossFlags default_loss_flags() { return {LossTerm::id, LossTerm::tri, LossTerm::i2tce}; }

Stage2Loss stage2_loss(const Stage2Inputs& in, const LossFlags& flags, double margin, double epsilon) {
  if (flags.empty()) throw InputError("stage-two loss needs at least one enabled term");
  Stage2Loss out;
  std::vector<torch::Tensor> terms;
  if (flags.count(LossTerm::id)) {
    if (!in.class_logits.defined()) throw InputError("identity loss needs classifier logits");
    out.id = identity_loss(in.class_logits, in.labels, epsilon);
    terms.push_back(out.id);
  }
  if (flags.count(LossTerm::tri)) {
    out.tri = triplet_loss(in.image_features, in.labels, margin);
    terms.push_back(out.tri);
  }
  if (flags.count(LossTerm::i2tce)) {
    out.i2tce = i2tce_loss(in.image_features, in.descriptions, in.labels, epsilon, in.temperature);
    terms.push_back(out.i2tce);
  }
  if (flags.count(LossTerm::i2t) || flags.count(LossTerm::t2i)) {
    // Batch-level contrastive terms: image i against the description of
    // each batch image's identity.
    auto batch_text = in.descriptions.index_select(0, in.labels.to(torch::kLong));
    auto s = similarity_matrix(in.image_features, batch_text, in.temperature);
    if (flags.count(LossTerm::i2t)) {
      out.i2t = i2t_loss(s);
      terms.push_back(out.i2t);
    }
    if (flags.count(LossTerm::t2i)) {
      out.t2i = t2i_loss(s);
      terms.push_back(out.t2i);
    }
  }
  out.total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = out.total + terms[i];
  return out;
}

}  // namespace indivaid
