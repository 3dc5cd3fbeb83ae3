#include "indivaid/merge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "indivaid/common.hpp"

namespace indivaid {

DescriptionBank::DescriptionBank(const torch::Tensor& features, const std::vector<int>& identities,
                                 int num_identities) {
  if (features.dim() != 2 || features.size(0) != static_cast<int64_t>(identities.size()))
    throw InputError("description bank: features and identities disagree");
  std::vector<int64_t> order(identities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return identities[a] < identities[b]; });
  offsets_.assign(num_identities + 1, 0);
  for (int id : identities) {
    if (id < 0 || id >= num_identities) throw InputError("description bank: identity out of range");
    offsets_[id + 1]++;
  }
  for (int i = 0; i < num_identities; ++i) {
    if (offsets_[i + 1] == 0)
      throw InputError("description bank: identity " + std::to_string(i) + " has no images");
    offsets_[i + 1] += offsets_[i];
  }
  auto sorted = features.detach().index_select(0, torch::tensor(order, torch::kLong));
  features_ = (sorted / sorted.norm(2, 1, true)).contiguous();
}

torch::Tensor DescriptionBank::features_of(int identity) const {
  if (identity < 0 || identity >= num_identities()) throw InputError("identity out of range");
  return features_.slice(0, offsets_[identity], offsets_[identity + 1]);
}

std::map<std::string, torch::Tensor> DescriptionBank::to_tensors() const {
  return {{"features", features_}, {"offsets", torch::tensor(offsets_, torch::kLong)}};
}

DescriptionBank DescriptionBank::from_tensors(const std::map<std::string, torch::Tensor>& tensors) {
  if (!tensors.count("features") || !tensors.count("offsets"))
    throw InputError("description bank group needs features and offsets");
  DescriptionBank bank;
  bank.features_ = tensors.at("features").contiguous();
  auto off = tensors.at("offsets").to(torch::kLong).contiguous();
  bank.offsets_.assign(off.data_ptr<int64_t>(), off.data_ptr<int64_t>() + off.numel());
  if (bank.offsets_.size() < 2 || bank.offsets_.back() != bank.features_.size(0))
    throw InputError("description bank offsets do not match its features");
  return bank;
}

DescriptionBank build_description_bank(const std::vector<ImageRecord>& train_records, PromptGenerator& prompt,
                                       Encoder& encoder, ImageCache& images, int batch_size) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> chunks;
  std::vector<int> identities;
  for (std::size_t start = 0; start < train_records.size(); start += batch_size) {
    const std::size_t end = std::min(train_records.size(), start + batch_size);
    std::vector<torch::Tensor> batch;
    std::vector<int64_t> ids;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(normalize_pixels(images.get(train_records[i].path)));
      ids.push_back(train_records[i].identity);
      identities.push_back(train_records[i].identity);
    }
    auto feats = encoder.encode_image(torch::stack(batch), false);
    chunks.push_back(prompt->describe(encoder, feats, torch::tensor(ids, torch::kLong)));
  }
  if (chunks.empty()) throw InputError("description bank needs train images");
  return DescriptionBank(torch::cat(chunks, 0), identities, prompt->num_identities());
}

AttentionMergeImpl::AttentionMergeImpl(int embed_dim, torch::Dtype dtype) {
  auto opts = torch::TensorOptions().dtype(dtype);
  query = register_parameter("query", torch::zeros({embed_dim}, opts));
  key_map = register_parameter("key_map", torch::eye(embed_dim, opts));
  value_map = register_parameter("value_map", torch::eye(embed_dim, opts));
}

std::vector<int64_t> canonical_row_order(const torch::Tensor& rows) {
  auto r = rows.detach().to(torch::kFloat64).contiguous();
  const int64_t n = r.size(0), d = r.size(1);
  const double* p = r.data_ptr<double>();
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return std::lexicographical_compare(p + a * d, p + (a + 1) * d, p + b * d, p + (b + 1) * d);
  });
  return order;
}

torch::Tensor AttentionMergeImpl::merge(const torch::Tensor& features) {
  if (features.dim() != 2 || features.size(0) == 0) throw InputError("merge needs a nonempty feature list");
  if (features.size(1) != query.size(0))
    throw InputError("merge: feature width " + std::to_string(features.size(1)) + " != " +
                     std::to_string(query.size(0)));
  auto t = features.index_select(0, torch::tensor(canonical_row_order(features), torch::kLong));
  const double scale = 1.0 / std::sqrt(static_cast<double>(t.size(1)));
  auto q = query + t.mean(0);
  auto keys = t.matmul(key_map.t());
  auto weights = torch::softmax(keys.matmul(q) * scale, 0);
  auto pooled = weights.matmul(t.matmul(value_map.t()));
  return pooled / pooled.norm();
}

torch::Tensor AttentionMergeImpl::merged_descriptions(const DescriptionBank& bank) {
  std::vector<torch::Tensor> out;
  for (int i = 0; i < bank.num_identities(); ++i) out.push_back(merge(bank.features_of(i)));
  return torch::stack(out);
}

}  // namespace indivaid
