#pragma once

#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "indivaid/dataset.hpp"
#include "indivaid/encoder.hpp"
#include "indivaid/image.hpp"
#include "indivaid/prompt.hpp"

namespace indivaid {

// Cached per-image description features, grouped by train identity.
// Immutable once built; vectors are stored L2-normalized.
class DescriptionBank {
 public:
  DescriptionBank() = default;
  // features: [total, embed_dim]; identities: [total]. Rows are grouped by
  // identity in ascending (identity, original row) order.
  DescriptionBank(const torch::Tensor& features, const std::vector<int>& identities, int num_identities);

  int num_identities() const { return static_cast<int>(offsets_.size()) - 1; }
  int64_t total() const { return features_.size(0); }
  int count(int identity) const { return static_cast<int>(offsets_[identity + 1] - offsets_[identity]); }
  torch::Tensor features_of(int identity) const;
  const torch::Tensor& features() const { return features_; }

  // Checkpoint form: {"features", "offsets"}.
  std::map<std::string, torch::Tensor> to_tensors() const;
  static DescriptionBank from_tensors(const std::map<std::string, torch::Tensor>& tensors);

 private:
  torch::Tensor features_;
  std::vector<int64_t> offsets_;
};

// Describes every train image once with the frozen generator and encoders.
// Image features come from the (frozen) image encoder without augmentation.
DescriptionBank build_description_bank(const std::vector<ImageRecord>& train_records, PromptGenerator& prompt,
                                       Encoder& encoder, ImageCache& images, int batch_size = 64);

// Single-head attention pooling over an unordered set of text features:
//   w_i = softmax_i((query + mean_j t_j) . (K t_i) / sqrt(d))
//   out = normalize(sum_i w_i V t_i)
// Starts as a uniform average (query = 0, K = V = identity).
class AttentionMergeImpl : public torch::nn::Module {
 public:
  AttentionMergeImpl(int embed_dim, torch::Dtype dtype);

  // features: nonempty [n, embed_dim] -> unit vector [embed_dim]. Rows are
  // put in a canonical (lexicographic) order first, so any permutation of
  // the input gives a bit-identical result.
  torch::Tensor merge(const torch::Tensor& features);

  // One merged description per identity, [N, embed_dim].
  torch::Tensor merged_descriptions(const DescriptionBank& bank);

  torch::Tensor query, key_map, value_map;
};
TORCH_MODULE(AttentionMerge);

// Row permutation sorting the rows of a 2-D tensor lexicographically.
std::vector<int64_t> canonical_row_order(const torch::Tensor& rows);

}  // namespace indivaid
