#pragma once

#include <set>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "indivaid/encoder.hpp"

namespace indivaid {

// (v . t) / (|v| |t|). Throws InputError on length mismatch or zero norm.
double cosine_sim(const FeatureVector& v, const FeatureVector& t);

// temperature * cos(images_i, texts_j), [B_img, B_txt].
torch::Tensor similarity_matrix(const torch::Tensor& images, const torch::Tensor& texts,
                                const torch::Tensor& temperature);

// Mean over rows of -log softmax(S_i.)_i. S must be square.
torch::Tensor i2t_loss(const torch::Tensor& similarity);
// Same with the softmax taken down each column.
torch::Tensor t2i_loss(const torch::Tensor& similarity);
torch::Tensor stage1_loss(const torch::Tensor& similarity);

struct SmoothedTargets {
  torch::Tensor q;  // [N], float64
  double epsilon = 0.0;
  int true_class = 0;
};

// q_k = (1 - eps) [k == y] + eps / N.
SmoothedTargets smoothed_targets(int y, int num_classes, double epsilon);

// Label-smoothed cross-entropy, sum_k -q_k log softmax(z)_k, averaged over
// the batch. logits: [N] or [B,N]; labels: [B] (long) or a single class.
torch::Tensor identity_loss(const torch::Tensor& logits, const torch::Tensor& labels, double epsilon);

// Per-anchor hinge [d_p - d_n + margin]_+.
double triplet_hinge(double d_pos, double d_neg, double margin);

// Batch-hard triplet loss on Euclidean distances between unnormalized
// features [B,d]: per anchor, the farthest positive and the nearest
// negative. Every label needs another occurrence and a different label.
torch::Tensor triplet_loss(const torch::Tensor& features, const torch::Tensor& labels, double margin);

// Identity loss over logits temperature * cos(V_i, T_k) against all N
// merged descriptions.
torch::Tensor i2tce_loss(const torch::Tensor& images, const torch::Tensor& descriptions,
                         const torch::Tensor& labels, double epsilon, const torch::Tensor& temperature);

enum class LossTerm { id, tri, i2tce, i2t, t2i };

using LossFlags = std::set<LossTerm>;

LossFlags parse_loss_flags(const std::vector<std::string>& names);
std::vector<std::string> loss_flag_names(const LossFlags& flags);
LossFlags default_loss_flags();

struct Stage2Inputs {
  torch::Tensor image_features;  // [B,d], unnormalized
  torch::Tensor labels;          // [B], long
  torch::Tensor descriptions;    // [N,d], one per train identity
  torch::Tensor class_logits;    // [B,N]; required when id is enabled
  torch::Tensor temperature;     // scalar
};

struct Stage2Loss {
  torch::Tensor total;
  // Terms that were computed (disabled ones stay undefined).
  torch::Tensor id, tri, i2tce, i2t, t2i;
};

Stage2Loss stage2_loss(const Stage2Inputs& in, const LossFlags& flags, double margin, double epsilon);

}  // namespace indivaid
