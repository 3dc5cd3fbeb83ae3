#pragma once

#include <random>

#include <torch/torch.h>

namespace indivaid {

struct AugmentConfig {
  double flip_prob = 0.5;
  int pad = 10;
  double erase_prob = 0.5;
  double erase_area_min = 0.02;
  double erase_area_max = 0.4;
  double erase_aspect_min = 0.3;
};

// Stage-Two training augmentation on an RGB [3,H,W] image in [0,1]:
// horizontal flip, reflect pad, random crop back to H x W, random erasing
// (filled with the channel pixel mean). Output shape equals input shape.
torch::Tensor augment(const torch::Tensor& image, const AugmentConfig& config,
                      std::mt19937_64& rng);

}  // namespace indivaid
