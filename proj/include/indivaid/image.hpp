#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <mutex>

#include <torch/torch.h>

namespace indivaid {

// Channel statistics of the vision-language backbone's pretraining data.
inline constexpr std::array<double, 3> kPixelMean = {0.48145466, 0.4578275, 0.40821073};
inline constexpr std::array<double, 3> kPixelStd = {0.26862954, 0.26130258, 0.27577711};

// Decodes an image file into an RGB float tensor [3, size, size] in [0, 1]
// (bilinear resize). Throws InputError when the file cannot be decoded.
torch::Tensor load_image(const std::filesystem::path& path, int size);

// (x - mean) / std per channel. Accepts [3,H,W] or [B,3,H,W].
torch::Tensor normalize_pixels(const torch::Tensor& image);

// Writes an RGB [3,H,W] tensor in [0,1] to disk (8 bit).
void save_image(const std::filesystem::path& path, const torch::Tensor& image);

// Decoded-image cache keyed by path; images are stored as float32.
class ImageCache {
 public:
  explicit ImageCache(int size) : size_(size) {}
  torch::Tensor get(const std::filesystem::path& path);
  int size() const { return size_; }

 private:
  int size_;
  std::mutex mutex_;
  std::map<std::filesystem::path, torch::Tensor> images_;
};

}  // namespace indivaid
