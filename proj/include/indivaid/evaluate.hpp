#pragma once

#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "indivaid/dataset.hpp"
#include "indivaid/encoder.hpp"
#include "indivaid/image.hpp"
#include "indivaid/metrics.hpp"

namespace indivaid {

// Unit-normalized image features [n, embed_dim] (float64) from the frozen
// image encoder; resize + normalize only.
torch::Tensor embed_images(Encoder& encoder, const std::vector<std::filesystem::path>& paths,
                           ImageCache& images, int batch_size = 64);

// Gallery/query retrieval with image features only.
MetricsReport evaluate(Encoder& encoder, const DatasetScan& scan, ImageCache& images);

}  // namespace indivaid
