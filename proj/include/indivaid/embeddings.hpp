#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace indivaid {

// One JSON header line {format, dim, count, dtype, checksum, paths}
// followed by count x dim little-endian float32 values. The checksum is
// FNV-1a 64 over the payload bytes.
struct EmbeddingFile {
  std::vector<std::string> paths;
  torch::Tensor features;  // [count, dim] float32
};

void write_embeddings(const std::filesystem::path& out, const EmbeddingFile& file);
EmbeddingFile read_embeddings(const std::filesystem::path& in);

}  // namespace indivaid
