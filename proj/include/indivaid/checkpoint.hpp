#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace indivaid {

using TensorMap = std::map<std::string, torch::Tensor>;

// Parameter-group blob: "IVADPG01", tensor count, then per tensor its name,
// dtype code, shape and raw little-endian contents. Deterministic: the
// same tensors always produce the same bytes.
void write_tensor_blob(const std::filesystem::path& path, const TensorMap& tensors);
TensorMap read_tensor_blob(const std::filesystem::path& path);

// Named parameters and buffers of a module.
TensorMap module_tensors(const torch::nn::Module& module);
// Copies tensors into a module's parameters/buffers by name; every
// parameter must be present with a matching shape.
void assign_module_tensors(torch::nn::Module& module, const TensorMap& tensors, const std::string& group);

std::uint64_t checksum(const TensorMap& tensors);

}  // namespace indivaid
