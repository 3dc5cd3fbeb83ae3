#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <torch/torch.h>

namespace indivaid {

// Bad user input: malformed dataset trees, invalid configs, precondition
// violations on public operations. Maps to exit status 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while computing (non-finite loss, unreadable checkpoint blob).
// Maps to exit status 1.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void warn(std::string_view message);

// FNV-1a, 64 bit. Used for parameter checksums and config hashes.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Checksum over the raw contents of a tensor (contiguous copy, native byte
// order). Shape and dtype are folded in so that reshapes are detected.
std::uint64_t tensor_checksum(const torch::Tensor& t,
                              std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

// Mixes several integers into one 64-bit seed (splitmix64 chain).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace indivaid

namespace indivaid {

// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

}  // namespace indivaid
