#include "indivaid/common.hpp"

#include <cstdio>
#include <iostream>

namespace indivaid {

void warn(std::string_view message) {
  std::cerr << "warning: " << message << '\n';
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed) {
  return fnv1a64(std::as_bytes(std::span(text.data(), text.size())), seed);
}

std::uint64_t tensor_checksum(const torch::Tensor& t, std::uint64_t seed) {
  torch::Tensor c = t.detach().contiguous().cpu();
  std::uint64_t h = seed;
  std::string header = std::string(c.dtype().name());
  for (auto s : c.sizes()) header += ":" + std::to_string(s);
  h = fnv1a64(std::as_bytes(std::span(header.data(), header.size())), h);
  auto* data = static_cast<const std::byte*>(c.data_ptr());
  return fnv1a64(std::span(data, c.nbytes()), h);
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace indivaid

namespace indivaid {

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace indivaid
