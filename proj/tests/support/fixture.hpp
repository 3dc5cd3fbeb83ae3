#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "indivaid/config.hpp"

namespace fixture {

// Synthetic identity-coded dataset. Each identity owns a stack of coloured
// horizontal stripes; every image adds a random colour cast, brightness
// change, pixel noise and a small shift on top.
struct Spec {
  int train_ids = 8;
  int test_ids = 8;  // ignored when closed_set
  int train_per_id = 8;
  int gallery_per_id = 2;
  int query_per_id = 2;
  // Gallery/query reuse the train identities (held-out images).
  bool closed_set = true;
  int size = 32;
  int stripes = 8;
  double stripe_amplitude = 0.18;
  double cast_amplitude = 0.25;
  double noise = 0.04;
  int max_shift = 1;
  std::uint64_t seed = 7;
};

struct Truth {
  int train_images = 0;
  int gallery_images = 0;
  int query_images = 0;
  int train_identities = 0;
  int test_identities = 0;
};

Truth generate(const std::filesystem::path& root, const Spec& spec);

// The acceptance-scale fixture: 8 identities x 12 images.
Spec overfit_spec();

// Toy-backend training settings sized for the overfit fixture: 32 px
// images, embed_dim 32, learning rates scaled up for the small model.
indivaid::TrainConfig overfit_config();

// Fresh directory under the system temp dir, removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
