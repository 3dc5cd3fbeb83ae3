#include "support/fixture.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include <torch/torch.h>

#include "indivaid/image.hpp"

namespace fs = std::filesystem;

namespace fixture {

namespace {

using Pattern = std::vector<std::array<double, 3>>;

// Stripe colours are +-amplitude per channel. Codes closer than a quarter
// of their length (Hamming) to an earlier identity are redrawn.
Pattern make_pattern(const Spec& s, std::mt19937_64& rng, const std::vector<Pattern>& taken) {
  std::bernoulli_distribution coin(0.5);
  const int min_distance = s.stripes * 3 / 4;
  for (;;) {
    Pattern p(s.stripes);
    for (auto& row : p)
      for (auto& c : row) c = coin(rng) ? s.stripe_amplitude : -s.stripe_amplitude;
    bool ok = true;
    for (const auto& q : taken) {
      int d = 0;
      for (int r = 0; r < s.stripes; ++r)
        for (int c = 0; c < 3; ++c) d += (p[r][c] != q[r][c]);
      ok = ok && d >= min_distance;
    }
    if (ok) return p;
  }
}

void write_image(const fs::path& path, const Spec& s, const Pattern& pattern, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, s.noise);
  std::uniform_int_distribution<int> shift(-s.max_shift, s.max_shift);
  const std::array<double, 3> cast = {s.cast_amplitude * u(rng), s.cast_amplitude * u(rng),
                                      s.cast_amplitude * u(rng)};
  const double gain = 1.0 + 0.3 * u(rng);
  const int dy = shift(rng);
  const int dx = shift(rng);
  auto img = torch::empty({3, s.size, s.size}, torch::kFloat32);
  auto a = img.accessor<float, 3>();
  const int band = s.size / s.stripes;
  for (int y = 0; y < s.size; ++y) {
    const int row = std::clamp((y + dy) / band, 0, s.stripes - 1);
    for (int x = 0; x < s.size; ++x) {
      // A faint vertical ramp that moves with dx, unrelated to identity.
      const double ramp = 0.05 * std::sin(0.4 * (x + dx));
      for (int c = 0; c < 3; ++c) {
        const double v = 0.5 + gain * pattern[row][c] + cast[c] + ramp + n(rng);
        a[c][y][x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  indivaid::save_image(path, img);
}

}  // namespace

Spec overfit_spec() { return Spec{}; }

indivaid::TrainConfig overfit_config() {
  indivaid::TrainConfig c;
  c.encoder = indivaid::toy_config(32, 0);
  c.encoder.image_size = 32;
  c.encoder.patch_size = 4;
  c.epochs = 20;
  c.stage1_lr = 0.01;
  c.stage1_batch_size = 16;
  c.stage2_lr_start = 2e-4;
  c.stage2_lr_peak = 2e-3;
  c.warmup_epochs = 3;
  c.decay_epochs = {15, 22};
  c.I = 8;
  c.K = 2;
  return c;
}

Truth generate(const fs::path& root, const Spec& s) {
  std::mt19937_64 rng(s.seed);
  Truth t;
  std::vector<Pattern> train_patterns, test_patterns;
  for (int i = 0; i < s.train_ids; ++i) train_patterns.push_back(make_pattern(s, rng, train_patterns));
  if (s.closed_set) {
    test_patterns = train_patterns;
  } else {
    std::vector<Pattern> taken = train_patterns;
    for (int i = 0; i < s.test_ids; ++i) {
      test_patterns.push_back(make_pattern(s, rng, taken));
      taken.push_back(test_patterns.back());
    }
  }
  auto emit = [&](const std::string& split, const std::string& prefix, const std::vector<Pattern>& patterns,
                  int per_id, int& counter) {
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s%03zu", prefix.c_str(), i);
      const fs::path dir = root / split / id;
      fs::create_directories(dir);
      for (int k = 0; k < per_id; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "%s_%02d.png", split.c_str(), k);
        write_image(dir / name, s, patterns[i], rng);
        ++counter;
      }
    }
  };
  emit("train", "ind", train_patterns, s.train_per_id, t.train_images);
  const std::string test_prefix = s.closed_set ? "ind" : "new";
  emit("gallery", test_prefix, test_patterns, s.gallery_per_id, t.gallery_images);
  emit("query", test_prefix, test_patterns, s.query_per_id, t.query_images);
  t.train_identities = s.train_ids;
  t.test_identities = static_cast<int>(test_patterns.size());
  return t;
}

TempDir::TempDir(const std::string& tag) {
  static std::random_device rd;
  path_ = fs::temp_directory_path() / ("indivaid_" + tag + "_" + std::to_string(rd()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace fixture
