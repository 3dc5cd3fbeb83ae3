#include "indivaid/augment.hpp"

#include <cmath>

#include "indivaid/image.hpp"

namespace indivaid {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

torch::Tensor augment(const torch::Tensor& image, const AugmentConfig& config,
                      std::mt19937_64& rng) {
  TORCH_CHECK(image.dim() == 3 && image.size(0) == 3, "augment expects [3,H,W]");
  const int64_t h = image.size(1), w = image.size(2);
  torch::Tensor out = image;

  if (uniform(rng, 0.0, 1.0) < config.flip_prob) out = out.flip({2});

  if (config.pad > 0) {
    namespace F = torch::nn::functional;
    auto padded = F::pad(out.unsqueeze(0),
                         F::PadFuncOptions({config.pad, config.pad, config.pad, config.pad})
                             .mode(torch::kReflect))
                      .squeeze(0);
    const int top = uniform_int(rng, 0, 2 * config.pad);
    const int left = uniform_int(rng, 0, 2 * config.pad);
    out = padded.slice(1, top, top + h).slice(2, left, left + w);
  }
  out = out.contiguous().clone();

  if (uniform(rng, 0.0, 1.0) < config.erase_prob) {
    // Rejection sampling for a rectangle that fits, as in the usual
    // random-erasing recipe; gives up silently after 100 tries.
    const double area = static_cast<double>(h * w);
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double target = uniform(rng, config.erase_area_min, config.erase_area_max) * area;
      const double aspect = std::exp(uniform(rng, std::log(config.erase_aspect_min),
                                             std::log(1.0 / config.erase_aspect_min)));
      const int eh = static_cast<int>(std::round(std::sqrt(target * aspect)));
      const int ew = static_cast<int>(std::round(std::sqrt(target / aspect)));
      if (eh >= 1 && ew >= 1 && eh < h && ew < w) {
        const int y = uniform_int(rng, 0, static_cast<int>(h) - eh);
        const int x = uniform_int(rng, 0, static_cast<int>(w) - ew);
        for (int c = 0; c < 3; ++c)
          out[c].slice(0, y, y + eh).slice(1, x, x + ew).fill_(kPixelMean[c]);
        break;
      }
    }
  }
  return out;
}

}  // namespace indivaid
