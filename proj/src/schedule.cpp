#include "indivaid/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "indivaid/common.hpp"

namespace indivaid {

double lr_stage1(long step, long total_steps, double base) {
  if (total_steps <= 0) throw InputError("cosine schedule needs total_steps > 0");
  if (step < 0 || step > total_steps)
    throw InputError("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
}

double lr_stage2(int epoch, const Stage2Schedule& s) {
  if (epoch < 0) throw InputError("epoch must be non-negative");
  if (epoch <= s.warmup_epochs) {
    if (s.warmup_epochs == 0) return s.peak;
    return s.start + (s.peak - s.start) * static_cast<double>(epoch) / s.warmup_epochs;
  }
  double lr = s.peak;
  for (int d : s.decay_epochs)
    if (epoch >= d) lr *= s.decay_factor;
  return lr;
}

}  // namespace indivaid
