#pragma once

#include <vector>

namespace indivaid {

// Cosine decay from `base` at step 0 to 0 at `total_steps`.
double lr_stage1(long step, long total_steps, double base);

struct Stage2Schedule {
  double start = 5e-7;
  double peak = 5e-6;
  int warmup_epochs = 10;
  double decay_factor = 0.1;
  std::vector<int> decay_epochs = {40, 70};
};

// Linear warmup from start to peak over warmup_epochs, then multiplied by
// decay_factor once for every decay epoch already reached.
double lr_stage2(int epoch, const Stage2Schedule& schedule);

}  // namespace indivaid
