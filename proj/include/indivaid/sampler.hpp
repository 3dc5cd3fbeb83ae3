#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "indivaid/dataset.hpp"

namespace indivaid {

// One epoch of identity-balanced batches: each batch holds exactly
// `identities_per_batch` distinct identities with `images_per_identity`
// records each. Entries are indices into the record list given to
// make_batches.
struct BatchPlan {
  int identities_per_batch = 0;
  int images_per_identity = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> batches;

  bool operator==(const BatchPlan&) const = default;
};

// Identities with fewer than K images are completed by sampling with
// replacement. Every identity appears in at least one batch.
BatchPlan make_batches(const std::vector<ImageRecord>& records, int identities_per_batch,
                       int images_per_identity, std::uint64_t seed);

nlohmann::json to_json(const BatchPlan& plan);
BatchPlan batch_plan_from_json(const nlohmann::json& j);

}  // namespace indivaid
