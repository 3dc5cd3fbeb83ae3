#include "indivaid/sampler.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <random>

#include "indivaid/common.hpp"

namespace indivaid {

namespace {

int uniform_index(std::mt19937_64& rng, int n) {
  return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng));
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  // Fisher-Yates with our own index draw, so the order does not depend on
  // the standard library's shuffle implementation.
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
    std::swap(v[i], v[uniform_index(rng, i + 1)]);
}

// One group of K record indices drawn from `pool`: without replacement
// while the pool lasts, with replacement for the remainder.
std::vector<int> fresh_group(const std::vector<int>& pool, int k, std::mt19937_64& rng) {
  std::vector<int> shuffled = pool;
  shuffle(shuffled, rng);
  std::vector<int> group;
  for (int i = 0; i < k; ++i)
    group.push_back(i < static_cast<int>(shuffled.size()) ? shuffled[i]
                                                          : pool[uniform_index(rng, pool.size())]);
  return group;
}

}  // namespace

BatchPlan make_batches(const std::vector<ImageRecord>& records, int identities_per_batch,
                       int images_per_identity, std::uint64_t seed) {
  const int I = identities_per_batch, K = images_per_identity;
  if (I < 2 || K < 2)
    throw InputError("batch sampler needs I >= 2 and K >= 2: the triplet loss requires at least "
                     "one positive and one negative per anchor");

  std::map<int, std::vector<int>> by_identity;
  for (int i = 0; i < static_cast<int>(records.size()); ++i)
    by_identity[records[i].identity].push_back(i);
  if (static_cast<int>(by_identity.size()) < I)
    throw InputError("batch sampler needs at least " + std::to_string(I) + " identities, found " +
                     std::to_string(by_identity.size()));

  std::mt19937_64 rng(seed);
  std::vector<int> ids;
  std::map<int, std::deque<std::vector<int>>> groups;
  for (auto& [id, pool] : by_identity) {
    ids.push_back(id);
    std::vector<int> shuffled = pool;
    shuffle(shuffled, rng);
    const int n = static_cast<int>(shuffled.size());
    for (int start = 0; start < n; start += K) {
      std::vector<int> g;
      for (int j = start; j < start + K; ++j)
        g.push_back(j < n ? shuffled[j] : pool[uniform_index(rng, n)]);
      groups[id].push_back(std::move(g));
    }
  }

  BatchPlan plan{I, K, seed, {}};
  while (true) {
    std::vector<int> available;
    for (int id : ids)
      if (!groups[id].empty()) available.push_back(id);
    if (available.empty()) break;

    std::vector<int> chosen;
    if (static_cast<int>(available.size()) >= I) {
      shuffle(available, rng);
      chosen.assign(available.begin(), available.begin() + I);
    } else {
      // Tail: the last few identities are topped up with identities whose
      // groups are exhausted, drawing fresh groups for them.
      chosen = available;
      std::vector<int> others;
      for (int id : ids)
        if (groups[id].empty()) others.push_back(id);
      shuffle(others, rng);
      for (int j = 0; static_cast<int>(chosen.size()) < I; ++j) {
        chosen.push_back(others[j]);
        groups[others[j]].push_back(fresh_group(by_identity[others[j]], K, rng));
      }
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<int> batch;
    for (int id : chosen) {
      auto& g = groups[id].front();
      batch.insert(batch.end(), g.begin(), g.end());
      groups[id].pop_front();
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

nlohmann::json to_json(const BatchPlan& plan) {
  return {{"I", plan.identities_per_batch},
          {"K", plan.images_per_identity},
          {"seed", plan.seed},
          {"batches", plan.batches}};
}

BatchPlan batch_plan_from_json(const nlohmann::json& j) {
  BatchPlan p;
  p.identities_per_batch = j.at("I").get<int>();
  p.images_per_identity = j.at("K").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.batches = j.at("batches").get<std::vector<std::vector<int>>>();
  return p;
}

}  // namespace indivaid
