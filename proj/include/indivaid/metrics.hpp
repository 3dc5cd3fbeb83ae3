#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace indivaid {

struct RankingResult {
  int query_index = 0;
  std::vector<int> ordered_gallery;  // descending similarity, ties by index
  std::vector<double> scores;        // aligned with ordered_gallery
};

// Cosine similarity of every query against every gallery vector, sorted per
// query. queries [Q,d], gallery [G,d].
std::vector<RankingResult> rank_gallery(const torch::Tensor& queries, const torch::Tensor& gallery);

// relevance is indexed by gallery index. nullopt when nothing is relevant
// (the query is excluded from mAP).
std::optional<double> average_precision(const RankingResult& ranking, const std::vector<bool>& relevance);

// Rank (1-based) of the first relevant item, nullopt when there is none.
std::optional<int> first_hit_rank(const RankingResult& ranking, const std::vector<bool>& relevance);

using RelevanceFn = std::function<std::vector<bool>(int query_index)>;

struct CmcResult {
  std::map<int, double> top_k;
  int evaluated = 0;
  int excluded = 0;
};

// Fraction of queries whose first relevant item is within the top k.
// Queries without any relevant item are skipped and counted.
CmcResult cmc_at_k(const std::vector<RankingResult>& rankings, const RelevanceFn& relevance,
                   const std::vector<int>& ks);

struct Interval {
  double mean = 0;
  double ci95 = 0;
};

struct MetricsReport {
  double mAP = 0;
  std::map<int, double> cmc;  // k in {1, 5, 10}
  std::vector<double> per_query_ap;
  std::vector<int> per_query_index;  // query index of each per_query_ap entry
  int n_query = 0;
  int n_gallery = 0;
  int excluded_queries = 0;
  // Filled by aggregate_runs.
  int n_runs = 1;
  Interval map_interval;
  std::map<int, Interval> cmc_interval;
  std::vector<double> run_maps;
};

inline const std::vector<int> kCmcRanks = {1, 5, 10};

// Ranks queries against the gallery and scores them; relevance is identity
// equality.
MetricsReport evaluate_retrieval(const torch::Tensor& queries, const std::vector<int>& query_ids,
                                 const torch::Tensor& gallery, const std::vector<int>& gallery_ids);

// Mean and 1.96 sd / sqrt(n) interval (sample sd) per metric. Needs >= 2.
MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports);

// {map, cmc: {"1","5","10"}, n_query, n_gallery, excluded_queries, runs}
nlohmann::json to_json(const MetricsReport& r);
std::string per_query_csv(const MetricsReport& r, const std::vector<std::string>& query_paths = {});

}  // namespace indivaid
