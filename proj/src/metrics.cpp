#include "indivaid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "indivaid/common.hpp"

namespace indivaid {

std::vector<RankingResult> rank_gallery(const torch::Tensor& queries, const torch::Tensor& gallery) {
  if (gallery.dim() != 2 || gallery.size(0) == 0) throw InputError("rank_gallery: empty gallery");
  if (queries.dim() != 2 || queries.size(1) != gallery.size(1))
    throw InputError("rank_gallery: query and gallery feature widths differ");
  torch::NoGradGuard no_grad;
  auto q = queries.to(torch::kFloat64);
  auto g = gallery.to(torch::kFloat64);
  q = q / q.norm(2, 1, true);
  g = g / g.norm(2, 1, true);
  auto sim = q.matmul(g.t()).contiguous();
  const int nq = static_cast<int>(sim.size(0)), ng = static_cast<int>(sim.size(1));
  const double* s = sim.data_ptr<double>();

  std::vector<RankingResult> out(nq);
  for (int i = 0; i < nq; ++i) {
    auto& r = out[i];
    r.query_index = i;
    r.ordered_gallery.resize(ng);
    std::iota(r.ordered_gallery.begin(), r.ordered_gallery.end(), 0);
    const double* row = s + static_cast<std::ptrdiff_t>(i) * ng;
    std::stable_sort(r.ordered_gallery.begin(), r.ordered_gallery.end(),
                     [row](int a, int b) { return row[a] > row[b]; });
    r.scores.reserve(ng);
    for (int gi : r.ordered_gallery) r.scores.push_back(row[gi]);
  }
  return out;
}

std::optional<double> average_precision(const RankingResult& ranking, const std::vector<bool>& relevance) {
  if (relevance.size() != ranking.ordered_gallery.size())
    throw InputError("average_precision: relevance list does not cover the gallery");
  double sum = 0.0;
  int hits = 0;
  for (std::size_t r = 0; r < ranking.ordered_gallery.size(); ++r) {
    if (relevance[ranking.ordered_gallery[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / hits;
}

std::optional<int> first_hit_rank(const RankingResult& ranking, const std::vector<bool>& relevance) {
  for (std::size_t r = 0; r < ranking.ordered_gallery.size(); ++r)
    if (relevance.at(ranking.ordered_gallery[r])) return static_cast<int>(r) + 1;
  return std::nullopt;
}

CmcResult cmc_at_k(const std::vector<RankingResult>& rankings, const RelevanceFn& relevance,
                   const std::vector<int>& ks) {
  CmcResult out;
  std::map<int, int> counts;
  for (int k : ks) {
    if (k < 1) throw InputError("cmc rank k must be positive");
    counts[k] = 0;
  }
  for (const auto& r : rankings) {
    auto hit = first_hit_rank(r, relevance(r.query_index));
    if (!hit) {
      ++out.excluded;
      continue;
    }
    ++out.evaluated;
    for (auto& [k, c] : counts)
      if (*hit <= k) ++c;
  }
  for (const auto& [k, c] : counts)
    out.top_k[k] = out.evaluated == 0 ? 0.0 : static_cast<double>(c) / out.evaluated;
  return out;
}

MetricsReport evaluate_retrieval(const torch::Tensor& queries, const std::vector<int>& query_ids,
                                 const torch::Tensor& gallery, const std::vector<int>& gallery_ids) {
  if (static_cast<int64_t>(query_ids.size()) != queries.size(0) ||
      static_cast<int64_t>(gallery_ids.size()) != gallery.size(0))
    throw InputError("evaluate_retrieval: identity lists do not match the features");
  auto rankings = rank_gallery(queries, gallery);
  auto relevance = [&](int qi) {
    std::vector<bool> rel(gallery_ids.size());
    for (std::size_t g = 0; g < gallery_ids.size(); ++g) rel[g] = gallery_ids[g] == query_ids[qi];
    return rel;
  };

  MetricsReport report;
  report.n_query = static_cast<int>(query_ids.size());
  report.n_gallery = static_cast<int>(gallery_ids.size());
  for (const auto& r : rankings) {
    if (auto ap = average_precision(r, relevance(r.query_index))) {
      report.per_query_ap.push_back(*ap);
      report.per_query_index.push_back(r.query_index);
    }
  }
  report.excluded_queries = report.n_query - static_cast<int>(report.per_query_ap.size());
  if (report.excluded_queries > 0)
    warn(std::to_string(report.excluded_queries) + " queries have no gallery match and were excluded");
  if (!report.per_query_ap.empty())
    report.mAP = std::accumulate(report.per_query_ap.begin(), report.per_query_ap.end(), 0.0) /
                 static_cast<double>(report.per_query_ap.size());
  report.cmc = cmc_at_k(rankings, relevance, kCmcRanks).top_k;
  report.map_interval = {report.mAP, 0.0};
  for (const auto& [k, v] : report.cmc) report.cmc_interval[k] = {v, 0.0};
  report.run_maps = {report.mAP};
  return report;
}

namespace {

Interval interval(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

}  // namespace

MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports) {
  if (reports.size() < 2) throw InputError("aggregate_runs needs at least two runs");
  MetricsReport out;
  std::vector<double> maps;
  std::map<int, std::vector<double>> cmcs;
  for (const auto& r : reports) {
    maps.push_back(r.mAP);
    for (const auto& [k, v] : r.cmc) cmcs[k].push_back(v);
  }
  // Order-independent: sort before summing.
  std::sort(maps.begin(), maps.end());
  out.map_interval = interval(maps);
  out.mAP = out.map_interval.mean;
  for (auto& [k, vs] : cmcs) {
    std::sort(vs.begin(), vs.end());
    out.cmc_interval[k] = interval(vs);
    out.cmc[k] = out.cmc_interval[k].mean;
  }
  out.n_runs = static_cast<int>(reports.size());
  out.n_query = reports.front().n_query;
  out.n_gallery = reports.front().n_gallery;
  out.excluded_queries = reports.front().excluded_queries;
  for (const auto& r : reports) out.run_maps.push_back(r.mAP);
  return out;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json cmc = nlohmann::json::object(), cmc_ci = nlohmann::json::object();
  for (const auto& [k, v] : r.cmc) cmc[std::to_string(k)] = v;
  for (const auto& [k, v] : r.cmc_interval) cmc_ci[std::to_string(k)] = v.ci95;
  return {{"map", r.mAP},
          {"cmc", cmc},
          {"n_query", r.n_query},
          {"n_gallery", r.n_gallery},
          {"excluded_queries", r.excluded_queries},
          {"runs",
           {{"n", r.n_runs}, {"map_ci95", r.map_interval.ci95}, {"cmc_ci95", cmc_ci}, {"map_per_run", r.run_maps}}}};
}

std::string per_query_csv(const MetricsReport& r, const std::vector<std::string>& query_paths) {
  std::ostringstream out;
  out.precision(17);
  out << "query_index,path,ap\n";
  for (std::size_t i = 0; i < r.per_query_ap.size(); ++i) {
    const int qi = r.per_query_index[i];
    out << qi << ',' << (qi < static_cast<int>(query_paths.size()) ? csv_escape(query_paths[qi]) : "") << ','
        << r.per_query_ap[i] << '\n';
  }
  return out.str();
}

}  // namespace indivaid
