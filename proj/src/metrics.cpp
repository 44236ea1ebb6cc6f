#include "setgeo/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "setgeo/error.hpp"

namespace setgeo::metrics {
namespace {

void check_ranks(std::span<const std::size_t> ranks) {
  require(!ranks.empty(), ErrorCode::kArgument, "no retrieval results to evaluate");
  for (std::size_t r : ranks) {
    require(r >= 1, ErrorCode::kArgument, "result is missing its ground-truth rank");
  }
}

}  // namespace

std::vector<std::size_t> ranks_of(const std::vector<retrieval::RankedResult>& results) {
  std::vector<std::size_t> ranks;
  ranks.reserve(results.size());
  for (const auto& r : results) ranks.push_back(r.rank_of_truth);
  return ranks;
}

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_ranks(ranks);
  require(k >= 1, ErrorCode::kArgument, "K must be >= 1");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [&](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::size_t one_percent_k(std::size_t database_size) {
  require(database_size >= 1, ErrorCode::kArgument, "database size must be >= 1");
  // Integer ceil(M / 100) avoids the float rounding of ceil(0.01 * M).
  return std::max<std::size_t>(1, (database_size + 99) / 100);
}

double recall_at_1pct(std::span<const std::size_t> ranks, std::size_t database_size) {
  return recall_at_k(ranks, one_percent_k(database_size));
}

double ap_n(std::span<const std::size_t> ranks) {
  check_ranks(ranks);
  // Summing in rank order makes the result independent of input order.
  std::vector<std::size_t> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t r : sorted) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

EvalReport evaluate(std::span<const std::size_t> ranks, std::span<const std::size_t> ks,
                    std::size_t database_size, std::size_t set_size) {
  check_ranks(ranks);
  for (std::size_t r : ranks) {
    require(r <= database_size, ErrorCode::kArgument,
            "rank " + std::to_string(r) + " exceeds database size " +
                std::to_string(database_size));
  }
  EvalReport report;
  report.set_size = set_size;
  report.database_size = database_size;
  report.num_sets = ranks.size();
  for (std::size_t k : ks) report.recall_at[k] = recall_at_k(ranks, k);
  report.k_1pct = one_percent_k(database_size);
  report.recall_at_1pct = recall_at_k(ranks, report.k_1pct);
  report.ap = ap_n(ranks);
  return report;
}

EvalReport evaluate(const std::vector<retrieval::RankedResult>& results,
                    std::span<const std::size_t> ks, std::size_t database_size,
                    std::size_t set_size) {
  const auto ranks = ranks_of(results);
  return evaluate(std::span<const std::size_t>(ranks), ks, database_size, set_size);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["N"] = report.set_size;
  j["M"] = report.database_size;
  j["num_sets"] = report.num_sets;
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  j["recall_at"] = recall;
  j["k_1pct"] = report.k_1pct;
  j["recall_at_1pct"] = report.recall_at_1pct;
  j["ap_n"] = report.ap;
  return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
  std::string header, row;
  char cell[64];
  auto column = [&](const std::string& name, double value) {
    const int width = std::max<int>(8, static_cast<int>(name.size()) + 2);
    std::snprintf(cell, sizeof cell, "%*s", width, name.c_str());
    header += cell;
    std::snprintf(cell, sizeof cell, "%*.2f", width, 100.0 * value);
    row += cell;
  };
  const std::string n = std::to_string(report.set_size);
  for (const auto& [k, v] : report.recall_at) column("R@" + std::to_string(k) + "-" + n, v);
  column("R@1%-" + n, report.recall_at_1pct);
  column("AP-" + n, report.ap);
  char meta[128];
  std::snprintf(meta, sizeof meta, "sets=%zu  M=%zu  K(1%%)=%zu\n", report.num_sets,
                report.database_size, report.k_1pct);
  return header + "\n" + row + "\n" + meta;
}

}  // namespace setgeo::metrics
