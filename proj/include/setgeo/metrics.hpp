#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "setgeo/retrieval.hpp"

namespace setgeo::metrics {

/// Metrics are functions of the 1-based rank of the single relevant
/// reference in each query set's ranking.
std::vector<std::size_t> ranks_of(const std::vector<retrieval::RankedResult>& results);

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k);

/// K used by R@1%: max(1, ceil(M / 100)).
std::size_t one_percent_k(std::size_t database_size);
double recall_at_1pct(std::span<const std::size_t> ranks, std::size_t database_size);

/// Mean reciprocal rank, which is average precision with one relevant item.
double ap_n(std::span<const std::size_t> ranks);

struct EvalReport {
  std::size_t set_size = 0;       // N
  std::size_t database_size = 0;  // M
  std::map<std::size_t, double> recall_at;
  std::size_t k_1pct = 0;
  double recall_at_1pct = 0.0;
  double ap = 0.0;
  std::size_t num_sets = 0;
};

inline const std::vector<std::size_t> kDefaultKs = {1, 5, 10};

EvalReport evaluate(std::span<const std::size_t> ranks, std::span<const std::size_t> ks,
                    std::size_t database_size, std::size_t set_size);
EvalReport evaluate(const std::vector<retrieval::RankedResult>& results,
                    std::span<const std::size_t> ks, std::size_t database_size,
                    std::size_t set_size);

std::string report_to_json(const EvalReport& report);
/// Aligned text table, one row, percentages with two decimals.
std::string report_to_table(const EvalReport& report);

}  // namespace setgeo::metrics
