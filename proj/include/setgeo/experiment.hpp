#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "setgeo/datamodel.hpp"
#include "setgeo/fusion.hpp"
#include "setgeo/metrics.hpp"
#include "setgeo/retrieval.hpp"

namespace setgeo::experiment {

/// Scene selection shared by the pipeline steps.
struct SceneFilter {
  data::Split split = data::Split::kUnassigned;  // kUnassigned selects all scenes
  std::size_t min_queries = 0;
};

std::vector<std::int64_t> select_scenes(const data::Manifest& manifest, const SceneFilter& filter);

/// Index over the satellite features of the selected scenes, keyed by scene id.
retrieval::ReferenceIndex satellite_index(const data::Dataset& dataset,
                                          const std::vector<std::int64_t>& scenes);

/// Replaces members 1..floor(N/2) of a set by copies of member 0.
data::QuerySet make_redundant(const data::QuerySet& set);

/// Standardized sets gathered into fusion inputs.
std::vector<fusion::FeatureSet> build_sets(const data::Dataset& dataset,
                                           const std::vector<std::int64_t>& scenes,
                                           std::size_t set_size, std::uint64_t seed,
                                           bool redundant);

/// Fused query store; row ids are "<scene_id>:<set index>".
data::FeatureStore fuse_to_store(const std::vector<fusion::FeatureSet>& sets,
                                 fusion::Fuser fuser, double scale);

/// Recovers the scene id from a fused-query id.
std::int64_t scene_of_query_id(const std::string& id);

std::vector<retrieval::RankedResult> retrieve_store(const data::FeatureStore& queries,
                                                    const retrieval::ReferenceIndex& index,
                                                    std::size_t k, std::size_t threads = 1);

struct SweepOptions {
  std::vector<std::size_t> set_sizes = {1, 2, 4, 8, 16, 40};
  // One scale runs SFF against average pooling; several scales run the SFF
  // scale ablation with one row per scale.
  std::vector<double> scales = {2.0};
  std::vector<std::size_t> ks = {1, 5, 10};
  bool redundant = false;
  data::Split split = data::Split::kUnassigned;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct SweepRow {
  std::size_t set_size = 0;
  // "sff" and "avg" for the fuser comparison, "sff:scale=<s>" for the scale
  // ablation.
  std::string fuser;
  double scale = 0.0;
  metrics::EvalReport report;
};

/// Filters scenes with at least max(N) queries, then for each N builds
/// standardized sets, fuses, retrieves and evaluates.
std::vector<SweepRow> n_sweep(const data::Dataset& dataset, const SweepOptions& options);

/// Columns: N,fuser,R@<k> for each k,R@1pct,AP.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace setgeo::experiment
