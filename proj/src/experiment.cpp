#include "setgeo/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "setgeo/error.hpp"

namespace setgeo::experiment {

std::vector<std::int64_t> select_scenes(const data::Manifest& manifest, const SceneFilter& filter) {
  std::map<std::int64_t, std::size_t> queries;
  std::map<std::int64_t, data::Split> splits;
  for (const auto& r : manifest.records) {
    if (r.role == data::Role::kSatellite) {
      splits[r.scene_id] = r.split;
      queries[r.scene_id];
    } else {
      ++queries[r.scene_id];
    }
  }
  std::vector<std::int64_t> out;
  for (const auto& [scene, split] : splits) {
    if (filter.split != data::Split::kUnassigned && split != filter.split) continue;
    if (queries[scene] < filter.min_queries) continue;
    out.push_back(scene);
  }
  return out;
}

retrieval::ReferenceIndex satellite_index(const data::Dataset& dataset,
                                          const std::vector<std::int64_t>& scenes) {
  require(!scenes.empty(), ErrorCode::kArgument, "no scenes selected for the reference index");
  std::map<std::int64_t, std::size_t> record_of_scene;
  for (std::size_t i = 0; i < dataset.manifest.records.size(); ++i) {
    const auto& r = dataset.manifest.records[i];
    if (r.role == data::Role::kSatellite) record_of_scene[r.scene_id] = i;
  }
  Matrix features;
  for (std::int64_t scene : scenes) {
    const auto it = record_of_scene.find(scene);
    require(it != record_of_scene.end(), ErrorCode::kData,
            "scene " + std::to_string(scene) + " has no satellite record");
    features.push_row(dataset.satellite.row_as_double(dataset.row_of_record[it->second]));
  }
  return retrieval::ReferenceIndex::build(features, scenes);
}

data::QuerySet make_redundant(const data::QuerySet& set) {
  data::QuerySet out = set;
  const std::size_t dup = out.members.size() / 2;
  for (std::size_t i = 1; i <= dup; ++i) out.members[i] = out.members[0];
  return out;
}

std::vector<fusion::FeatureSet> build_sets(const data::Dataset& dataset,
                                           const std::vector<std::int64_t>& scenes,
                                           std::size_t set_size, std::uint64_t seed,
                                           bool redundant) {
  const auto standardized = data::standardized_sets(
      dataset.manifest, set_size, seed, std::span<const std::int64_t>(scenes));
  std::vector<fusion::FeatureSet> sets;
  sets.reserve(standardized.sets.size());
  for (const auto& qs : standardized.sets) {
    const data::QuerySet used = redundant ? make_redundant(qs) : qs;
    sets.push_back({data::gather(dataset, used), qs.scene_id});
  }
  return sets;
}

data::FeatureStore fuse_to_store(const std::vector<fusion::FeatureSet>& sets,
                                 fusion::Fuser fuser, double scale) {
  data::FeatureStore store;
  std::map<std::int64_t, std::size_t> per_scene;
  for (const auto& set : sets) {
    const std::size_t idx = per_scene[set.scene_id]++;
    store.append(std::to_string(set.scene_id) + ":" + std::to_string(idx),
                 fusion::fuse(set.features, fuser, scale));
  }
  return store;
}

std::int64_t scene_of_query_id(const std::string& id) {
  const auto colon = id.find(':');
  try {
    std::size_t used = 0;
    const std::string head = id.substr(0, colon);
    const long long v = std::stoll(head, &used);
    if (used == head.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kData, "query id '" + id + "' does not start with a scene id");
}

std::vector<retrieval::RankedResult> retrieve_store(const data::FeatureStore& queries,
                                                    const retrieval::ReferenceIndex& index,
                                                    std::size_t k, std::size_t threads) {
  Matrix q;
  std::vector<std::int64_t> truths;
  for (std::size_t i = 0; i < queries.count(); ++i) {
    q.push_row(queries.row_as_double(i));
    truths.push_back(scene_of_query_id(queries.ids[i]));
  }
  require(queries.count() > 0, ErrorCode::kArgument, "query store is empty");
  return retrieval::retrieve_all(q, truths, index, k, threads);
}

std::vector<SweepRow> n_sweep(const data::Dataset& dataset, const SweepOptions& options) {
  require(!options.set_sizes.empty(), ErrorCode::kArgument, "no set sizes to sweep");
  require(!options.scales.empty(), ErrorCode::kArgument, "no fusion scales given");
  const std::size_t max_n = *std::max_element(options.set_sizes.begin(), options.set_sizes.end());
  const auto scenes = select_scenes(dataset.manifest, {options.split, max_n});
  require(!scenes.empty(), ErrorCode::kData,
          "no scene has at least " + std::to_string(max_n) + " query images");
  const auto index = satellite_index(dataset, scenes);
  const std::size_t m = index.size();
  const std::size_t k_max = std::max<std::size_t>(
      {metrics::one_percent_k(m), options.ks.empty() ? 1 : *std::max_element(options.ks.begin(), options.ks.end())});
  const std::size_t k = std::min(k_max, m);

  struct Variant {
    std::string name;
    fusion::Fuser fuser;
    double scale;
  };
  std::vector<Variant> variants;
  if (options.scales.size() == 1) {
    variants.push_back({"sff", fusion::Fuser::kSff, options.scales[0]});
    variants.push_back({"avg", fusion::Fuser::kAverage, 0.0});
  } else {
    for (double s : options.scales) {
      char name[48];
      std::snprintf(name, sizeof name, "sff:scale=%g", s);
      variants.push_back({name, fusion::Fuser::kSff, s});
    }
  }

  std::vector<SweepRow> rows;
  for (std::size_t n : options.set_sizes) {
    const auto sets = build_sets(dataset, scenes, n, options.seed, options.redundant);
    for (const auto& v : variants) {
      const auto results =
          retrieval::batch_retrieve(sets, index, v.fuser, v.scale, k, options.threads);
      rows.push_back({n, v.name, v.scale, metrics::evaluate(results, options.ks, m, n)});
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "N,fuser";
  if (!rows.empty()) {
    for (const auto& [k, v] : rows.front().report.recall_at) out += ",R@" + std::to_string(k);
  }
  out += ",R@1pct,AP\n";
  char cell[64];
  for (const auto& row : rows) {
    out += std::to_string(row.set_size) + "," + row.fuser;
    for (const auto& [k, v] : row.report.recall_at) {
      std::snprintf(cell, sizeof cell, ",%.6f", v);
      out += cell;
    }
    std::snprintf(cell, sizeof cell, ",%.6f,%.6f\n", row.report.recall_at_1pct, row.report.ap);
    out += cell;
  }
  return out;
}

}  // namespace setgeo::experiment
