#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "setgeo/geodesy.hpp"
#include "setgeo/matrix.hpp"

namespace setgeo::data {

enum class Role { kGround, kSatellite };
enum class Split { kUnassigned, kTrain, kTest };

const char* to_string(Role role);
const char* to_string(Split split);
Split parse_split(const std::string& text);

struct Record {
  std::string image_id;
  std::int64_t scene_id = 0;  // reference cell id
  Role role = Role::kGround;
  double lat = 0.0;
  double lon = 0.0;
  std::optional<double> heading;  // ground only, degrees clockwise from north
  int city = 0;
  Split split = Split::kUnassigned;
};

/// Dataset manifest. Ground records link to the single satellite record of
/// their scene; a split, when assigned, is shared by every record of a scene.
struct Manifest {
  std::vector<Record> records;

  /// Throws kData naming the first offending record.
  void validate() const;
  /// Sorted scene ids, one per satellite record.
  std::vector<std::int64_t> scene_ids() const;
};

/// One JSON object per line.
std::string manifest_to_jsonl(const Manifest& manifest);
Manifest manifest_from_jsonl(const std::string& text);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Seeded 50/50 partition at scene granularity; train gets floor(S/2) scenes.
Manifest split_scenes(const Manifest& manifest, std::uint64_t seed);

/// Row-major float32 feature matrix with one string id per row.
///
/// On disk: a 24-byte little-endian header (magic "SGF1", u32 version,
/// u64 count, u32 dim, u32 reserved) followed by count * dim float32 values.
/// Ids live in a sidecar text file `<path>.ids`, one per line.
struct FeatureStore {
  std::uint32_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> values;

  std::size_t count() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  void append(const std::string& id, std::span<const double> features);
  std::vector<double> row_as_double(std::size_t i) const;
  /// Row index of `id`, throws kData if absent.
  std::size_t index_of(const std::string& id) const;
  bool operator==(const FeatureStore&) const = default;
};

inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 24;

std::string encode_store_payload(const FeatureStore& store);
/// Parses header + payload; ids are attached separately.
FeatureStore decode_store_payload(std::span<const char> bytes);
void save_store(const FeatureStore& store, const std::filesystem::path& path);
FeatureStore load_store(const std::filesystem::path& path);
std::filesystem::path ids_path(const std::filesystem::path& store_path);

/// Indices into Manifest::records forming one query set.
struct QuerySet {
  std::int64_t scene_id = 0;
  std::vector<std::size_t> members;
};

struct StandardizedSets {
  std::vector<QuerySet> sets;
  std::vector<std::int64_t> skipped_scenes;  // fewer than N ground images
};

/// Disjoint seeded sampling of floor(q / N) sets per scene, scenes in
/// ascending id order. Only scenes in `scenes` are considered when given.
StandardizedSets standardized_sets(const Manifest& manifest, std::size_t set_size,
                                   std::uint64_t seed,
                                   std::optional<std::span<const std::int64_t>> scenes = {});

struct SynthConfig {
  std::size_t num_scenes = 500;
  std::size_t queries_per_scene = 40;
  std::size_t dim = 64;
  // Noise vectors have per-component std sigma / sqrt(dim), so their
  // expected norm is about sigma relative to the unit latent.
  double sigma_sat = 0.3;
  double sigma_ground = 2.75;
  double orientation_effect = 0.3;
  std::size_t num_cities = 6;
  std::uint64_t seed = 0;
  geo::GeoPoint anchor{48.85, 2.35};
  int zoom = 18;
  int tile_px = 400;
  double overlap = 0.125;

  void validate() const;
};

/// Manifest plus ground and satellite stores. Store ids are image ids.
struct Dataset {
  Manifest manifest;
  FeatureStore ground;
  FeatureStore satellite;
  // Store row of each manifest record (in the store matching its role);
  // filled by link().
  std::vector<std::size_t> row_of_record;
};

/// Planted-embedding dataset: scene i has a latent unit vector z_i; the
/// satellite feature is normalize(z_i + noise) and ground image k is
/// normalize(z_i + noise + orientation_effect * e_{class(heading_k)}).
/// Each scene is one grid cell and its ground poses lie inside that cell.
Dataset synth_generate(const SynthConfig& cfg, geo::GridBuild* grid_out = nullptr);

/// Directory layout: manifest.jsonl, ground.sgf(.ids), satellite.sgf(.ids).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);
/// Validates the manifest, checks that every manifest image has exactly one
/// feature row and vice versa, and fills row_of_record.
void link(Dataset& dataset);

/// Gathers the features of a query set into an N x C matrix.
Matrix gather(const Dataset& dataset, const QuerySet& set);

}  // namespace setgeo::data
