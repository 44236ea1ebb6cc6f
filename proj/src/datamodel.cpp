#include "setgeo/datamodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "setgeo/error.hpp"
#include "setgeo/random.hpp"

namespace setgeo::data {
namespace {

constexpr char kMagic[4] = {'S', 'G', 'F', '1'};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::span<const char> bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return static_cast<T>(v);
}

Role parse_role(const std::string& s) {
  if (s == "ground") return Role::kGround;
  if (s == "satellite") return Role::kSatellite;
  fail(ErrorCode::kData, "unknown role '" + s + "'");
}

}  // namespace

const char* to_string(Role role) { return role == Role::kGround ? "ground" : "satellite"; }

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kUnassigned: break;
  }
  return "unassigned";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  if (text == "unassigned" || text.empty()) return Split::kUnassigned;
  fail(ErrorCode::kData, "unknown split '" + text + "'");
}

void Manifest::validate() const {
  std::set<std::string> image_ids;
  std::map<std::int64_t, Split> scene_split;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records[i];
    const std::string where = "manifest record " + std::to_string(i + 1) + " ('" + r.image_id + "')";
    require(!r.image_id.empty(), ErrorCode::kData, where + ": empty image_id");
    require(r.image_id.find('\n') == std::string::npos, ErrorCode::kData,
            where + ": image_id contains a newline");
    require(image_ids.insert(r.image_id).second, ErrorCode::kData, where + ": duplicate image_id");
    try {
      geo::validate({r.lat, r.lon});
    } catch (const Error& e) {
      fail(ErrorCode::kData, where + ": " + e.what());
    }
    require(r.city >= 0, ErrorCode::kData, where + ": negative city label");
    if (r.role == Role::kSatellite) {
      require(!r.heading.has_value(), ErrorCode::kData, where + ": satellite record has a heading");
      require(scene_split.emplace(r.scene_id, r.split).second, ErrorCode::kData,
              where + ": scene " + std::to_string(r.scene_id) + " has two satellite records");
    } else {
      require(r.heading.has_value() && std::isfinite(*r.heading), ErrorCode::kData,
              where + ": ground record needs a finite heading");
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records[i];
    if (r.role != Role::kGround) continue;
    const auto it = scene_split.find(r.scene_id);
    require(it != scene_split.end(), ErrorCode::kData,
            "manifest record " + std::to_string(i + 1) + " ('" + r.image_id +
                "'): scene " + std::to_string(r.scene_id) + " has no satellite record");
    require(it->second == r.split, ErrorCode::kData,
            "manifest record " + std::to_string(i + 1) + " ('" + r.image_id +
                "'): split differs from its scene's satellite record");
  }
}

std::vector<std::int64_t> Manifest::scene_ids() const {
  std::vector<std::int64_t> ids;
  for (const auto& r : records)
    if (r.role == Role::kSatellite) ids.push_back(r.scene_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string manifest_to_jsonl(const Manifest& manifest) {
  manifest.validate();
  std::string out;
  for (const auto& r : manifest.records) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["scene_id"] = r.scene_id;
    j["role"] = to_string(r.role);
    j["lat"] = r.lat;
    j["lon"] = r.lon;
    if (r.heading) j["heading"] = *r.heading;
    j["city"] = r.city;
    if (r.split != Split::kUnassigned) j["split"] = to_string(r.split);
    out += j.dump();
    out += '\n';
  }
  return out;
}

Manifest manifest_from_jsonl(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Record r;
      r.image_id = j.at("image_id").get<std::string>();
      r.scene_id = j.at("scene_id").get<std::int64_t>();
      r.role = parse_role(j.at("role").get<std::string>());
      r.lat = j.at("lat").get<double>();
      r.lon = j.at("lon").get<double>();
      if (j.contains("heading") && !j["heading"].is_null()) r.heading = j["heading"].get<double>();
      r.city = j.value("city", 0);
      if (j.contains("split") && !j["split"].is_null())
        r.split = parse_split(j["split"].get<std::string>());
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kFormat, "manifest line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(e.code(), "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  m.validate();
  return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_jsonl(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw;
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  write_file(path, manifest_to_jsonl(manifest));
}

Manifest split_scenes(const Manifest& manifest, std::uint64_t seed) {
  manifest.validate();
  auto scenes = manifest.scene_ids();
  require(scenes.size() >= 2, ErrorCode::kArgument, "splitting needs at least 2 scenes");
  Rng rng(mix_seed(seed, 0x5911));
  rng.shuffle(scenes);
  std::map<std::int64_t, Split> assignment;
  for (std::size_t i = 0; i < scenes.size(); ++i)
    assignment[scenes[i]] = i < scenes.size() / 2 ? Split::kTrain : Split::kTest;
  Manifest out = manifest;
  for (auto& r : out.records) r.split = assignment.at(r.scene_id);
  out.validate();
  return out;
}

void FeatureStore::append(const std::string& id, std::span<const double> features) {
  if (ids.empty() && values.empty() && dim == 0) dim = static_cast<std::uint32_t>(features.size());
  require(features.size() == dim, ErrorCode::kArgument,
          "feature '" + id + "' has dimension " + std::to_string(features.size()) +
              ", store expects " + std::to_string(dim));
  ids.push_back(id);
  for (double v : features) values.push_back(static_cast<float>(v));
}

std::vector<double> FeatureStore::row_as_double(std::size_t i) const {
  const auto r = row(i);
  return {r.begin(), r.end()};
}

std::size_t FeatureStore::index_of(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  require(it != ids.end(), ErrorCode::kData, "feature store has no row '" + id + "'");
  return static_cast<std::size_t>(it - ids.begin());
}

std::string encode_store_payload(const FeatureStore& store) {
  require(store.values.size() == store.count() * store.dim, ErrorCode::kInvariant,
          "feature store payload does not match count * dim");
  std::string out;
  out.reserve(kStoreHeaderBytes + store.values.size() * 4);
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kStoreVersion);
  put_le<std::uint64_t>(out, store.count());
  put_le<std::uint32_t>(out, store.dim);
  put_le<std::uint32_t>(out, 0);
  for (float v : store.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureStore decode_store_payload(std::span<const char> bytes) {
  if (bytes.size() < kStoreHeaderBytes) {
    fail(ErrorCode::kFormat, "truncated header at byte offset " + std::to_string(bytes.size()) +
                                 ": expected " + std::to_string(kStoreHeaderBytes) + " bytes");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::kFormat, "bad magic at byte offset 0: expected \"SGF1\"");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kStoreVersion) {
    fail(ErrorCode::kFormat, "unsupported version " + std::to_string(version) +
                                 " at byte offset 4: expected " + std::to_string(kStoreVersion));
  }
  const auto count = get_le<std::uint64_t>(bytes, 8);
  const auto dim = get_le<std::uint32_t>(bytes, 16);
  const auto reserved = get_le<std::uint32_t>(bytes, 20);
  if (reserved != 0) fail(ErrorCode::kFormat, "nonzero reserved field at byte offset 20");
  if (count > 0 && dim == 0) fail(ErrorCode::kFormat, "zero dim with nonzero count at byte offset 16");
  const std::size_t payload = bytes.size() - kStoreHeaderBytes;
  if (dim != 0 && count > (payload / 4) / dim + 1) {
    fail(ErrorCode::kFormat, "payload truncated at byte offset " + std::to_string(bytes.size()) +
                                 ": header declares " + std::to_string(count) + " rows of dim " +
                                 std::to_string(dim));
  }
  const std::size_t expected = static_cast<std::size_t>(count) * dim * 4;
  if (payload != expected) {
    fail(ErrorCode::kFormat,
         std::string(payload < expected ? "payload truncated" : "trailing bytes") +
             " at byte offset " + std::to_string(kStoreHeaderBytes + std::min(payload, expected)) +
             ": expected " + std::to_string(expected) + " payload bytes, found " +
             std::to_string(payload));
  }
  FeatureStore store;
  store.dim = dim;
  store.values.resize(static_cast<std::size_t>(count) * dim);
  for (std::size_t i = 0; i < store.values.size(); ++i) {
    store.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kStoreHeaderBytes + 4 * i));
  }
  store.ids.resize(static_cast<std::size_t>(count));
  return store;
}

std::filesystem::path ids_path(const std::filesystem::path& store_path) {
  return std::filesystem::path(store_path.string() + ".ids");
}

void save_store(const FeatureStore& store, const std::filesystem::path& path) {
  std::set<std::string> unique(store.ids.begin(), store.ids.end());
  require(unique.size() == store.ids.size(), ErrorCode::kInvariant, "feature store ids are not unique");
  std::string ids;
  for (const auto& id : store.ids) {
    require(!id.empty() && id.find('\n') == std::string::npos, ErrorCode::kInvariant,
            "feature store id is empty or contains a newline");
    ids += id;
    ids += '\n';
  }
  write_file(path, encode_store_payload(store));
  write_file(ids_path(path), ids);
}

FeatureStore load_store(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  FeatureStore store;
  try {
    store = decode_store_payload(bytes);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
  const std::string ids_text = read_file(ids_path(path));
  std::istringstream in(ids_text);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  if (ids.size() != store.count()) {
    fail(ErrorCode::kFormat, ids_path(path).string() + ": " + std::to_string(ids.size()) +
                                 " ids for " + std::to_string(store.count()) + " rows");
  }
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) fail(ErrorCode::kFormat, ids_path(path).string() + ": duplicate id");
  store.ids = std::move(ids);
  return store;
}

StandardizedSets standardized_sets(const Manifest& manifest, std::size_t set_size,
                                   std::uint64_t seed,
                                   std::optional<std::span<const std::int64_t>> scenes) {
  require(set_size >= 1, ErrorCode::kArgument, "set size must be >= 1");
  std::map<std::int64_t, std::vector<std::size_t>> by_scene;
  for (const auto id : manifest.scene_ids()) by_scene[id];
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const Record& r = manifest.records[i];
    if (r.role == Role::kGround) by_scene[r.scene_id].push_back(i);
  }
  std::set<std::int64_t> wanted;
  if (scenes) wanted.insert(scenes->begin(), scenes->end());

  StandardizedSets out;
  for (auto& [scene, members] : by_scene) {
    if (scenes && !wanted.count(scene)) continue;
    if (members.size() < set_size) {
      out.skipped_scenes.push_back(scene);
      continue;
    }
    // Order by image id first so the sample does not depend on manifest order.
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return manifest.records[a].image_id < manifest.records[b].image_id;
    });
    Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(scene)), set_size));
    rng.shuffle(members);
    const std::size_t num_sets = members.size() / set_size;
    for (std::size_t s = 0; s < num_sets; ++s) {
      QuerySet qs{scene, {}};
      qs.members.assign(members.begin() + static_cast<std::ptrdiff_t>(s * set_size),
                        members.begin() + static_cast<std::ptrdiff_t>((s + 1) * set_size));
      out.sets.push_back(std::move(qs));
    }
  }
  return out;
}

void SynthConfig::validate() const {
  require(num_scenes >= 1, ErrorCode::kConfig, "num_scenes must be >= 1");
  require(queries_per_scene >= 1, ErrorCode::kConfig, "queries_per_scene must be >= 1");
  require(dim >= 1, ErrorCode::kConfig, "dim must be >= 1");
  require(num_cities >= 1, ErrorCode::kConfig, "num_cities must be >= 1");
  for (double v : {sigma_sat, sigma_ground, orientation_effect})
    require(std::isfinite(v) && v >= 0.0, ErrorCode::kConfig, "noise scales must be >= 0");
  require(orientation_effect == 0.0 || dim >= 4, ErrorCode::kConfig,
          "orientation_effect needs dim >= 4");
}

namespace {

std::vector<double> normalized(std::vector<double> v) {
  const double n = norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

}  // namespace

Dataset synth_generate(const SynthConfig& cfg, geo::GridBuild* grid_out) {
  cfg.validate();
  const std::size_t m = cfg.num_scenes;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  const int rows = static_cast<int>((m + static_cast<std::size_t>(cols) - 1) / static_cast<std::size_t>(cols));

  geo::TileGrid proto;
  proto.tile_px = cfg.tile_px;
  proto.overlap = cfg.overlap;
  const int stride = proto.stride_px();
  require(stride >= 1, ErrorCode::kConfig, "overlap leaves a stride below one pixel");
  const geo::PixelPoint nw = geo::to_pixel(cfg.anchor, cfg.zoom);
  const geo::PixelPoint se{nw.x + (cols - 1) * stride + cfg.tile_px,
                           nw.y + (rows - 1) * stride + cfg.tile_px};
  const geo::GridBuild grid = geo::build_grid(
      {cfg.anchor, geo::from_pixel(se, cfg.zoom)}, cfg.zoom, cfg.tile_px, cfg.overlap);
  require(grid.cells.size() >= m, ErrorCode::kInvariant, "synthetic grid has too few cells");
  if (grid_out) *grid_out = grid;

  Dataset ds;
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  std::vector<double> buf(cfg.dim);
  for (std::size_t s = 0; s < m; ++s) {
    const geo::ReferenceCell& cell = grid.cells[s];
    const int city = static_cast<int>(s * cfg.num_cities / m);
    Rng rng(mix_seed(cfg.seed, s));

    std::vector<double> latent(cfg.dim);
    for (double& v : latent) v = rng.gaussian();
    latent = normalized(std::move(latent));

    const std::string sat_id = "sat_" + std::to_string(cell.id);
    Record sat{sat_id, cell.id, Role::kSatellite, cell.center.lat, cell.center.lon,
               std::nullopt, city, Split::kUnassigned};
    ds.manifest.records.push_back(sat);
    for (std::size_t k = 0; k < cfg.dim; ++k)
      buf[k] = latent[k] + cfg.sigma_sat * inv_sqrt_dim * rng.gaussian();
    ds.satellite.append(sat_id, normalized(buf));

    const geo::PixelPoint center = grid.grid.cell_center_px(cell.id);
    for (std::size_t q = 0; q < cfg.queries_per_scene; ++q) {
      // Poses stay within half a stride of the center, inside the cell's
      // nearest-center region.
      const geo::PixelPoint px{center.x + rng.uniform(-0.5, 0.5) * stride,
                               center.y + rng.uniform(-0.5, 0.5) * stride};
      const geo::GeoPoint pos = geo::from_pixel(px, cfg.zoom);
      const double heading = rng.uniform(0.0, 360.0);
      const int ori = geo::orientation_label(heading);
      const std::string gid = "g_" + std::to_string(cell.id) + "_" + std::to_string(q);
      ds.manifest.records.push_back(
          {gid, cell.id, Role::kGround, pos.lat, pos.lon, heading, city, Split::kUnassigned});
      for (std::size_t k = 0; k < cfg.dim; ++k)
        buf[k] = latent[k] + cfg.sigma_ground * inv_sqrt_dim * rng.gaussian();
      if (cfg.orientation_effect != 0.0) buf[static_cast<std::size_t>(ori)] += cfg.orientation_effect;
      ds.ground.append(gid, normalized(buf));
    }
  }
  link(ds);
  return ds;
}

void link(Dataset& ds) {
  ds.manifest.validate();
  require(ds.ground.count() == 0 || ds.satellite.count() == 0 || ds.ground.dim == ds.satellite.dim,
          ErrorCode::kData, "ground and satellite stores have different dimensions");
  std::unordered_map<std::string, std::size_t> ground_rows, sat_rows;
  for (std::size_t i = 0; i < ds.ground.count(); ++i) ground_rows.emplace(ds.ground.ids[i], i);
  for (std::size_t i = 0; i < ds.satellite.count(); ++i) sat_rows.emplace(ds.satellite.ids[i], i);
  ds.row_of_record.assign(ds.manifest.records.size(), 0);
  std::size_t n_ground = 0, n_sat = 0;
  for (std::size_t i = 0; i < ds.manifest.records.size(); ++i) {
    const Record& r = ds.manifest.records[i];
    auto& rows = r.role == Role::kGround ? ground_rows : sat_rows;
    const auto it = rows.find(r.image_id);
    require(it != rows.end(), ErrorCode::kData,
            std::string(to_string(r.role)) + " image '" + r.image_id + "' has no feature row");
    ds.row_of_record[i] = it->second;
    (r.role == Role::kGround ? n_ground : n_sat)++;
  }
  require(n_ground == ds.ground.count(), ErrorCode::kData,
          "ground store has rows that are not in the manifest");
  require(n_sat == ds.satellite.count(), ErrorCode::kData,
          "satellite store has rows that are not in the manifest");
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_manifest(dataset.manifest, dir / "manifest.jsonl");
  save_store(dataset.ground, dir / "ground.sgf");
  save_store(dataset.satellite, dir / "satellite.sgf");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.manifest = read_manifest(dir / "manifest.jsonl");
  ds.ground = load_store(dir / "ground.sgf");
  ds.satellite = load_store(dir / "satellite.sgf");
  try {
    link(ds);
  } catch (const Error& e) {
    fail(e.code(), dir.string() + ": " + e.what());
  }
  return ds;
}

Matrix gather(const Dataset& dataset, const QuerySet& set) {
  require(dataset.row_of_record.size() == dataset.manifest.records.size(), ErrorCode::kInvariant,
          "dataset is not linked");
  Matrix m;
  for (std::size_t idx : set.members) {
    const Record& r = dataset.manifest.records.at(idx);
    const FeatureStore& store = r.role == Role::kGround ? dataset.ground : dataset.satellite;
    m.push_row(store.row_as_double(dataset.row_of_record[idx]));
  }
  return m;
}

}  // namespace setgeo::data
