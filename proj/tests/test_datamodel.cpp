#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "setgeo/datamodel.hpp"

using namespace setgeo;
using namespace setgeo::data;

namespace {

// `scenes` satellite records, each with `queries` ground records.
Manifest small_manifest(std::size_t scenes, std::size_t queries) {
  Manifest m;
  for (std::size_t s = 0; s < scenes; ++s) {
    const auto sid = static_cast<std::int64_t>(s * 3 + 1);
    m.records.push_back({"sat_" + std::to_string(sid), sid, Role::kSatellite, 48.0, 2.0 + 0.001 * s,
                         std::nullopt, 0, Split::kUnassigned});
    for (std::size_t q = 0; q < queries; ++q)
      m.records.push_back({"g_" + std::to_string(sid) + "_" + std::to_string(q), sid, Role::kGround,
                           48.0, 2.0, 10.0 * q, 0, Split::kUnassigned});
  }
  return m;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
}

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("manifest integrity") {
  Manifest ok = small_manifest(3, 2);
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.scene_ids() == std::vector<std::int64_t>{1, 4, 7});

  Manifest dup = ok;
  dup.records[2].image_id = dup.records[1].image_id;
  CHECK_ERROR_CODE(dup.validate(), ErrorCode::kData);

  Manifest orphan = ok;
  orphan.records[1].scene_id = 99;
  CHECK_ERROR_CODE(orphan.validate(), ErrorCode::kData);

  Manifest two_sats = ok;
  two_sats.records[3].scene_id = 1;
  CHECK_ERROR_CODE(two_sats.validate(), ErrorCode::kData);

  Manifest sat_heading = ok;
  sat_heading.records[0].heading = 5.0;
  CHECK_ERROR_CODE(sat_heading.validate(), ErrorCode::kData);

  Manifest no_heading = ok;
  no_heading.records[1].heading.reset();
  CHECK_ERROR_CODE(no_heading.validate(), ErrorCode::kData);

  Manifest bad_lat = ok;
  bad_lat.records[1].lat = 95;
  CHECK_ERROR_CODE(bad_lat.validate(), ErrorCode::kData);

  Manifest split_mismatch = split_scenes(ok, 1);
  split_mismatch.records[1].split =
      split_mismatch.records[1].split == Split::kTrain ? Split::kTest : Split::kTrain;
  CHECK_ERROR_CODE(split_mismatch.validate(), ErrorCode::kData);
}

TEST_CASE("manifest jsonl round trip") {
  const Manifest m = split_scenes(small_manifest(4, 3), 7);
  const std::string text = manifest_to_jsonl(m);
  const Manifest back = manifest_from_jsonl(text);
  REQUIRE(back.records.size() == m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    CHECK(back.records[i].image_id == m.records[i].image_id);
    CHECK(back.records[i].scene_id == m.records[i].scene_id);
    CHECK(back.records[i].role == m.records[i].role);
    CHECK(back.records[i].lat == m.records[i].lat);
    CHECK(back.records[i].heading == m.records[i].heading);
    CHECK(back.records[i].split == m.records[i].split);
  }
  CHECK(manifest_to_jsonl(back) == text);

  CHECK_ERROR_CODE(manifest_from_jsonl("{\"image_id\": \"x\"}\n"), ErrorCode::kFormat);
  CHECK_ERROR_CODE(manifest_from_jsonl("not json\n"), ErrorCode::kFormat);
  CHECK_ERROR_CODE(manifest_from_jsonl(
                       "{\"image_id\":\"g\",\"scene_id\":1,\"role\":\"ground\",\"lat\":0,"
                       "\"lon\":0,\"heading\":0}\n"),
                   ErrorCode::kData);
}

TEST_CASE("scene split") {
  const Manifest two = split_scenes(small_manifest(2, 1), 0);
  std::set<Split> seen;
  for (const auto& r : two.records) seen.insert(r.split);
  CHECK(seen == std::set<Split>{Split::kTrain, Split::kTest});

  const Manifest big = split_scenes(small_manifest(1001, 0), 3);
  std::size_t train = 0;
  for (const auto& r : big.records) train += r.split == Split::kTrain ? 1 : 0;
  CHECK((train == 500 || train == 501));

  CHECK(manifest_to_jsonl(split_scenes(small_manifest(50, 2), 9)) ==
        manifest_to_jsonl(split_scenes(small_manifest(50, 2), 9)));
  CHECK(manifest_to_jsonl(split_scenes(small_manifest(50, 2), 9)) !=
        manifest_to_jsonl(split_scenes(small_manifest(50, 2), 10)));
  CHECK_ERROR_CODE(split_scenes(small_manifest(1, 4), 0), ErrorCode::kArgument);
}

TEST_CASE("standardized sets") {
  const Manifest m = small_manifest(1, 40);
  const StandardizedSets four = standardized_sets(m, 4, 0);
  CHECK(four.sets.size() == 10);
  std::set<std::size_t> members;
  for (const auto& s : four.sets) {
    CHECK(s.members.size() == 4);
    members.insert(s.members.begin(), s.members.end());
  }
  CHECK(members.size() == 40);

  const StandardizedSets ones = standardized_sets(m, 1, 0);
  CHECK(ones.sets.size() == 40);

  const StandardizedSets skip = standardized_sets(small_manifest(1, 3), 4, 0);
  CHECK(skip.sets.empty());
  CHECK(skip.skipped_scenes == std::vector<std::int64_t>{1});

  CHECK_ERROR_CODE(standardized_sets(m, 0, 0), ErrorCode::kArgument);

  // Disjoint with union N * num_sets, for awkward sizes too.
  const Manifest many = small_manifest(6, 37);
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 16u, 37u, 40u}) {
    const StandardizedSets ss = standardized_sets(many, n, 5);
    std::set<std::size_t> all;
    for (const auto& s : ss.sets) {
      for (std::size_t idx : s.members) {
        CHECK(many.records[idx].scene_id == s.scene_id);
        CHECK(many.records[idx].role == Role::kGround);
      }
      all.insert(s.members.begin(), s.members.end());
    }
    CHECK(all.size() == n * ss.sets.size());
    CHECK(ss.sets.size() == (n <= 37 ? 6 * (37 / n) : 0));
  }

  // Manifest order does not change which images are grouped together.
  Manifest reversed = many;
  std::reverse(reversed.records.begin(), reversed.records.end());
  auto names = [](const Manifest& mm, const StandardizedSets& ss) {
    std::vector<std::vector<std::string>> out;
    for (const auto& s : ss.sets) {
      std::vector<std::string> v;
      for (std::size_t i : s.members) v.push_back(mm.records[i].image_id);
      out.push_back(v);
    }
    return out;
  };
  CHECK(names(many, standardized_sets(many, 4, 2)) ==
        names(reversed, standardized_sets(reversed, 4, 2)));

  const std::vector<std::int64_t> only = {4};
  const StandardizedSets sub = standardized_sets(many, 4, 2, std::span<const std::int64_t>(only));
  for (const auto& s : sub.sets) CHECK(s.scene_id == 4);
  CHECK(sub.sets.size() == 9);
}

TEST_CASE("feature store round trip is bitwise") {
  testing::TempDir dir("store");
  FeatureStore s;
  s.dim = 5;
  std::mt19937_64 gen(1);
  const auto rows = oracle::random_mat(gen, 17, 5);
  for (std::size_t i = 0; i < rows.size(); ++i) s.append("id_" + std::to_string(i), rows[i]);
  // Awkward float values survive too.
  s.values[3] = -0.0f;
  s.values[4] = std::numeric_limits<float>::denorm_min();
  s.values[5] = std::numeric_limits<float>::infinity();

  save_store(s, dir / "a.sgf");
  const FeatureStore back = load_store(dir / "a.sgf");
  CHECK(back.ids == s.ids);
  CHECK(back.dim == s.dim);
  REQUIRE(back.values.size() == s.values.size());
  CHECK(std::memcmp(back.values.data(), s.values.data(), s.values.size() * sizeof(float)) == 0);
  save_store(back, dir / "b.sgf");
  CHECK(slurp(dir / "a.sgf") == slurp(dir / "b.sgf"));
  CHECK(slurp(dir / "a.sgf").size() == kStoreHeaderBytes + 17 * 5 * 4);

  FeatureStore empty;
  empty.dim = 8;
  save_store(empty, dir / "e.sgf");
  const FeatureStore e = load_store(dir / "e.sgf");
  CHECK(e.count() == 0);
  CHECK(e.dim == 8);
}

TEST_CASE("corrupted feature stores are rejected") {
  testing::TempDir dir("corrupt");
  FeatureStore s;
  s.dim = 4;
  for (int i = 0; i < 6; ++i) s.append("r" + std::to_string(i), std::vector<double>{1, 2, 3, 4});
  save_store(s, dir / "good.sgf");
  const std::string bytes = slurp(dir / "good.sgf");
  const std::string ids = slurp(dir / "good.sgf.ids");

  auto write_bad = [&](const std::string& name, const std::string& data) {
    spit(dir / name, data);
    spit(dir / (name + ".ids"), ids);
    return dir / name;
  };

  const auto truncated = write_bad("trunc.sgf", bytes.substr(0, bytes.size() - 6));
  CHECK_ERROR_CODE(load_store(truncated), ErrorCode::kFormat);
  const std::string msg = error_message([&] { load_store(truncated); });
  CHECK(msg.find("byte offset") != std::string::npos);
  CHECK(msg.find("expected 96") != std::string::npos);
  CHECK(msg.find("found 90") != std::string::npos);

  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_ERROR_CODE(load_store(write_bad("magic.sgf", magic)), ErrorCode::kFormat);
  std::string version = bytes;
  version[4] = 2;
  CHECK_ERROR_CODE(load_store(write_bad("version.sgf", version)), ErrorCode::kFormat);
  CHECK_ERROR_CODE(load_store(write_bad("header.sgf", bytes.substr(0, 10))), ErrorCode::kFormat);
  CHECK_ERROR_CODE(load_store(write_bad("trailing.sgf", bytes + "xyz")), ErrorCode::kFormat);
  std::string huge = bytes;
  huge[15] = 0x10;  // count with a high byte set
  CHECK_ERROR_CODE(load_store(write_bad("huge.sgf", huge)), ErrorCode::kFormat);

  spit(dir / "ids.sgf", bytes);
  spit(dir / "ids.sgf.ids", "r0\nr1\n");
  CHECK_ERROR_CODE(load_store(dir / "ids.sgf"), ErrorCode::kFormat);
  CHECK_ERROR_CODE(load_store(dir / "missing.sgf"), ErrorCode::kIo);
}

TEST_CASE("synthetic generator") {
  SynthConfig cfg;
  cfg.num_scenes = 30;
  cfg.queries_per_scene = 6;
  cfg.dim = 16;
  geo::GridBuild grid;
  const Dataset ds = synth_generate(cfg, &grid);
  CHECK(ds.manifest.scene_ids().size() == 30);
  CHECK(ds.ground.count() == 180);
  CHECK(ds.satellite.count() == 30);

  // Ground poses fall in their scene's cell; labels are consistent.
  for (const auto& r : ds.manifest.records) {
    CHECK(geo::assign_to_cell(geo::GeoPoint{r.lat, r.lon}, grid.grid) == r.scene_id);
    CHECK(r.city == static_cast<int>(r.scene_id * 6 / 30));
  }

  testing::TempDir dir("synth");
  save_dataset(ds, dir / "a");
  save_dataset(synth_generate(cfg), dir / "b");
  for (const char* f : {"manifest.jsonl", "ground.sgf", "ground.sgf.ids", "satellite.sgf"})
    CHECK(slurp(dir / (std::string("a/") + f)) == slurp(dir / (std::string("b/") + f)));
  const Dataset loaded = load_dataset(dir / "a");
  CHECK(loaded.ground == ds.ground);
  CHECK(loaded.row_of_record == ds.row_of_record);

  SynthConfig bad = cfg;
  bad.sigma_ground = -1;
  CHECK_ERROR_CODE(synth_generate(bad), ErrorCode::kConfig);
  bad = cfg;
  bad.num_scenes = 0;
  CHECK_ERROR_CODE(synth_generate(bad), ErrorCode::kConfig);
}

TEST_CASE("noiseless synthetic features equal the satellite direction") {
  SynthConfig cfg;
  cfg.num_scenes = 20;
  cfg.queries_per_scene = 3;
  cfg.sigma_ground = 0;
  cfg.sigma_sat = 0;
  cfg.orientation_effect = 0;
  const Dataset ds = synth_generate(cfg);
  for (std::size_t i = 0; i < ds.manifest.records.size(); ++i) {
    const Record& r = ds.manifest.records[i];
    if (r.role != Role::kGround) continue;
    const auto g = ds.ground.row_as_double(ds.row_of_record[i]);
    const auto s = ds.satellite.row_as_double(ds.satellite.index_of("sat_" + std::to_string(r.scene_id)));
    CHECK(oracle::max_abs_diff(g, s) < 1e-6);
  }
}

TEST_CASE("same-scene ground features are more similar below unit noise") {
  for (double sigma : {0.25, 0.5, 0.99}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      SynthConfig cfg;
      cfg.num_scenes = 60;
      cfg.queries_per_scene = 8;
      cfg.sigma_ground = sigma;
      cfg.seed = seed;
      const Dataset ds = synth_generate(cfg);
      double same = 0, diff = 0;
      std::size_t n_same = 0, n_diff = 0;
      for (std::size_t i = 0; i < ds.ground.count(); ++i) {
        for (std::size_t j = i + 1; j < ds.ground.count(); ++j) {
          const double c = oracle::cosine(ds.ground.row_as_double(i), ds.ground.row_as_double(j));
          if (i / 8 == j / 8) {
            same += c;
            ++n_same;
          } else {
            diff += c;
            ++n_diff;
          }
        }
      }
      CHECK_MESSAGE(same / n_same - diff / n_diff > 0.1, "sigma " << sigma << " seed " << seed);
    }
  }
}
