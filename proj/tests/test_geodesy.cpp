#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "setgeo/geodesy.hpp"

using namespace setgeo;
using namespace setgeo::geo;

namespace {

GridBuild paris_grid() {
  return build_grid({GeoPoint::make(48.86, 2.34), GeoPoint::make(48.84, 2.36)}, 18);
}

}  // namespace

TEST_CASE("haversine reference distances") {
  CHECK(haversine({0, 0}, {0, 0}) == 0.0);
  const double one_degree = kEarthRadiusM * std::numbers::pi / 180.0;
  CHECK(std::abs(haversine({0, 0}, {1, 0}) - 111194.93) < 0.01);
  CHECK(std::abs(haversine({0, 0}, {1, 0}) - one_degree) < 1e-6);
  CHECK(std::abs(haversine({0, 0}, {0, 180}) - 20015086.8) < 1.0);
  CHECK(std::abs(haversine({0, 0}, {0, 180}) - std::numbers::pi * kEarthRadiusM) < 1e-6);
}

TEST_CASE("haversine symmetry and triangle inequality") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0);
  for (int i = 0; i < 1000; ++i) {
    GeoPoint a{lat(gen), lon(gen)}, b{lat(gen), lon(gen)}, c{lat(gen), lon(gen)};
    CHECK(haversine(a, b) == haversine(b, a));
    CHECK(haversine(a, c) <= (haversine(a, b) + haversine(b, c)) * (1.0 + 1e-6));
  }
}

TEST_CASE("geo point validation") {
  CHECK_NOTHROW(GeoPoint::make(0, 180));
  CHECK_ERROR_CODE(GeoPoint::make(91, 0), ErrorCode::kDomain);
  CHECK_ERROR_CODE(GeoPoint::make(0, 180.5), ErrorCode::kDomain);
  CHECK_ERROR_CODE(GeoPoint::make(NAN, 0), ErrorCode::kDomain);
}

TEST_CASE("ground resolution") {
  CHECK(std::abs(ground_resolution(0, 18) - 0.5972) < 0.0005);
  CHECK(std::abs(ground_resolution(0, 0) - 156543.03) < 0.01);
  CHECK(std::abs(ground_resolution(60, 18) - 0.2986) < 0.0005);
  CHECK_ERROR_CODE(ground_resolution(86, 18), ErrorCode::kDomain);
  CHECK_ERROR_CODE(ground_resolution(-85.06, 18), ErrorCode::kDomain);

  for (int z = 0; z < 23; ++z) CHECK(ground_resolution(30, z + 1) < ground_resolution(30, z));
  for (double lat = 0; lat < 84; lat += 1.5) {
    CHECK(ground_resolution(lat + 1.5, 18) < ground_resolution(lat, 18));
    CHECK(ground_resolution(-(lat + 1.5), 18) < ground_resolution(-lat, 18));
  }
}

TEST_CASE("pixel projection round trip") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> lat(-80.0, 80.0), lon(-179.0, 179.0);
  for (int i = 0; i < 200; ++i) {
    GeoPoint p{lat(gen), lon(gen)};
    GeoPoint q = from_pixel(to_pixel(p, 18), 18);
    CHECK(std::abs(p.lat - q.lat) < 1e-9);
    CHECK(std::abs(p.lon - q.lon) < 1e-9);
  }
}

TEST_CASE("grid stride and column counts") {
  TileGrid g;
  CHECK(g.stride_px() == 350);
  g.overlap = 0.0;
  CHECK(g.stride_px() == 400);

  const PixelPoint p0{1000.0 * 256, 700.0 * 256};
  auto grid_over = [&](double span, double overlap) {
    return build_grid({from_pixel(p0, 18), from_pixel({p0.x + span, p0.y + span}, 18)}, 18,
                      400, overlap)
        .grid;
  };
  CHECK(grid_over(750, 0.125).cols == 2);
  CHECK(grid_over(750, 0.125).rows == 2);
  CHECK(grid_over(751, 0.125).cols == 3);
  CHECK(grid_over(120, 0.125).cols == 1);
  CHECK(grid_over(120, 0.125).cell_count() == 1);

  // Without overlap adjacent cells only touch.
  const TileGrid flat = grid_over(1600, 0.0);
  const auto b0 = flat.cell_bounds(0), b1 = flat.cell_bounds(1);
  CHECK(b0.x1 == b1.x0);

  CHECK_ERROR_CODE(grid_over(750, 1.0), ErrorCode::kConfig);
  CHECK_ERROR_CODE(grid_over(750, -0.1), ErrorCode::kConfig);
}

TEST_CASE("assign to cell: centers and ties") {
  const GridBuild gb = paris_grid();
  REQUIRE(gb.grid.cols >= 5);
  CHECK(assign_to_cell(gb.grid.cell_center_px(7), gb.grid) == 7);
  const PixelPoint c3 = gb.grid.cell_center_px(3), c4 = gb.grid.cell_center_px(4);
  CHECK(assign_to_cell(PixelPoint{(c3.x + c4.x) / 2, (c3.y + c4.y) / 2}, gb.grid) == 3);
  // Geographic centers round-trip to their cells too.
  for (const auto& cell : gb.cells) CHECK(assign_to_cell(cell.center, gb.grid) == cell.id);

  const auto cov = gb.grid.coverage();
  CHECK_ERROR_CODE(assign_to_cell(PixelPoint{cov.x0 - 1, cov.y0}, gb.grid),
                   ErrorCode::kOutOfCoverage);
  CHECK_ERROR_CODE(assign_to_cell(GeoPoint{10, 10}, gb.grid), ErrorCode::kOutOfCoverage);
}

TEST_CASE("assign to cell matches exhaustive nearest-center scan") {
  const GridBuild gb = paris_grid();
  const auto cov = gb.grid.coverage();
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ux(cov.x0, cov.x1), uy(cov.y0, cov.y1);
  for (int i = 0; i < 1000; ++i) {
    PixelPoint p{ux(gen), uy(gen)};
    std::int64_t best = -1;
    double best_d = 1e300;
    for (std::int64_t id = 0; id < gb.grid.cell_count(); ++id) {
      const auto c = gb.grid.cell_center_px(id);
      const double d = std::hypot(p.x - c.x, p.y - c.y);
      if (d < best_d) {
        best_d = d;
        best = id;
      }
    }
    CHECK(assign_to_cell(p, gb.grid) == best);
  }
}

TEST_CASE("grid coverage over random points in the box") {
  const double lat0 = 48.84, lat1 = 48.86, lon0 = 2.34, lon1 = 2.36;
  const GridBuild gb = paris_grid();
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> ulat(lat0, lat1), ulon(lon0, lon1);
  for (int i = 0; i < 1000; ++i) {
    GeoPoint p{ulat(gen), ulon(gen)};
    std::int64_t id = -1;
    REQUIRE_NOTHROW(id = assign_to_cell(p, gb.grid));
    CHECK(gb.cells[static_cast<std::size_t>(id)].pixel_bounds.contains(to_pixel(p, 18)));
  }
}

TEST_CASE("quadrant labels") {
  const GridBuild gb = paris_grid();
  const ReferenceCell& cell = gb.cells[5];
  const GeoPoint c = cell.center;
  CHECK(quadrant_label({c.lat + 1e-5, c.lon + 1e-5}, cell) == 0);
  CHECK(quadrant_label({c.lat + 1e-5, c.lon - 1e-5}, cell) == 1);
  CHECK(quadrant_label({c.lat - 1e-5, c.lon - 1e-5}, cell) == 2);
  CHECK(quadrant_label({c.lat - 1e-5, c.lon + 1e-5}, cell) == 3);
  CHECK(quadrant_label(c, cell) == 0);

  // Oracle: signs of the pixel-space offsets (y grows southward).
  const PixelPoint cp = gb.grid.cell_center_px(cell.id);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> d(-200.0, 200.0);
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) {
    const PixelPoint p{cp.x + d(gen), cp.y + d(gen)};
    const double de = p.x - cp.x, dn = cp.y - p.y;
    const int expected = dn >= 0 ? (de >= 0 ? 0 : 1) : (de >= 0 ? 3 : 2);
    const int got = quadrant_label(from_pixel(p, 18), cell);
    CHECK(got == expected);
    seen.insert(got);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("orientation labels") {
  CHECK(orientation_label(0) == 0);
  CHECK(orientation_label(44.999) == 0);
  CHECK(orientation_label(45) == 1);
  CHECK(orientation_label(90) == 1);
  CHECK(orientation_label(180) == 2);
  CHECK(orientation_label(270) == 3);
  CHECK(orientation_label(315) == 0);
  CHECK(orientation_label(359) == 0);
  CHECK(orientation_label(-90) == 3);
  CHECK(orientation_label(720 + 100) == 1);
  CHECK_ERROR_CODE(orientation_label(INFINITY), ErrorCode::kDomain);

  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> h(-1000.0, 1000.0);
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) {
    const double x = h(gen);
    const double shifted = x + 45.0;
    const double wrapped = shifted - 360.0 * std::floor(shifted / 360.0);
    const int expected = static_cast<int>(wrapped / 90.0);
    const int got = orientation_label(x);
    CHECK(got == expected);
    seen.insert(got);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("set radius") {
  const GeoPoint a{0, 0};
  const double lon100 = 100.0 / (kEarthRadiusM * std::numbers::pi / 180.0);
  const std::vector<GeoPoint> single{a};
  const std::vector<GeoPoint> pair{a, {0, lon100}};
  const std::vector<GeoPoint> same{a, a};
  CHECK(validate_set_radius(single, 0.0));
  CHECK_FALSE(validate_set_radius(pair, 50.0));
  CHECK(validate_set_radius(pair, 100.5));
  CHECK(validate_set_radius(same, 0.0));
  CHECK_ERROR_CODE(validate_set_radius(std::vector<GeoPoint>{}, 10.0), ErrorCode::kArgument);
}

TEST_CASE("grid json round trip") {
  const GridBuild gb = paris_grid();
  const std::string text = grid_to_json(gb);
  const GridBuild back = grid_from_json(text);
  CHECK(back.grid.rows == gb.grid.rows);
  CHECK(back.grid.cols == gb.grid.cols);
  CHECK(back.grid.origin_px == gb.grid.origin_px);
  REQUIRE(back.cells.size() == gb.cells.size());
  for (std::size_t i = 0; i < gb.cells.size(); ++i) {
    CHECK(back.cells[i].center == gb.cells[i].center);
    CHECK(back.cells[i].pixel_bounds.x0 == gb.cells[i].pixel_bounds.x0);
  }
  CHECK(grid_to_json(back) == text);
  CHECK_ERROR_CODE(grid_from_json("{\"zoom\": 18}"), ErrorCode::kFormat);
  CHECK_ERROR_CODE(grid_from_json("not json"), ErrorCode::kFormat);
}
