#include "setgeo/geodesy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "setgeo/error.hpp"

namespace setgeo::geo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double world_px(int zoom) { return kBaseTilePx * std::ldexp(1.0, zoom); }

void check_zoom(int zoom) {
  require(zoom >= 0 && zoom <= 30, ErrorCode::kArgument,
          "zoom must be in [0, 30], got " + std::to_string(zoom));
}

void check_mercator_lat(double lat) {
  if (!(std::abs(lat) < kMaxMercatorLat)) {
    fail(ErrorCode::kDomain, "latitude " + std::to_string(lat) +
                                 " is outside the Web-Mercator range");
  }
}

}  // namespace

GeoPoint GeoPoint::make(double lat, double lon) {
  GeoPoint p{lat, lon};
  validate(p);
  return p;
}

void validate(const GeoPoint& p) {
  require(std::isfinite(p.lat) && p.lat >= -90.0 && p.lat <= 90.0, ErrorCode::kDomain,
          "latitude out of range: " + std::to_string(p.lat));
  require(std::isfinite(p.lon) && p.lon >= -180.0 && p.lon <= 180.0, ErrorCode::kDomain,
          "longitude out of range: " + std::to_string(p.lon));
}

double haversine(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double s_lat = std::sin((lat2 - lat1) / 2.0);
  const double s_lon = std::sin((b.lon - a.lon) * kDegToRad / 2.0);
  // Every term is invariant under swapping a and b, so the result is exactly
  // symmetric.
  double h = s_lat * s_lat + std::cos(lat1) * std::cos(lat2) * s_lon * s_lon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double ground_resolution(double lat, int zoom) {
  check_zoom(zoom);
  check_mercator_lat(lat);
  return 2.0 * std::numbers::pi * kMercatorRadiusM * std::cos(lat * kDegToRad) /
         world_px(zoom);
}

PixelPoint to_pixel(const GeoPoint& p, int zoom) {
  check_zoom(zoom);
  check_mercator_lat(p.lat);
  const double size = world_px(zoom);
  const double lat = p.lat * kDegToRad;
  const double x = (p.lon + 180.0) / 360.0 * size;
  const double y =
      (0.5 - std::log(std::tan(std::numbers::pi / 4.0 + lat / 2.0)) /
                 (2.0 * std::numbers::pi)) *
      size;
  return {x, y};
}

GeoPoint from_pixel(const PixelPoint& px, int zoom) {
  check_zoom(zoom);
  const double size = world_px(zoom);
  const double lon = px.x / size * 360.0 - 180.0;
  const double n = std::numbers::pi * (1.0 - 2.0 * px.y / size);
  const double lat = std::atan(std::sinh(n)) * kRadToDeg;
  return {lat, lon};
}

int TileGrid::stride_px() const {
  return static_cast<int>(std::lround(tile_px * (1.0 - overlap)));
}

PixelBounds TileGrid::cell_bounds(std::int64_t id) const {
  require(id >= 0 && id < cell_count(), ErrorCode::kArgument,
          "cell id " + std::to_string(id) + " not in grid");
  const double stride = stride_px();
  const double x0 = origin_px[0] + static_cast<double>(id % cols) * stride;
  const double y0 = origin_px[1] + static_cast<double>(id / cols) * stride;
  return {x0, y0, x0 + tile_px, y0 + tile_px};
}

PixelPoint TileGrid::cell_center_px(std::int64_t id) const {
  const auto b = cell_bounds(id);
  return {b.x0 + tile_px / 2.0, b.y0 + tile_px / 2.0};
}

PixelBounds TileGrid::coverage() const {
  const double stride = stride_px();
  return {origin_px[0], origin_px[1],
          origin_px[0] + (cols - 1) * stride + tile_px,
          origin_px[1] + (rows - 1) * stride + tile_px};
}

GridBuild build_grid(const BoundingBox& bbox, int zoom, int tile_px, double overlap,
                     int city_label) {
  validate(bbox.a);
  validate(bbox.b);
  check_zoom(zoom);
  require(tile_px >= 1, ErrorCode::kConfig, "tile_px must be positive");
  require(std::isfinite(overlap) && overlap >= 0.0 && overlap < 1.0, ErrorCode::kConfig,
          "overlap must be in [0, 1), got " + std::to_string(overlap));
  require(bbox.a.lat != bbox.b.lat && bbox.a.lon != bbox.b.lon, ErrorCode::kArgument,
          "bounding box is degenerate");

  TileGrid grid;
  grid.zoom = zoom;
  grid.tile_px = tile_px;
  grid.overlap = overlap;
  const int stride = grid.stride_px();
  require(stride >= 1, ErrorCode::kConfig, "overlap leaves a stride below one pixel");

  const GeoPoint nw{std::max(bbox.a.lat, bbox.b.lat), std::min(bbox.a.lon, bbox.b.lon)};
  const GeoPoint se{std::min(bbox.a.lat, bbox.b.lat), std::max(bbox.a.lon, bbox.b.lon)};
  const PixelPoint p0 = to_pixel(nw, zoom);
  const PixelPoint p1 = to_pixel(se, zoom);
  grid.origin_px = {p0.x, p0.y};

  // Sub-micro-pixel slack absorbs projection round-off on exact multiples.
  constexpr double kSlack = 1e-6;
  auto count = [&](double span) {
    if (span <= tile_px + kSlack) return 1;
    return static_cast<int>(std::ceil((span - tile_px - kSlack) / stride)) + 1;
  };
  grid.cols = count(p1.x - p0.x);
  grid.rows = count(p1.y - p0.y);

  GridBuild out{grid, {}};
  out.cells.reserve(static_cast<std::size_t>(grid.cell_count()));
  for (std::int64_t id = 0; id < grid.cell_count(); ++id) {
    ReferenceCell cell;
    cell.id = id;
    cell.pixel_bounds = grid.cell_bounds(id);
    cell.center = from_pixel(grid.cell_center_px(id), zoom);
    cell.city_label = city_label;
    out.cells.push_back(cell);
  }
  return out;
}

std::int64_t assign_to_cell(const PixelPoint& p, const TileGrid& grid) {
  if (!grid.coverage().contains(p)) {
    fail(ErrorCode::kOutOfCoverage, "point (" + std::to_string(p.x) + ", " +
                                        std::to_string(p.y) + ") px is outside the grid");
  }
  const double stride = grid.stride_px();
  const double half = grid.tile_px / 2.0;
  auto nearest_index = [&](double v, double origin, int count) {
    const double k = std::round((v - origin - half) / stride);
    return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(count - 1)));
  };
  const int c0 = nearest_index(p.x, grid.origin_px[0], grid.cols);
  const int r0 = nearest_index(p.y, grid.origin_px[1], grid.rows);

  // The rounded index is only a candidate; scanning its neighbourhood in id
  // order resolves exact ties toward the lowest id.
  std::int64_t best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int r = std::max(0, r0 - 1); r <= std::min(grid.rows - 1, r0 + 1); ++r) {
    for (int c = std::max(0, c0 - 1); c <= std::min(grid.cols - 1, c0 + 1); ++c) {
      const std::int64_t id = std::int64_t{r} * grid.cols + c;
      const PixelPoint center = grid.cell_center_px(id);
      const double dx = p.x - center.x;
      const double dy = p.y - center.y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = id;
      }
    }
  }
  return best;
}

std::int64_t assign_to_cell(const GeoPoint& p, const TileGrid& grid) {
  validate(p);
  return assign_to_cell(to_pixel(p, grid.zoom), grid);
}

int quadrant_label(const GeoPoint& p, const ReferenceCell& cell) {
  // Web-Mercator is monotone in both axes, so the signs of the pixel-space
  // east/north offsets equal the signs of the lon/lat offsets.
  const bool east = p.lon - cell.center.lon >= 0.0;
  const bool north = p.lat - cell.center.lat >= 0.0;
  if (north) return east ? 0 : 1;
  return east ? 3 : 2;
}

int orientation_label(double heading_deg) {
  require(std::isfinite(heading_deg), ErrorCode::kDomain, "heading must be finite");
  double h = std::fmod(heading_deg, 360.0);
  if (h < 0.0) h += 360.0;
  return static_cast<int>(std::floor((h + 45.0) / 90.0)) % 4;
}

bool validate_set_radius(std::span<const GeoPoint> points, double radius_m) {
  require(!points.empty(), ErrorCode::kArgument, "point set is empty");
  require(std::isfinite(radius_m) && radius_m >= 0.0, ErrorCode::kArgument,
          "radius must be a non-negative number");
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (haversine(points[i], points[j]) > radius_m) return false;
    }
  }
  return true;
}

std::string grid_to_json(const GridBuild& build) {
  const TileGrid& g = build.grid;
  nlohmann::ordered_json j;
  j["zoom"] = g.zoom;
  j["tile_px"] = g.tile_px;
  j["overlap"] = g.overlap;
  j["origin_px"] = {g.origin_px[0], g.origin_px[1]};
  j["rows"] = g.rows;
  j["cols"] = g.cols;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : build.cells) {
    nlohmann::ordered_json cj;
    cj["id"] = c.id;
    cj["center"] = {c.center.lat, c.center.lon};
    cj["bounds_px"] = {c.pixel_bounds.x0, c.pixel_bounds.y0, c.pixel_bounds.x1,
                       c.pixel_bounds.y1};
    cj["city"] = c.city_label;
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j.dump(2);
}

GridBuild grid_from_json(const std::string& text) {
  GridBuild out;
  try {
    const auto j = nlohmann::json::parse(text);
    TileGrid& g = out.grid;
    g.zoom = j.at("zoom").get<int>();
    g.tile_px = j.at("tile_px").get<int>();
    g.overlap = j.at("overlap").get<double>();
    g.origin_px = {j.at("origin_px").at(0).get<double>(),
                   j.at("origin_px").at(1).get<double>()};
    g.rows = j.at("rows").get<int>();
    g.cols = j.at("cols").get<int>();
    for (const auto& cj : j.at("cells")) {
      ReferenceCell c;
      c.id = cj.at("id").get<std::int64_t>();
      c.center = {cj.at("center").at(0).get<double>(), cj.at("center").at(1).get<double>()};
      const auto& b = cj.at("bounds_px");
      c.pixel_bounds = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                        b.at(3).get<double>()};
      c.city_label = cj.at("city").get<int>();
      out.cells.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("invalid grid JSON: ") + e.what());
  }
  const TileGrid& g = out.grid;
  require(g.rows >= 1 && g.cols >= 1 && g.tile_px >= 1 && g.overlap >= 0.0 &&
              g.overlap < 1.0 && g.stride_px() >= 1,
          ErrorCode::kFormat, "grid JSON violates grid invariants");
  require(static_cast<std::int64_t>(out.cells.size()) == g.cell_count(), ErrorCode::kFormat,
          "grid JSON cell count does not match rows * cols");
  return out;
}

}  // namespace setgeo::geo
