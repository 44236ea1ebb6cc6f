#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace setgeo::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
/// WGS-84 equatorial radius used by Web-Mercator tiling.
inline constexpr double kMercatorRadiusM = 6'378'137.0;
inline constexpr double kMaxMercatorLat = 85.05113;
inline constexpr int kBaseTilePx = 256;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  /// Validated construction; lon = 180 is accepted as the antimeridian.
  static GeoPoint make(double lat, double lon);
  bool operator==(const GeoPoint&) const = default;
};

void validate(const GeoPoint& p);

/// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
double haversine(const GeoPoint& a, const GeoPoint& b);

/// Meters per pixel of a 256-px Web-Mercator tile pyramid.
double ground_resolution(double lat, int zoom);

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;  // grows southward
};

/// Global Web-Mercator pixel coordinates at `zoom`.
PixelPoint to_pixel(const GeoPoint& p, int zoom);
GeoPoint from_pixel(const PixelPoint& px, int zoom);

struct PixelBounds {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(const PixelPoint& p, double margin = 0.0) const {
    return p.x >= x0 - margin && p.x <= x1 + margin && p.y >= y0 - margin &&
           p.y <= y1 + margin;
  }
};

struct TileGrid {
  int zoom = 18;
  int tile_px = 400;
  double overlap = 0.125;
  std::array<double, 2> origin_px{0.0, 0.0};
  int rows = 1;
  int cols = 1;

  int stride_px() const;
  std::int64_t cell_count() const { return std::int64_t{rows} * cols; }
  PixelBounds cell_bounds(std::int64_t id) const;
  PixelPoint cell_center_px(std::int64_t id) const;
  /// Union of all cell footprints.
  PixelBounds coverage() const;
};

struct ReferenceCell {
  std::int64_t id = 0;
  GeoPoint center;
  PixelBounds pixel_bounds;
  int city_label = 0;
};

struct GridBuild {
  TileGrid grid;
  std::vector<ReferenceCell> cells;
};

struct BoundingBox {
  GeoPoint a;
  GeoPoint b;
};

/// Tiles the box with tile_px cells at stride round(tile_px * (1 - overlap)).
GridBuild build_grid(const BoundingBox& bbox, int zoom, int tile_px = 400,
                     double overlap = 0.125, int city_label = 0);

/// Nearest cell center in pixel space, lowest id on ties.
std::int64_t assign_to_cell(const PixelPoint& p, const TileGrid& grid);
std::int64_t assign_to_cell(const GeoPoint& p, const TileGrid& grid);

/// 0 = NE, 1 = NW, 2 = SW, 3 = SE around the cell center; the center is 0.
int quadrant_label(const GeoPoint& p, const ReferenceCell& cell);

/// 90-degree compass bins centered on N/E/S/W; heading clockwise from north.
int orientation_label(double heading_deg);

bool validate_set_radius(std::span<const GeoPoint> points, double radius_m);

struct GeoAttributes {
  int city = 0;
  int quadrant = 0;
  int orientation = 0;
};

std::string grid_to_json(const GridBuild& build);
GridBuild grid_from_json(const std::string& text);

}  // namespace setgeo::geo
