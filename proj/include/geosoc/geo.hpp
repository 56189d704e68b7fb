#pragma once

#include <cmath>
#include <numbers>

#include "geosoc/error.hpp"

namespace geosoc {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline bool in_bounds(const GeoPoint& p) noexcept {
  return p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

inline void check_coordinate(const GeoPoint& p) {
  if (!in_bounds(p)) {
    throw Error(Errc::InvalidCoordinate,
                "lat " + std::to_string(p.lat) + ", lon " + std::to_string(p.lon));
  }
}

/// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
inline double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  check_coordinate(a);
  check_coordinate(b);
  constexpr double kDegToRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s_lat = std::sin(dlat / 2.0);
  const double s_lon = std::sin(dlon / 2.0);
  double h = s_lat * s_lat +
             std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) * s_lon * s_lon;
  if (h > 1.0) h = 1.0;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

}  // namespace geosoc
