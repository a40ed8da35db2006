#pragma once

#include <string>
#include <vector>

#include "flowmap/geom.hpp"

namespace flowmap::geom {

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

/// Spherical azimuthal equidistant projection around an origin. Distances
/// from the origin are exact on the sphere; nearby distances are close to
/// true ground distances at city scale.
class Projection {
 public:
  static constexpr double kEarthRadius = 6371008.8;

  Projection() = default;
  explicit Projection(LonLat origin);

  LonLat origin() const { return origin_; }
  Point forward(LonLat ll) const;
  LonLat inverse(Point p) const;

  // Centred on the mean of the given coordinates.
  static Projection centred_on(const std::vector<LonLat>& coords);

 private:
  LonLat origin_;
  double sin_lat0_ = 0.0;
  double cos_lat0_ = 1.0;
};

/// Encoded polyline (Google/OSRM format) at the given decimal precision.
std::vector<LonLat> decode_polyline(const std::string& encoded, int precision = 6);
std::string encode_polyline(const std::vector<LonLat>& coords, int precision = 6);

}  // namespace flowmap::geom
