#include "flowmap/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "flowmap/error.hpp"

namespace flowmap::geom {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

Projection::Projection(LonLat origin)
    : origin_(origin), sin_lat0_(std::sin(origin.lat * kDeg)), cos_lat0_(std::cos(origin.lat * kDeg)) {
  if (!(std::abs(origin.lat) <= 90.0) || !(std::abs(origin.lon) <= 180.0))
    throw InputError("projection origin out of range");
}

Point Projection::forward(LonLat ll) const {
  const double lat = ll.lat * kDeg;
  const double dlon = (ll.lon - origin_.lon) * kDeg;
  const double sin_lat = std::sin(lat), cos_lat = std::cos(lat);
  const double cos_c = std::clamp(sin_lat0_ * sin_lat + cos_lat0_ * cos_lat * std::cos(dlon), -1.0, 1.0);
  const double c = std::acos(cos_c);
  const double k = c < 1e-12 ? 1.0 : c / std::sin(c);
  return {kEarthRadius * k * cos_lat * std::sin(dlon),
          kEarthRadius * k * (cos_lat0_ * sin_lat - sin_lat0_ * cos_lat * std::cos(dlon))};
}

LonLat Projection::inverse(Point p) const {
  const double rho = std::hypot(p.x, p.y);
  if (rho < 1e-9) return origin_;
  const double c = rho / kEarthRadius;
  const double sin_c = std::sin(c), cos_c = std::cos(c);
  const double lat = std::asin(std::clamp(cos_c * sin_lat0_ + p.y * sin_c * cos_lat0_ / rho, -1.0, 1.0));
  const double lon = origin_.lon * kDeg +
                     std::atan2(p.x * sin_c, rho * cos_lat0_ * cos_c - p.y * sin_lat0_ * sin_c);
  double lon_deg = lon / kDeg;
  if (lon_deg > 180.0) lon_deg -= 360.0;
  if (lon_deg < -180.0) lon_deg += 360.0;
  return {lon_deg, lat / kDeg};
}

Projection Projection::centred_on(const std::vector<LonLat>& coords) {
  if (coords.empty()) throw InputError("no coordinates to centre a projection on");
  double lon = 0.0, lat = 0.0;
  for (const LonLat& c : coords) {
    lon += c.lon;
    lat += c.lat;
  }
  const double n = static_cast<double>(coords.size());
  return Projection({lon / n, lat / n});
}

std::vector<LonLat> decode_polyline(const std::string& encoded, int precision) {
  const double factor = std::pow(10.0, precision);
  std::vector<LonLat> out;
  std::size_t i = 0;
  std::int64_t lat = 0, lon = 0;
  auto next = [&]() -> std::int64_t {
    std::int64_t result = 0;
    int shift = 0;
    for (;;) {
      if (i >= encoded.size()) throw BackendError("truncated encoded polyline");
      const int b = encoded[i++] - 63;
      if (b < 0 || b > 63) throw BackendError("invalid character in encoded polyline");
      result |= static_cast<std::int64_t>(b & 0x1f) << shift;
      shift += 5;
      if (b < 0x20) break;
      if (shift > 60) throw BackendError("encoded polyline value overflow");
    }
    return (result & 1) ? ~(result >> 1) : (result >> 1);
  };
  while (i < encoded.size()) {
    lat += next();
    lon += next();
    out.push_back({static_cast<double>(lon) / factor, static_cast<double>(lat) / factor});
  }
  return out;
}

std::string encode_polyline(const std::vector<LonLat>& coords, int precision) {
  const double factor = std::pow(10.0, precision);
  std::string out;
  auto put = [&](std::int64_t v) {
    std::uint64_t u = v < 0 ? ~(static_cast<std::uint64_t>(v) << 1) : static_cast<std::uint64_t>(v) << 1;
    while (u >= 0x20) {
      out.push_back(static_cast<char>((0x20 | (u & 0x1f)) + 63));
      u >>= 5;
    }
    out.push_back(static_cast<char>(u + 63));
  };
  std::int64_t plat = 0, plon = 0;
  for (const LonLat& c : coords) {
    const auto lat = std::llround(c.lat * factor);
    const auto lon = std::llround(c.lon * factor);
    put(lat - plat);
    put(lon - plon);
    plat = lat;
    plon = lon;
  }
  return out;
}

}  // namespace flowmap::geom
