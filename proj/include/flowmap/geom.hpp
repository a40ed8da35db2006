#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowmap::geom {

// All coordinates are planar meters. Point identity is decided on a fixed
// grid so that "exactly equal" is deterministic across platforms.
inline constexpr double kGridStep = 1e-6;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
double norm(Point p);
double distance(Point a, Point b);

struct PointKey {
  std::int64_t x = 0;
  std::int64_t y = 0;

  friend auto operator<=>(const PointKey&, const PointKey&) = default;
};

struct PointKeyHash {
  std::size_t operator()(const PointKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

PointKey key_of(Point p);
// Rounds a point onto the quantization grid.
Point snap(Point p);
inline bool same_point(Point a, Point b) { return key_of(a) == key_of(b); }

struct BBox {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  BBox expanded(double d) const { return {min_x - d, min_y - d, max_x + d, max_y + d}; }
  bool intersects(const BBox& o) const {
    return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
  }
  bool contains(const BBox& o) const {
    return min_x <= o.min_x && o.max_x <= max_x && min_y <= o.min_y && o.max_y <= max_y;
  }
};

BBox bbox_of(std::span<const Point> pts);

/// Ordered polyline with at least two points and no two consecutive points
/// equal on the quantization grid.
class LineString {
 public:
  explicit LineString(std::vector<Point> points);

  /// Drops consecutive duplicates; returns nullopt if fewer than two
  /// distinct points remain.
  static std::optional<LineString> try_make(std::vector<Point> points);

  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  Point front() const { return points_.front(); }
  Point back() const { return points_.back(); }
  bool is_closed() const { return same_point(front(), back()); }
  double length() const;
  BBox bbox() const { return bbox_of(points_); }
  LineString reversed() const;
  // Same line with every vertex rounded onto the grid.
  LineString snapped() const;

  friend bool operator==(const LineString&, const LineString&) = default;

 private:
  std::vector<Point> points_;
};

struct Trajectory {
  std::string id;
  std::vector<Point> points;
  std::vector<double> timestamps;  // empty or one per point

  // Throws GeometryError when fewer than two points or timestamps are
  // inconsistent.
  void validate() const;
  double length() const;
};

// Closest point on segment [a, b]; t receives the segment parameter.
Point closest_on_segment(Point p, Point a, Point b, double* t = nullptr);
double point_segment_distance(Point p, Point a, Point b);
double distance_to_line(const LineString& line, Point p);

struct LinePosition {
  Point point;
  double arc_length = 0.0;
  double distance = 0.0;
  std::size_t segment = 0;
};

// Nearest point on the line; ties go to the smallest arc length.
LinePosition project_onto(const LineString& line, Point p);
LinePosition project_onto(std::span<const Point> line, Point p);

// Point at the given arc length, clamped to [0, length].
Point interpolate(const LineString& line, double arc_length);
std::vector<double> cumulative_lengths(std::span<const Point> pts);
// Every vertex plus extra points so no gap exceeds step.
std::vector<Point> densify(std::span<const Point> pts, double step);

/// Flat-cap buffer: points within eps of the axis, without the rounded
/// extensions past the two boundary points. Interior joins are round.
class FlatCapBuffer {
 public:
  FlatCapBuffer(LineString axis, double eps);

  const LineString& axis() const { return axis_; }
  double eps() const { return eps_; }
  BBox bbox() const { return axis_.bbox().expanded(eps_); }

  bool contains(Point p) const;
  bool contains(const LineString& line) const;

 private:
  // Parameter intervals of segment [p, q] covered by the buffer pieces.
  bool covers_segment(Point p, Point q) const;

  LineString axis_;
  double eps_;
};

FlatCapBuffer buffer_flat(const LineString& line, double eps);
bool contains(const FlatCapBuffer& buffer, const LineString& line);

// DTW with Euclidean local cost, symmetric step pattern (diagonal weight 2),
// normalized by len(a) + len(b).
double dtw_normalized(std::span<const Point> a, std::span<const Point> b);

inline constexpr double kHausdorffDensify = 1.0;

// Symmetric Hausdorff distance, taken over both lines densified at 1 m and
// measured against the opposite polyline.
double hausdorff(std::span<const Point> a, std::span<const Point> b);
double hausdorff(const LineString& a, const LineString& b);

// Douglas-Peucker. Endpoints are kept; closed lines keep their farthest
// vertex so the result stays a valid line.
LineString simplify(const LineString& line, double eps_d);

struct Transect {
  double anchor = 0.0;  // arc length on the parent line
  Point center;
  LineString segment;
};

inline constexpr double kAnchorTolerance = 1e-9;

std::vector<Transect> transects(const LineString& line, double eps_t, double delta_t);

struct SegmentHit {
  Point point;
  double t = 0.0;  // parameter on the first segment
  double u = 0.0;  // parameter on the second segment
};

// Intersection points of two closed segments. Collinear overlaps report the
// two overlap endpoints.
std::vector<SegmentHit> intersect_segments(Point a0, Point a1, Point b0, Point b1);

}  // namespace flowmap::geom
