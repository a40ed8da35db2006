#include "flowmap/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "flowmap/error.hpp"

namespace flowmap::geom {

namespace {

constexpr double kContainTolerance = 1e-9;

std::int64_t quantize(double v) {
  if (!std::isfinite(v)) throw GeometryError("non-finite coordinate");
  return std::llround(v / kGridStep);
}

// Intersection of [lo, hi] with {t : c0 + c1 t in [lower, upper]}.
void clip_linear(double c0, double c1, double lower, double upper, double& lo, double& hi) {
  if (std::abs(c1) < 1e-15) {
    if (c0 < lower || c0 > upper) hi = lo - 1.0;
    return;
  }
  double t0 = (lower - c0) / c1;
  double t1 = (upper - c0) / c1;
  if (t0 > t1) std::swap(t0, t1);
  lo = std::max(lo, t0);
  hi = std::min(hi, t1);
}

}  // namespace

double norm(Point p) { return std::hypot(p.x, p.y); }
double distance(Point a, Point b) { return norm(a - b); }

PointKey key_of(Point p) { return {quantize(p.x), quantize(p.y)}; }

Point snap(Point p) {
  const PointKey k = key_of(p);
  return {static_cast<double>(k.x) * kGridStep, static_cast<double>(k.y) * kGridStep};
}

BBox bbox_of(std::span<const Point> pts) {
  BBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Point& p : pts) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

LineString::LineString(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw GeometryError("linestring needs at least two points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i].x) || !std::isfinite(points_[i].y))
      throw GeometryError("non-finite coordinate in linestring");
    if (i > 0 && same_point(points_[i - 1], points_[i]))
      throw GeometryError("consecutive duplicate points in linestring");
  }
}

std::optional<LineString> LineString::try_make(std::vector<Point> points) {
  std::vector<Point> out;
  out.reserve(points.size());
  for (const Point& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
    if (out.empty() || !same_point(out.back(), p)) out.push_back(p);
  }
  if (out.size() < 2) return std::nullopt;
  return LineString(std::move(out));
}

double LineString::length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) len += distance(points_[i - 1], points_[i]);
  return len;
}

LineString LineString::reversed() const {
  std::vector<Point> r(points_.rbegin(), points_.rend());
  return LineString(std::move(r));
}

LineString LineString::snapped() const {
  std::vector<Point> s;
  s.reserve(points_.size());
  for (const Point& p : points_) s.push_back(snap(p));
  auto line = try_make(std::move(s));
  if (!line) throw GeometryError("linestring collapses on the quantization grid");
  return *line;
}

void Trajectory::validate() const {
  if (points.size() < 2) throw GeometryError("trajectory " + id + " has fewer than two points");
  if (!timestamps.empty()) {
    if (timestamps.size() != points.size())
      throw GeometryError("trajectory " + id + " has mismatched timestamps");
    if (!std::is_sorted(timestamps.begin(), timestamps.end()))
      throw GeometryError("trajectory " + id + " timestamps decrease");
  }
}

double Trajectory::length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) len += distance(points[i - 1], points[i]);
  return len;
}

Point closest_on_segment(Point p, Point a, Point b, double* t) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  double s = 0.0;
  if (len2 > 0.0) s = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  if (t) *t = s;
  return a + s * ab;
}

double point_segment_distance(Point p, Point a, Point b) {
  return distance(p, closest_on_segment(p, a, b));
}

double distance_to_line(const LineString& line, Point p) {
  double best = std::numeric_limits<double>::infinity();
  const auto& pts = line.points();
  for (std::size_t i = 1; i < pts.size(); ++i)
    best = std::min(best, point_segment_distance(p, pts[i - 1], pts[i]));
  return best;
}

LinePosition project_onto(std::span<const Point> pts, Point p) {
  LinePosition best;
  best.distance = std::numeric_limits<double>::infinity();
  if (pts.size() == 1) {
    best.point = pts[0];
    best.distance = distance(p, pts[0]);
    return best;
  }
  double arc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg_len = distance(pts[i - 1], pts[i]);
    double t = 0.0;
    const Point c = closest_on_segment(p, pts[i - 1], pts[i], &t);
    const double d = distance(p, c);
    // Strictly closer only, so equal distances keep the smaller arc length.
    if (d < best.distance - 1e-12) {
      best.point = c;
      best.distance = d;
      best.arc_length = arc + t * seg_len;
      best.segment = i - 1;
    }
    arc += seg_len;
  }
  return best;
}

LinePosition project_onto(const LineString& line, Point p) {
  return project_onto(std::span<const Point>(line.points()), p);
}

std::vector<double> cumulative_lengths(std::span<const Point> pts) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + distance(pts[i - 1], pts[i]);
  return cum;
}

Point interpolate(const LineString& line, double arc_length) {
  const auto& pts = line.points();
  if (arc_length <= 0.0) return pts.front();
  double acc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg = distance(pts[i - 1], pts[i]);
    if (acc + seg >= arc_length) {
      const double t = seg > 0.0 ? (arc_length - acc) / seg : 0.0;
      return pts[i - 1] + t * (pts[i] - pts[i - 1]);
    }
    acc += seg;
  }
  return pts.back();
}

std::vector<Point> densify(std::span<const Point> pts, double step) {
  std::vector<Point> out;
  if (pts.empty()) return out;
  out.push_back(pts[0]);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg = distance(pts[i - 1], pts[i]);
    const auto pieces = static_cast<std::size_t>(std::ceil(seg / step));
    for (std::size_t k = 1; k < pieces; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(pieces);
      out.push_back(pts[i - 1] + t * (pts[i] - pts[i - 1]));
    }
    out.push_back(pts[i]);
  }
  return out;
}

FlatCapBuffer::FlatCapBuffer(LineString axis, double eps) : axis_(std::move(axis)), eps_(eps) {
  if (!(eps > 0.0)) throw GeometryError("buffer tolerance must be positive");
  if (!(axis_.length() > 0.0)) throw GeometryError("cannot buffer a zero-length line");
}

bool FlatCapBuffer::contains(Point p) const {
  const auto& pts = axis_.points();
  const double r = eps_ + kContainTolerance;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Point a = pts[i - 1];
    const Point d = pts[i] - a;
    const double len = norm(d);
    const Point u = (1.0 / len) * d;
    const Point n{-u.y, u.x};
    const double along = dot(p - a, u);
    const double across = dot(p - a, n);
    if (along >= -kContainTolerance && along <= len + kContainTolerance && std::abs(across) <= r)
      return true;
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i)
    if (distance(p, pts[i]) <= r) return true;
  return false;
}

bool FlatCapBuffer::covers_segment(Point p, Point q) const {
  const Point pq = q - p;
  const double seg_len = norm(pq);
  if (seg_len == 0.0) return contains(p);

  const auto& pts = axis_.points();
  const double r = eps_ + kContainTolerance;
  std::vector<std::pair<double, double>> cover;

  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Point a = pts[i - 1];
    const Point d = pts[i] - a;
    const double len = norm(d);
    const Point u = (1.0 / len) * d;
    const Point n{-u.y, u.x};
    double lo = 0.0, hi = 1.0;
    clip_linear(dot(p - a, u), dot(pq, u), -kContainTolerance, len + kContainTolerance, lo, hi);
    clip_linear(dot(p - a, n), dot(pq, n), -r, r, lo, hi);
    if (lo <= hi) cover.emplace_back(lo, hi);
  }
  // Round joins at interior vertices.
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Point w = p - pts[i];
    const double qa = dot(pq, pq);
    const double qb = 2.0 * dot(w, pq);
    const double qc = dot(w, w) - r * r;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) continue;
    const double s = std::sqrt(disc);
    const double lo = std::max(0.0, (-qb - s) / (2.0 * qa));
    const double hi = std::min(1.0, (-qb + s) / (2.0 * qa));
    if (lo <= hi) cover.emplace_back(lo, hi);
  }

  std::sort(cover.begin(), cover.end());
  const double gap = kContainTolerance / seg_len;
  double reach = 0.0;
  bool started = false;
  for (const auto& [lo, hi] : cover) {
    if (!started) {
      if (lo > gap) return false;
      started = true;
    } else if (lo > reach + gap) {
      return false;
    }
    reach = std::max(reach, hi);
    if (reach >= 1.0 - gap) return true;
  }
  return started && reach >= 1.0 - gap;
}

bool FlatCapBuffer::contains(const LineString& line) const {
  if (!bbox().contains(line.bbox())) return false;
  const auto& pts = line.points();
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!covers_segment(pts[i - 1], pts[i])) return false;
  return true;
}

FlatCapBuffer buffer_flat(const LineString& line, double eps) { return FlatCapBuffer(line, eps); }

bool contains(const FlatCapBuffer& buffer, const LineString& line) { return buffer.contains(line); }

double dtw_normalized(std::span<const Point> a, std::span<const Point> b) {
  if (a.empty() || b.empty()) throw GeometryError("dtw of an empty sequence");
  const std::size_t n = a.size(), m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m, inf), cur(m, inf);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = distance(a[i], b[j]);
      if (i == 0 && j == 0) {
        cur[j] = d;
        continue;
      }
      double best = inf;
      if (i > 0) best = std::min(best, prev[j] + d);
      if (j > 0) best = std::min(best, cur[j - 1] + d);
      if (i > 0 && j > 0) best = std::min(best, prev[j - 1] + 2.0 * d);
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1] / static_cast<double>(n + m);
}

namespace {

double directed_hausdorff(std::span<const Point> from, std::span<const Point> to) {
  const std::vector<Point> dense = densify(from, kHausdorffDensify);
  double worst = 0.0;
  for (const Point& p : dense) {
    double best = std::numeric_limits<double>::infinity();
    if (to.size() == 1) {
      best = distance(p, to[0]);
    } else {
      for (std::size_t i = 1; i < to.size() && best > worst; ++i)
        best = std::min(best, point_segment_distance(p, to[i - 1], to[i]));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

double hausdorff(std::span<const Point> a, std::span<const Point> b) {
  if (a.empty() || b.empty()) throw GeometryError("hausdorff of an empty geometry");
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

double hausdorff(const LineString& a, const LineString& b) {
  return hausdorff(std::span<const Point>(a.points()), std::span<const Point>(b.points()));
}

LineString simplify(const LineString& line, double eps_d) {
  if (eps_d < 0.0) throw GeometryError("simplify tolerance must be non-negative");
  const auto& pts = line.points();
  const std::size_t n = pts.size();
  if (n <= 2) return line;
  std::vector<bool> keep(n, false);
  keep.front() = keep.back() = true;

  std::vector<std::pair<std::size_t, std::size_t>> stack;
  if (line.is_closed()) {
    std::size_t far = 1;
    double far_d = -1.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double d = distance(pts[i], pts[0]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    keep[far] = true;
    stack.emplace_back(0, far);
    stack.emplace_back(far, n - 1);
  } else {
    stack.emplace_back(0, n - 1);
  }
  while (!stack.empty()) {
    const auto [first, last] = stack.back();
    stack.pop_back();
    if (last <= first + 1) continue;
    double worst = -1.0;
    std::size_t index = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const double d = point_segment_distance(pts[i], pts[first], pts[last]);
      if (d > worst) {
        worst = d;
        index = i;
      }
    }
    if (worst > eps_d) {
      keep[index] = true;
      stack.emplace_back(first, index);
      stack.emplace_back(index, last);
    }
  }
  std::vector<Point> out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(pts[i]);
  return LineString(std::move(out));
}

std::vector<Transect> transects(const LineString& line, double eps_t, double delta_t) {
  if (!(eps_t > 0.0) || !(delta_t > 0.0))
    throw GeometryError("transect tolerance and spacing must be positive");
  const auto& pts = line.points();
  const std::vector<double> cum = cumulative_lengths(pts);
  const double total = cum.back();

  std::vector<double> anchors;
  if (total > delta_t) {
    for (int k = 1; k * delta_t < total - kAnchorTolerance; ++k) anchors.push_back(k * delta_t);
  } else {
    anchors.push_back(total / 2.0);
  }

  std::vector<Transect> out;
  out.reserve(anchors.size());
  std::size_t seg = 0;
  for (double s : anchors) {
    // Anchoring segment: the one with cum[seg] <= s < cum[seg + 1].
    while (seg + 2 < pts.size() && cum[seg + 1] <= s) ++seg;
    const Point a = pts[seg], b = pts[seg + 1];
    const double seg_len = cum[seg + 1] - cum[seg];
    const Point u = (1.0 / seg_len) * (b - a);
    const Point n{-u.y, u.x};
    const Point c = a + (s - cum[seg]) * u;
    out.push_back(Transect{s, c, LineString({c - eps_t * n, c + eps_t * n})});
  }
  return out;
}

std::vector<SegmentHit> intersect_segments(Point a0, Point a1, Point b0, Point b1) {
  std::vector<SegmentHit> hits;
  const Point r = a1 - a0;
  const Point s = b1 - b0;
  const double denom = cross(r, s);
  const double scale = norm(r) * norm(s);
  if (scale == 0.0) return hits;

  if (std::abs(denom) > 1e-12 * scale) {
    const Point w = b0 - a0;
    const double t = cross(w, s) / denom;
    const double u = cross(w, r) / denom;
    const double tol = 1e-12;
    if (t >= -tol && t <= 1.0 + tol && u >= -tol && u <= 1.0 + tol) {
      const double tc = std::clamp(t, 0.0, 1.0);
      hits.push_back({a0 + tc * r, tc, std::clamp(u, 0.0, 1.0)});
    }
    return hits;
  }
  // Parallel: only collinear overlaps intersect.
  if (std::abs(cross(b0 - a0, r)) > 1e-12 * norm(r) * std::max(1.0, norm(b0 - a0))) return hits;
  const double rr = dot(r, r);
  double t0 = dot(b0 - a0, r) / rr;
  double t1 = dot(b1 - a0, r) / rr;
  if (t0 > t1) std::swap(t0, t1);
  const double lo = std::max(0.0, t0);
  const double hi = std::min(1.0, t1);
  if (lo > hi) return hits;
  const double ss = dot(s, s);
  auto on_b = [&](double t) { return dot(a0 + t * r - b0, s) / ss; };
  hits.push_back({a0 + lo * r, lo, on_b(lo)});
  if (hi > lo) hits.push_back({a0 + hi * r, hi, on_b(hi)});
  return hits;
}

}  // namespace flowmap::geom
