#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mergesim/geometry.hpp"

namespace mergesim {

// Boundary slack used when deciding whether a point still belongs to a
// segment's active region.  Purely defensive against floating-point jitter
// right on a region edge; it is far below any physical tolerance.
inline constexpr double kRegionTol = 1e-9;

// ---------------------------------------------------------------------------
// Segments
// ---------------------------------------------------------------------------

// Straight lane segment.  The active region is the length x width rectangle
// centred on the segment.  `gain` is the convergence parameter p of the
// velocity field.
struct LineSegment {
  Vec2 origin;       // start of the centerline
  Vec2 direction;    // unit tangent
  double length{};   // m
  double width{};    // full lane width, m
  double gain{1.0};  // p > 0

  Vec2 point_at(double s) const { return origin + s * direction; }
  Vec2 tangent_at(double) const { return direction; }

  // Signed perpendicular offset, positive to the left of travel.
  double lateral_offset(const Vec2& p) const {
    return direction.cross(p - origin);
  }

  double along(const Vec2& p) const { return (p - origin).dot(direction); }

  bool in_region(const Vec2& p) const {
    const double s = along(p);
    return s >= -kRegionTol && s <= length + kRegionTol &&
           std::abs(lateral_offset(p)) <= 0.5 * width + kRegionTol;
  }
};

// Circular lane segment.  cw = +1 traverses the circle clockwise (decreasing
// polar angle), cw = -1 counter-clockwise.  The active region is the annulus
// of the given width intersected with the swept sector.
struct ArcSegment {
  Vec2 center;
  double radius{};
  int cw{1};  // +1 clockwise, -1 counter-clockwise
  double start_angle{};
  double end_angle{};
  double width{};
  double gain{1.0};

  // Swept angle from start to end in the travel direction, in (0, 2*pi].
  double span() const {
    const double raw = cw > 0 ? start_angle - end_angle : end_angle - start_angle;
    double w = wrap_angle_positive(raw);
    if (w <= 0.0) w = 2.0 * 3.14159265358979323846;  // full circle
    return w;
  }

  double arc_length() const { return radius * span(); }

  double angle_at(double s) const { return start_angle - cw * (s / radius); }

  Vec2 point_at(double s) const {
    const double a = angle_at(s);
    return center + Vec2{radius * std::cos(a), radius * std::sin(a)};
  }

  Vec2 tangent_at(double s) const {
    const double a = angle_at(s);
    return Vec2{std::sin(a), -std::cos(a)} * static_cast<double>(cw);
  }

  // Angle swept from the start to the point's polar angle, measured along the
  // travel direction, in [0, 2*pi).
  double sweep_to(const Vec2& p) const {
    const double phi = std::atan2(p.y - center.y, p.x - center.x);
    const double raw = cw > 0 ? start_angle - phi : phi - start_angle;
    return wrap_angle_positive(raw);
  }

  bool in_region(const Vec2& p) const {
    const double rho = (p - center).norm();
    if (std::abs(rho - radius) > 0.5 * width + kRegionTol) return false;
    const double off = sweep_to(p);
    // Accept small numeric underflow just before the start boundary.
    return off <= span() + kRegionTol || off >= 2.0 * 3.14159265358979323846 - kRegionTol;
  }
};

// ---------------------------------------------------------------------------
// Velocity fields
// ---------------------------------------------------------------------------

// Field of a straight segment: unit flow along the tangent plus p times the
// perpendicular rejection of (origin - point), which points back at the
// centerline.  Not normalized.  Returns nullopt outside the active region.
inline std::optional<Vec2> line_field(const Vec2& p, const LineSegment& seg) {
  if (!seg.in_region(p)) return std::nullopt;
  const Vec2 e = seg.origin - p;
  const double along = e.dot(seg.direction);
  return Vec2{seg.direction.x + seg.gain * (e.x - along * seg.direction.x),
              seg.direction.y + seg.gain * (e.y - along * seg.direction.y)};
}

// Field of a circular segment: tangential rotation around the center plus a
// radial term proportional to the squared-radius defect, which vanishes on
// the circle.  Not normalized.
inline std::optional<Vec2> arc_field(const Vec2& p, const ArcSegment& seg) {
  if (!seg.in_region(p)) return std::nullopt;
  const double rx = p.x - seg.center.x;
  const double ry = p.y - seg.center.y;
  const double defect = rx * rx + ry * ry - seg.radius * seg.radius;
  const double k = 4.0 * seg.gain * defect;
  return Vec2{seg.radius * ry * seg.cw - k * rx,
              -seg.radius * rx * seg.cw - k * ry};
}

// ---------------------------------------------------------------------------
// Routes
// ---------------------------------------------------------------------------

struct RoadSegment {
  std::variant<LineSegment, ArcSegment> shape;

  double length() const {
    return std::visit(
        [](const auto& s) {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, LineSegment>)
            return s.length;
          else
            return s.arc_length();
        },
        shape);
  }

  Vec2 point_at(double s) const {
    return std::visit([s](const auto& seg) { return seg.point_at(s); }, shape);
  }

  Vec2 tangent_at(double s) const {
    return std::visit([s](const auto& seg) { return seg.tangent_at(s); }, shape);
  }

  bool in_region(const Vec2& p) const {
    return std::visit([&p](const auto& seg) { return seg.in_region(p); }, shape);
  }

  std::optional<Vec2> field(const Vec2& p) const {
    return std::visit(
        [&p](const auto& seg) {
          if constexpr (std::is_same_v<std::decay_t<decltype(seg)>, LineSegment>)
            return line_field(p, seg);
          else
            return arc_field(p, seg);
        },
        shape);
  }

  // Centerline arc length of the projection of p, clamped to [0, length].
  double project(const Vec2& p) const {
    return std::visit(
        [&p, this](const auto& seg) {
          if constexpr (std::is_same_v<std::decay_t<decltype(seg)>, LineSegment>) {
            return clamp(seg.along(p), 0.0, seg.length);
          } else {
            double off = seg.sweep_to(p);
            const double sp = seg.span();
            // Points numerically past the end wrap around toward the start;
            // snap to whichever endpoint is angularly closer.
            if (off > sp) off = (off - sp < 2.0 * 3.14159265358979323846 - off) ? sp : 0.0;
            return clamp(off * seg.radius, 0.0, length());
          }
        },
        shape);
  }

  Vec2 start_point() const { return point_at(0.0); }
  Vec2 end_point() const { return point_at(length()); }
  Vec2 start_tangent() const { return tangent_at(0.0); }
  Vec2 end_tangent() const { return tangent_at(length()); }
};

// Oriented boundary used to hand a tracked point from one segment to the
// next.  The junction point lies on the boundary; `normal` points along the
// direction of travel, so crossed() flips exactly when the point passes the
// junction.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;

  bool crossed(const Vec2& p) const { return (p - point).dot(normal) > 0.0; }
};

struct RoutePosition {
  std::size_t segment_index{};
  double s{};           // arc length within the segment
  double cumulative{};  // arc length from the route start
};

// An ordered chain of segments.  finalize() derives the transition
// half-planes (perpendicular to the junction tangent) and cumulative segment
// offsets; validate() reports geometric inconsistencies.
struct Route {
  std::vector<RoadSegment> segments;
  std::vector<HalfPlane> transitions;  // exit boundary of segments[k]
  bool loop{false};
  std::vector<double> prefix;  // prefix[k] = arc length at segments[k] start

  void finalize() {
    transitions.clear();
    prefix.clear();
    double cum = 0.0;
    for (const auto& seg : segments) {
      prefix.push_back(cum);
      cum += seg.length();
      transitions.push_back({seg.end_point(), seg.end_tangent()});
    }
  }

  double total_length() const {
    return segments.empty() ? 0.0 : prefix.back() + segments.back().length();
  }

  // Checks G0/G1 continuity at interior junctions (and the wrap junction for
  // looping routes) plus basic segment sanity.  Returns human-readable issues.
  std::vector<std::string> validate(double pos_tol = 1e-6,
                                    double ang_tol = 1e-6) const {
    std::vector<std::string> issues;
    if (segments.empty()) {
      issues.push_back("route has no segments");
      return issues;
    }
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto& seg = segments[k];
      if (seg.length() <= 0.0)
        issues.push_back("segment " + std::to_string(k) + ": non-positive length");
      std::visit(
          [&](const auto& s) {
            if (s.width <= 0.0)
              issues.push_back("segment " + std::to_string(k) + ": non-positive width");
            if (s.gain <= 0.0)
              issues.push_back("segment " + std::to_string(k) + ": non-positive gain");
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, LineSegment>) {
              if (std::abs(s.direction.norm() - 1.0) > 1e-9)
                issues.push_back("segment " + std::to_string(k) + ": direction not unit");
            } else {
              if (s.radius <= 0.0)
                issues.push_back("segment " + std::to_string(k) + ": non-positive radius");
              if (s.cw != 1 && s.cw != -1)
                issues.push_back("segment " + std::to_string(k) + ": cw must be +1 or -1");
            }
          },
          seg.shape);
    }
    const std::size_t junctions = loop ? segments.size()
                                       : (segments.empty() ? 0 : segments.size() - 1);
    for (std::size_t k = 0; k < junctions; ++k) {
      const auto& a = segments[k];
      const auto& b = segments[(k + 1) % segments.size()];
      const double gap = (b.start_point() - a.end_point()).norm();
      if (gap > pos_tol)
        issues.push_back("junction " + std::to_string(k) + ": endpoint gap " +
                         std::to_string(gap));
      const double dth = std::abs(wrap_angle(
          std::atan2(b.start_tangent().y, b.start_tangent().x) -
          std::atan2(a.end_tangent().y, a.end_tangent().x)));
      if (dth > ang_tol)
        issues.push_back("junction " + std::to_string(k) + ": tangent kink " +
                         std::to_string(dth) + " rad");
    }
    return issues;
  }
};

// True once `p` has crossed the exit boundary of segments[active_index].
inline bool transition_check(const Vec2& p, const Route& route,
                             std::size_t active_index) {
  return route.transitions.at(active_index).crossed(p);
}

// Advances the active index across at most one junction.  The active segment
// keeps the point until its exit half-plane is crossed, which gives stable
// behaviour where neighbouring regions overlap.  Non-looping routes hold the
// last index.
inline std::size_t advance_active_index(const Vec2& p, const Route& route,
                                        std::size_t active_index) {
  if (!transition_check(p, route, active_index)) return active_index;
  if (active_index + 1 < route.segments.size()) return active_index + 1;
  return route.loop ? 0 : active_index;
}

struct RouteField {
  Vec2 field;
  std::size_t active_index{};
};

// Field lookup with junction hand-off.  Returns nullopt when the point is
// outside the resolved segment's active region (off the road).
inline std::optional<RouteField> evaluate_route_field(const Vec2& p,
                                                      const Route& route,
                                                      std::size_t active_index) {
  const std::size_t idx = advance_active_index(p, route, active_index);
  const auto f = route.segments.at(idx).field(p);
  if (!f) return std::nullopt;
  return RouteField{*f, idx};
}

// Arc-length coordinates of `p` on the active segment.  The caller is
// expected to have advanced the index first (see advance_active_index).
inline std::optional<RoutePosition> route_position(const Vec2& p,
                                                   const Route& route,
                                                   std::size_t active_index) {
  const auto& seg = route.segments.at(active_index);
  if (!seg.in_region(p)) return std::nullopt;
  const double s = seg.project(p);
  return RoutePosition{active_index, s, route.prefix.at(active_index) + s};
}

}  // namespace mergesim
