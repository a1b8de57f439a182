#pragma once

#include <array>
#include <vector>

#include "nudge/errors.hpp"

namespace nudge {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline bool operator==(const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }

using Polyline = std::vector<Vec2>;

double distance(const Vec2& a, const Vec2& b);

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// Cumulative arc lengths; out[0] = 0, out[i] = length up to vertex i.
std::vector<double> cumulative_lengths(const Polyline& line);

/// Heading (radians) of the polyline at arc length s, clamped to the ends.
double heading_at(const Polyline& line, const std::vector<double>& cum, double s);

/// Closest point on the polyline to p: returns (arc length of projection,
/// squared distance).
struct Projection {
  double arc_length = 0.0;
  double dist2 = 0.0;
};
Projection project_onto(const Polyline& line, const Vec2& p);

/// Signed heading change of the polyline over [s0, s0 + lookahead], clamped to
/// the available length. Positive = left (counterclockwise).
double heading_change(const Polyline& line, const std::vector<double>& cum, double s0,
                      double lookahead);

/// Point reached after `arc` meters along a constant-curvature path starting
/// at the origin with heading +x. Positive curvature bends left (+y).
/// Series-stable as curvature * arc approaches zero.
Vec2 arc_point(double curvature, double arc);

/// Piecewise straight / constant-curvature / straight route in the ego frame.
/// heading(s) = 0 for s < onset, grows linearly with curvature over the arc
/// segment, then stays at the exit heading. Straight routes use arc_length 0.
/// The route passes through the origin at s = 0 heading +x; s may be negative
/// (the approach is straight).
struct RoutePath {
  double onset = 0.0;       // arc start, meters ahead of the origin
  double curvature = 0.0;   // signed, 1/m; positive turns left
  double arc_length = 0.0;  // meters of arc; 0 for straight routes

  Vec2 position(double s) const;
  double heading(double s) const;
  /// Polyline sampled every `spacing` meters over [s_begin, s_end].
  Polyline sample(double s_begin, double s_end, double spacing) const;
};

}  // namespace nudge
