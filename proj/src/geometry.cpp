#include "nudge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nudge {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

double distance(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

std::vector<double> cumulative_lengths(const Polyline& line) {
  std::vector<double> cum(line.size(), 0.0);
  for (size_t i = 1; i < line.size(); ++i) {
    cum[i] = cum[i - 1] + distance(line[i - 1], line[i]);
  }
  return cum;
}

double heading_at(const Polyline& line, const std::vector<double>& cum, double s) {
  if (line.size() < 2) throw UsageError("heading_at: polyline needs >= 2 points");
  const double total = cum.back();
  s = std::clamp(s, 0.0, total);
  // Segment containing s; degenerate (zero-length) segments are skipped.
  size_t i = 1;
  while (i + 1 < line.size() && (cum[i] < s || cum[i] == cum[i - 1])) ++i;
  const Vec2& a = line[i - 1];
  const Vec2& b = line[i];
  return std::atan2(b.y - a.y, b.x - a.x);
}

Projection project_onto(const Polyline& line, const Vec2& p) {
  if (line.size() < 2) throw UsageError("project_onto: polyline needs >= 2 points");
  Projection best;
  best.dist2 = std::numeric_limits<double>::infinity();
  double run = 0.0;
  for (size_t i = 1; i < line.size(); ++i) {
    const Vec2& a = line[i - 1];
    const Vec2& b = line[i];
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0) {
      t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
      t = std::clamp(t, 0.0, 1.0);
    }
    const double qx = a.x + t * vx;
    const double qy = a.y + t * vy;
    const double d2 = (p.x - qx) * (p.x - qx) + (p.y - qy) * (p.y - qy);
    const double seg = std::sqrt(len2);
    if (d2 < best.dist2) {
      best.dist2 = d2;
      best.arc_length = run + t * seg;
    }
    run += seg;
  }
  return best;
}

double heading_change(const Polyline& line, const std::vector<double>& cum, double s0,
                      double lookahead) {
  const double h0 = heading_at(line, cum, s0);
  const double h1 = heading_at(line, cum, s0 + lookahead);
  return wrap_angle(h1 - h0);
}

Vec2 arc_point(double curvature, double arc) {
  const double theta = curvature * arc;
  if (std::abs(theta) < 1e-3) {
    const double t2 = theta * theta;
    const double f = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;           // sin(t)/t
    const double g = theta / 2.0 - theta * t2 / 24.0 + theta * t2 * t2 / 720.0;  // (1-cos t)/t
    return {arc * f, arc * g};
  }
  return {arc * std::sin(theta) / theta, arc * (1.0 - std::cos(theta)) / theta};
}

Vec2 RoutePath::position(double s) const {
  if (s <= onset || curvature == 0.0 || arc_length <= 0.0) {
    return {s, 0.0};
  }
  const double k = curvature;
  const double arc_end = onset + arc_length;
  const Vec2 arc_origin{onset, 0.0};
  if (s <= arc_end) {
    const double u = s - onset;
    return {arc_origin.x + std::sin(k * u) / k, arc_origin.y + (1.0 - std::cos(k * u)) / k};
  }
  // Straight exit from the arc end at the exit heading.
  const double psi = k * arc_length;
  const Vec2 exit{arc_origin.x + std::sin(psi) / k, arc_origin.y + (1.0 - std::cos(psi)) / k};
  const double r = s - arc_end;
  return {exit.x + r * std::cos(psi), exit.y + r * std::sin(psi)};
}

double RoutePath::heading(double s) const {
  if (s <= onset || curvature == 0.0 || arc_length <= 0.0) return 0.0;
  const double u = std::min(s - onset, arc_length);
  return curvature * u;
}

Polyline RoutePath::sample(double s_begin, double s_end, double spacing) const {
  if (spacing <= 0.0 || s_end <= s_begin) {
    throw UsageError("RoutePath::sample: bad range or spacing");
  }
  Polyline out;
  const int n = static_cast<int>(std::ceil((s_end - s_begin) / spacing));
  out.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(s_begin + i * spacing, s_end);
    out.push_back(position(s));
  }
  return out;
}

}  // namespace nudge
