#include "nfsense/hull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include "nfsense/error.hpp"

namespace nfsense {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sub(Vec3 const& a, Vec3 const& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(Vec3 const& a, Vec3 const& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(Vec3 const& a, Vec3 const& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(Vec3 const& a) { return std::sqrt(dot(a, a)); }

double cross2(Vec3 const& o, Vec3 const& a, Vec3 const& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Andrew's monotone chain; returns counter-clockwise hull without collinear points.
std::vector<Vec3> hull_2d(std::vector<Vec3> pts, double eps) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec3> h(2 * pts.size());
  std::size_t k = 0;
  for (auto const& p : pts) {
    while (k >= 2 && cross2(h[k - 2], h[k - 1], p) <= eps) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

struct Face {
  std::array<std::size_t, 3> v;
  Vec3 normal; // unit, outward
  double offset;
  bool alive = true;
};

Face make_face(std::vector<Vec3> const& p, std::size_t a, std::size_t b, std::size_t c) {
  Vec3 n = cross(sub(p[b], p[a]), sub(p[c], p[a]));
  double const len = norm(n);
  if (len > 0.0)
    for (auto& x : n) x /= len;
  return {{a, b, c}, n, dot(n, p[a]), true};
}

// Incremental hull. Points within `eps` of a facet plane count as inside it.
std::vector<Face> hull_3d(std::vector<Vec3> const& p, double eps) {
  std::size_t const n = p.size();
  // Initial simplex from extreme points.
  std::size_t i0 = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (p[i] < p[i0]) i0 = i;
  std::size_t i1 = i0;
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (double d = norm(sub(p[i], p[i0])); d > best) best = d, i1 = i;
  if (best <= eps) fail(ErrorKind::Numerical, "k-space points are degenerate (all coincident)");
  Vec3 const dir = sub(p[i1], p[i0]);
  std::size_t i2 = i0;
  best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (double d = norm(cross(dir, sub(p[i], p[i0]))) / norm(dir); d > best) best = d, i2 = i;
  if (best <= eps) fail(ErrorKind::Numerical, "k-space points are degenerate (collinear)");
  Vec3 const nrm = cross(dir, sub(p[i2], p[i0]));
  std::size_t i3 = i0;
  best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (double d = std::abs(dot(nrm, sub(p[i], p[i0]))) / norm(nrm); d > best) best = d, i3 = i;
  if (best <= eps) fail(ErrorKind::Numerical, "k-space points are degenerate (coplanar)");

  Vec3 centre{};
  for (auto idx : {i0, i1, i2, i3})
    for (int a = 0; a < 3; ++a) centre[a] += 0.25 * p[idx][a];

  std::vector<Face> faces;
  auto add_oriented = [&](std::size_t a, std::size_t b, std::size_t c) {
    Face f = make_face(p, a, b, c);
    if (dot(f.normal, centre) - f.offset > 0.0) f = make_face(p, a, c, b);
    faces.push_back(f);
  };
  add_oriented(i0, i1, i2);
  add_oriented(i0, i1, i3);
  add_oriented(i0, i2, i3);
  add_oriented(i1, i2, i3);

  // Farthest points first so the hull grows quickly and most later points test inside.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norm(sub(p[a], centre)) > norm(sub(p[b], centre)); });

  std::vector<std::size_t> visible;
  std::map<std::pair<std::size_t, std::size_t>, int> edge_count;
  for (std::size_t idx : order) {
    if (idx == i0 || idx == i1 || idx == i2 || idx == i3) continue;
    visible.clear();
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].alive && dot(faces[f].normal, p[idx]) - faces[f].offset > eps) visible.push_back(f);
    if (visible.empty()) continue;
    // Horizon: directed edges of visible faces whose reverse is not also visible.
    edge_count.clear();
    for (std::size_t f : visible) {
      auto const& v = faces[f].v;
      for (int e = 0; e < 3; ++e) edge_count[{v[e], v[(e + 1) % 3]}] += 1;
    }
    for (std::size_t f : visible) faces[f].alive = false;
    for (auto const& [edge, count] : edge_count) {
      if (edge_count.count({edge.second, edge.first})) continue;
      faces.push_back(make_face(p, edge.first, edge.second, idx));
    }
    if (faces.size() > 4 * n + 64) {
      faces.erase(std::remove_if(faces.begin(), faces.end(), [](Face const& f) { return !f.alive; }), faces.end());
    }
  }
  faces.erase(std::remove_if(faces.begin(), faces.end(), [](Face const& f) { return !f.alive; }), faces.end());
  return faces;
}

} // namespace

ConvexHull ConvexHull::fit(RealMatrix const& points) {
  Index const d = points.cols();
  require(d == 2 || d == 3, "convex hull: points must be 2D or 3D");
  require(points.allFinite(), "convex hull: points must be finite");
  if (points.rows() < d + 1)
    fail(ErrorKind::Numerical, "convex hull needs at least " + std::to_string(d + 1) + " points");

  std::vector<Vec3> pts(static_cast<std::size_t>(points.rows()));
  double radius = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    Vec3 v{0.0, 0.0, 0.0};
    for (Index a = 0; a < d; ++a) v[static_cast<std::size_t>(a)] = points(i, a);
    pts[static_cast<std::size_t>(i)] = v;
    radius = std::max(radius, norm(v));
  }
  ConvexHull hull;
  hull.dimension_ = static_cast<int>(d);
  hull.radius_ = radius;
  double const scale = radius > 0.0 ? radius : 1.0;

  if (d == 2) {
    auto const h = hull_2d(pts, 1e-12 * scale * scale);
    if (h.size() < 3) fail(ErrorKind::Numerical, "k-space points are degenerate (collinear)");
    hull.vertices_ = h;
    for (std::size_t i = 0; i < h.size(); ++i) {
      Vec3 const& a = h[i];
      Vec3 const& b = h[(i + 1) % h.size()];
      Vec3 n{b[1] - a[1], -(b[0] - a[0]), 0.0};
      double const len = norm(n);
      for (auto& x : n) x /= len;
      hull.facets_.push_back({n, dot(n, a)});
    }
    return hull;
  }

  auto const faces = hull_3d(pts, 1e-10 * scale);
  std::vector<bool> used(pts.size(), false);
  for (auto const& f : faces) {
    if (norm(f.normal) == 0.0) continue;
    hull.facets_.push_back({f.normal, f.offset});
    for (auto v : f.v) used[v] = true;
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (used[i]) hull.vertices_.push_back(pts[i]);
  return hull;
}

double ConvexHull::excess(std::span<double const> point) const {
  Vec3 q{0.0, 0.0, 0.0};
  for (std::size_t a = 0; a < point.size() && a < 3; ++a) q[a] = point[a];
  if (dimension_ == 2) q[2] = 0.0;
  double worst = -std::numeric_limits<double>::infinity();
  for (auto const& f : facets_) worst = std::max(worst, dot(f.normal, q) - f.offset);
  return worst;
}

} // namespace nfsense
