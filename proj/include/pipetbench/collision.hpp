#ifndef PIPETBENCH_COLLISION_HPP
#define PIPETBENCH_COLLISION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pipetbench/geometry.hpp"
#include "pipetbench/kinematics.hpp"

namespace pipetbench {

// ---------------------------------------------------------------------------
// Primitives

/// Oriented box: `pose` places the centre, `half_extents` along local axes.
struct Box {
  Pose pose;
  Vec3 half_extents = Vec3::Constant(0.01);
  std::string name;
};

/// Cylinder with a vertical axis standing on `base_center`.
struct Cylinder {
  Vec3 base_center = Vec3::Zero();
  double radius = 0.01;
  double height = 0.01;
  std::string name;
};

/// Segment swept by a sphere.
struct Capsule {
  Vec3 p0 = Vec3::Zero();
  Vec3 p1 = Vec3::Zero();
  double radius = 0.0;
};

namespace detail {

/// Minimises a convex function of t on [0, 1] by golden-section search.
template <typename F>
double convex_min_on_unit(F&& f) {
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = 0.0;
  double hi = 1.0;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < 90 && hi - lo > 1e-15; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f(0.0), f(1.0), f1, f2});
}

}  // namespace detail

inline double point_box_distance(const Vec3& p, const Box& b) {
  const Vec3 local = b.pose.inverse().apply(p);
  const Vec3 excess = (local.cwiseAbs() - b.half_extents).cwiseMax(0.0);
  return excess.norm();
}

inline double point_cylinder_distance(const Vec3& p, const Cylinder& c) {
  const double radial = std::max(0.0, (p.head<2>() - c.base_center.head<2>()).norm() - c.radius);
  const double z0 = c.base_center.z();
  const double z1 = z0 + c.height;
  const double vertical = std::max({0.0, z0 - p.z(), p.z() - z1});
  return std::hypot(radial, vertical);
}

inline bool point_in_box(const Vec3& p, const Box& b) { return point_box_distance(p, b) == 0.0; }

/// Closest distance between segments [p0,p1] and [q0,q1].
inline double segment_segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  constexpr double kEps = 1e-18;
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) return r.norm();
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + d1 * s) - (q0 + d2 * t)).norm();
}

inline double segment_box_distance(const Vec3& p0, const Vec3& p1, const Box& b) {
  const Pose inv = b.pose.inverse();
  const Vec3 a = inv.apply(p0);
  const Vec3 d = inv.apply(p1) - a;
  return detail::convex_min_on_unit([&](double t) {
    const Vec3 p = a + t * d;
    return (p.cwiseAbs() - b.half_extents).cwiseMax(0.0).norm();
  });
}

inline double segment_cylinder_distance(const Vec3& p0, const Vec3& p1, const Cylinder& c) {
  const Vec3 d = p1 - p0;
  return detail::convex_min_on_unit([&](double t) { return point_cylinder_distance(p0 + t * d, c); });
}

inline bool intersects(const Capsule& a, const Capsule& b) {
  return segment_segment_distance(a.p0, a.p1, b.p0, b.p1) <= a.radius + b.radius;
}

inline bool intersects(const Capsule& c, const Box& b) {
  return segment_box_distance(c.p0, c.p1, b) <= c.radius;
}

inline bool intersects(const Capsule& c, const Cylinder& cyl) {
  return segment_cylinder_distance(c.p0, c.p1, cyl) <= c.radius;
}

/// Separating-axis test over the 15 candidate axes.
inline bool intersects(const Box& a, const Box& b) {
  const Mat3 ra = a.pose.rotation_matrix();
  const Mat3 rb = b.pose.rotation_matrix();
  const Vec3 t = b.pose.position() - a.pose.position();
  std::array<Vec3, 15> axes;
  int n = 0;
  for (int i = 0; i < 3; ++i) axes[static_cast<std::size_t>(n++)] = ra.col(i);
  for (int i = 0; i < 3; ++i) axes[static_cast<std::size_t>(n++)] = rb.col(i);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) axes[static_cast<std::size_t>(n++)] = ra.col(i).cross(rb.col(j));
  }
  for (const Vec3& axis_raw : axes) {
    const double len = axis_raw.norm();
    if (len < 1e-12) continue;  // parallel edges, covered by face axes
    const Vec3 axis = axis_raw / len;
    double proj_a = 0.0;
    double proj_b = 0.0;
    for (int i = 0; i < 3; ++i) {
      proj_a += a.half_extents[i] * std::abs(ra.col(i).dot(axis));
      proj_b += b.half_extents[i] * std::abs(rb.col(i).dot(axis));
    }
    if (std::abs(t.dot(axis)) > proj_a + proj_b) return false;
  }
  return true;
}

namespace detail {

inline std::array<Vec3, 8> box_corners(const Box& b) {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[static_cast<std::size_t>(i)] = b.pose.apply(s.cwiseProduct(b.half_extents));
  }
  return out;
}

inline double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double point_segment_distance_2d(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

inline double point_polygon_distance_2d(const Vec2& p, const std::vector<Vec2>& hull) {
  if (hull.empty()) return std::numeric_limits<double>::infinity();
  if (hull.size() == 1) return (hull[0] - p).norm();
  if (hull.size() == 2) return point_segment_distance_2d(p, hull[0], hull[1]);
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    if (cross2(a, b, p) < 0) inside = false;
    best = std::min(best, point_segment_distance_2d(p, a, b));
  }
  return inside ? 0.0 : best;
}

}  // namespace detail

/// Exact test: slice the box by the cylinder's height slab, project the slice
/// onto the floor plane and compare its distance to the axis with the radius.
inline bool intersects(const Box& b, const Cylinder& c) {
  const double z0 = c.base_center.z();
  const double z1 = z0 + c.height;
  const auto corners = detail::box_corners(b);
  std::vector<Vec2> pts;
  for (const auto& p : corners) {
    if (p.z() >= z0 && p.z() <= z1) pts.push_back(p.head<2>());
  }
  for (int i = 0; i < 8; ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      const int j = i | (1 << axis);
      if (j == i) continue;
      const Vec3& p = corners[static_cast<std::size_t>(i)];
      const Vec3& q = corners[static_cast<std::size_t>(j)];
      for (double zp : {z0, z1}) {
        const double dz = q.z() - p.z();
        if (std::abs(dz) < 1e-15) continue;
        const double t = (zp - p.z()) / dz;
        if (t > 0.0 && t < 1.0) pts.push_back((p + t * (q - p)).head<2>());
      }
    }
  }
  if (pts.empty()) return false;
  const auto hull = detail::convex_hull(pts);
  return detail::point_polygon_distance_2d(c.base_center.head<2>(), hull) <= c.radius;
}

// ---------------------------------------------------------------------------
// Robot geometry

/// A point fixed in one of the chain frames (0 = base, 6 = flange).
struct FramePoint {
  int frame = 0;
  Vec3 local = Vec3::Zero();
};

struct BodyCapsule {
  int body = 0;
  FramePoint p0;
  FramePoint p1;
  double radius = 0.0;
};

struct BodyBox {
  int body = 0;
  int frame = kDof;
  Pose local;
  Vec3 half_extents = Vec3::Constant(0.01);
};

/**
 * Link approximation of the arm. Bodies are numbered; self-collision is
 * checked only for body pairs not listed in `ignored_pairs`.
 */
struct RobotGeometry {
  std::vector<BodyCapsule> capsules;
  std::vector<BodyBox> boxes;
  std::vector<std::pair<int, int>> ignored_pairs;

  bool ignored(int a, int b) const {
    if (a == b) return true;
    for (const auto& [x, y] : ignored_pairs) {
      if ((x == a && y == b) || (x == b && y == a)) return true;
    }
    return false;
  }
};

/// Bodies: 0 base column, 1 upper arm, 2 forearm, 3 wrist, 4 pipette case,
/// 5 pipette shaft. Adjacent bodies and the case/shaft/wrist cluster are
/// exempt from self-collision.
inline RobotGeometry default_robot_geometry(const ArmModel& arm) {
  RobotGeometry g;
  const double shaft_len = arm.tool.position().z();
  g.capsules = {
      {0, {0, {0, 0, 0.050}}, {0, {0, 0, 0.150}}, 0.045},
      {1, {1, {0, 0, 0}}, {2, {0, 0, 0}}, 0.032},
      {2, {2, {0, 0, 0}}, {4, {0, 0, 0}}, 0.028},
      {3, {4, {0, 0, 0}}, {6, {0, 0, -0.010}}, 0.028},
      {5, {6, {0, 0, 0.075}}, {6, {0, 0, shaft_len - 0.004}}, 0.004},
  };
  g.boxes = {
      {4, kDof, Pose(Vec3(0.0, 0.0, 0.035)), Vec3(0.030, 0.022, 0.035)},
  };
  g.ignored_pairs = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {3, 5}, {4, 5}};
  return g;
}

struct RobotShapes {
  std::vector<std::pair<int, Capsule>> capsules;
  std::vector<std::pair<int, Box>> boxes;
};

inline RobotShapes robot_shapes(const RobotGeometry& g, const ArmModel& arm, const JointConfig& q) {
  const auto frames = link_frames(arm, q);
  RobotShapes out;
  out.capsules.reserve(g.capsules.size());
  for (const auto& c : g.capsules) {
    Capsule cap;
    cap.p0 = frames[static_cast<std::size_t>(c.p0.frame)].apply(c.p0.local);
    cap.p1 = frames[static_cast<std::size_t>(c.p1.frame)].apply(c.p1.local);
    cap.radius = c.radius;
    out.capsules.emplace_back(c.body, cap);
  }
  for (const auto& b : g.boxes) {
    Box box;
    box.pose = frames[static_cast<std::size_t>(b.frame)] * b.local;
    box.half_extents = b.half_extents;
    out.boxes.emplace_back(b.body, box);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene

struct Scene {
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
  RobotGeometry robot;

  void validate() const {
    for (const auto& b : boxes) {
      if ((b.half_extents.array() <= 0.0).any()) {
        throw std::invalid_argument("scene box '" + b.name + "' has a non-positive dimension");
      }
    }
    for (const auto& c : cylinders) {
      if (!(c.radius > 0.0) || !(c.height > 0.0)) {
        throw std::invalid_argument("scene cylinder '" + c.name + "' has a non-positive dimension");
      }
    }
  }
};

/// True if any robot body touches a scene primitive or a non-exempt body.
/// `margin` inflates the robot against the scene (not against itself).
inline bool collide(const Scene& scene, const ArmModel& arm, const JointConfig& q, double margin = 0.0) {
  const RobotShapes shapes = robot_shapes(scene.robot, arm, q);

  for (auto [body, cap] : shapes.capsules) {
    cap.radius += margin;
    for (const auto& b : scene.boxes) {
      if (intersects(cap, b)) return true;
    }
    for (const auto& c : scene.cylinders) {
      if (intersects(cap, c)) return true;
    }
  }
  for (auto [body, box] : shapes.boxes) {
    box.half_extents.array() += margin;
    for (const auto& b : scene.boxes) {
      if (intersects(box, b)) return true;
    }
    for (const auto& c : scene.cylinders) {
      if (intersects(box, c)) return true;
    }
  }

  const auto& g = scene.robot;
  for (std::size_t i = 0; i < shapes.capsules.size(); ++i) {
    for (std::size_t j = i + 1; j < shapes.capsules.size(); ++j) {
      if (g.ignored(shapes.capsules[i].first, shapes.capsules[j].first)) continue;
      if (intersects(shapes.capsules[i].second, shapes.capsules[j].second)) return true;
    }
    for (const auto& [body, box] : shapes.boxes) {
      if (g.ignored(shapes.capsules[i].first, body)) continue;
      if (intersects(shapes.capsules[i].second, box)) return true;
    }
  }
  for (std::size_t i = 0; i < shapes.boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < shapes.boxes.size(); ++j) {
      if (g.ignored(shapes.boxes[i].first, shapes.boxes[j].first)) continue;
      if (intersects(shapes.boxes[i].second, shapes.boxes[j].second)) return true;
    }
  }
  return false;
}

/// Binds a scene and an arm into the checker shape used by the searches and
/// planners: any type with `bool in_collision(const JointConfig&) const`.
class SceneChecker {
 public:
  SceneChecker(const Scene& scene, const ArmModel& arm, double margin = 0.0)
      : scene_(&scene), arm_(&arm), margin_(margin) {}
  bool in_collision(const JointConfig& q) const { return collide(*scene_, *arm_, q, margin_); }
  const Scene& scene() const { return *scene_; }
  const ArmModel& arm() const { return *arm_; }
  double margin() const { return margin_; }

 private:
  const Scene* scene_;
  const ArmModel* arm_;
  double margin_;
};

template <typename T>
concept CollisionChecker = requires(const T& c, const JointConfig& q) {
  { c.in_collision(q) } -> std::convertible_to<bool>;
};

}  // namespace pipetbench

#endif  // PIPETBENCH_COLLISION_HPP
