#ifndef PIPETBENCH_GEOMETRY_HPP
#define PIPETBENCH_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace pipetbench {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/**
 * Rigid transform in 3-space.
 *
 * The rotation is kept as a unit quaternion; matrices are derived on demand.
 * A pose maps points from its child frame into its parent frame, so
 * `(a * b).apply(p) == a.apply(b.apply(p))`.
 */
class Pose {
 public:
  Pose() : position_(Vec3::Zero()), rotation_(Quat::Identity()) {}
  Pose(const Vec3& position, const Quat& rotation)
      : position_(position), rotation_(rotation.normalized()) {}
  explicit Pose(const Vec3& position) : position_(position), rotation_(Quat::Identity()) {}

  static Pose identity() { return Pose(); }

  static Pose from_matrix(const Mat4& m) {
    return Pose(m.block<3, 1>(0, 3), Quat(Mat3(m.block<3, 3>(0, 0))));
  }

  static Pose from_rotation(const Mat3& r, const Vec3& p = Vec3::Zero()) { return Pose(p, Quat(r)); }

  /// Rotation about the world z axis followed by a translation.
  static Pose from_xyz_yaw(double x, double y, double z, double yaw) {
    return Pose(Vec3(x, y, z), Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
  }

  const Vec3& position() const { return position_; }
  const Quat& rotation() const { return rotation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = rotation_matrix();
    m.block<3, 1>(0, 3) = position_;
    return m;
  }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + position_; }
  Vec3 apply_vector(const Vec3& v) const { return rotation_ * v; }

  Pose inverse() const {
    const Quat qi = rotation_.conjugate();
    return Pose(-(qi * position_), qi);
  }

  Pose operator*(const Pose& other) const {
    return Pose(rotation_ * other.position_ + position_, rotation_ * other.rotation_);
  }

  /// Heading of the local x axis projected on the world xy plane.
  double yaw() const {
    const Vec3 x = rotation_ * Vec3::UnitX();
    return std::atan2(x.y(), x.x());
  }

  bool is_valid(double tol = 1e-9) const {
    return position_.allFinite() && std::abs(rotation_.norm() - 1.0) <= tol;
  }

 private:
  Vec3 position_;
  Quat rotation_;
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }

/// Angle of the relative rotation between two orientations, in [0, pi].
inline double rotation_distance(const Quat& a, const Quat& b) {
  return Eigen::AngleAxisd(a.conjugate() * b).angle();
}

/// Cone of admissible directions around an axis.
struct ConeSpec {
  Vec3 apex = Vec3::Zero();
  Vec3 axis = -Vec3::UnitZ();
  double half_angle = deg2rad(30.0);

  bool is_valid() const {
    return half_angle > 0.0 && half_angle < kPi / 2.0 && std::abs(axis.norm() - 1.0) <= 1e-9;
  }

  bool contains(const Vec3& dir, double eps = 1e-12) const {
    return dir.normalized().dot(axis) >= std::cos(half_angle) - eps;
  }
};

/// Vertices of an icosahedron subdivided `subdivisions` times and projected
/// onto the unit sphere. Vertex count is 10 * 4^k + 2.
inline std::vector<Vec3> icosphere_vertices(int subdivisions) {
  if (subdivisions < 0 || subdivisions > 4) {
    throw std::invalid_argument("icosphere subdivisions must be in [0, 4], got " +
                                std::to_string(subdivisions));
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  for (auto& v : verts) v.normalize();

  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1},
  };

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint_cache;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint_cache.find(key); it != midpoint_cache.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint_cache.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return verts;
}

/**
 * Icosphere vertices that fall inside the cone, ordered by angular distance
 * from the axis (ties by construction order). An empty result means the cone
 * is too narrow for this subdivision level.
 *
 * half_angle >= pi returns the whole sphere.
 */
inline std::vector<Vec3> sample_icosphere_sector(const ConeSpec& cone, int subdivisions) {
  const auto verts = icosphere_vertices(subdivisions);
  const Vec3 axis = cone.axis.normalized();
  const double cos_limit = std::cos(std::min(cone.half_angle, kPi));
  std::vector<std::pair<double, std::size_t>> keep;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const double c = verts[i].dot(axis);
    if (cone.half_angle >= kPi || c >= cos_limit) keep.emplace_back(-c, i);
  }
  std::stable_sort(keep.begin(), keep.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Vec3> out;
  out.reserve(keep.size());
  for (const auto& [neg_cos, i] : keep) out.push_back(verts[i]);
  return out;
}

}  // namespace pipetbench

#endif  // PIPETBENCH_GEOMETRY_HPP
