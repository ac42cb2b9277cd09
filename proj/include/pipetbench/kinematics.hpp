#ifndef PIPETBENCH_KINEMATICS_HPP
#define PIPETBENCH_KINEMATICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pipetbench/geometry.hpp"

namespace pipetbench {

inline constexpr int kDof = 6;

using JointVec = Eigen::Matrix<double, kDof, 1>;
using Jacobian = Eigen::Matrix<double, 6, kDof>;

/// Six joint angles in radians.
struct JointConfig {
  JointVec q = JointVec::Zero();

  JointConfig() = default;
  explicit JointConfig(const JointVec& v) : q(v) {}
  JointConfig(std::initializer_list<double> vals) {
    if (vals.size() != kDof) throw std::invalid_argument("JointConfig needs six values");
    int i = 0;
    for (double v : vals) q[i++] = v;
  }

  double operator[](int i) const { return q[i]; }
  double& operator[](int i) { return q[i]; }
  bool operator==(const JointConfig& o) const { return q == o.q; }
};

/// Standard Denavit-Hartenberg row: Rz(theta + offset) Tz(d) Tx(a) Rx(alpha).
struct DhRow {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

struct JointLimit {
  double lower = -kPi;
  double upper = kPi;
  double max_velocity = 1.0;
  double max_acceleration = 4.0;
};

/**
 * Serial 6R arm described by a DH table. `tool` maps the flange frame to the
 * pipette shaft tip; the shaft runs along the tip frame's +z.
 */
struct ArmModel {
  std::array<DhRow, kDof> dh{};
  std::array<JointLimit, kDof> limits{};
  Pose base;
  Pose tool;

  void validate() const {
    for (int i = 0; i < kDof; ++i) {
      const auto& l = limits[static_cast<std::size_t>(i)];
      if (!(l.lower < l.upper)) {
        throw std::invalid_argument("joint " + std::to_string(i + 1) + ": lower limit must be < upper");
      }
      if (!(l.max_velocity > 0.0) || !(l.max_acceleration > 0.0)) {
        throw std::invalid_argument("joint " + std::to_string(i + 1) +
                                    ": velocity and acceleration limits must be > 0");
      }
    }
  }

  bool within_limits(const JointConfig& c, double tol = 1e-12) const {
    for (int i = 0; i < kDof; ++i) {
      const auto& l = limits[static_cast<std::size_t>(i)];
      if (c[i] < l.lower - tol || c[i] > l.upper + tol) return false;
    }
    return true;
  }

  JointConfig clamp(JointConfig c) const {
    for (int i = 0; i < kDof; ++i) {
      const auto& l = limits[static_cast<std::size_t>(i)];
      c[i] = std::clamp(c[i], l.lower, l.upper);
    }
    return c;
  }

  JointVec velocity_limits() const {
    JointVec v;
    for (int i = 0; i < kDof; ++i) v[i] = limits[static_cast<std::size_t>(i)].max_velocity;
    return v;
  }

  JointVec acceleration_limits() const {
    JointVec v;
    for (int i = 0; i < kDof; ++i) v[i] = limits[static_cast<std::size_t>(i)].max_acceleration;
    return v;
  }
};

/**
 * Desk-scale arm with roughly 340 mm reach: elbow manipulator with a
 * spherical wrist and a 100 mm pipette shaft below the flange.
 */
inline ArmModel default_arm() {
  ArmModel arm;
  arm.dh = {{
      {0.0, -kPi / 2, 0.180, 0.0},
      {0.165, 0.0, 0.0, -kPi / 2},
      {0.012, -kPi / 2, 0.0, 0.0},
      {0.0, kPi / 2, 0.1775, 0.0},
      {0.0, -kPi / 2, 0.0, 0.0},
      {0.0, 0.0, 0.070, 0.0},
  }};
  arm.limits = {{
      {deg2rad(-170), deg2rad(170), deg2rad(115), deg2rad(345)},
      {deg2rad(-100), deg2rad(100), deg2rad(115), deg2rad(345)},
      {deg2rad(-150), deg2rad(150), deg2rad(115), deg2rad(345)},
      {deg2rad(-270), deg2rad(270), deg2rad(170), deg2rad(460)},
      {deg2rad(-125), deg2rad(125), deg2rad(170), deg2rad(460)},
      {deg2rad(-360), deg2rad(360), deg2rad(170), deg2rad(460)},
  }};
  arm.tool = Pose(Vec3(0.0, 0.0, 0.100));
  return arm;
}

inline Pose dh_transform(const DhRow& row, double q) {
  const double th = q + row.theta_offset;
  const Quat rz(Eigen::AngleAxisd(th, Vec3::UnitZ()));
  const Quat rx(Eigen::AngleAxisd(row.alpha, Vec3::UnitX()));
  const Vec3 p(row.a * std::cos(th), row.a * std::sin(th), row.d);
  return Pose(p, rz * rx);
}

/// Frames of the chain: frames[0] = base, frames[i] = after joint i.
inline std::array<Pose, kDof + 1> link_frames(const ArmModel& arm, const JointConfig& q) {
  std::array<Pose, kDof + 1> f;
  f[0] = arm.base;
  for (int i = 0; i < kDof; ++i) {
    f[static_cast<std::size_t>(i + 1)] = f[static_cast<std::size_t>(i)] * dh_transform(arm.dh[static_cast<std::size_t>(i)], q[i]);
  }
  return f;
}

struct FkResult {
  Pose flange;
  Pose tip;
};

inline FkResult fk(const ArmModel& arm, const JointConfig& q) {
  const auto frames = link_frames(arm, q);
  FkResult r;
  r.flange = frames[kDof];
  r.tip = r.flange * arm.tool;
  return r;
}

/// Geometric Jacobian of the tip: rows 0-2 linear, rows 3-5 angular velocity.
inline Jacobian tip_jacobian(const ArmModel& arm, const JointConfig& q) {
  const auto frames = link_frames(arm, q);
  const Vec3 tip = (frames[kDof] * arm.tool).position();
  Jacobian j;
  for (int i = 0; i < kDof; ++i) {
    const Pose& f = frames[static_cast<std::size_t>(i)];
    const Vec3 z = f.apply_vector(Vec3::UnitZ());
    j.block<3, 1>(0, i) = z.cross(tip - f.position());
    j.block<3, 1>(3, i) = z;
  }
  return j;
}

/// Twist-like error (position, rotation vector) taking `current` to `target`.
inline Eigen::Matrix<double, 6, 1> pose_error(const Pose& current, const Pose& target) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.position() - current.position();
  const Eigen::AngleAxisd aa(target.rotation() * current.rotation().conjugate());
  e.tail<3>() = aa.axis() * aa.angle();
  return e;
}

struct IkParams {
  int max_iterations = 200;
  double damping = 1e-3;
  int restarts = 5;
  double position_tolerance = 1e-7;
  double orientation_tolerance = 1e-6;
  double max_step = 0.3;  // rad per iteration, per joint
  std::uint64_t seed = 0;
};

namespace detail {

/// Shifts joints by whole turns when that brings them back inside the range.
inline JointConfig wrap_into_limits(const ArmModel& arm, JointConfig q) {
  for (int k = 0; k < kDof; ++k) {
    const auto& l = arm.limits[static_cast<std::size_t>(k)];
    if (q[k] > l.upper && q[k] - 2.0 * kPi >= l.lower) q[k] -= 2.0 * kPi;
    if (q[k] < l.lower && q[k] + 2.0 * kPi <= l.upper) q[k] += 2.0 * kPi;
  }
  return q;
}

inline std::optional<JointConfig> dls_solve(const ArmModel& arm, const Pose& target, JointConfig q,
                                            const IkParams& p) {
  for (int it = 0; it < p.max_iterations; ++it) {
    const Pose cur = fk(arm, q).tip;
    const auto err = pose_error(cur, target);
    if (err.head<3>().norm() <= p.position_tolerance && err.tail<3>().norm() <= p.orientation_tolerance) {
      return q;
    }
    Jacobian j = tip_jacobian(arm, q);
    JointVec dq = JointVec::Zero();
    // Joints sitting on a limit and pushed outward are frozen and the step is
    // re-solved with the remaining joints.
    for (int pass = 0; pass < kDof; ++pass) {
      const Eigen::Matrix<double, 6, 6> a =
          j * j.transpose() + p.damping * p.damping * Eigen::Matrix<double, 6, 6>::Identity();
      dq = j.transpose() * a.ldlt().solve(err);
      bool frozen = false;
      for (int k = 0; k < kDof; ++k) {
        const auto& l = arm.limits[static_cast<std::size_t>(k)];
        const bool at_low = q[k] <= l.lower + 1e-12 && dq[k] < 0.0;
        const bool at_high = q[k] >= l.upper - 1e-12 && dq[k] > 0.0;
        if ((at_low || at_high) && !j.col(k).isZero()) {
          j.col(k).setZero();
          frozen = true;
        }
      }
      if (!frozen) break;
    }
    const double biggest = dq.cwiseAbs().maxCoeff();
    if (biggest > p.max_step) dq *= p.max_step / biggest;
    q.q += dq;
    q = arm.clamp(wrap_into_limits(arm, q));
  }
  const auto err = pose_error(fk(arm, q).tip, target);
  if (err.head<3>().norm() <= p.position_tolerance && err.tail<3>().norm() <= p.orientation_tolerance) {
    return q;
  }
  return std::nullopt;
}

}  // namespace detail

inline JointConfig random_config(const ArmModel& arm, std::mt19937_64& rng) {
  JointConfig c;
  for (int i = 0; i < kDof; ++i) {
    const auto& l = arm.limits[static_cast<std::size_t>(i)];
    c[i] = std::uniform_real_distribution<double>(l.lower, l.upper)(rng);
  }
  return c;
}

/**
 * Damped least-squares IK for the tip frame.
 *
 * Starts from `seed`; on failure retries from up to `restarts` random
 * configurations drawn from a generator seeded with `params.seed`, so the
 * result is a deterministic function of its inputs. Returns nullopt when no
 * attempt converges inside the joint limits.
 */
inline std::optional<JointConfig> ik(const ArmModel& arm, const Pose& target, const JointConfig& seed,
                                     const IkParams& params = {}) {
  if (!target.position().allFinite()) return std::nullopt;
  if (auto q = detail::dls_solve(arm, target, arm.clamp(seed), params)) {
    if (arm.within_limits(*q)) return q;
  }
  std::mt19937_64 rng(params.seed);
  for (int r = 0; r < params.restarts; ++r) {
    const JointConfig start = random_config(arm, rng);
    if (auto q = detail::dls_solve(arm, target, start, params)) {
      if (arm.within_limits(*q)) return q;
    }
  }
  return std::nullopt;
}

/// Tip pose pointing the shaft straight down at `tip_point`, rotated by `yaw`
/// about the shaft.
inline Pose vertical_tip_pose(const Vec3& tip_point, double yaw) {
  // z down, x along world +x when yaw == 0
  const Quat down(Eigen::AngleAxisd(kPi, Vec3::UnitX()));
  return Pose(tip_point, Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())) * down);
}

/// Same tip point, shaft rotated about its own axis by `offset`.
inline Pose rotate_about_shaft(const Pose& tip_pose, double offset) {
  return tip_pose * Pose(Vec3::Zero(), Quat(Eigen::AngleAxisd(offset, Vec3::UnitZ())));
}

/// Seeds spread over the workspace; ik_nearest_seed picks the one whose tip
/// is closest to the target.
class SeedBank {
 public:
  SeedBank(const ArmModel& arm, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    configs_.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      JointConfig c = random_config(arm, rng);
      tips_.push_back(fk(arm, c).tip);
      configs_.push_back(c);
    }
  }

  const JointConfig& nearest(const Pose& target, double orientation_weight = 0.1) const {
    return configs_[nearest_k(target, 1, orientation_weight).front()];
  }

  /// Indices of the `k` seeds with the lowest tip distance, closest first.
  std::vector<std::size_t> nearest_k(const Pose& target, std::size_t k, double orientation_weight = 0.1) const {
    std::vector<std::pair<double, std::size_t>> cost;
    cost.reserve(configs_.size());
    for (std::size_t i = 0; i < configs_.size(); ++i) {
      cost.emplace_back((tips_[i].position() - target.position()).norm() +
                            orientation_weight * rotation_distance(tips_[i].rotation(), target.rotation()),
                        i);
    }
    k = std::min(k, cost.size());
    std::partial_sort(cost.begin(), cost.begin() + static_cast<std::ptrdiff_t>(k), cost.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(cost[i].second);
    return out;
  }

  const JointConfig& config(std::size_t i) const { return configs_.at(i); }

  std::size_t size() const { return configs_.size(); }

 private:
  std::vector<JointConfig> configs_;
  std::vector<Pose> tips_;
};

/// Nearest-seed strategy: try the `tries` closest bank seeds, then the
/// random restarts of `ik`.
inline std::optional<JointConfig> ik_nearest_seed(const ArmModel& arm, const Pose& target, const SeedBank& bank,
                                                  const IkParams& params = {}, std::size_t tries = 8) {
  if (bank.size() == 0) return ik(arm, target, JointConfig{}, params);
  const auto idx = bank.nearest_k(target, tries);
  IkParams local = params;
  local.restarts = 0;
  for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
    if (auto q = ik(arm, target, bank.config(idx[i]), local)) return q;
  }
  return ik(arm, target, bank.config(idx.back()), params);
}

}  // namespace pipetbench

#endif  // PIPETBENCH_KINEMATICS_HPP
