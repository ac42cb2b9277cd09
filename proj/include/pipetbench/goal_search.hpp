#ifndef PIPETBENCH_GOAL_SEARCH_HPP
#define PIPETBENCH_GOAL_SEARCH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pipetbench/collision.hpp"
#include "pipetbench/geometry.hpp"
#include "pipetbench/kinematics.hpp"

namespace pipetbench {

/// How candidate poses are turned into joint configurations.
struct IkStrategy {
  const SeedBank* bank = nullptr;
  IkParams params;
  std::optional<JointConfig> preferred;  // tried first, e.g. the previous goal
};

template <CollisionChecker C>
std::optional<JointConfig> solve_feasible(const ArmModel& arm, const Pose& target, const C& checker,
                                          const IkStrategy& strategy) {
  std::optional<JointConfig> q;
  if (strategy.preferred) {
    IkParams quick = strategy.params;
    quick.restarts = 0;
    q = ik(arm, target, *strategy.preferred, quick);
    if (q && checker.in_collision(*q)) q.reset();
  }
  if (!q) {
    q = strategy.bank ? ik_nearest_seed(arm, target, *strategy.bank, strategy.params)
                      : ik(arm, target, strategy.preferred.value_or(JointConfig{}), strategy.params);
    if (q && checker.in_collision(*q)) q.reset();
  }
  return q;
}

/// 0, +step, -step, +2 step, -2 step, ... up to +-pi; pi itself appears once.
inline std::vector<double> interleaved_yaw_offsets(double step) {
  if (!(step > 0.0)) throw std::invalid_argument("yaw step must be > 0");
  std::vector<double> out{0.0};
  constexpr double kTol = 1e-12;
  for (int k = 1; k * step <= kPi + kTol; ++k) {
    const double a = k * step;
    out.push_back(a);
    if (a < kPi - kTol) out.push_back(-a);
  }
  return out;
}

struct Goal {
  Pose pose;
  JointConfig q;
  double yaw_offset = 0.0;  // rotation about the shaft relative to the nominal pose
  double tilt = 0.0;        // angle between the shaft and straight down
  std::size_t candidate = 0;
};

/**
 * Lazily walks an ordered candidate list, returning feasible goals one at a
 * time. A planner that cannot use a goal calls next() again for the
 * following candidate. Every candidate rejected by IK or collision counts
 * toward infeasible().
 */
class GoalSearch {
 public:
  struct Candidate {
    Pose pose;
    double yaw_offset = 0.0;
    double tilt = 0.0;
  };

  GoalSearch(const ArmModel& arm, std::vector<Candidate> candidates, IkStrategy strategy = {})
      : arm_(&arm), candidates_(std::move(candidates)), strategy_(std::move(strategy)) {}

  template <CollisionChecker C>
  std::optional<Goal> next(const C& checker) {
    while (cursor_ < candidates_.size()) {
      const std::size_t i = cursor_++;
      const Candidate& c = candidates_[i];
      if (auto q = solve_feasible(*arm_, c.pose, checker, strategy_)) {
        return Goal{c.pose, *q, c.yaw_offset, c.tilt, i};
      }
      ++infeasible_;
    }
    return std::nullopt;
  }

  int infeasible() const { return infeasible_; }
  bool exhausted() const { return cursor_ >= candidates_.size(); }
  std::size_t candidate_count() const { return candidates_.size(); }
  void set_preferred(const JointConfig& q) { strategy_.preferred = q; }

 private:
  const ArmModel* arm_;
  std::vector<Candidate> candidates_;
  IkStrategy strategy_;
  std::size_t cursor_ = 0;
  int infeasible_ = 0;
};

/// Candidates rotating the nominal pose about its shaft axis in interleaved order.
inline GoalSearch yaw_search(const ArmModel& arm, const Pose& nominal, double step, IkStrategy strategy = {}) {
  std::vector<GoalSearch::Candidate> c;
  const Vec3 shaft = nominal.apply_vector(Vec3::UnitZ());
  const double tilt = std::acos(std::clamp(shaft.dot(-Vec3::UnitZ()), -1.0, 1.0));
  for (double off : interleaved_yaw_offsets(step)) c.push_back({rotate_about_shaft(nominal, off), off, tilt});
  return GoalSearch(arm, std::move(c), std::move(strategy));
}

struct GoalResult {
  std::optional<Goal> goal;
  int infeasible = 0;
};

template <CollisionChecker C>
GoalResult search_reachable_yaw(const ArmModel& arm, const Pose& nominal, double step, const C& checker,
                                IkStrategy strategy = {}) {
  GoalSearch s = yaw_search(arm, nominal, step, std::move(strategy));
  GoalResult r;
  r.goal = s.next(checker);
  r.infeasible = s.infeasible();
  return r;
}

/// Tip pose at `point` with the shaft along `direction`; the tip frame's x
/// axis follows world x projected off the shaft (world y if they are parallel).
inline Pose shaft_pose(const Vec3& point, const Vec3& direction) {
  const Vec3 z = direction.normalized();
  Vec3 ref = Vec3::UnitX();
  if (std::abs(ref.dot(z)) > 0.95) ref = Vec3::UnitY();
  const Vec3 x = (ref - ref.dot(z) * z).normalized();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return Pose::from_rotation(r, point);
}

struct DisposalParams {
  double drop_height = 0.020;  // above the waste box rim
  double yaw_step = deg2rad(10.0);
  int subdivisions = 2;
};

/**
 * Disposal candidates: the vertical seed above the waste spot first, then
 * every icosphere-sector direction inside the cone combined with shaft
 * yaws. The cone apex is ignored; the tip point is always the drop spot.
 * A cone with half_angle <= 0 yields the seed alone.
 */
inline GoalSearch disposal_search(const ArmModel& arm, const Vec3& rim_center, const ConeSpec& cone,
                                  const DisposalParams& params = {}, IkStrategy strategy = {}) {
  const Vec3 spot = rim_center + Vec3(0.0, 0.0, params.drop_height);
  std::vector<GoalSearch::Candidate> c;
  c.push_back({vertical_tip_pose(spot, 0.0), 0.0, 0.0});
  if (cone.half_angle > 0.0) {
    const Vec3 down = -Vec3::UnitZ();
    for (const Vec3& dir : sample_icosphere_sector(cone, params.subdivisions)) {
      const double tilt = std::acos(std::clamp(dir.dot(down), -1.0, 1.0));
      const Pose base = tilt < 1e-9 ? vertical_tip_pose(spot, 0.0) : shaft_pose(spot, dir);
      for (double off : interleaved_yaw_offsets(params.yaw_step)) {
        if (tilt < 1e-9 && off == 0.0) continue;  // already the seed
        c.push_back({rotate_about_shaft(base, off), off, tilt});
      }
    }
  }
  return GoalSearch(arm, std::move(c), std::move(strategy));
}

template <CollisionChecker C>
GoalResult search_disposal_pose(const ArmModel& arm, const Vec3& rim_center, const ConeSpec& cone, const C& checker,
                                const DisposalParams& params = {}, IkStrategy strategy = {}) {
  GoalSearch s = disposal_search(arm, rim_center, cone, params, std::move(strategy));
  GoalResult r;
  r.goal = s.next(checker);
  r.infeasible = s.infeasible();
  return r;
}

}  // namespace pipetbench

#endif  // PIPETBENCH_GOAL_SEARCH_HPP
