#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pipetbench/planning.hpp"
#include "pipetbench/sim.hpp"

using namespace pipetbench;

namespace {

// Joint-space wall across q1 = 0 that leaves a gap for q2 >= 0.5.
struct WallChecker {
  double margin = 0.0;
  bool in_collision(const JointConfig& q) const {
    return std::abs(q.q[0]) < 0.3 + margin && q.q[1] < 0.5 + margin;
  }
};

struct FreeChecker {
  bool in_collision(const JointConfig&) const { return false; }
};

JointConfig config(double a, double b, double c = 0.0) {
  JointVec v = JointVec::Zero();
  v[0] = a;
  v[1] = b;
  v[2] = c;
  return JointConfig(v);
}

// Rest-to-rest minimum time along one straight segment under box limits.
double straight_line_time(const JointVec& d, const JointVec& vmax, const JointVec& amax) {
  const double len = d.norm();
  if (len == 0.0) return 0.0;
  const JointVec u = d / len;
  double v = 1e300, a = 1e300;
  for (int j = 0; j < kDof; ++j) {
    if (std::abs(u[j]) < 1e-15) continue;
    v = std::min(v, vmax[j] / std::abs(u[j]));
    a = std::min(a, amax[j] / std::abs(u[j]));
  }
  if (len >= v * v / a) return len / v + v / a;
  return 2.0 * std::sqrt(len / a);
}

}  // namespace

TEST(SegmentFree, DetectsThinObstacle) {
  EXPECT_FALSE(segment_free(WallChecker{}, config(-1, 0), config(1, 0), deg2rad(2.5)));
  EXPECT_TRUE(segment_free(WallChecker{}, config(-1, 0.6), config(1, 0.6), deg2rad(2.5)));
  // The endpoint itself is checked.
  EXPECT_FALSE(segment_free(WallChecker{}, config(-1, 0), config(0, 0), deg2rad(2.5)));
}

TEST(RrtConnect, DirectWhenFree) {
  const ArmModel arm = default_arm();
  auto p = rrt_connect(arm, FreeChecker{}, config(-1, 0), config(1, 0));
  ASSERT_TRUE(p);
  EXPECT_EQ(p->waypoints.size(), 2u);
}

TEST(RrtConnect, FindsWayAroundWall) {
  const ArmModel arm = default_arm();
  const WallChecker ck;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PlannerParams pp;
    pp.seed = seed;
    auto p = rrt_connect(arm, ck, config(-1, 0), config(1, 0), pp);
    ASSERT_TRUE(p) << "seed " << seed;
    EXPECT_EQ(p->waypoints.front(), config(-1, 0));
    EXPECT_EQ(p->waypoints.back(), config(1, 0));
    for (std::size_t i = 0; i + 1 < p->waypoints.size(); ++i) {
      EXPECT_TRUE(arm.within_limits(p->waypoints[i]));
      EXPECT_TRUE(segment_free(ck, p->waypoints[i], p->waypoints[i + 1], pp.edge_step));
    }
    const Path pruned = prune(ck, *p, pp);
    EXPECT_LE(pruned.length(), p->length() + 1e-12);
    EXPECT_EQ(pruned.waypoints.front(), p->waypoints.front());
    EXPECT_EQ(pruned.waypoints.back(), p->waypoints.back());
    for (std::size_t i = 0; i + 1 < pruned.waypoints.size(); ++i) {
      EXPECT_TRUE(segment_free(ck, pruned.waypoints[i], pruned.waypoints[i + 1], pp.edge_step));
    }
  }
}

TEST(RrtConnect, DeterministicPerSeed) {
  const ArmModel arm = default_arm();
  PlannerParams pp;
  pp.seed = 99;
  auto a = rrt_connect(arm, WallChecker{}, config(-1, 0), config(1, 0), pp);
  auto b = rrt_connect(arm, WallChecker{}, config(-1, 0), config(1, 0), pp);
  ASSERT_TRUE(a && b);
  ASSERT_EQ(a->waypoints.size(), b->waypoints.size());
  for (std::size_t i = 0; i < a->waypoints.size(); ++i) EXPECT_EQ(a->waypoints[i], b->waypoints[i]);
}

TEST(RrtConnect, EnclosedGoalRunsOutOfBudget) {
  const ArmModel arm = default_arm();
  struct Cage {
    bool in_collision(const JointConfig& q) const {
      const double r = std::hypot(q.q[0] - 1.0, q.q[1]);
      return r > 0.2 && r < 0.4;
    }
  };
  PlannerParams pp;
  pp.max_iterations = 300;
  EXPECT_FALSE(rrt_connect(arm, Cage{}, config(-1, 0), config(1, 0), pp));
}

TEST(Topp, SingleSegmentMatchesClosedForm) {
  const ArmModel arm = default_arm();
  for (const auto& [a, b] : {std::pair{config(0, 0), config(1.5, -0.7, 0.3)}, std::pair{config(0, 0), config(0.02, 0.0)},
                             std::pair{config(-2, 1), config(2, -1, 2)}}) {
    const Trajectory t = parameterize(Path{{a, b}}, arm, 100);
    const double oracle = straight_line_time(b.q - a.q, arm.velocity_limits(), arm.acceleration_limits());
    EXPECT_NEAR(t.duration(), oracle, 0.05 * oracle);
    EXPECT_GE(t.duration(), oracle * (1.0 - 1e-9));
  }
}

TEST(Topp, CornerStopsBetweenSegments) {
  const ArmModel arm = default_arm();
  const JointConfig a = config(0, 0), b = config(1, 0), c = config(1, 1);
  const Trajectory t = parameterize(Path{{a, b, c}}, arm, 200);
  const double oracle = straight_line_time(b.q - a.q, arm.velocity_limits(), arm.acceleration_limits()) +
                        straight_line_time(c.q - b.q, arm.velocity_limits(), arm.acceleration_limits());
  EXPECT_NEAR(t.duration(), oracle, 0.05 * oracle);
}

TEST(Topp, CoarseGridCloseToFineGrid) {
  const ArmModel arm = default_arm();
  PlannerParams pp;
  pp.seed = 5;
  auto p = rrt_connect(arm, WallChecker{}, config(-1, 0), config(1, 0), pp);
  ASSERT_TRUE(p);
  const Trajectory coarse = parameterize(*p, arm, 100);
  const Trajectory fine = parameterize(*p, arm, 20000);
  EXPECT_NEAR(coarse.duration(), fine.duration(), 0.05 * fine.duration());
  EXPECT_GE(coarse.duration(), fine.duration() * (1.0 - 1e-9));
}

TEST(Topp, ValidatorAcceptsParameterizedPaths) {
  const ArmModel arm = default_arm();
  // Edge checks are discrete, so plan against an inflated wall.
  const WallChecker ck{deg2rad(2.5)};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PlannerParams pp;
    pp.seed = seed;
    auto p = rrt_connect(arm, ck, config(-1, 0), config(1, 0), pp);
    ASSERT_TRUE(p);
    const Trajectory t = parameterize(prune(ck, *p, pp), arm);
    const ValidationReport r = validate_trajectory(t, arm, WallChecker{});
    EXPECT_TRUE(r.ok) << r.reason;
    EXPECT_LE(r.max_velocity_ratio, 1.0 + 1e-9);
    EXPECT_LE(r.max_acceleration_ratio, 1.0 + 1e-9);
    EXPECT_GT(r.max_velocity_ratio, 0.5);
  }
}

TEST(Topp, ValidatorCatchesCollisionAndSpeed) {
  const ArmModel arm = default_arm();
  const Trajectory through = parameterize(Path{{config(-1, 0), config(1, 0)}}, arm);
  const ValidationReport r = validate_trajectory(through, arm, WallChecker{});
  EXPECT_FALSE(r.ok);
  ASSERT_TRUE(r.collision_time);
  EXPECT_GT(*r.collision_time, 0.0);
  EXPECT_LT(*r.collision_time, through.duration());

  // Halving every knot time doubles speeds.
  std::vector<double> t = through.knot_times();
  for (double& x : t) x *= 0.5;
  std::vector<double> sd = through.knot_sdot();
  for (double& x : sd) x *= 2.0;
  const Trajectory fast(through.path(), through.knot_s(), sd, t);
  const ValidationReport f = validate_trajectory(fast, arm, FreeChecker{});
  EXPECT_FALSE(f.ok);
  EXPECT_GT(f.max_velocity_ratio, 1.5);
}

TEST(Topp, CsvHasHeaderAndKnots) {
  const ArmModel arm = default_arm();
  const Trajectory t = parameterize(Path{{config(0, 0), config(1, 0)}}, arm, 50);
  std::ostringstream os;
  t.write_csv(os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("t,q1,", 0), 0u);
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, t.knot_times().size());
  EXPECT_GE(rows, 50u);
}

class CycleTest : public ::testing::Test {
 protected:
  ArmModel arm = default_arm();
  SeedBank bank{arm, 300, 7};

  std::array<GoalSearch, 4> searches(double step = deg2rad(90.0)) {
    IkStrategy st;
    st.bank = &bank;
    const std::array<Vec3, 4> pts = {Vec3(0.2, -0.1, 0.1), Vec3(0.2, 0.1, 0.1), Vec3(0.25, 0.0, 0.1),
                                     Vec3(0.15, -0.15, 0.12)};
    return {yaw_search(arm, vertical_tip_pose(pts[0], 0.0), step, st),
            yaw_search(arm, vertical_tip_pose(pts[1], 0.0), step, st),
            yaw_search(arm, vertical_tip_pose(pts[2], 0.0), step, st),
            yaw_search(arm, vertical_tip_pose(pts[3], 0.0), step, st)};
  }

  static SegmentPlanner failing(std::size_t segment, int failures) {
    return [segment, failures](const JointConfig& from, const Goal& to, std::size_t k,
                               int attempt) -> std::optional<std::pair<Path, Trajectory>> {
      if (k == segment && attempt < failures) return std::nullopt;
      Path p{{from, to.q}};
      return std::make_pair(p, Trajectory());
    };
  }
};

TEST_F(CycleTest, AllSegmentsPlanned) {
  auto s = searches();
  const CycleResult r = plan_dispense_cycle(arm, JointConfig(), s, FreeChecker{});
  ASSERT_TRUE(r.ok()) << r.message;
  ASSERT_EQ(r.segments.size(), 4u);
  ASSERT_EQ(r.goals.size(), 4u);
  EXPECT_EQ(r.segments[0].path.waypoints.front(), JointConfig());
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(r.segments[k].path.waypoints.back(), r.goals[k].q);
    if (k > 0) {
      EXPECT_EQ(r.segments[k].path.waypoints.front(), r.goals[k - 1].q);
    }
    EXPECT_TRUE(validate_trajectory(r.segments[k].trajectory, arm, FreeChecker{}).ok);
  }
  EXPECT_EQ(r.total_retries, 0);
}

TEST_F(CycleTest, RetriesWithNextGoal) {
  auto s = searches();
  PlannerParams pp;
  const CycleResult r = plan_dispense_cycle(JointConfig(), s, FreeChecker{}, pp, failing(2, 2));
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.segments[2].retries, 2);
  EXPECT_EQ(r.total_retries, 2);
  EXPECT_EQ(r.goals[2].candidate, 2u);
  EXPECT_EQ(r.goals[1].candidate, 0u);
}

TEST_F(CycleTest, PlanningFailureNamesSegment) {
  auto s = searches(deg2rad(10.0));
  PlannerParams pp;
  pp.max_goal_retries = 3;
  const CycleResult r = plan_dispense_cycle(JointConfig(), s, FreeChecker{}, pp, failing(1, 1000));
  EXPECT_EQ(r.failure, CycleFailure::planning);
  EXPECT_EQ(r.failed_segment, 1u);
  EXPECT_EQ(r.total_retries, 4);
  EXPECT_EQ(r.segments.size(), 1u);
  EXPECT_NE(r.message.find("ii->iii"), std::string::npos);
}

TEST_F(CycleTest, ExhaustedSearchIsGoalSearchFailure) {
  auto s = searches(deg2rad(90.0));
  PlannerParams pp;
  pp.max_goal_retries = 10;
  const CycleResult r = plan_dispense_cycle(JointConfig(), s, FreeChecker{}, pp, failing(3, 1000));
  EXPECT_EQ(r.failure, CycleFailure::goal_search);
  EXPECT_EQ(r.failed_segment, 3u);
  EXPECT_EQ(r.total_retries, 4);
}

TEST(ScenarioCycle, DefaultScenarioPlansAndValidates) {
  const Scenario s = default_scenario();
  const SingleCycle c = plan_single_cycle(s);
  ASSERT_TRUE(c.result.ok()) << c.result.message;
  const Scene scene = build_scene(s);
  const SceneChecker ck(scene, s.arm);
  for (const auto& seg : c.result.segments) {
    const ValidationReport r = validate_trajectory(seg.trajectory, s.arm, ck);
    EXPECT_TRUE(r.ok) << r.reason;
  }
}
