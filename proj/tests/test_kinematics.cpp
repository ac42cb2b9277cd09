#include <gtest/gtest.h>

#include <random>

#include "pipetbench/kinematics.hpp"

using namespace pipetbench;

namespace {

// Standard DH link transform written out as a homogeneous matrix.
Mat4 dh_matrix(double a, double alpha, double d, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta), ca = std::cos(alpha), sa = std::sin(alpha);
  Mat4 m;
  m << ct, -st * ca, st * sa, a * ct,  //
      st, ct * ca, -ct * sa, a * st,   //
      0, sa, ca, d,                    //
      0, 0, 0, 1;
  return m;
}

Mat4 fk_oracle(const ArmModel& arm, const JointConfig& q) {
  Mat4 m = arm.base.matrix();
  for (int i = 0; i < kDof; ++i) {
    const DhRow& r = arm.dh[static_cast<std::size_t>(i)];
    m = m * dh_matrix(r.a, r.alpha, r.d, q[i] + r.theta_offset);
  }
  return m * arm.tool.matrix();
}

bool matches(const ArmModel& arm, const JointConfig& q, const Pose& target, double pos_tol = 1e-6,
             double rot_tol = 1e-5) {
  const Pose t = fk(arm, q).tip;
  return (t.position() - target.position()).norm() < pos_tol &&
         rotation_distance(t.rotation(), target.rotation()) < rot_tol;
}

}  // namespace

TEST(Fk, HomePose) {
  const ArmModel arm = default_arm();
  const FkResult r = fk(arm, JointConfig{});
  EXPECT_LT((r.tip.position() - Vec3(0.3475, 0.0, 0.357)).norm(), 1e-12);
  EXPECT_LT((r.tip.apply_vector(Vec3::UnitZ()) - Vec3::UnitX()).norm(), 1e-12);
  EXPECT_LT((r.tip.position() - (r.flange * arm.tool).position()).norm(), 1e-15);
}

TEST(Fk, MatchesMatrixChain) {
  const ArmModel arm = default_arm();
  std::mt19937_64 rng(20);
  for (int i = 0; i < 500; ++i) {
    const JointConfig q = random_config(arm, rng);
    EXPECT_LT((fk(arm, q).tip.matrix() - fk_oracle(arm, q)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Fk, MatchesMatrixChainWithBaseAndTool) {
  ArmModel arm = default_arm();
  arm.base = Pose::from_xyz_yaw(0.1, -0.2, 0.05, 0.4);
  arm.tool = Pose(Vec3(0.01, 0.0, 0.12), Quat(Eigen::AngleAxisd(0.2, Vec3::UnitY())));
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const JointConfig q = random_config(arm, rng);
    EXPECT_LT((fk(arm, q).tip.matrix() - fk_oracle(arm, q)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Fk, JointSixTracesCircleAboutWristAxis) {
  const ArmModel arm = default_arm();
  std::mt19937_64 rng(22);
  const JointConfig q0 = random_config(arm, rng);
  const Pose f5 = link_frames(arm, q0)[5];
  const Vec3 axis = f5.apply_vector(Vec3::UnitZ());
  const Vec3 center = f5.position();
  double radius = -1.0;
  double height = 0.0;
  for (int k = 0; k < 12; ++k) {
    JointConfig q = q0;
    q[5] += k * 0.5;
    const Vec3 rel = fk(arm, q).tip.position() - center;
    const double h = rel.dot(axis);
    const double r = (rel - h * axis).norm();
    if (radius < 0) {
      radius = r;
      height = h;
    }
    EXPECT_NEAR(r, radius, 1e-12);
    EXPECT_NEAR(h, height, 1e-12);
  }
}

TEST(Jacobian, MatchesFiniteDifferences) {
  const ArmModel arm = default_arm();
  std::mt19937_64 rng(23);
  const JointConfig q = random_config(arm, rng);
  const Jacobian j = tip_jacobian(arm, q);
  const double h = 1e-7;
  for (int i = 0; i < kDof; ++i) {
    JointConfig a = q, b = q;
    a[i] += h;
    b[i] -= h;
    const Vec3 dp = (fk(arm, a).tip.position() - fk(arm, b).tip.position()) / (2 * h);
    EXPECT_LT((dp - j.block<3, 1>(0, i)).norm(), 1e-6);
    const Eigen::Matrix<double, 6, 1> e = pose_error(fk(arm, b).tip, fk(arm, a).tip) / (2 * h);
    EXPECT_LT((e.tail<3>() - j.block<3, 1>(3, i)).norm(), 1e-6);
  }
}

TEST(Ik, RoundTripFromOwnSeed) {
  const ArmModel arm = default_arm();
  std::mt19937_64 rng(24);
  for (int i = 0; i < 50; ++i) {
    const JointConfig q = random_config(arm, rng);
    const Pose target = fk(arm, q).tip;
    const auto sol = ik(arm, target, q);
    ASSERT_TRUE(sol);
    EXPECT_TRUE(matches(arm, *sol, target));
    EXPECT_TRUE(arm.within_limits(*sol));
  }
}

TEST(Ik, OutOfReachFails) {
  const ArmModel arm = default_arm();
  EXPECT_FALSE(ik(arm, vertical_tip_pose(Vec3(2.0, 0.0, 0.2), 0.0), JointConfig{}));
  EXPECT_FALSE(ik(arm, Pose(Vec3(std::nan(""), 0, 0)), JointConfig{}));
}

TEST(Ik, NearestSeedSuccessRate) {
  const ArmModel arm = default_arm();
  const SeedBank bank(arm, 2000, 25);
  std::mt19937_64 rng(26);
  int ok = 0;
  for (int i = 0; i < 300; ++i) {
    const Pose target = fk(arm, random_config(arm, rng)).tip;
    const auto sol = ik_nearest_seed(arm, target, bank);
    if (sol && matches(arm, *sol, target) && arm.within_limits(*sol)) ++ok;
  }
  EXPECT_GE(ok, 294);
}

TEST(Ik, Deterministic) {
  const ArmModel arm = default_arm();
  const Pose target = vertical_tip_pose(Vec3(0.25, 0.05, 0.1), 0.3);
  IkParams p;
  p.seed = 9;
  const auto a = ik(arm, target, JointConfig{}, p);
  const auto b = ik(arm, target, JointConfig{}, p);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(*a, *b);
}

TEST(Ik, WrapBringsTurnsBackInsideLimits) {
  const ArmModel arm = default_arm();
  JointConfig q;
  q[0] = deg2rad(10.0) + 2 * kPi;
  q[5] = deg2rad(-350.0) - 2 * kPi;
  const JointConfig w = detail::wrap_into_limits(arm, q);
  EXPECT_NEAR(w[0], deg2rad(10.0), 1e-12);
  EXPECT_TRUE(arm.within_limits(w));
}

TEST(ArmModel, Validation) {
  ArmModel arm = default_arm();
  EXPECT_NO_THROW(arm.validate());
  arm.limits[2].lower = arm.limits[2].upper;
  EXPECT_THROW(arm.validate(), std::invalid_argument);
  arm = default_arm();
  arm.limits[4].max_velocity = 0.0;
  EXPECT_THROW(arm.validate(), std::invalid_argument);
}

TEST(SeedBank, NearestIsClosest) {
  const ArmModel arm = default_arm();
  const SeedBank bank(arm, 200, 27);
  const Pose target = vertical_tip_pose(Vec3(0.2, 0.1, 0.1), 0.0);
  const auto k = bank.nearest_k(target, 5);
  ASSERT_EQ(k.size(), 5u);
  auto cost = [&](std::size_t i) {
    const Pose t = fk(arm, bank.config(i)).tip;
    return (t.position() - target.position()).norm() + 0.1 * rotation_distance(t.rotation(), target.rotation());
  };
  for (std::size_t i = 1; i < k.size(); ++i) EXPECT_LE(cost(k[i - 1]), cost(k[i]));
  for (std::size_t i = 0; i < bank.size(); ++i) EXPECT_GE(cost(i), cost(k[0]) - 1e-15);
}

TEST(ToolPoses, VerticalAndShaftRotation) {
  const Pose p = vertical_tip_pose(Vec3(0.1, 0.2, 0.3), 0.5);
  EXPECT_LT((p.apply_vector(Vec3::UnitZ()) + Vec3::UnitZ()).norm(), 1e-12);
  EXPECT_NEAR(p.yaw(), 0.5, 1e-12);
  const Pose r = rotate_about_shaft(p, 0.7);
  EXPECT_LT((r.position() - p.position()).norm(), 1e-15);
  EXPECT_LT((r.apply_vector(Vec3::UnitZ()) - p.apply_vector(Vec3::UnitZ())).norm(), 1e-12);
  EXPECT_NEAR(rotation_distance(r.rotation(), p.rotation()), 0.7, 1e-12);
}
