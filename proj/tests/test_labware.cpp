#include <gtest/gtest.h>

#include <random>
#include <set>

#include "pipetbench/labware.hpp"

using namespace pipetbench;

namespace {

// Burnside: orbit count = mean number of fixed patterns over the group.
// A permutation fixes 2^(cycles over present positions) patterns.
std::size_t burnside(const std::vector<int>& present, const std::vector<NeighborPerm>& group) {
  std::size_t fixed_total = 0;
  for (const auto& g : group) {
    std::set<int> todo(present.begin(), present.end());
    int cycles = 0;
    while (!todo.empty()) {
      int i = *todo.begin();
      ++cycles;
      while (todo.erase(i)) i = g[static_cast<std::size_t>(i)];
    }
    fixed_total += std::size_t{1} << cycles;
  }
  return fixed_total / group.size();
}

constexpr NeighborPerm kIdentity = {0, 1, 2, 3, 4, 5, 6, 7};

}  // namespace

TEST(Rack, TipPosition) {
  const RackModel r = RackModel::full(Pose(), 8, 12, 0.009, 0.05);
  EXPECT_EQ(tip_position(r, 0, 0), Vec3(0, 0, 0.05));
  EXPECT_LT((tip_position(r, 0, 1) - Vec3(0.009, 0, 0.05)).norm(), 1e-15);
}

TEST(Rack, TipPositionMatchesMatrixOracle) {
  const Pose pose = Pose::from_xyz_yaw(0.2, -0.1, 0.08, deg2rad(37.0));
  const RackModel r = RackModel::full(pose, 8, 12, 0.009, 0.01);
  const Mat4 m = pose.matrix();
  for (int row = 0; row < 8; ++row) {
    for (int col = 0; col < 12; ++col) {
      const Eigen::Vector4d h = m * Eigen::Vector4d(col * 0.009, row * 0.009, 0.01, 1.0);
      EXPECT_LT((tip_position(r, row, col) - h.head<3>()).norm(), 1e-12);
    }
  }
}

TEST(Rack, TipPositionErrors) {
  RackModel r = RackModel::full(Pose());
  r.set_occupied({2, 3}, false);
  EXPECT_THROW(tip_position(r, 2, 3), EmptySlotError);
  EXPECT_THROW(tip_position(r, 8, 0), std::out_of_range);
  EXPECT_THROW(tip_position(r, 0, -1), std::out_of_range);
}

TEST(Rack, OccupancyBitsRoundTrip) {
  RackModel r = RackModel::full(Pose());
  r.set_occupied({0, 0}, false);
  r.set_occupied({7, 11}, false);
  const std::string bits = r.occupancy_bits();
  ASSERT_EQ(bits.size(), 96u);
  EXPECT_EQ(bits[0], '0');
  EXPECT_EQ(bits[95], '0');
  RackModel s = RackModel::full(Pose());
  s.set_occupancy_bits(bits);
  EXPECT_EQ(s.occupancy, r.occupancy);
  EXPECT_EQ(s.occupied_count(), 94u);
  EXPECT_THROW(s.set_occupancy_bits("01"), std::invalid_argument);
  EXPECT_THROW(s.set_occupancy_bits(std::string(96, '2')), std::invalid_argument);
}

TEST(Rack, Validation) {
  EXPECT_THROW(RackModel::full(Pose(), 8, 12, 0.0), std::invalid_argument);
  RackModel r;
  r.occupancy.resize(10);
  EXPECT_THROW(r.validate(), std::invalid_argument);
}

TEST(FitRackPose, TwoNoiselessSamplesAxisAligned) {
  std::vector<TeachSample> s = {{Vec3(0.1, 0.2, 0.05), {0, 0}}, {Vec3(0.1 + 11 * 0.009, 0.2, 0.05), {0, 11}}};
  const RackFit f = fit_rack_pose(s);
  EXPECT_NEAR(f.pose.yaw(), 0.0, 1e-12);
  EXPECT_LT((f.pose.position() - Vec3(0.1, 0.2, 0.05)).norm(), 1e-12);
  EXPECT_NEAR(f.rms_residual, 0.0, 1e-12);
}

TEST(FitRackPose, NoiselessReproducesTruth) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 50; ++i) {
    const Pose truth = Pose::from_xyz_yaw(0.1, -0.2, 0.07, u(rng));
    const RackModel r = RackModel::full(truth, 8, 12, 0.009, 0.02);
    std::vector<TeachSample> s;
    for (const Slot& sl : default_teach_slots(5)) s.push_back({tip_position(r, sl.row, sl.col), sl});
    const RackFit f = fit_rack_pose(s, 0.009, 0.02);
    EXPECT_LT((f.pose.position() - truth.position()).norm(), 1e-9);
    EXPECT_LT(rotation_distance(f.pose.rotation(), truth.rotation()), 1e-9);
  }
}

TEST(FitRackPose, NoisyYawAndOrigin) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.2e-3);
  const Pose truth = Pose::from_xyz_yaw(0.15, 0.05, 0.08, deg2rad(17.0));
  const RackModel r = RackModel::full(truth);
  int good = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<TeachSample> s;
    for (const Slot& sl : default_teach_slots(5)) {
      s.push_back({tip_position(r, sl.row, sl.col) + Vec3(n(rng), n(rng), n(rng)), sl, 0.2e-3});
    }
    const RackFit f = fit_rack_pose(s);
    const bool yaw_ok = std::abs(wrap_angle(f.pose.yaw() - truth.yaw())) <= deg2rad(0.5);
    const bool origin_ok = (f.pose.position() - truth.position()).head<2>().norm() <= 0.3e-3;
    good += yaw_ok && origin_ok;
  }
  EXPECT_GE(good, 950);
}

TEST(FitRackPose, Errors) {
  EXPECT_THROW(fit_rack_pose({{Vec3::Zero(), {0, 0}}}), std::invalid_argument);
  EXPECT_THROW(fit_rack_pose({{Vec3::Zero(), {0, 3}}, {Vec3::Zero(), {0, 3}}}), std::invalid_argument);
}

TEST(TeachSlots, AlongLongEdge) {
  const auto s = default_teach_slots(5);
  ASSERT_EQ(s.size(), 5u);
  for (const Slot& sl : s) EXPECT_EQ(sl.row, 0);
  EXPECT_EQ(s.front().col, 0);
  EXPECT_EQ(s.back().col, 11);
}

TEST(NeighborMask, InteriorFull) {
  const RackModel r = RackModel::full(Pose());
  EXPECT_EQ(neighbor_mask(r, {3, 5}).str(), "11111111");
}

TEST(NeighborMask, CornerOfFullRack) {
  const RackModel r = RackModel::full(Pose());
  const NeighborMask m = neighbor_mask(r, {0, 0});
  EXPECT_EQ(m.count(NeighborState::occupied), 3);
  EXPECT_EQ(m.count(NeighborState::absent_by_edge), 5);
  EXPECT_EQ(m.str(), "111xxxxx");
}

TEST(NeighborMask, RemovedWestNeighbour) {
  RackModel r = RackModel::full(Pose());
  r.set_occupied({0, 0}, false);
  const NeighborMask m = neighbor_mask(r, {0, 1});
  EXPECT_EQ(m.bits[6], NeighborState::empty);
  EXPECT_EQ(m.str(), "111xxx01");
}

TEST(NeighborMask, EdgeSlotsMarkAbsent) {
  const RackModel r = RackModel::full(Pose());
  for (int row = 0; row < 8; ++row) {
    for (int col = 0; col < 12; ++col) {
      const NeighborMask m = neighbor_mask(r, {row, col});
      for (std::size_t i = 0; i < 8; ++i) {
        const bool inside = r.in_grid(row + NeighborMask::kOffsets[i][0], col + NeighborMask::kOffsets[i][1]);
        EXPECT_EQ(m.bits[i] == NeighborState::absent_by_edge, !inside);
      }
    }
  }
}

TEST(PickingSequence, FullRackOrder) {
  const auto seq = picking_sequence(RackModel::full(Pose()));
  ASSERT_EQ(seq.size(), 96u);
  EXPECT_EQ(seq[0], (Slot{0, 0}));
  EXPECT_EQ(seq[1], (Slot{0, 1}));
  EXPECT_EQ(seq[2], (Slot{0, 2}));
  EXPECT_EQ(seq[12], (Slot{1, 0}));
  std::set<Slot> unique(seq.begin(), seq.end());
  EXPECT_EQ(unique.size(), 96u);
}

TEST(PickingSequence, SparseAndEmpty) {
  RackModel r = RackModel::full(Pose());
  r.set_occupancy_bits(std::string(96, '0'));
  EXPECT_TRUE(picking_sequence(r).empty());
  r.set_occupied({3, 5}, true);
  EXPECT_EQ(picking_sequence(r), (std::vector<Slot>{{3, 5}}));
}

TEST(PickingSequence, LengthMatchesOccupancy) {
  std::mt19937_64 rng(12);
  std::bernoulli_distribution b(0.6);
  for (int t = 0; t < 50; ++t) {
    RackModel r = RackModel::full(Pose());
    for (std::size_t i = 0; i < 96; ++i) r.occupancy[i] = b(rng);
    const auto seq = picking_sequence(r);
    EXPECT_EQ(seq.size(), r.occupied_count());
    for (const Slot& s : seq) EXPECT_TRUE(r.occupied(s));
  }
}

TEST(Patterns, TotalCount) {
  EXPECT_EQ(count_availability_patterns().total, 296u);
  EXPECT_EQ(enumerate_patterns(TargetKind::interior).size() + enumerate_patterns(TargetKind::edge).size() +
                enumerate_patterns(TargetKind::corner).size(),
            296u);
  EXPECT_EQ(enumerate_patterns(TargetKind::corner).size(), 8u);
}

TEST(Patterns, ReducedCountMatchesBurnside) {
  using namespace symmetry;
  const NeighborPerm rot180 = kRot180, mc = kMirrorCols, mr = kMirrorRows, diag = kDiagonal;
  const std::size_t interior = burnside(present_positions(TargetKind::interior), {kIdentity, rot180, mc, mr});
  const std::size_t edge = burnside(present_positions(TargetKind::edge), {kIdentity, mc});
  const std::size_t corner = burnside(present_positions(TargetKind::corner), {kIdentity, diag});
  EXPECT_EQ(interior, 84u);
  EXPECT_EQ(edge, 20u);
  EXPECT_EQ(corner, 6u);
  EXPECT_EQ(count_pattern_orbits(TargetKind::interior, {rot180, mc, mr}), interior);
  EXPECT_EQ(count_pattern_orbits(TargetKind::edge, {mc}), edge);
  EXPECT_EQ(count_pattern_orbits(TargetKind::corner, {diag}), corner);
  EXPECT_EQ(count_availability_patterns().symmetry_reduced, 110u);
}

TEST(Patterns, FullSquareGroupGivesFewerOrbits) {
  // The full square group on interior targets undercounts 110.
  using namespace symmetry;
  const std::size_t d4 = count_pattern_orbits(TargetKind::interior, {kRot90, kMirrorCols});
  EXPECT_EQ(d4, 51u);
  EXPECT_NE(d4 + 20 + 6, 110u);
}

TEST(Patterns, RoutineMasksMatchDirectWalk) {
  // Oracle: walk the grid with a plain occupancy array.
  bool occ[8][12];
  for (auto& row : occ)
    for (bool& b : row) b = true;
  std::vector<std::string> seen;
  const int dr[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  const int dc[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 12; ++c) {
      std::string m;
      for (int k = 0; k < 8; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        m += (rr < 0 || rr >= 8 || cc < 0 || cc >= 12) ? 'x' : (occ[rr][cc] ? '1' : '0');
      }
      if (std::find(seen.begin(), seen.end(), m) == seen.end()) seen.push_back(m);
      occ[r][c] = false;
    }
  }
  std::vector<std::string> got;
  for (const auto& m : routine_masks()) got.push_back(m.str());
  EXPECT_EQ(got, seen);
  EXPECT_EQ(count_availability_patterns().picking_routine, seen.size());
}

TEST(Patterns, RoutineIndependentOfRackPose) {
  RackModel a = RackModel::full(Pose());
  RackModel b = RackModel::full(Pose::from_xyz_yaw(1, 2, 3, 1.0));
  for (const Slot& s : picking_sequence(a)) EXPECT_EQ(neighbor_mask(a, s), neighbor_mask(b, s));
}
