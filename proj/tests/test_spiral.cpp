#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "pipetbench/spiral.hpp"

using namespace pipetbench;

namespace {

constexpr double kE = 0.5e-3;
constexpr double kD = 9e-3;

ClassId brute_force_nearest(const SpiralLattice& lat, const Vec2& p) {
  ClassId best = 0;
  double bd = 1e300;
  for (std::size_t k = 0; k < lat.size(); ++k) {
    const double d = (lat.nodes()[k] - p).norm();
    if (d < bd - 1e-15) {
      bd = d;
      best = static_cast<ClassId>(k);
    }
  }
  return best;
}

Vec2 uniform_in_disc(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng));
  const double a = 2 * kPi * u(rng);
  return {r * std::cos(a), r * std::sin(a)};
}

}  // namespace

TEST(BuildLattice, NominalDimensions) {
  const SpiralLattice lat = build_lattice(kE, kD);
  EXPECT_EQ(lat.ring_count(), 5);
  EXPECT_EQ(lat.size(), 91u);
  EXPECT_EQ(lat.node(0), Vec2::Zero());
  EXPECT_NEAR(lat.edge_length(), std::sqrt(3.0) * kE, 1e-15);
}

TEST(BuildLattice, CoarserResidual) {
  const SpiralLattice lat = build_lattice(1.0e-3, kD);
  EXPECT_EQ(lat.ring_count(), static_cast<int>(std::floor(9.0 / (2 * std::sqrt(3.0)))));
  EXPECT_EQ(lat.size(), 19u);
}

TEST(BuildLattice, Errors) {
  EXPECT_THROW(build_lattice(0.0, kD), std::invalid_argument);
  EXPECT_THROW(build_lattice(kE, -1.0), std::invalid_argument);
  EXPECT_THROW(build_lattice(3e-3, kD), ZeroRingError);
  EXPECT_THROW(build_lattice(kE, kD, 1e-3), std::invalid_argument);
  // A single node lattice can still be built directly.
  EXPECT_EQ(SpiralLattice(1e-3, 0, kE, kD).size(), 1u);
}

TEST(BuildLattice, CountIdentity) {
  for (int r = 1; r <= 8; ++r) {
    const SpiralLattice lat(1e-3, r, kE, kD);
    EXPECT_EQ(lat.size(), static_cast<std::size_t>(3 * r * (r + 1) + 1));
    EXPECT_EQ(lat.size(), lattice_node_count(r));
  }
}

TEST(BuildLattice, RingsAndSpiralOrder) {
  const SpiralLattice lat = build_lattice(kE, kD);
  const double L = lat.edge_length();
  std::size_t k = 1;
  for (int r = 1; r <= lat.ring_count(); ++r) {
    // First node of each ring on the +x axis, then counter-clockwise.
    EXPECT_NEAR(lat.node(static_cast<ClassId>(k)).x(), r * L, 1e-15);
    EXPECT_NEAR(lat.node(static_cast<ClassId>(k)).y(), 0.0, 1e-15);
    for (int j = 0; j < 6 * r; ++j, ++k) {
      EXPECT_EQ(lat.ring_of(static_cast<ClassId>(k)), r);
      EXPECT_LE(lat.node(static_cast<ClassId>(k)).norm(), r * L + 1e-15);
      if (j > 0) {
        // Consecutive nodes of a ring are adjacent.
        EXPECT_NEAR((lat.node(static_cast<ClassId>(k)) - lat.node(static_cast<ClassId>(k - 1))).norm(), L, 1e-12);
        const Vec2 a = lat.node(static_cast<ClassId>(k - 1)), b = lat.node(static_cast<ClassId>(k));
        EXPECT_GE(a.x() * b.y() - a.y() * b.x(), -1e-18);
      }
    }
  }
  EXPECT_EQ(k, lat.size());
}

TEST(BuildLattice, AdjacentNodesAreEdgeLengthApart) {
  const SpiralLattice lat = build_lattice(kE, kD);
  const double L = lat.edge_length();
  int adjacent_pairs = 0;
  for (ClassId a = 0; a < static_cast<ClassId>(lat.size()); ++a) {
    for (ClassId b = a + 1; b < static_cast<ClassId>(lat.size()); ++b) {
      const double d = (lat.node(a) - lat.node(b)).norm();
      EXPECT_GE(d, L - 1e-12);
      if (lat.hops(a, b) == 1) {
        ++adjacent_pairs;
        EXPECT_NEAR(d, L, 1e-12);
      }
    }
  }
  // Edges of a hexagonal patch of R rings: 3 R (3 R + 1).
  EXPECT_EQ(adjacent_pairs, 3 * 5 * (3 * 5 + 1));
  EXPECT_LE(L, std::sqrt(3.0) * lat.acceptable_residual() + 1e-15);
}

TEST(NearestClass, Origin) { EXPECT_EQ(build_lattice(kE, kD).nearest_class(Vec2::Zero()).id, 0); }

TEST(NearestClass, MatchesBruteForce) {
  const SpiralLattice lat = build_lattice(kE, kD);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20000; ++i) {
    const Vec2 p = uniform_in_disc(rng, lat.coverage_radius());
    const Classification c = lat.nearest_class(p);
    EXPECT_EQ(c.id, brute_force_nearest(lat, p));
    EXPECT_FALSE(c.out_of_coverage);
  }
}

TEST(NearestClass, CentroidHitsMaximumResidual) {
  const SpiralLattice lat = build_lattice(kE, kD);
  const Vec2 c = (lat.node(0) + lat.node(1) + lat.node(2)) / 3.0;
  const ClassId k = lat.nearest_class(c).id;
  EXPECT_EQ(k, 0);  // three-way tie goes to the lowest id
  EXPECT_NEAR((c - lat.node(k)).norm(), lat.edge_length() * std::sqrt(3.0) / 3.0, 1e-15);
}

TEST(NearestClass, TieBreaksToLowestId) {
  const SpiralLattice lat = build_lattice(kE, kD);
  const Vec2 mid = 0.5 * (lat.node(1) + lat.node(2));
  EXPECT_EQ(lat.nearest_class(mid).id, 1);
}

TEST(NearestClass, OutOfCoverageFlagged) {
  const SpiralLattice lat = build_lattice(kE, kD);
  const Classification c = lat.nearest_class(Vec2(10e-3, 0.0));
  EXPECT_TRUE(c.out_of_coverage);
  EXPECT_EQ(lat.ring_of(c.id), 5);
}

TEST(Residual, BoundHoldsOverRandomOffsets) {
  const SpiralLattice lat = build_lattice(kE, kD);
  std::mt19937_64 rng(8);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Vec2 p = uniform_in_disc(rng, lat.coverage_radius());
    worst = std::max(worst, (p - lat.node(lat.nearest_class(p).id)).norm());
  }
  EXPECT_LE(worst, lat.edge_length() * std::sqrt(3.0) / 3.0 + 1e-12);
  EXPECT_GT(worst, 0.9 * lat.max_residual());
}

TEST(Residual, CoverageRadiusIsTight) {
  for (double d : {9e-3, 6e-3, 3e-3}) {
    const SpiralLattice lat = build_lattice(kE, d);
    double worst = 0.0;
    for (int k = 0; k < 36000; ++k) {
      const double a = 2 * kPi * k / 36000.0;
      const Vec2 p = 1.02 * lat.coverage_radius() * Vec2(std::cos(a), std::sin(a));
      worst = std::max(worst, (p - lat.node(lat.nearest_class(p).id)).norm());
    }
    EXPECT_GT(worst, lat.max_residual()) << "d=" << d;
  }
  const SpiralLattice single(1e-3, 0, kE, kD);
  EXPECT_DOUBLE_EQ(single.coverage_radius(), single.max_residual());
}

TEST(Residual, EqualsAcceptableResidualAtAdmissibleEdge) {
  const SpiralLattice lat = build_lattice(kE, kD);
  EXPECT_NEAR(lat.max_residual(), kE, 1e-15);
  const SpiralLattice half = build_lattice(kE, kD, lat.edge_length() / 2);
  EXPECT_NEAR(half.max_residual(), kE / 2, 1e-15);
}

TEST(Correction, VectorIdentities) {
  const SpiralLattice lat = build_lattice(kE, kD);
  EXPECT_EQ(lat.correction_vector(0), Vec2::Zero());
  EXPECT_LT((lat.correction_vector(1) + lat.correction_vector(4)).norm(), 1e-15);
  EXPECT_THROW(lat.correction_vector(91), std::out_of_range);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 p = uniform_in_disc(rng, lat.coverage_radius());
    const ClassId k = lat.nearest_class(p).id;
    const Vec2 after = p + lat.correction_vector(k);
    EXPECT_NEAR(after.norm(), (p - lat.node(k)).norm(), 1e-15);
    EXPECT_LE(after.norm(), lat.max_residual() + 1e-12);
  }
}

TEST(Neighbors, RingOneHasSix) {
  const SpiralLattice lat = build_lattice(kE, kD);
  EXPECT_EQ(lat.neighbors_within(0, 1), (std::vector<ClassId>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(lat.neighbors_within(0, 2).size(), 18u);
  // A boundary node has fewer neighbours inside the lattice.
  EXPECT_LT(lat.neighbors_within(90, 1).size(), 6u);
}

TEST(Csv, HeaderAndRows) {
  const SpiralLattice lat = build_lattice(kE, kD);
  std::ostringstream os;
  lat.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "class_id,x_mm,y_mm");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 91);
  EXPECT_NE(os.str().find("\n1,0.866025,0.000000\n"), std::string::npos);
}
