#ifndef PIPETBENCH_SPIRAL_HPP
#define PIPETBENCH_SPIRAL_HPP

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipetbench/geometry.hpp"

namespace pipetbench {

using ClassId = int;

/// Raised when e and d leave no room for a single hexagonal ring.
class ZeroRingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axial coordinate on the triangular lattice: position = a*u + b*v with
/// u = L(1, 0) and v = L(1/2, sqrt(3)/2).
struct Axial {
  int a = 0;
  int b = 0;
  bool operator==(const Axial&) const = default;
};

inline int hex_distance(const Axial& p, const Axial& q) {
  const int da = p.a - q.a;
  const int db = p.b - q.b;
  return (std::abs(da) + std::abs(db) + std::abs(da + db)) / 2;
}

struct Classification {
  ClassId id = 0;
  bool out_of_coverage = false;
};

/**
 * Deviation classes laid out on concentric hexagonal rings of an equilateral
 * triangulation. Class 0 is the origin; ring r holds 6r nodes that start on
 * the +x axis and run counter-clockwise, so classes 1..6 are the six nearest
 * neighbours of the origin at 0, 60, ..., 300 degrees.
 */
class SpiralLattice {
 public:
  /// Explicit construction, e.g. for denser-than-admissible experiments or a
  /// single-node lattice (rings == 0).
  SpiralLattice(double edge_length, int rings, double acceptable_residual, double tip_pitch)
      : edge_(edge_length), rings_(rings), residual_(acceptable_residual), pitch_(tip_pitch) {
    if (!(edge_length > 0.0) || rings < 0) {
      throw std::invalid_argument("SpiralLattice: edge length must be > 0 and rings >= 0");
    }
    build_nodes();
  }

  double edge_length() const { return edge_; }
  int ring_count() const { return rings_; }
  double acceptable_residual() const { return residual_; }
  double tip_pitch() const { return pitch_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Vec2>& nodes() const { return nodes_; }
  const std::vector<Axial>& axial() const { return axial_; }

  const Vec2& node(ClassId id) const {
    check_id(id);
    return nodes_[static_cast<std::size_t>(id)];
  }

  int ring_of(ClassId id) const {
    check_id(id);
    return hex_distance(axial_[static_cast<std::size_t>(id)], Axial{});
  }

  int hops(ClassId a, ClassId b) const {
    check_id(a);
    check_id(b);
    return hex_distance(axial_[static_cast<std::size_t>(a)], axial_[static_cast<std::size_t>(b)]);
  }

  /// Classes whose lattice hop distance from `id` is in [1, radius].
  std::vector<ClassId> neighbors_within(ClassId id, int radius) const {
    std::vector<ClassId> out;
    for (ClassId k = 0; k < static_cast<ClassId>(size()); ++k) {
      const int h = hops(id, k);
      if (h >= 1 && h <= radius) out.push_back(k);
    }
    return out;
  }

  /// Radius within which every offset has a node no farther than max_residual().
  /// With rings the limit is the notch between two adjacent outer nodes.
  double coverage_radius() const {
    if (rings_ == 0) return max_residual();
    return (3.0 * rings_ + 1.0) * edge_ / (2.0 * std::sqrt(3.0));
  }

  /// Nearest node by Euclidean distance; ties go to the lowest class id.
  Classification nearest_class(const Vec2& offset) const {
    ClassId best = 0;
    double best_d2 = (nodes_[0] - offset).squaredNorm();
    for (std::size_t k = 1; k < nodes_.size(); ++k) {
      const double d2 = (nodes_[k] - offset).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<ClassId>(k);
      }
    }
    return {best, offset.norm() > coverage_radius()};
  }

  Vec2 correction_vector(ClassId id) const { return -node(id); }

  double max_residual() const { return edge_ * std::sqrt(3.0) / 3.0; }

  /// class_id,x_mm,y_mm
  void write_csv(std::ostream& os) const {
    os << "class_id,x_mm,y_mm\n";
    std::ostringstream line;
    line << std::fixed << std::setprecision(6);
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      line.str("");
      line << k << ',' << nodes_[k].x() * 1e3 << ',' << nodes_[k].y() * 1e3 << '\n';
      os << line.str();
    }
  }

 private:
  void check_id(ClassId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
      throw std::out_of_range("unknown class id " + std::to_string(id));
    }
  }

  void build_nodes() {
    // Unit steps at 0, 60, ..., 300 degrees in axial coordinates.
    static constexpr int kDirs[6][2] = {{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}};
    axial_.clear();
    axial_.push_back({0, 0});
    for (int r = 1; r <= rings_; ++r) {
      Axial cur{r, 0};
      for (int side = 0; side < 6; ++side) {
        const auto& step = kDirs[(side + 2) % 6];
        for (int j = 0; j < r; ++j) {
          axial_.push_back(cur);
          cur.a += step[0];
          cur.b += step[1];
        }
      }
    }
    const double h = std::sqrt(3.0) / 2.0;
    nodes_.clear();
    nodes_.reserve(axial_.size());
    for (const auto& p : axial_) {
      nodes_.emplace_back(edge_ * (p.a + 0.5 * p.b), edge_ * h * p.b);
    }
  }

  double edge_;
  int rings_;
  double residual_;
  double pitch_;
  std::vector<Axial> axial_;
  std::vector<Vec2> nodes_;
};

inline std::size_t lattice_node_count(int rings) {
  return static_cast<std::size_t>(3 * rings * (rings + 1) + 1);
}

/**
 * Builds the admissible lattice for acceptable residual `e` and tip pitch `d`
 * (both metres): L = sqrt(3) e and R = floor(d / (2 sqrt(3) e)).
 *
 * `edge_override` > 0 replaces L with a denser spacing; it must not exceed
 * sqrt(3) e.
 */
inline SpiralLattice build_lattice(double e, double d, double edge_override = 0.0) {
  if (!(e > 0.0) || !(d > 0.0)) {
    throw std::invalid_argument("build_lattice: e and d must be positive");
  }
  const double admissible = std::sqrt(3.0) * e;
  double edge = admissible;
  if (edge_override > 0.0) {
    if (edge_override > admissible * (1.0 + 1e-12)) {
      throw std::invalid_argument("build_lattice: edge length exceeds sqrt(3) e");
    }
    edge = edge_override;
  }
  // Rings are bounded by half the tip pitch; with the default edge this is
  // floor(d / (2 sqrt(3) e)).
  const double ratio = d / (2.0 * edge);
  const int rings = static_cast<int>(std::floor(ratio + 1e-12));
  if (rings < 1) {
    throw ZeroRingError("build_lattice: d / (2 sqrt(3) e) < 1 leaves no ring around class 0");
  }
  return SpiralLattice(edge, rings, e, d);
}

}  // namespace pipetbench

#endif  // PIPETBENCH_SPIRAL_HPP
