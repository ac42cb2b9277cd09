#ifndef PIPETBENCH_LABWARE_HPP
#define PIPETBENCH_LABWARE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipetbench/geometry.hpp"

namespace pipetbench {

struct Slot {
  int row = 0;
  int col = 0;
  bool operator==(const Slot&) const = default;
  auto operator<=>(const Slot&) const = default;
};

class EmptySlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * A tip rack: rows x cols slots at pitch d. The rack frame has its origin at
 * slot (0,0), x along the long edge (increasing col) and y along increasing
 * row. Tip tops sit `slot_height` above the frame origin.
 */
struct RackModel {
  Pose pose;
  int rows = 8;
  int cols = 12;
  double pitch = 0.009;
  double slot_height = 0.0;
  std::vector<bool> occupancy = std::vector<bool>(96, true);

  static RackModel full(const Pose& pose, int rows = 8, int cols = 12, double pitch = 0.009,
                        double slot_height = 0.0) {
    RackModel r;
    r.pose = pose;
    r.rows = rows;
    r.cols = cols;
    r.pitch = pitch;
    r.slot_height = slot_height;
    r.occupancy.assign(static_cast<std::size_t>(rows * cols), true);
    r.validate();
    return r;
  }

  void validate() const {
    if (!(pitch > 0.0)) throw std::invalid_argument("RackModel: pitch must be > 0");
    if (rows <= 0 || cols <= 0 || occupancy.size() != static_cast<std::size_t>(rows * cols)) {
      throw std::invalid_argument("RackModel: occupancy does not match rows x cols");
    }
  }

  bool in_grid(int row, int col) const { return row >= 0 && row < rows && col >= 0 && col < cols; }
  bool in_grid(const Slot& s) const { return in_grid(s.row, s.col); }

  std::size_t index(const Slot& s) const {
    if (!in_grid(s)) {
      throw std::out_of_range("slot (" + std::to_string(s.row) + "," + std::to_string(s.col) +
                              ") outside rack grid");
    }
    return static_cast<std::size_t>(s.row * cols + s.col);
  }

  bool occupied(const Slot& s) const { return occupancy[index(s)]; }
  void set_occupied(const Slot& s, bool v) { occupancy[index(s)] = v; }
  int tip_id(const Slot& s) const { return static_cast<int>(index(s)); }

  std::size_t occupied_count() const {
    return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), true));
  }

  /// Slot centre in the rack frame (no height).
  Vec2 local_xy(const Slot& s) const { return {s.col * pitch, s.row * pitch}; }

  /// Row-major '1'/'0' string, one character per slot.
  std::string occupancy_bits() const {
    std::string out;
    out.reserve(occupancy.size());
    for (bool b : occupancy) out.push_back(b ? '1' : '0');
    return out;
  }

  void set_occupancy_bits(const std::string& bits) {
    if (bits.size() != occupancy.size()) {
      throw std::invalid_argument("occupancy bitstring must have " +
                                  std::to_string(occupancy.size()) + " characters");
    }
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != '0' && bits[i] != '1') {
        throw std::invalid_argument("occupancy bitstring may contain only '0' and '1'");
      }
      occupancy[i] = bits[i] == '1';
    }
  }
};

/// World position of the tip top at (row, col).
inline Vec3 tip_position(const RackModel& rack, int row, int col) {
  const Slot s{row, col};
  if (!rack.occupied(s)) {
    throw EmptySlotError("slot (" + std::to_string(row) + "," + std::to_string(col) + ") is empty");
  }
  return rack.pose.apply(Vec3(col * rack.pitch, row * rack.pitch, rack.slot_height));
}

// ---------------------------------------------------------------------------
// Direct-teaching pose fit

struct TeachSample {
  Vec3 recorded_position = Vec3::Zero();
  Slot slot;
  double noise_std = 0.0;
};

struct RackFit {
  Pose pose;
  double rms_residual = 0.0;
};

/**
 * Least-squares yaw-only fit of the rack frame to taught tip positions.
 *
 * Solves the planar Procrustes problem between the slot grid coordinates and
 * the recorded xy positions; z is the mean recorded height minus slot_height.
 */
inline RackFit fit_rack_pose(const std::vector<TeachSample>& samples, double pitch = 0.009,
                             double slot_height = 0.0) {
  if (samples.size() < 2) throw std::invalid_argument("fit_rack_pose: need at least 2 samples");
  std::set<Slot> distinct;
  for (const auto& s : samples) distinct.insert(s.slot);
  if (distinct.size() < 2) {
    throw std::invalid_argument("fit_rack_pose: samples must cover at least 2 distinct slots");
  }

  const auto n = static_cast<double>(samples.size());
  Vec2 local_mean = Vec2::Zero();
  Vec2 world_mean = Vec2::Zero();
  double z_mean = 0.0;
  for (const auto& s : samples) {
    local_mean += Vec2(s.slot.col * pitch, s.slot.row * pitch);
    world_mean += s.recorded_position.head<2>();
    z_mean += s.recorded_position.z();
  }
  local_mean /= n;
  world_mean /= n;
  z_mean /= n;

  double sxx = 0.0;  // sum of dot products
  double sxy = 0.0;  // sum of cross products
  for (const auto& s : samples) {
    const Vec2 l = Vec2(s.slot.col * pitch, s.slot.row * pitch) - local_mean;
    const Vec2 w = s.recorded_position.head<2>() - world_mean;
    sxx += l.dot(w);
    sxy += l.x() * w.y() - l.y() * w.x();
  }
  const double yaw = std::atan2(sxy, sxx);
  const Eigen::Rotation2Dd rot(yaw);
  const Vec2 origin = world_mean - rot * local_mean;

  RackFit fit;
  fit.pose = Pose::from_xyz_yaw(origin.x(), origin.y(), z_mean - slot_height, yaw);
  double sq = 0.0;
  for (const auto& s : samples) {
    const Vec3 predicted = fit.pose.apply(Vec3(s.slot.col * pitch, s.slot.row * pitch, slot_height));
    sq += (predicted - s.recorded_position).squaredNorm();
  }
  fit.rms_residual = std::sqrt(sq / n);
  return fit;
}

/// Teach slots along row 0, alternating between the two ends of the long edge.
inline std::vector<Slot> default_teach_slots(int count, int cols = 12) {
  std::vector<Slot> out;
  int lo = 0;
  int hi = cols - 1;
  while (static_cast<int>(out.size()) < count && lo <= hi) {
    out.push_back({0, lo++});
    if (static_cast<int>(out.size()) < count && lo <= hi) out.push_back({0, hi--});
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Neighbour availability

enum class NeighborState : char { empty = '0', occupied = '1', absent_by_edge = 'x' };

/**
 * Occupancy of the eight slots around a target, ordered N, NE, E, SE, S, SW,
 * W, NW. N points along +row and E along +col in the rack frame.
 */
struct NeighborMask {
  std::array<NeighborState, 8> bits{};

  static constexpr std::array<std::array<int, 2>, 8> kOffsets = {{
      {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1},
  }};

  std::string str() const {
    std::string s(8, '0');
    for (std::size_t i = 0; i < 8; ++i) s[i] = static_cast<char>(bits[i]);
    return s;
  }

  int count(NeighborState st) const {
    return static_cast<int>(std::count(bits.begin(), bits.end(), st));
  }

  bool operator==(const NeighborMask&) const = default;
  auto operator<=>(const NeighborMask& o) const { return str() <=> o.str(); }
};

inline NeighborMask neighbor_mask(const RackModel& rack, const Slot& slot) {
  if (!rack.in_grid(slot)) throw std::out_of_range("neighbor_mask: slot outside grid");
  NeighborMask m;
  for (std::size_t i = 0; i < 8; ++i) {
    const Slot s{slot.row + NeighborMask::kOffsets[i][0], slot.col + NeighborMask::kOffsets[i][1]};
    if (!rack.in_grid(s)) {
      m.bits[i] = NeighborState::absent_by_edge;
    } else {
      m.bits[i] = rack.occupied(s) ? NeighborState::occupied : NeighborState::empty;
    }
  }
  return m;
}

/// Occupied slots from corner (0,0) along the long edge, one row at a time.
inline std::vector<Slot> picking_sequence(const RackModel& rack) {
  std::vector<Slot> out;
  for (int r = 0; r < rack.rows; ++r) {
    for (int c = 0; c < rack.cols; ++c) {
      if (rack.occupied({r, c})) out.push_back({r, c});
    }
  }
  return out;
}

/// Distinct neighbour masks met while emptying a full rack along the picking
/// sequence, in order of first appearance.
inline std::vector<NeighborMask> routine_masks(int rows = 8, int cols = 12) {
  RackModel rack = RackModel::full(Pose(), rows, cols);
  std::vector<NeighborMask> seen;
  for (const Slot& s : picking_sequence(rack)) {
    const NeighborMask m = neighbor_mask(rack, s);
    if (std::find(seen.begin(), seen.end(), m) == seen.end()) seen.push_back(m);
    rack.set_occupied(s, false);
  }
  return seen;
}

// Symmetry handling for the reduced pattern count. Each symmetry is a
// permutation of the eight neighbour positions: out[i] = in[perm[i]].
using NeighborPerm = std::array<int, 8>;

namespace symmetry {
inline constexpr NeighborPerm kRot180 = {4, 5, 6, 7, 0, 1, 2, 3};
inline constexpr NeighborPerm kMirrorCols = {0, 7, 6, 5, 4, 3, 2, 1};   // col -> -col
inline constexpr NeighborPerm kMirrorRows = {4, 3, 2, 1, 0, 7, 6, 5};   // row -> -row
inline constexpr NeighborPerm kRot90 = {6, 7, 0, 1, 2, 3, 4, 5};
inline constexpr NeighborPerm kDiagonal = {2, 1, 0, 7, 6, 5, 4, 3};     // row <-> col
}  // namespace symmetry

enum class TargetKind { interior, edge, corner };

/// Neighbour positions that exist for each kind of target, using the
/// bottom-left corner (row 0, col 0) and the bottom edge (row 0) as
/// representatives.
inline std::vector<int> present_positions(TargetKind kind) {
  switch (kind) {
    case TargetKind::interior: return {0, 1, 2, 3, 4, 5, 6, 7};
    case TargetKind::edge: return {0, 1, 2, 6, 7};  // N NE E W NW
    case TargetKind::corner: return {0, 1, 2};      // N NE E
  }
  return {};
}

/// Number of occupancy patterns of `kind` up to the given symmetry generators
/// (the group they generate is closed over by repeated application).
inline std::size_t count_pattern_orbits(TargetKind kind, const std::vector<NeighborPerm>& generators) {
  const auto present = present_positions(kind);
  const std::size_t n = present.size();

  // Close the generator set into a group.
  std::vector<NeighborPerm> group = {{0, 1, 2, 3, 4, 5, 6, 7}};
  for (bool grew = true; grew;) {
    grew = false;
    const auto snapshot = group;
    for (const auto& g : snapshot) {
      for (const auto& h : generators) {
        NeighborPerm gh{};
        for (int i = 0; i < 8; ++i) gh[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(h[static_cast<std::size_t>(i)])];
        if (std::find(group.begin(), group.end(), gh) == group.end()) {
          group.push_back(gh);
          grew = true;
        }
      }
    }
  }

  std::set<std::string> canon;
  for (unsigned bits = 0; bits < (1u << n); ++bits) {
    std::string base(8, 'x');
    for (std::size_t k = 0; k < n; ++k) base[static_cast<std::size_t>(present[k])] = (bits >> k) & 1u ? '1' : '0';
    std::string best = base;
    for (const auto& g : group) {
      std::string img(8, 'x');
      for (std::size_t i = 0; i < 8; ++i) img[i] = base[static_cast<std::size_t>(g[i])];
      best = std::min(best, img);
    }
    canon.insert(best);
  }
  return canon.size();
}

struct PatternCounts {
  std::size_t total = 0;             // 2^8 + 2^5 + 2^3
  std::size_t symmetry_reduced = 0;
  std::size_t picking_routine = 0;
};

/**
 * Availability pattern counts around a target tip.
 *
 * symmetry_reduced identifies interior patterns under the rectangle's own
 * symmetries (identity, half turn, both mirror lines), edge patterns under the
 * mirror perpendicular to that edge, and corner patterns under the corner's
 * diagonal mirror.
 */
inline PatternCounts count_availability_patterns(int rows = 8, int cols = 12) {
  using namespace symmetry;
  PatternCounts c;
  c.total = (1u << 8) + (1u << 5) + (1u << 3);
  c.symmetry_reduced = count_pattern_orbits(TargetKind::interior, {kRot180, kMirrorCols, kMirrorRows}) +
                       count_pattern_orbits(TargetKind::edge, {kMirrorCols}) +
                       count_pattern_orbits(TargetKind::corner, {kDiagonal});
  c.picking_routine = routine_masks(rows, cols).size();
  return c;
}

/// Every neighbour pattern a target of the given kind can present, using the
/// same representative orientation as count_pattern_orbits.
inline std::vector<std::string> enumerate_patterns(TargetKind kind) {
  const auto present = present_positions(kind);
  std::vector<std::string> out;
  for (unsigned bits = 0; bits < (1u << present.size()); ++bits) {
    std::string s(8, 'x');
    for (std::size_t k = 0; k < present.size(); ++k) s[static_cast<std::size_t>(present[k])] = (bits >> k) & 1u ? '1' : '0';
    out.push_back(s);
  }
  return out;
}

}  // namespace pipetbench

#endif  // PIPETBENCH_LABWARE_HPP
