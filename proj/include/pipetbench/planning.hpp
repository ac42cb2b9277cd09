#ifndef PIPETBENCH_PLANNING_HPP
#define PIPETBENCH_PLANNING_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pipetbench/collision.hpp"
#include "pipetbench/goal_search.hpp"
#include "pipetbench/kinematics.hpp"

namespace pipetbench {

struct Path {
  std::vector<JointConfig> waypoints;

  double length() const {
    double s = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i) s += (waypoints[i].q - waypoints[i - 1].q).norm();
    return s;
  }
};

struct PlannerParams {
  double edge_step = deg2rad(2.5);     // max per-joint change between collision checks
  double extend_step = deg2rad(17.0);  // max per-joint change per tree extension
  int max_iterations = 10000;  // tree extensions
  int prune_attempts = 200;
  int topp_samples = 100;
  int max_goal_retries = 5;
  std::uint64_t seed = 0;
};

/// SplitMix64 finaliser, used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(a ^ mix_seed(b)); }

/// Checks the straight joint-space segment at `edge_step` resolution,
/// including `b` but not `a`.
template <CollisionChecker C>
bool segment_free(const C& checker, const JointConfig& a, const JointConfig& b, double edge_step) {
  const double span = (b.q - a.q).cwiseAbs().maxCoeff();
  const int n = std::max(1, static_cast<int>(std::ceil(span / edge_step)));
  for (int k = 1; k <= n; ++k) {
    const double t = static_cast<double>(k) / n;
    if (checker.in_collision(JointConfig(a.q + t * (b.q - a.q)))) return false;
  }
  return true;
}

namespace detail {

struct Tree {
  std::vector<JointConfig> nodes;
  std::vector<int> parent;

  int nearest(const JointConfig& q) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = (nodes[i].q - q.q).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  int add(const JointConfig& q, int par) {
    nodes.push_back(q);
    parent.push_back(par);
    return static_cast<int>(nodes.size()) - 1;
  }

  std::vector<JointConfig> trace(int i) const {
    std::vector<JointConfig> out;
    for (; i >= 0; i = parent[static_cast<std::size_t>(i)]) out.push_back(nodes[static_cast<std::size_t>(i)]);
    return out;
  }
};

enum class Extend { trapped, advanced, reached };

template <CollisionChecker C>
Extend extend(Tree& tree, const JointConfig& target, const C& checker, const PlannerParams& p, int& new_index) {
  const int near = tree.nearest(target);
  const JointConfig& from = tree.nodes[static_cast<std::size_t>(near)];
  const JointVec delta = target.q - from.q;
  const double span = delta.cwiseAbs().maxCoeff();
  const bool reaches = span <= p.extend_step;
  const JointConfig to = reaches ? target : JointConfig(from.q + delta * (p.extend_step / span));
  if (!segment_free(checker, from, to, p.edge_step)) return Extend::trapped;
  new_index = tree.add(to, near);
  return reaches ? Extend::reached : Extend::advanced;
}

template <CollisionChecker C>
Extend connect(Tree& tree, const JointConfig& target, const C& checker, const PlannerParams& p, int& new_index,
               int& budget) {
  Extend s = Extend::advanced;
  while (s == Extend::advanced && budget > 0) {
    --budget;
    s = extend(tree, target, checker, p, new_index);
  }
  return s;
}

}  // namespace detail

/**
 * Bidirectional RRT-Connect in joint space. The straight segment is tried
 * first. Returns nullopt when the extension budget runs out; the caller is
 * responsible for start and goal being collision-free.
 */
template <CollisionChecker C>
std::optional<Path> rrt_connect(const ArmModel& arm, const C& checker, const JointConfig& start,
                                const JointConfig& goal, const PlannerParams& p = {}) {
  if (start == goal) return Path{{start, goal}};
  if (segment_free(checker, start, goal, p.edge_step)) return Path{{start, goal}};

  std::mt19937_64 rng(p.seed);
  detail::Tree ta;
  detail::Tree tb;
  ta.add(start, -1);
  tb.add(goal, -1);
  bool a_is_start = true;
  int budget = p.max_iterations;
  while (budget > 0) {
    --budget;
    const JointConfig sample = random_config(arm, rng);
    int ia = -1;
    if (detail::extend(ta, sample, checker, p, ia) != detail::Extend::trapped) {
      int ib = -1;
      const JointConfig target = ta.nodes[static_cast<std::size_t>(ia)];
      if (detail::connect(tb, target, checker, p, ib, budget) == detail::Extend::reached) {
        auto half_a = ta.trace(ia);
        auto half_b = tb.trace(ib);
        std::reverse(half_a.begin(), half_a.end());
        half_a.insert(half_a.end(), half_b.begin() + 1, half_b.end());  // shared joint node once
        if (!a_is_start) std::reverse(half_a.begin(), half_a.end());
        return Path{std::move(half_a)};
      }
    }
    std::swap(ta, tb);
    a_is_start = !a_is_start;
  }
  return std::nullopt;
}

/// Random shortcutting between waypoints; the result is never longer.
template <CollisionChecker C>
Path prune(const C& checker, Path path, const PlannerParams& p = {}) {
  std::mt19937_64 rng(mix_seed(p.seed, 0x9e11));
  for (int attempt = 0; attempt < p.prune_attempts && path.waypoints.size() > 2; ++attempt) {
    const auto n = path.waypoints.size();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i > j) std::swap(i, j);
    if (j < i + 2) continue;
    if (segment_free(checker, path.waypoints[i], path.waypoints[j], p.edge_step)) {
      path.waypoints.erase(path.waypoints.begin() + static_cast<std::ptrdiff_t>(i + 1),
                           path.waypoints.begin() + static_cast<std::ptrdiff_t>(j));
    }
  }
  return path;
}

// ---------------------------------------------------------------------------
// Time parameterisation

/**
 * Time law on a piecewise-linear joint path. Knots carry arc length s and
 * path speed; between knots the path acceleration is constant, so
 * sdot^2 is linear in s.
 */
class Trajectory {
 public:
  struct Sample {
    JointVec q;
    JointVec v;
    JointVec a;
  };

  Trajectory() = default;
  Trajectory(Path path, std::vector<double> s, std::vector<double> sdot, std::vector<double> t)
      : path_(std::move(path)), s_(std::move(s)), sdot_(std::move(sdot)), t_(std::move(t)) {
    for (std::size_t i = 1; i < path_.waypoints.size(); ++i) {
      const JointVec d = path_.waypoints[i].q - path_.waypoints[i - 1].q;
      seg_start_.push_back(cum_);
      cum_ += d.norm();
    }
  }

  double duration() const { return t_.empty() ? 0.0 : t_.back(); }
  const Path& path() const { return path_; }
  const std::vector<double>& knot_times() const { return t_; }
  const std::vector<double>& knot_s() const { return s_; }
  const std::vector<double>& knot_sdot() const { return sdot_; }

  Sample evaluate(double t) const {
    Sample out;
    if (t_.size() < 2) {
      out.q = path_.waypoints.empty() ? JointVec::Zero() : path_.waypoints.front().q;
      out.v.setZero();
      out.a.setZero();
      return out;
    }
    t = std::clamp(t, 0.0, duration());
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - t_.begin()) - 1));
    k = std::min(k, t_.size() - 2);
    const double tau = t - t_[k];
    const double acc = interval_accel(k);
    const double s = s_[k] + sdot_[k] * tau + 0.5 * acc * tau * tau;
    const double sd = sdot_[k] + acc * tau;
    // Segment lookup by the interval midpoint keeps knot-side evaluations on
    // the segment the interval belongs to.
    const std::size_t seg = segment_of(0.5 * (s_[k] + s_[k + 1]));
    const JointVec u = direction(seg);
    out.q = path_.waypoints[seg].q + (s - seg_start_[seg]) * u;
    out.v = sd * u;
    out.a = acc * u;
    return out;
  }

  /// Grid samples at the knots (position, velocity, acceleration to the right).
  std::vector<std::pair<double, Sample>> knot_samples() const {
    std::vector<std::pair<double, Sample>> out;
    for (double t : t_) out.emplace_back(t, evaluate(t));
    return out;
  }

  /// t,q1..q6,v1..v6,a1..a6 at the knots.
  void write_csv(std::ostream& os) const {
    os << "t";
    for (const char* p : {"q", "v", "a"}) {
      for (int j = 1; j <= kDof; ++j) os << ',' << p << j;
    }
    os << '\n';
    std::ostringstream line;
    line << std::setprecision(9);
    for (const auto& [t, smp] : knot_samples()) {
      line.str("");
      line << t;
      for (const JointVec* v : {&smp.q, &smp.v, &smp.a}) {
        for (int j = 0; j < kDof; ++j) line << ',' << (*v)[j];
      }
      os << line.str() << '\n';
    }
  }

 private:
  double interval_accel(std::size_t k) const {
    const double ds = s_[k + 1] - s_[k];
    if (ds <= 0.0) return 0.0;
    return (sdot_[k + 1] * sdot_[k + 1] - sdot_[k] * sdot_[k]) / (2.0 * ds);
  }

  std::size_t segment_of(double s) const {
    auto it = std::upper_bound(seg_start_.begin(), seg_start_.end(), s);
    const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - seg_start_.begin()) - 1));
    return std::min(i, seg_start_.size() - 1);
  }

  JointVec direction(std::size_t seg) const {
    const JointVec d = path_.waypoints[seg + 1].q - path_.waypoints[seg].q;
    const double n = d.norm();
    return n > 0.0 ? JointVec(d / n) : JointVec(JointVec::Zero());
  }

  Path path_;
  std::vector<double> s_;
  std::vector<double> sdot_;
  std::vector<double> t_;
  std::vector<double> seg_start_;
  double cum_ = 0.0;
};

/**
 * Time-optimal parameterisation on a grid over the path's arc length.
 *
 * The grid holds every waypoint plus at least `samples` points overall. Path
 * speed is bounded by the joint velocity limits along each segment and is
 * zero at waypoints where the direction changes. A forward pass under the
 * acceleration bound followed by a backward pass under the deceleration bound
 * yields the fastest profile on the grid.
 */
inline Trajectory parameterize(Path path, const ArmModel& arm, int samples = 100) {
  // Drop repeated waypoints; they carry no direction.
  std::vector<JointConfig> wp;
  for (const auto& q : path.waypoints) {
    if (wp.empty() || (q.q - wp.back().q).norm() > 1e-15) wp.push_back(q);
  }
  if (wp.size() < 2) {
    const JointConfig q = path.waypoints.empty() ? JointConfig{} : path.waypoints.front();
    return Trajectory(Path{{q, q}}, {0.0}, {0.0}, {0.0});
  }
  path.waypoints = wp;

  const JointVec vmax = arm.velocity_limits();
  const JointVec amax = arm.acceleration_limits();
  const std::size_t nseg = wp.size() - 1;
  std::vector<double> len(nseg);
  std::vector<double> seg_v(nseg);
  std::vector<double> seg_a(nseg);
  double total = 0.0;
  for (std::size_t i = 0; i < nseg; ++i) {
    const JointVec d = wp[i + 1].q - wp[i].q;
    len[i] = d.norm();
    const JointVec u = d / len[i];
    double v = std::numeric_limits<double>::infinity();
    double a = std::numeric_limits<double>::infinity();
    for (int j = 0; j < kDof; ++j) {
      if (std::abs(u[j]) > 1e-15) {
        v = std::min(v, vmax[j] / std::abs(u[j]));
        a = std::min(a, amax[j] / std::abs(u[j]));
      }
    }
    seg_v[i] = v;
    seg_a[i] = a;
    total += len[i];
  }

  // Grid: each segment receives points in proportion to its length.
  std::vector<double> s{0.0};
  std::vector<std::size_t> seg_of_interval;
  std::vector<bool> corner{true};
  double start = 0.0;
  for (std::size_t i = 0; i < nseg; ++i) {
    const int pieces = std::max(1, static_cast<int>(std::ceil(samples * len[i] / total)));
    for (int k = 1; k <= pieces; ++k) {
      s.push_back(k == pieces ? start + len[i] : start + len[i] * k / pieces);
      seg_of_interval.push_back(i);
      corner.push_back(false);
    }
    start += len[i];
    if (i + 1 < nseg) {
      const JointVec u0 = (wp[i + 1].q - wp[i].q) / len[i];
      const JointVec u1 = (wp[i + 2].q - wp[i + 1].q) / len[i + 1];
      corner.back() = u0.dot(u1) < 1.0 - 1e-12;
    }
  }
  corner.back() = true;
  const std::size_t n = s.size();

  // Speed cap at each knot: the tighter of the adjacent segments' caps.
  std::vector<double> cap(n, std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double v = seg_v[seg_of_interval[k]];
    cap[k] = std::min(cap[k], v);
    cap[k + 1] = std::min(cap[k + 1], v);
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (corner[k]) cap[k] = 0.0;
  }

  std::vector<double> sd(cap);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double a = seg_a[seg_of_interval[k]];
    sd[k + 1] = std::min(sd[k + 1], std::sqrt(sd[k] * sd[k] + 2.0 * a * (s[k + 1] - s[k])));
  }
  for (std::size_t k = n - 1; k > 0; --k) {
    const double a = seg_a[seg_of_interval[k - 1]];
    sd[k - 1] = std::min(sd[k - 1], std::sqrt(sd[k] * sd[k] + 2.0 * a * (s[k] - s[k - 1])));
  }

  std::vector<double> t(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double ds = s[k + 1] - s[k];
    const double vsum = sd[k] + sd[k + 1];
    t[k + 1] = t[k] + (vsum > 0.0 ? 2.0 * ds / vsum : 0.0);
  }
  return Trajectory(std::move(path), std::move(s), std::move(sd), std::move(t));
}

// ---------------------------------------------------------------------------
// Independent validation

struct ValidationReport {
  bool ok = true;
  double max_velocity_ratio = 0.0;      // max |v_j| / vmax_j
  double max_acceleration_ratio = 0.0;  // max |a_j| / amax_j
  double max_step = 0.0;                // largest joint change between samples
  std::optional<double> collision_time;
  std::string reason;
};

/// Samples the trajectory every `dt` seconds and checks limits, continuity
/// and collisions.
template <CollisionChecker C>
ValidationReport validate_trajectory(const Trajectory& traj, const ArmModel& arm, const C& checker,
                                     double dt = 1e-3, double tol = 1e-9) {
  ValidationReport r;
  const JointVec vmax = arm.velocity_limits();
  const JointVec amax = arm.acceleration_limits();
  const double dur = traj.duration();
  const auto steps = static_cast<long>(std::ceil(dur / dt));
  JointVec prev = traj.evaluate(0.0).q;
  for (long i = 0; i <= steps; ++i) {
    const double t = std::min(dur, static_cast<double>(i) * dt);
    const auto smp = traj.evaluate(t);
    r.max_velocity_ratio = std::max(r.max_velocity_ratio, smp.v.cwiseAbs().cwiseQuotient(vmax).maxCoeff());
    r.max_acceleration_ratio = std::max(r.max_acceleration_ratio, smp.a.cwiseAbs().cwiseQuotient(amax).maxCoeff());
    const double step = (smp.q - prev).cwiseAbs().cwiseQuotient(vmax).maxCoeff();
    r.max_step = std::max(r.max_step, (smp.q - prev).cwiseAbs().maxCoeff());
    if (step > dt * (1.0 + 1e-6) + tol) {
      r.ok = false;
      if (r.reason.empty()) r.reason = "position jump at t=" + std::to_string(t);
    }
    prev = smp.q;
    if (!arm.within_limits(JointConfig(smp.q), 1e-9)) {
      r.ok = false;
      if (r.reason.empty()) r.reason = "joint limit at t=" + std::to_string(t);
    }
    if (!r.collision_time && checker.in_collision(JointConfig(smp.q))) {
      r.collision_time = t;
      r.ok = false;
      if (r.reason.empty()) r.reason = "collision at t=" + std::to_string(t);
    }
  }
  if (r.max_velocity_ratio > 1.0 + 1e-9) {
    r.ok = false;
    if (r.reason.empty()) r.reason = "velocity limit exceeded";
  }
  if (r.max_acceleration_ratio > 1.0 + 1e-9) {
    r.ok = false;
    if (r.reason.empty()) r.reason = "acceleration limit exceeded";
  }
  const auto& wp = traj.path().waypoints;
  if (!wp.empty()) {
    if ((traj.evaluate(0.0).q - wp.front().q).cwiseAbs().maxCoeff() > 1e-9 ||
        (traj.evaluate(dur).q - wp.back().q).cwiseAbs().maxCoeff() > 1e-9) {
      r.ok = false;
      if (r.reason.empty()) r.reason = "endpoints do not match the path";
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dispense cycle

/// Goals of one cycle: i start, ii tip pick-up, iii aspirate, iv dispense, v disposal.
inline constexpr std::array<const char*, 5> kGoalNames = {"i", "ii", "iii", "iv", "v"};

inline std::string segment_name(std::size_t k) {
  return std::string(kGoalNames[k]) + "->" + kGoalNames[k + 1];
}

struct SegmentPlan {
  Path path;
  Trajectory trajectory;
  int retries = 0;  // goal invalidations on this segment
};

enum class CycleFailure { none, goal_search, planning };

struct CycleResult {
  std::vector<SegmentPlan> segments;
  std::vector<Goal> goals;         // goals ii..v actually used
  std::array<int, 4> infeasible{};  // rejected candidates per goal search ii..v
  int total_retries = 0;
  CycleFailure failure = CycleFailure::none;
  std::size_t failed_segment = 0;
  std::string message;

  bool ok() const { return failure == CycleFailure::none; }
};

/// Plans one segment; returns nullopt on failure. The default runs
/// RRT-Connect, pruning and time parameterisation.
using SegmentPlanner = std::function<std::optional<std::pair<Path, Trajectory>>(
    const JointConfig& from, const Goal& to, std::size_t segment, int attempt)>;

template <CollisionChecker C>
SegmentPlanner default_segment_planner(const ArmModel& arm, const C& checker, const PlannerParams& params) {
  return [&arm, &checker, params](const JointConfig& from, const Goal& to, std::size_t segment,
                                  int attempt) -> std::optional<std::pair<Path, Trajectory>> {
    PlannerParams p = params;
    p.seed = mix_seed(params.seed, segment * 1000 + static_cast<std::uint64_t>(attempt));
    auto path = rrt_connect(arm, checker, from, to.q, p);
    if (!path) return std::nullopt;
    Path pruned = prune(checker, std::move(*path), p);
    Trajectory traj = parameterize(pruned, arm, p.topp_samples);
    return std::make_pair(std::move(pruned), std::move(traj));
  };
}

/**
 * Plans i->ii->iii->iv->v. Goals come lazily from the four searches. When a
 * segment cannot be planned its target goal is invalidated and the search
 * produces the next candidate; after `max_goal_retries` invalidations on a
 * segment the cycle fails as a planning failure, while an exhausted search
 * fails as a goal-search failure. Either failure names the segment.
 */
template <CollisionChecker C>
CycleResult plan_dispense_cycle(const JointConfig& start, std::array<GoalSearch, 4>& searches, const C& checker,
                                const PlannerParams& params, const SegmentPlanner& planner) {
  CycleResult out;
  JointConfig from = start;
  for (std::size_t k = 0; k < 4; ++k) {
    GoalSearch& search = searches[k];
    search.set_preferred(from);
    int retries = 0;
    bool done = false;
    while (!done) {
      auto goal = search.next(checker);
      out.infeasible[k] = search.infeasible();
      if (!goal) {
        out.failure = CycleFailure::goal_search;
        out.failed_segment = k;
        out.message = "no more reachable goals for segment " + segment_name(k);
        return out;
      }
      if (auto plan = planner(from, *goal, k, retries)) {
        out.segments.push_back({std::move(plan->first), std::move(plan->second), retries});
        out.goals.push_back(*goal);
        from = goal->q;
        done = true;
      } else {
        ++retries;
        ++out.total_retries;
        if (retries > params.max_goal_retries) {
          out.failure = CycleFailure::planning;
          out.failed_segment = k;
          out.message = "planning failed for segment " + segment_name(k) + " after " +
                        std::to_string(params.max_goal_retries) + " goal retries";
          return out;
        }
      }
    }
  }
  return out;
}

template <CollisionChecker C>
CycleResult plan_dispense_cycle(const ArmModel& arm, const JointConfig& start, std::array<GoalSearch, 4>& searches,
                                const C& checker, const PlannerParams& params = {}) {
  return plan_dispense_cycle(start, searches, checker, params, default_segment_planner(arm, checker, params));
}

}  // namespace pipetbench

#endif  // PIPETBENCH_PLANNING_HPP
