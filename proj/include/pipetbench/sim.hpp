#ifndef PIPETBENCH_SIM_HPP
#define PIPETBENCH_SIM_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pipetbench/collision.hpp"
#include "pipetbench/correction.hpp"
#include "pipetbench/geometry.hpp"
#include "pipetbench/goal_search.hpp"
#include "pipetbench/kinematics.hpp"
#include "pipetbench/labware.hpp"
#include "pipetbench/planning.hpp"
#include "pipetbench/spiral.hpp"

namespace pipetbench {

// ---------------------------------------------------------------------------
// Disposal bounce model

struct BounceParams {
  double mass = 0.001;           // kg
  double v0 = 0.5;               // m/s at first impact
  double dt = 0.005;             // s, impact duration
  double lost_force = 0.05;      // N, adhesion loss per impact
  double restitution = 0.5;      // [0, 1)
  double tilt = 0.0;             // rad
  int max_impacts = 1000;

  void validate() const {
    if (!(mass > 0.0) || !(dt > 0.0)) throw std::invalid_argument("bounce: mass and dt must be > 0");
    if (!(lost_force >= 0.0)) throw std::invalid_argument("bounce: lost_force must be >= 0");
    if (!(restitution >= 0.0 && restitution < 1.0)) throw std::invalid_argument("bounce: restitution must be in [0, 1)");
    if (!(v0 >= 0.0)) throw std::invalid_argument("bounce: v0 must be >= 0");
  }
};

/**
 * Counts impacts whose force m v / dt - lost_force is still positive. After
 * each such impact the speed is scaled by restitution * cos(tilt): a tip that
 * lands side-first sheds the tangential share of its energy. With
 * lost_force == 0 the count is capped at max_impacts.
 */
inline int bounce_count(const BounceParams& p) {
  p.validate();
  const double factor = p.restitution * std::cos(p.tilt);
  double v = p.v0;
  int n = 0;
  while (n < p.max_impacts) {
    const double force = p.mass * v / p.dt - p.lost_force;
    if (force <= 0.0) break;
    ++n;
    v *= factor;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Scenario

struct PlateModel {
  std::string name = "plate";
  Pose pose;  // well (0,0) centre at the plate top
  int rows = 8;
  int cols = 12;
  double pitch = 0.009;

  Vec3 well_top(int index) const {
    const int n = rows * cols;
    const int i = ((index % n) + n) % n;
    return pose.apply(Vec3((i % cols) * pitch, (i / cols) * pitch, 0.0));
  }
};

struct WasteBox {
  Vec3 center = Vec3::Zero();  // centre of the footprint on the table
  Vec3 size = Vec3(0.10, 0.08, 0.08);

  Vec3 rim_center() const { return center + Vec3(0.0, 0.0, size.z()); }
};

/**
 * Direct-teaching error. Each recorded sample gets isotropic Gaussian noise
 * plus a rotation about the base axis of `base_yaw_gain` times the base
 * rotation needed to reach it, so racks reached with a large base rotation
 * are taught with a larger, mostly tangential offset.
 */
struct TeachingModel {
  double noise_std = 0.3e-3;
  int samples = 5;
  double base_yaw_gain = 0.0;  // rad of error per rad of base rotation
};

struct RackPlacement {
  Pose pose = Pose::from_xyz_yaw(0.20, -0.135, 0.085, 0.0);  // slot (0,0) tip top
  int rows = 8;
  int cols = 12;
  double pitch = 0.009;
  std::string occupancy;  // empty: full rack
  double border = 0.006;
};

enum class LoopMode { open, closed };

struct Scenario {
  ArmModel arm = default_arm();
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
  RackPlacement rack;
  TeachingModel teaching;
  PlateModel source;
  PlateModel destination;
  WasteBox waste;

  NoisyOracleModel classifier = presets::dual_signal();
  double acceptable_residual = 0.5e-3;  // e
  double compliance = 0.15e-3;          // tolerated extra residual at insertion
  int max_steps = 10;
  double gain = 0.5;
  double rotation_interval_deg = 5.0;
  double approach_yaw_jitter = deg2rad(30.0);  // spread of the approach yaw around the rack axis
  LoopMode mode = LoopMode::closed;

  double approach_height = 0.015;  // shaft tip above the tip top at goal ii
  double well_clearance = 0.050;   // above the plate at goals iii and iv
  double yaw_step = deg2rad(10.0);
  ConeSpec disposal_cone;
  DisposalParams disposal;
  Vec3 ready_point = Vec3(0.18, 0.0, 0.20);
  double planning_margin = 0.005;
  bool plan_motion = false;
  PlannerParams planner;
  BounceParams bounce;
  double dwell = 0.5;  // s per aspirate / dispense / release

  std::uint64_t seed = 0;
  int seed_bank_size = 2000;
};

/// Table, a reagent bottle and a tabletop layout reachable by the default arm.
inline Scenario default_scenario() {
  Scenario s;
  Box table;
  table.name = "table";
  table.pose = Pose(Vec3(0.15, 0.0, -0.01));
  table.half_extents = Vec3(0.40, 0.40, 0.01);
  s.boxes.push_back(table);
  Cylinder bottle;
  bottle.name = "bottle";
  bottle.base_center = Vec3(-0.12, 0.20, 0.0);
  bottle.radius = 0.03;
  bottle.height = 0.12;
  s.cylinders.push_back(bottle);
  s.source.name = "source";
  s.source.pose = Pose::from_xyz_yaw(0.19, 0.06, 0.015, 0.0);
  s.destination.name = "destination";
  s.destination.pose = Pose::from_xyz_yaw(0.0, 0.165, 0.020, 0.0);
  s.destination.rows = 4;
  s.destination.cols = 6;
  s.destination.pitch = 0.019;
  s.waste.center = Vec3(0.05, -0.22, 0.0);
  return s;
}

/// Rack far out on the side of the table, taught with a base-rotation
/// dependent error that grows past 4.5 mm at the far tips.
inline Scenario boundary_bias_scenario() {
  Scenario s = default_scenario();
  s.rack.pose = Pose::from_xyz_yaw(0.05, -0.16, 0.085, deg2rad(-90.0));
  s.waste.center = Vec3(0.26, -0.02, 0.0);
  s.source.pose = Pose::from_xyz_yaw(0.19, 0.08, 0.015, 0.0);
  s.teaching.base_yaw_gain = 0.013;
  return s;
}

inline Box box_from_local(const Pose& frame, const Vec3& lo, const Vec3& hi, std::string name) {
  Box b;
  b.pose = frame * Pose((lo + hi) / 2.0);
  b.half_extents = (hi - lo) / 2.0;
  b.name = std::move(name);
  return b;
}

/// Scene primitives including boxes for the rack, the plates and the waste box.
inline Scene build_scene(const Scenario& s) {
  Scene sc;
  sc.boxes = s.boxes;
  sc.cylinders = s.cylinders;
  const auto& r = s.rack;
  const double b = r.border;
  const double h = r.pose.position().z();
  sc.boxes.push_back(box_from_local(r.pose, Vec3(-b, -b, -h),
                                    Vec3((r.cols - 1) * r.pitch + b, (r.rows - 1) * r.pitch + b, 0.0), "rack"));
  for (const PlateModel* p : {&s.source, &s.destination}) {
    const double ph = p->pose.position().z();
    const double pb = 0.5 * p->pitch + 0.004;
    sc.boxes.push_back(box_from_local(p->pose, Vec3(-pb, -pb, -ph),
                                      Vec3((p->cols - 1) * p->pitch + pb, (p->rows - 1) * p->pitch + pb, 0.0),
                                      p->name));
  }
  Box waste;
  waste.name = "waste";
  waste.pose = Pose(s.waste.center + Vec3(0.0, 0.0, 0.5 * s.waste.size.z()));
  waste.half_extents = 0.5 * s.waste.size;
  sc.boxes.push_back(waste);
  sc.robot = default_robot_geometry(s.arm);
  sc.validate();
  return sc;
}

inline RackModel true_rack(const Scenario& s) {
  RackModel r = RackModel::full(s.rack.pose, s.rack.rows, s.rack.cols, s.rack.pitch, 0.0);
  if (!s.rack.occupancy.empty()) r.set_occupancy_bits(s.rack.occupancy);
  return r;
}

/// Simulated direct teaching followed by the pose fit.
inline RackFit teach_rack(const Scenario& s, const RackModel& truth, std::mt19937_64& rng) {
  std::vector<TeachSample> samples;
  std::normal_distribution<double> n(0.0, 1.0);
  for (const Slot& slot : default_teach_slots(s.teaching.samples, truth.cols)) {
    const Vec2 xy = truth.local_xy(slot);
    const Vec3 p = truth.pose.apply(Vec3(xy.x(), xy.y(), truth.slot_height));
    const Vec3 b = s.arm.base.position();
    const double base_rot = std::atan2(p.y() - b.y(), p.x() - b.x());
    const double err = s.teaching.base_yaw_gain * base_rot;
    Vec3 rec = b + Quat(Eigen::AngleAxisd(err, Vec3::UnitZ())) * (p - b);
    rec += s.teaching.noise_std * Vec3(n(rng), n(rng), 0.0);
    samples.push_back({rec, slot, s.teaching.noise_std});
  }
  return fit_rack_pose(samples, truth.pitch, truth.slot_height);
}

// ---------------------------------------------------------------------------
// Metrics

enum class TipOutcome { attached, gave_up, insert_failed, unreachable, skipped_empty };

inline const char* to_string(TipOutcome o) {
  switch (o) {
    case TipOutcome::attached: return "attached";
    case TipOutcome::gave_up: return "gave_up";
    case TipOutcome::insert_failed: return "insert_failed";
    case TipOutcome::unreachable: return "unreachable";
    case TipOutcome::skipped_empty: return "skipped_empty";
  }
  return "?";
}

struct TipRecord {
  Slot slot;
  int tip_id = 0;
  TipOutcome outcome = TipOutcome::skipped_empty;
  int infeasible_goals = 0;
  int steps = 0;
  int yaw_researches = 0;
  double initial_deviation = 0.0;  // m
  double final_deviation = 0.0;    // m
  double relative_yaw = 0.0;       // rad, at the first observation
  int bounces = 0;
  double cycle_time = 0.0;  // s, trajectories plus dwell; 0 without motion planning
  int plan_retries = 0;

  bool success() const { return outcome == TipOutcome::attached; }
};

struct RunMetrics {
  std::vector<TipRecord> tips;  // one per rack slot, in picking order then skipped slots
  std::size_t attempted = 0;
  std::size_t successes = 0;
  std::size_t gave_up = 0;
  std::size_t insert_failed = 0;
  std::size_t unreachable = 0;
  std::size_t skipped_empty = 0;
  int total_steps = 0;
  int max_infeasible = 0;
  double teach_rms = 0.0;
  double max_drift = 0.0;  // largest open-loop tip estimate error, m
  std::size_t planning_failures = 0;

  double success_rate() const { return attempted ? static_cast<double>(successes) / attempted : 0.0; }
  double average_steps() const { return attempted ? static_cast<double>(total_steps) / attempted : 0.0; }

  /// Aggregates recomputed from the per-tip records.
  void recompute() {
    attempted = successes = gave_up = insert_failed = unreachable = skipped_empty = 0;
    total_steps = 0;
    max_infeasible = 0;
    for (const auto& t : tips) {
      max_infeasible = std::max(max_infeasible, t.infeasible_goals);
      switch (t.outcome) {
        case TipOutcome::skipped_empty: ++skipped_empty; continue;
        case TipOutcome::attached: ++successes; break;
        case TipOutcome::gave_up: ++gave_up; break;
        case TipOutcome::insert_failed: ++insert_failed; break;
        case TipOutcome::unreachable: ++unreachable; break;
      }
      ++attempted;
      total_steps += t.steps;
    }
  }
};

// ---------------------------------------------------------------------------
// Execution

namespace detail {

/// Shaft at a pick-up pose over the real rack: what the cameras see and
/// what a correction move does.
class PickupActuator {
 public:
  PickupActuator(const ArmModel& arm, const SceneChecker& checker, const SeedBank& bank, const RackModel& truth,
                 const Slot& target, const Goal& goal, double yaw_step)
      : arm_(&arm), checker_(&checker), bank_(&bank), truth_(&truth), target_(target), pose_(goal.pose),
        q_(goal.q), yaw_step_(yaw_step) {}

  Observation observe() const {
    Observation obs;
    const Vec2 shaft = pose_.position().head<2>();
    obs.deviation = shaft - seen_tip(shaft);
    obs.relative_yaw = wrap_angle(truth_->pose.yaw() - pose_.yaw());
    obs.mask = neighbor_mask(*truth_, target_);
    return obs;
  }

  bool move(const Vec2& delta) {
    const Pose next(pose_.position() + Vec3(delta.x(), delta.y(), 0.0), pose_.rotation());
    IkStrategy st;
    st.bank = bank_;
    st.preferred = q_;
    if (auto q = solve_feasible(*arm_, next, *checker_, st)) {
      pose_ = next;
      q_ = *q;
      return true;
    }
    return false;
  }

  bool research_yaw() {
    IkStrategy st;
    st.bank = bank_;
    st.preferred = q_;
    GoalSearch s = yaw_search(*arm_, pose_, yaw_step_, st);
    while (auto g = s.next(*checker_)) {
      if (g->yaw_offset == 0.0) continue;
      pose_ = g->pose;
      q_ = g->q;
      return true;
    }
    return false;
  }

  Vec2 true_deviation() const {
    const Vec2 xy = truth_->local_xy(target_);
    return pose_.position().head<2>() - truth_->pose.apply(Vec3(xy.x(), xy.y(), 0.0)).head<2>();
  }

  const JointConfig& q() const { return q_; }

 private:
  /// The tip nearest to the shaft: a large offset makes the cameras frame a
  /// neighbour instead of the target.
  Vec2 seen_tip(const Vec2& shaft) const {
    const Vec2 xy = truth_->local_xy(target_);
    Vec2 best = truth_->pose.apply(Vec3(xy.x(), xy.y(), 0.0)).head<2>();
    double best_d = (best - shaft).norm();
    if (best_d <= 0.5 * truth_->pitch) return best;
    for (int r = 0; r < truth_->rows; ++r) {
      for (int c = 0; c < truth_->cols; ++c) {
        if (!truth_->occupied({r, c}) && !(Slot{r, c} == target_)) continue;
        const Vec2 l = truth_->local_xy({r, c});
        const Vec2 p = truth_->pose.apply(Vec3(l.x(), l.y(), 0.0)).head<2>();
        const double d = (p - shaft).norm();
        if (d < best_d) {
          best_d = d;
          best = p;
        }
      }
    }
    return best;
  }

  const ArmModel* arm_;
  const SceneChecker* checker_;
  const SeedBank* bank_;
  const RackModel* truth_;
  Slot target_;
  Pose pose_;
  JointConfig q_;
  double yaw_step_;
};

}  // namespace detail

/**
 * Runs one full-rack dispensing task: teach the rack, then for every tip in
 * picking order search the pick-up goal, optionally plan the whole cycle,
 * run the correction loop, check insertion and, in closed-loop mode, shift
 * the rack estimate by the measured offset.
 */
/// Goal searches ii..v of one dispense cycle: above the tip, above the
/// source and destination wells for liquid `index`, and the disposal pose.
inline std::array<GoalSearch, 4> cycle_searches(const Scenario& s, const Pose& pick_nominal, int index,
                                                const IkStrategy& st) {
  return {yaw_search(s.arm, pick_nominal, s.yaw_step, st),
          yaw_search(s.arm,
                     vertical_tip_pose(s.source.well_top(index) + Vec3(0, 0, s.well_clearance), s.source.pose.yaw()),
                     s.yaw_step, st),
          yaw_search(s.arm,
                     vertical_tip_pose(s.destination.well_top(index) + Vec3(0, 0, s.well_clearance),
                                       s.destination.pose.yaw()),
                     s.yaw_step, st),
          disposal_search(s.arm, s.waste.rim_center(), s.disposal_cone, s.disposal, st)};
}

inline RunMetrics run_scenario(const Scenario& s) {
  s.arm.validate();
  s.classifier.validate();
  const SpiralLattice lattice = build_lattice(s.acceptable_residual, s.rack.pitch);
  const Scene scene = build_scene(s);
  const SceneChecker checker(scene, s.arm, s.planning_margin);
  const SeedBank bank(s.arm, s.seed_bank_size, mix_seed(s.seed, 0xba4c));
  const auto rotations = trained_rotations(s.rotation_interval_deg);

  RunMetrics m;
  RackModel truth = true_rack(s);
  std::mt19937_64 teach_rng(mix_seed(s.seed, 0x7eac));
  const RackFit fit = teach_rack(s, truth, teach_rng);
  m.teach_rms = fit.rms_residual;
  RackModel estimate = truth;
  estimate.pose = fit.pose;

  IkStrategy ready_st;
  ready_st.bank = &bank;
  const GoalResult ready = search_reachable_yaw(s.arm, vertical_tip_pose(s.ready_point, 0.0), s.yaw_step, checker,
                                                ready_st);
  if (!ready.goal) throw std::runtime_error("scenario: ready pose is unreachable");
  JointConfig current = ready.goal->q;

  const auto sequence = picking_sequence(truth);
  int index = 0;
  for (const Slot& slot : sequence) {
    TipRecord rec;
    rec.slot = slot;
    rec.tip_id = truth.tip_id(slot);
    std::mt19937_64 rng(mix_seed(s.seed, 0x100 + static_cast<std::uint64_t>(rec.tip_id)));

    const Vec2 lxy = truth.local_xy(slot);
    const Vec3 est_tip = estimate.pose.apply(Vec3(lxy.x(), lxy.y(), 0.0));
    const Vec3 real_tip = truth.pose.apply(Vec3(lxy.x(), lxy.y(), 0.0));
    m.max_drift = std::max(m.max_drift, (fit.pose.apply(Vec3(lxy.x(), lxy.y(), 0.0)) - real_tip).head<2>().norm());

    const double jitter = std::uniform_real_distribution<double>(-s.approach_yaw_jitter, s.approach_yaw_jitter)(rng);
    const Pose nominal = vertical_tip_pose(est_tip + Vec3(0.0, 0.0, s.approach_height), estimate.pose.yaw() + jitter);

    IkStrategy st;
    st.bank = &bank;
    st.preferred = current;
    std::optional<Goal> pick;
    std::optional<JointConfig> cycle_end;
    if (s.plan_motion) {
      auto searches = cycle_searches(s, nominal, index, st);
      PlannerParams pp = s.planner;
      pp.seed = mix_seed(s.seed, 0x9000 + static_cast<std::uint64_t>(rec.tip_id));
      const CycleResult cyc = plan_dispense_cycle(s.arm, current, searches, checker, pp);
      rec.infeasible_goals = cyc.infeasible[0];
      rec.plan_retries = cyc.total_retries;
      if (!cyc.goals.empty()) pick = cyc.goals.front();
      if (cyc.ok()) {
        for (const auto& seg : cyc.segments) rec.cycle_time += seg.trajectory.duration();
        rec.cycle_time += 3.0 * s.dwell;
        BounceParams bp = s.bounce;
        bp.tilt = cyc.goals.back().tilt;
        rec.bounces = bounce_count(bp);
        cycle_end = cyc.goals.back().q;
      } else {
        ++m.planning_failures;
      }
    } else {
      const GoalResult g = search_reachable_yaw(s.arm, nominal, s.yaw_step, checker, st);
      rec.infeasible_goals = g.infeasible;
      pick = g.goal;
      rec.bounces = bounce_count(s.bounce);
    }

    if (!pick) {
      rec.outcome = TipOutcome::unreachable;
      m.tips.push_back(rec);
      ++index;
      continue;
    }

    detail::PickupActuator act(s.arm, checker, bank, truth, slot, *pick, s.yaw_step);
    rec.initial_deviation = act.true_deviation().norm();
    rec.relative_yaw = act.observe().relative_yaw;
    OracleClassifier classifier(lattice, s.classifier, rng, rotations);
    const CorrectionResult loop = correction_loop(lattice, classifier, act, CorrectionParams{s.max_steps});
    rec.steps = loop.steps;
    rec.yaw_researches = loop.yaw_researches;
    rec.final_deviation = act.true_deviation().norm();
    if (loop.outcome == LoopOutcome::gave_up) {
      rec.outcome = TipOutcome::gave_up;
    } else if (attach_check(act.true_deviation(), s.acceptable_residual, s.compliance)) {
      rec.outcome = TipOutcome::attached;
      truth.set_occupied(slot, false);
    } else {
      rec.outcome = TipOutcome::insert_failed;
    }
    if (s.mode == LoopMode::closed && loop.outcome == LoopOutcome::attached) {
      estimate = closed_loop_update(estimate, slot, loop.state.estimated_total_correction, s.gain);
    }
    current = cycle_end ? *cycle_end : act.q();
    m.tips.push_back(rec);
    ++index;
  }

  // Slots that held no tip from the start.
  const RackModel initial = true_rack(s);
  for (int r = 0; r < initial.rows; ++r) {
    for (int c = 0; c < initial.cols; ++c) {
      if (initial.occupied({r, c})) continue;
      TipRecord rec;
      rec.slot = {r, c};
      rec.tip_id = initial.tip_id(rec.slot);
      rec.outcome = TipOutcome::skipped_empty;
      m.tips.push_back(rec);
    }
  }
  m.recompute();
  return m;
}

struct SingleCycle {
  JointConfig start;
  CycleResult result;
  Slot slot;
};

/// Plans the cycle for the first tip of the picking order from the ready
/// pose, with the rack at its true pose.
inline SingleCycle plan_single_cycle(const Scenario& s) {
  const Scene scene = build_scene(s);
  const SceneChecker checker(scene, s.arm, s.planning_margin);
  const SeedBank bank(s.arm, s.seed_bank_size, mix_seed(s.seed, 0xba4c));
  IkStrategy st;
  st.bank = &bank;
  SingleCycle out;
  const GoalResult ready =
      search_reachable_yaw(s.arm, vertical_tip_pose(s.ready_point, 0.0), s.yaw_step, checker, st);
  if (!ready.goal) {
    out.result.failure = CycleFailure::goal_search;
    out.result.failed_segment = 0;
    out.result.message = "ready pose is unreachable";
    return out;
  }
  out.start = ready.goal->q;
  st.preferred = out.start;
  const RackModel truth = true_rack(s);
  const auto sequence = picking_sequence(truth);
  if (sequence.empty()) throw EmptySlotError("rack holds no tips");
  out.slot = sequence.front();
  const Vec2 xy = truth.local_xy(out.slot);
  const Pose nominal =
      vertical_tip_pose(truth.pose.apply(Vec3(xy.x(), xy.y(), s.approach_height)), truth.pose.yaw());
  auto searches = cycle_searches(s, nominal, 0, st);
  PlannerParams pp = s.planner;
  pp.seed = s.seed;
  out.result = plan_dispense_cycle(s.arm, out.start, searches, checker, pp);
  return out;
}

// ---------------------------------------------------------------------------
// Batches

/// Worker count: PIPETBENCH_THREADS if set (>= 1), else the hardware count.
inline unsigned thread_budget() {
  if (const char* env = std::getenv("PIPETBENCH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `trials` copies of the scenario with seeds derived from s.seed;
/// results are in trial order regardless of the thread count.
inline std::vector<RunMetrics> run_batch(const Scenario& s, int trials, unsigned threads = thread_budget()) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  std::vector<RunMetrics> out(static_cast<std::size_t>(trials));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < trials; i = next++) {
      Scenario t = s;
      t.seed = mix_seed(s.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(i));
      out[static_cast<std::size_t>(i)] = run_scenario(t);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
  if (threads == 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

struct BatchSummary {
  std::size_t trials = 0;
  std::size_t attempted = 0;
  std::size_t successes = 0;
  int total_steps = 0;
  int max_infeasible = 0;
  std::array<double, 96> mean_steps{};    // per tip id
  std::array<double, 96> success_rate{};  // per tip id
  std::array<double, 96> mean_infeasible{};

  double success_fraction() const { return attempted ? static_cast<double>(successes) / attempted : 0.0; }
  double average_steps() const { return attempted ? static_cast<double>(total_steps) / attempted : 0.0; }
};

inline BatchSummary summarize(const std::vector<RunMetrics>& runs) {
  BatchSummary b;
  b.trials = runs.size();
  std::array<int, 96> count{};
  for (const auto& r : runs) {
    b.attempted += r.attempted;
    b.successes += r.successes;
    b.total_steps += r.total_steps;
    b.max_infeasible = std::max(b.max_infeasible, r.max_infeasible);
    for (const auto& t : r.tips) {
      if (t.outcome == TipOutcome::skipped_empty || t.tip_id < 0 || t.tip_id >= 96) continue;
      const auto i = static_cast<std::size_t>(t.tip_id);
      ++count[i];
      b.mean_steps[i] += t.steps;
      b.success_rate[i] += t.success() ? 1.0 : 0.0;
      b.mean_infeasible[i] += t.infeasible_goals;
    }
  }
  for (std::size_t i = 0; i < 96; ++i) {
    if (count[i] == 0) continue;
    b.mean_steps[i] /= count[i];
    b.success_rate[i] /= count[i];
    b.mean_infeasible[i] /= count[i];
  }
  return b;
}

struct SweepRow {
  double interval_deg = 0.0;
  double success_rate = 0.0;
  double average_steps = 0.0;
  std::size_t attempted = 0;
};

/// Re-runs the batch with the classifier trained at each rotation interval.
inline std::vector<SweepRow> sweep_rotation_intervals(const Scenario& base, const std::vector<double>& intervals,
                                                      int trials = 1, unsigned threads = thread_budget()) {
  std::vector<SweepRow> rows;
  for (double iv : intervals) {
    Scenario s = base;
    s.rotation_interval_deg = iv;
    const BatchSummary b = summarize(run_batch(s, trials, threads));
    rows.push_back({iv, b.success_fraction(), b.average_steps(), b.attempted});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output

/// 8x12 grid of per-tip values, rows of the rack as lines.
inline void write_heat_csv(std::ostream& os, const std::array<double, 96>& values, int rows = 8, int cols = 12) {
  std::ostringstream line;
  line << std::fixed << std::setprecision(4);
  for (int r = 0; r < rows; ++r) {
    line.str("");
    for (int c = 0; c < cols; ++c) {
      if (c) line << ',';
      line << values[static_cast<std::size_t>(r * cols + c)];
    }
    os << line.str() << '\n';
  }
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "interval_deg,success_rate_pct,average_steps,tips\n";
  std::ostringstream line;
  line << std::fixed;
  for (const auto& r : rows) {
    line.str("");
    line << std::setprecision(0) << r.interval_deg << ',' << std::setprecision(2) << 100.0 * r.success_rate << ','
         << r.average_steps << ',' << r.attempted;
    os << line.str() << '\n';
  }
}

}  // namespace pipetbench

#endif  // PIPETBENCH_SIM_HPP
