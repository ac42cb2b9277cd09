#ifndef PIPETBENCH_CORRECTION_HPP
#define PIPETBENCH_CORRECTION_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pipetbench/geometry.hpp"
#include "pipetbench/labware.hpp"
#include "pipetbench/spiral.hpp"

namespace pipetbench {

/// What the camera pair would see, in symbolic form. `deviation` is the
/// shaft position minus the tip position in the horizontal plane.
struct Observation {
  Vec2 deviation = Vec2::Zero();
  double relative_yaw = 0.0;  // rack yaw relative to the end-effector, rad
  NeighborMask mask;
};

// ---------------------------------------------------------------------------
// Rotation variation used when collecting training data

/// Trained rack rotations (degrees): [-30, 30] and [150, 210] sampled every
/// `interval_deg`, starting at the lower end of each range.
inline std::vector<double> trained_rotations(double interval_deg) {
  if (!(interval_deg > 0.0)) throw std::invalid_argument("rotation interval must be > 0");
  std::vector<double> out;
  for (double lo : {-30.0, 150.0}) {
    for (int k = 0; lo + k * interval_deg <= lo + 60.0 + 1e-9; ++k) out.push_back(lo + k * interval_deg);
  }
  return out;
}

/// Angular distance in degrees from `yaw` to the closest trained rotation.
inline double distance_to_trained(double yaw_rad, const std::vector<double>& rotations_deg) {
  const double y = rad2deg(yaw_rad);
  double best = 360.0;
  for (double r : rotations_deg) {
    best = std::min(best, std::abs(std::remainder(y - r, 360.0)));
  }
  return best;
}

struct TrainingPlan {
  std::vector<double> rotations_deg;
  std::vector<NeighborMask> masks;
  std::size_t classes = 0;

  std::size_t per_class() const { return rotations_deg.size() * masks.size(); }
  std::size_t total() const { return per_class() * classes; }
};

/// One sample per (rotation, routine availability mask) for every class.
inline TrainingPlan data_generation_plan(const SpiralLattice& lattice, double interval_deg = 5.0, int rows = 8,
                                         int cols = 12) {
  return {trained_rotations(interval_deg), routine_masks(rows, cols), lattice.size()};
}

// ---------------------------------------------------------------------------
// Simulated classifier

/**
 * Error model of a trained classifier. The deviation is measured with a
 * fixed bias plus Gaussian noise and snapped to the nearest node; then, with
 * probability misclassify_prob * (1 + rotation_sensitivity * d), where d is
 * the yaw distance in degrees to the nearest trained rotation, the answer is
 * replaced by a random node within neighbor_confusion_radius hops.
 */
struct NoisyOracleModel {
  double misclassify_prob = 0.0;
  int neighbor_confusion_radius = 1;
  double deviation_measurement_std = 0.0;  // m
  double rotation_sensitivity = 0.0;       // per degree
  Vec2 measurement_bias = Vec2::Zero();    // m

  void validate() const {
    if (!(misclassify_prob >= 0.0 && misclassify_prob <= 1.0)) {
      throw std::invalid_argument("misclassify_prob must be in [0, 1]");
    }
    if (neighbor_confusion_radius < 0) throw std::invalid_argument("neighbor_confusion_radius must be >= 0");
    if (!(deviation_measurement_std >= 0.0)) throw std::invalid_argument("deviation_measurement_std must be >= 0");
    if (!(rotation_sensitivity >= 0.0)) throw std::invalid_argument("rotation_sensitivity must be >= 0");
    if (!measurement_bias.allFinite()) throw std::invalid_argument("measurement_bias must be finite");
  }

  double effective_misclassify_prob(double rotation_distance_deg) const {
    return std::min(1.0, misclassify_prob * (1.0 + rotation_sensitivity * rotation_distance_deg));
  }
};

namespace presets {

inline NoisyOracleModel perfect() { return {}; }

/// Two cameras, transformer-style model: tight envelope.
inline NoisyOracleModel dual_signal() {
  NoisyOracleModel m;
  m.misclassify_prob = 0.01;
  m.neighbor_confusion_radius = 1;
  m.deviation_measurement_std = 0.08e-3;
  m.rotation_sensitivity = 1.0;
  return m;
}

/// One camera only: a systematic offset along the hidden viewing axis and a
/// looser envelope.
inline NoisyOracleModel single_signal() {
  NoisyOracleModel m;
  m.misclassify_prob = 0.08;
  m.neighbor_confusion_radius = 2;
  m.deviation_measurement_std = 0.25e-3;
  m.rotation_sensitivity = 1.0;
  m.measurement_bias = Vec2(0.45e-3, 0.0);
  return m;
}

}  // namespace presets

inline ClassId oracle_classify(const SpiralLattice& lattice, const Observation& obs, const NoisyOracleModel& model,
                               std::mt19937_64& rng, const std::vector<double>& rotations_deg = trained_rotations(5.0)) {
  Vec2 measured = obs.deviation + model.measurement_bias;
  if (model.deviation_measurement_std > 0.0) {
    std::normal_distribution<double> n(0.0, model.deviation_measurement_std);
    measured += Vec2(n(rng), n(rng));
  }
  ClassId id = lattice.nearest_class(measured).id;
  if (model.misclassify_prob > 0.0) {
    const double p = model.effective_misclassify_prob(distance_to_trained(obs.relative_yaw, rotations_deg));
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p) {
      const auto near = lattice.neighbors_within(id, model.neighbor_confusion_radius);
      if (!near.empty()) {
        id = near[std::uniform_int_distribution<std::size_t>(0, near.size() - 1)(rng)];
      }
    }
  }
  return id;
}

/// Classifier contract used by the correction loop.
template <typename T>
concept Classifier = requires(T& c, const Observation& obs) {
  { c.classify(obs) } -> std::convertible_to<ClassId>;
};

/// Binds a model, lattice and random stream into a Classifier.
class OracleClassifier {
 public:
  OracleClassifier(const SpiralLattice& lattice, NoisyOracleModel model, std::mt19937_64& rng,
                   std::vector<double> rotations_deg = trained_rotations(5.0))
      : lattice_(&lattice), model_(model), rng_(&rng), rotations_(std::move(rotations_deg)) {
    model_.validate();
  }

  ClassId classify(const Observation& obs) { return oracle_classify(*lattice_, obs, model_, *rng_, rotations_); }

 private:
  const SpiralLattice* lattice_;
  NoisyOracleModel model_;
  std::mt19937_64* rng_;
  std::vector<double> rotations_;
};

struct EnvelopeStats {
  double within_fraction = 0.0;
  double mean_error = 0.0;  // m
  std::size_t samples = 0;
};

/// Fraction of predictions whose class node lies within `radius` of the true
/// deviation; deviations uniform over the lattice coverage disc, rack yaw on
/// a trained rotation.
inline EnvelopeStats classifier_envelope(const SpiralLattice& lattice, const NoisyOracleModel& model,
                                         std::size_t samples, std::uint64_t seed, double radius = 1.0e-3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rmax = lattice.coverage_radius();
  std::size_t within = 0;
  double err_sum = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double r = rmax * std::sqrt(u(rng));
    const double th = 2.0 * kPi * u(rng);
    Observation obs;
    obs.deviation = Vec2(r * std::cos(th), r * std::sin(th));
    const ClassId id = oracle_classify(lattice, obs, model, rng);
    const double err = (lattice.node(id) - obs.deviation).norm();
    err_sum += err;
    if (err <= radius) ++within;
  }
  EnvelopeStats s;
  s.samples = samples;
  s.within_fraction = samples ? static_cast<double>(within) / static_cast<double>(samples) : 0.0;
  s.mean_error = samples ? err_sum / static_cast<double>(samples) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Correction loop

/**
 * What the loop drives. observe() reports the current view; move() asks for
 * a planar shaft displacement and returns false, without moving, when the
 * pose is unreachable; research_yaw() looks for another feasible rotation
 * about the shaft and returns false when none is left.
 */
template <typename T>
concept Actuator = requires(T& a, const Vec2& delta) {
  { a.observe() } -> std::convertible_to<Observation>;
  { a.move(delta) } -> std::convertible_to<bool>;
  { a.research_yaw() } -> std::convertible_to<bool>;
};

struct CorrectionParams {
  int max_steps = 10;
};

struct CorrectionState {
  int counter = 0;
  double scale = 1.0;
  ClassId last_class = 0;
  Vec2 estimated_total_correction = Vec2::Zero();
  int nonzero_reclassifications = 0;
};

struct TraceRecord {
  int step = 0;
  ClassId cls = 0;
  Vec2 move = Vec2::Zero();  // requested, m
  double scale = 1.0;
  bool feasible = true;
};

enum class LoopOutcome { attached, gave_up };

struct CorrectionResult {
  LoopOutcome outcome = LoopOutcome::gave_up;
  int steps = 0;  // correction moves issued
  int yaw_researches = 0;
  CorrectionState state;
  std::vector<TraceRecord> trace;
};

/**
 * Classify, and stop on class 0 (the caller then inserts). Otherwise move
 * by scale * correction_vector. The first move uses the full vector; every
 * later non-zero answer halves the scale first. An infeasible move triggers
 * one yaw re-search and a retry. Gives up once max_steps moves were issued.
 */
template <Classifier K, Actuator A>
CorrectionResult correction_loop(const SpiralLattice& lattice, K& classifier, A& actuator,
                                 const CorrectionParams& params = {}) {
  CorrectionResult res;
  CorrectionState& st = res.state;
  int classification = 0;
  for (;;) {
    const Observation obs = actuator.observe();
    const ClassId cls = classifier.classify(obs);
    st.last_class = cls;
    if (cls == 0) {
      res.trace.push_back({classification, 0, Vec2::Zero(), st.scale, true});
      res.outcome = LoopOutcome::attached;
      break;
    }
    if (st.counter >= params.max_steps) {
      res.trace.push_back({classification, cls, Vec2::Zero(), st.scale, false});
      res.outcome = LoopOutcome::gave_up;
      break;
    }
    if (classification > 0) {
      st.scale *= 0.5;
      ++st.nonzero_reclassifications;
    }
    const Vec2 move = st.scale * lattice.correction_vector(cls);
    bool feasible = actuator.move(move);
    if (!feasible) {
      ++res.yaw_researches;
      if (actuator.research_yaw()) feasible = actuator.move(move);
    }
    if (feasible) st.estimated_total_correction += move;
    ++st.counter;
    res.trace.push_back({classification, cls, move, st.scale, feasible});
    ++classification;
  }
  res.steps = st.counter;
  return res;
}

/// step,class,move_x_mm,move_y_mm,scale,feasible
inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  os << "step,class,move_x_mm,move_y_mm,scale,feasible\n";
  std::ostringstream line;
  line << std::fixed << std::setprecision(6);
  for (const auto& r : trace) {
    line.str("");
    line << r.step << ',' << r.cls << ',' << r.move.x() * 1e3 << ',' << r.move.y() * 1e3 << ',' << r.scale << ','
         << (r.feasible ? 1 : 0) << '\n';
    os << line.str();
  }
}

/// Insertion succeeds when the residual is within e plus the tip's compliance.
inline bool attach_check(const Vec2& deviation, double e, double compliance) {
  return deviation.norm() <= e + compliance;
}

/// Moves the rack estimate by `gain` times the measured tip offset (true tip
/// position minus where the estimate put it, world frame).
inline RackModel closed_loop_update(RackModel rack, const Slot& slot, const Vec2& tip_offset, double gain = 0.5) {
  (void)rack.index(slot);  // throws for slots outside the grid
  const Vec3 shift(gain * tip_offset.x(), gain * tip_offset.y(), 0.0);
  rack.pose = Pose(rack.pose.position() + shift, rack.pose.rotation());
  return rack;
}

}  // namespace pipetbench

#endif  // PIPETBENCH_CORRECTION_HPP
