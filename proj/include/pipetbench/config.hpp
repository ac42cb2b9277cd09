#ifndef PIPETBENCH_CONFIG_HPP
#define PIPETBENCH_CONFIG_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pipetbench/sim.hpp"

namespace pipetbench {

using Json = nlohmann::ordered_json;

/// Parse or schema error; `line`/`column` are 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, std::size_t column, const std::string& pointer,
              const std::string& what)
      : std::runtime_error(format(source, line, column, pointer, what)), line_(line), column_(column),
        pointer_(pointer) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& pointer() const { return pointer_; }

 private:
  static std::string format(const std::string& source, std::size_t line, std::size_t column,
                            const std::string& pointer, const std::string& what) {
    std::ostringstream os;
    os << source;
    if (line) os << ':' << line << ':' << column;
    os << ": ";
    if (!pointer.empty()) os << pointer << ": ";
    os << what;
    return os.str();
  }

  std::size_t line_;
  std::size_t column_;
  std::string pointer_;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline std::string escape_pointer_token(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

/**
 * Maps JSON pointers to the text offset where their value (or, for object
 * members, their key) starts. Only run on text nlohmann already accepted,
 * so the scan can assume well-formed input.
 */
class PointerLocator {
 public:
  explicit PointerLocator(const std::string& text) : text_(text) {
    std::size_t i = 0;
    value("", i);
  }

  std::pair<std::size_t, std::size_t> find(const std::string& pointer) const {
    auto it = offsets_.find(pointer);
    if (it == offsets_.end()) return {0, 0};
    return line_column(text_, it->second);
  }

 private:
  void skip_ws(std::size_t& i) const {
    while (i < text_.size() && (text_[i] == ' ' || text_[i] == '\t' || text_[i] == '\n' || text_[i] == '\r')) ++i;
  }

  std::string string_token(std::size_t& i) const {
    std::string out;
    ++i;  // opening quote
    while (i < text_.size() && text_[i] != '"') {
      if (text_[i] == '\\' && i + 1 < text_.size()) {
        out += text_[i + 1];
        i += 2;
      } else {
        out += text_[i++];
      }
    }
    ++i;
    return out;
  }

  void value(const std::string& ptr, std::size_t& i) {
    skip_ws(i);
    offsets_.emplace(ptr, i);
    if (i >= text_.size()) return;
    const char c = text_[i];
    if (c == '{') {
      ++i;
      skip_ws(i);
      if (text_[i] == '}') {
        ++i;
        return;
      }
      while (i < text_.size()) {
        skip_ws(i);
        const std::size_t key_at = i;
        const std::string child = ptr + "/" + escape_pointer_token(string_token(i));
        skip_ws(i);
        ++i;  // colon
        value(child, i);
        offsets_[child] = key_at;
        skip_ws(i);
        if (text_[i++] == '}') return;
      }
    } else if (c == '[') {
      ++i;
      skip_ws(i);
      if (text_[i] == ']') {
        ++i;
        return;
      }
      for (std::size_t k = 0; i < text_.size(); ++k) {
        value(ptr + "/" + std::to_string(k), i);
        skip_ws(i);
        if (text_[i++] == ']') return;
      }
    } else if (c == '"') {
      string_token(i);
    } else {
      while (i < text_.size() && text_[i] != ',' && text_[i] != '}' && text_[i] != ']' && text_[i] != ' ' &&
             text_[i] != '\n' && text_[i] != '\r' && text_[i] != '\t') {
        ++i;
      }
    }
  }

  const std::string& text_;
  std::map<std::string, std::size_t> offsets_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Document, in file units: millimetres, degrees, seconds.

struct PoseDoc {
  std::array<double, 3> xyz_mm{};
  std::array<double, 3> rpy_deg{};  // applied as Rz(yaw) Ry(pitch) Rx(roll)

  Pose to_pose() const {
    const Quat q = Quat(Eigen::AngleAxisd(deg2rad(rpy_deg[2]), Vec3::UnitZ())) *
                   Quat(Eigen::AngleAxisd(deg2rad(rpy_deg[1]), Vec3::UnitY())) *
                   Quat(Eigen::AngleAxisd(deg2rad(rpy_deg[0]), Vec3::UnitX()));
    return Pose(Vec3(xyz_mm[0], xyz_mm[1], xyz_mm[2]) * 1e-3, q.normalized());
  }
};

struct DhDoc {
  double a_mm = 0.0;
  double alpha_deg = 0.0;
  double d_mm = 0.0;
  double theta_offset_deg = 0.0;
};

struct LimitDoc {
  double lower_deg = -180.0;
  double upper_deg = 180.0;
  double max_velocity_deg_s = 90.0;
  double max_acceleration_deg_s2 = 360.0;
};

struct BoxDoc {
  std::string name;
  PoseDoc pose;
  std::array<double, 3> size_mm{};
};

struct CylinderDoc {
  std::string name;
  std::array<double, 3> base_mm{};
  double radius_mm = 0.0;
  double height_mm = 0.0;
};

struct PlateDoc {
  PoseDoc pose;
  int rows = 8;
  int cols = 12;
  double pitch_mm = 9.0;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;

  std::array<DhDoc, kDof> dh{};
  std::array<LimitDoc, kDof> limits{};
  PoseDoc arm_base;
  PoseDoc tool;

  std::vector<BoxDoc> boxes;
  std::vector<CylinderDoc> cylinders;

  PoseDoc rack_pose;
  int rack_rows = 8;
  int rack_cols = 12;
  double rack_pitch_mm = 9.0;
  double rack_border_mm = 6.0;
  std::string occupancy;
  double teach_noise_mm = 0.3;
  int teach_samples = 5;
  double base_yaw_gain = 0.0;

  PlateDoc source;
  PlateDoc destination;
  std::array<double, 3> waste_center_mm{};
  std::array<double, 3> waste_size_mm{100.0, 80.0, 80.0};

  double misclassify_prob = 0.0;
  int neighbor_confusion_radius = 1;
  double deviation_std_mm = 0.0;
  double rotation_sensitivity_per_deg = 0.0;
  std::array<double, 2> bias_mm{};

  double e_mm = 0.5;
  double compliance_mm = 0.15;
  int max_steps = 10;
  double gain = 0.5;
  double rotation_interval_deg = 5.0;
  double approach_yaw_jitter_deg = 30.0;
  std::string mode = "closed";

  bool plan_motion = false;
  double edge_step_deg = 0.0;
  double extend_step_deg = 0.0;
  int max_iterations = 10000;
  int prune_attempts = 200;
  int topp_samples = 100;
  int max_goal_retries = 5;
  int seed_bank_size = 2000;
  double planning_margin_mm = 5.0;
  double approach_height_mm = 15.0;
  double well_clearance_mm = 50.0;
  double yaw_step_deg = 10.0;
  std::array<double, 3> ready_point_mm{};
  double disposal_cone_half_angle_deg = 30.0;
  double drop_height_mm = 20.0;
  double disposal_yaw_step_deg = 10.0;
  int disposal_subdivisions = 2;
  double dwell_s = 0.5;

  double bounce_mass_g = 1.0;
  double bounce_v0_m_s = 0.5;
  double bounce_dt_ms = 5.0;
  double bounce_lost_force_n = 0.05;
  double bounce_restitution = 0.5;
  int bounce_max_impacts = 1000;

  std::string output_dir = "out";
  bool write_trace = false;
};

namespace detail {

/// Unit conversion that drops floating-point dust, so documents built from
/// code defaults read as typed.
inline double tidy(double x) {
  const double r = std::round(x * 1e9) / 1e9;
  return r == 0.0 ? 0.0 : r;
}

inline double mm(double m) { return tidy(m * 1e3); }
inline double deg(double rad) { return tidy(rad2deg(rad)); }

inline PoseDoc pose_doc(const Pose& p) {
  PoseDoc d;
  for (int i = 0; i < 3; ++i) d.xyz_mm[static_cast<std::size_t>(i)] = mm(p.position()[i]);
  const Mat3 r = p.rotation().toRotationMatrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  d.rpy_deg = {deg(std::atan2(r(2, 1), r(2, 2))), deg(pitch), deg(std::atan2(r(1, 0), r(0, 0)))};
  return d;
}

inline std::array<double, 3> mm3(const Vec3& v) { return {mm(v.x()), mm(v.y()), mm(v.z())}; }
inline Vec3 m3(const std::array<double, 3>& a) { return Vec3(a[0], a[1], a[2]) * 1e-3; }

}  // namespace detail

/// The document equivalent of default_scenario().
inline ScenarioConfig config_from_scenario(const Scenario& s) {
  using detail::deg;
  using detail::mm;
  using detail::mm3;
  using detail::pose_doc;
  ScenarioConfig c;
  c.seed = s.seed;
  for (std::size_t i = 0; i < kDof; ++i) {
    const DhRow& r = s.arm.dh[i];
    c.dh[i] = {mm(r.a), deg(r.alpha), mm(r.d), deg(r.theta_offset)};
    const JointLimit& l = s.arm.limits[i];
    c.limits[i] = {deg(l.lower), deg(l.upper), deg(l.max_velocity), deg(l.max_acceleration)};
  }
  c.arm_base = pose_doc(s.arm.base);
  c.tool = pose_doc(s.arm.tool);
  for (const Box& b : s.boxes) c.boxes.push_back({b.name, pose_doc(b.pose), mm3(2.0 * b.half_extents)});
  for (const Cylinder& cy : s.cylinders) {
    c.cylinders.push_back({cy.name, mm3(cy.base_center), mm(cy.radius), mm(cy.height)});
  }
  c.rack_pose = pose_doc(s.rack.pose);
  c.rack_rows = s.rack.rows;
  c.rack_cols = s.rack.cols;
  c.rack_pitch_mm = mm(s.rack.pitch);
  c.rack_border_mm = mm(s.rack.border);
  c.occupancy = s.rack.occupancy;
  c.teach_noise_mm = mm(s.teaching.noise_std);
  c.teach_samples = s.teaching.samples;
  c.base_yaw_gain = s.teaching.base_yaw_gain;
  c.source = {pose_doc(s.source.pose), s.source.rows, s.source.cols, mm(s.source.pitch)};
  c.destination = {pose_doc(s.destination.pose), s.destination.rows, s.destination.cols, mm(s.destination.pitch)};
  c.waste_center_mm = mm3(s.waste.center);
  c.waste_size_mm = mm3(s.waste.size);
  c.misclassify_prob = s.classifier.misclassify_prob;
  c.neighbor_confusion_radius = s.classifier.neighbor_confusion_radius;
  c.deviation_std_mm = mm(s.classifier.deviation_measurement_std);
  c.rotation_sensitivity_per_deg = s.classifier.rotation_sensitivity;
  c.bias_mm = {mm(s.classifier.measurement_bias.x()), mm(s.classifier.measurement_bias.y())};
  c.e_mm = mm(s.acceptable_residual);
  c.compliance_mm = mm(s.compliance);
  c.max_steps = s.max_steps;
  c.gain = s.gain;
  c.rotation_interval_deg = s.rotation_interval_deg;
  c.approach_yaw_jitter_deg = deg(s.approach_yaw_jitter);
  c.mode = s.mode == LoopMode::open ? "open" : "closed";
  c.plan_motion = s.plan_motion;
  c.edge_step_deg = deg(s.planner.edge_step);
  c.extend_step_deg = deg(s.planner.extend_step);
  c.max_iterations = s.planner.max_iterations;
  c.prune_attempts = s.planner.prune_attempts;
  c.topp_samples = s.planner.topp_samples;
  c.max_goal_retries = s.planner.max_goal_retries;
  c.seed_bank_size = s.seed_bank_size;
  c.planning_margin_mm = mm(s.planning_margin);
  c.approach_height_mm = mm(s.approach_height);
  c.well_clearance_mm = mm(s.well_clearance);
  c.yaw_step_deg = deg(s.yaw_step);
  c.ready_point_mm = mm3(s.ready_point);
  c.disposal_cone_half_angle_deg = deg(s.disposal_cone.half_angle);
  c.drop_height_mm = mm(s.disposal.drop_height);
  c.disposal_yaw_step_deg = deg(s.disposal.yaw_step);
  c.disposal_subdivisions = s.disposal.subdivisions;
  c.dwell_s = s.dwell;
  c.bounce_mass_g = mm(s.bounce.mass);
  c.bounce_v0_m_s = s.bounce.v0;
  c.bounce_dt_ms = mm(s.bounce.dt);
  c.bounce_lost_force_n = s.bounce.lost_force;
  c.bounce_restitution = s.bounce.restitution;
  c.bounce_max_impacts = s.bounce.max_impacts;
  return c;
}

inline Scenario to_scenario(const ScenarioConfig& c) {
  using detail::m3;
  Scenario s;
  s.seed = c.seed;
  for (std::size_t i = 0; i < kDof; ++i) {
    const DhDoc& r = c.dh[i];
    s.arm.dh[i] = {r.a_mm * 1e-3, deg2rad(r.alpha_deg), r.d_mm * 1e-3, deg2rad(r.theta_offset_deg)};
    const LimitDoc& l = c.limits[i];
    s.arm.limits[i] = {deg2rad(l.lower_deg), deg2rad(l.upper_deg), deg2rad(l.max_velocity_deg_s),
                       deg2rad(l.max_acceleration_deg_s2)};
  }
  s.arm.base = c.arm_base.to_pose();
  s.arm.tool = c.tool.to_pose();
  s.boxes.clear();
  for (const BoxDoc& b : c.boxes) {
    Box box;
    box.name = b.name;
    box.pose = b.pose.to_pose();
    box.half_extents = 0.5 * m3(b.size_mm);
    s.boxes.push_back(box);
  }
  s.cylinders.clear();
  for (const CylinderDoc& cy : c.cylinders) {
    Cylinder cyl;
    cyl.name = cy.name;
    cyl.base_center = m3(cy.base_mm);
    cyl.radius = cy.radius_mm * 1e-3;
    cyl.height = cy.height_mm * 1e-3;
    s.cylinders.push_back(cyl);
  }
  s.rack.pose = c.rack_pose.to_pose();
  s.rack.rows = c.rack_rows;
  s.rack.cols = c.rack_cols;
  s.rack.pitch = c.rack_pitch_mm * 1e-3;
  s.rack.border = c.rack_border_mm * 1e-3;
  s.rack.occupancy = c.occupancy;
  s.teaching.noise_std = c.teach_noise_mm * 1e-3;
  s.teaching.samples = c.teach_samples;
  s.teaching.base_yaw_gain = c.base_yaw_gain;
  auto plate = [](const PlateDoc& d, const std::string& name) {
    PlateModel p;
    p.name = name;
    p.pose = d.pose.to_pose();
    p.rows = d.rows;
    p.cols = d.cols;
    p.pitch = d.pitch_mm * 1e-3;
    return p;
  };
  s.source = plate(c.source, "source");
  s.destination = plate(c.destination, "destination");
  s.waste.center = m3(c.waste_center_mm);
  s.waste.size = m3(c.waste_size_mm);
  s.classifier.misclassify_prob = c.misclassify_prob;
  s.classifier.neighbor_confusion_radius = c.neighbor_confusion_radius;
  s.classifier.deviation_measurement_std = c.deviation_std_mm * 1e-3;
  s.classifier.rotation_sensitivity = c.rotation_sensitivity_per_deg;
  s.classifier.measurement_bias = Vec2(c.bias_mm[0], c.bias_mm[1]) * 1e-3;
  s.acceptable_residual = c.e_mm * 1e-3;
  s.compliance = c.compliance_mm * 1e-3;
  s.max_steps = c.max_steps;
  s.gain = c.gain;
  s.rotation_interval_deg = c.rotation_interval_deg;
  s.approach_yaw_jitter = deg2rad(c.approach_yaw_jitter_deg);
  s.mode = c.mode == "open" ? LoopMode::open : LoopMode::closed;
  s.plan_motion = c.plan_motion;
  s.planner.edge_step = deg2rad(c.edge_step_deg);
  s.planner.extend_step = deg2rad(c.extend_step_deg);
  s.planner.max_iterations = c.max_iterations;
  s.planner.prune_attempts = c.prune_attempts;
  s.planner.topp_samples = c.topp_samples;
  s.planner.max_goal_retries = c.max_goal_retries;
  s.planner.seed = c.seed;
  s.seed_bank_size = c.seed_bank_size;
  s.planning_margin = c.planning_margin_mm * 1e-3;
  s.approach_height = c.approach_height_mm * 1e-3;
  s.well_clearance = c.well_clearance_mm * 1e-3;
  s.yaw_step = deg2rad(c.yaw_step_deg);
  s.ready_point = m3(c.ready_point_mm);
  s.disposal_cone.half_angle = deg2rad(c.disposal_cone_half_angle_deg);
  s.disposal.drop_height = c.drop_height_mm * 1e-3;
  s.disposal.yaw_step = deg2rad(c.disposal_yaw_step_deg);
  s.disposal.subdivisions = c.disposal_subdivisions;
  s.dwell = c.dwell_s;
  s.bounce.mass = c.bounce_mass_g * 1e-3;
  s.bounce.v0 = c.bounce_v0_m_s;
  s.bounce.dt = c.bounce_dt_ms * 1e-3;
  s.bounce.lost_force = c.bounce_lost_force_n;
  s.bounce.restitution = c.bounce_restitution;
  s.bounce.max_impacts = c.bounce_max_impacts;
  return s;
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

inline Json pose_json(const PoseDoc& p) { return Json{{"xyz_mm", p.xyz_mm}, {"rpy_deg", p.rpy_deg}}; }

}  // namespace detail

inline Json to_json(const ScenarioConfig& c) {
  using detail::pose_json;
  Json dh = Json::array(), limits = Json::array();
  for (const DhDoc& r : c.dh) {
    dh.push_back({{"a_mm", r.a_mm}, {"alpha_deg", r.alpha_deg}, {"d_mm", r.d_mm},
                  {"theta_offset_deg", r.theta_offset_deg}});
  }
  for (const LimitDoc& l : c.limits) {
    limits.push_back({{"lower_deg", l.lower_deg}, {"upper_deg", l.upper_deg},
                      {"max_velocity_deg_s", l.max_velocity_deg_s},
                      {"max_acceleration_deg_s2", l.max_acceleration_deg_s2}});
  }
  Json boxes = Json::array(), cylinders = Json::array();
  for (const BoxDoc& b : c.boxes) boxes.push_back({{"name", b.name}, {"pose", pose_json(b.pose)}, {"size_mm", b.size_mm}});
  for (const CylinderDoc& cy : c.cylinders) {
    cylinders.push_back(
        {{"name", cy.name}, {"base_mm", cy.base_mm}, {"radius_mm", cy.radius_mm}, {"height_mm", cy.height_mm}});
  }
  auto plate = [](const PlateDoc& p) {
    return Json{{"pose", pose_json(p.pose)}, {"rows", p.rows}, {"cols", p.cols}, {"pitch_mm", p.pitch_mm}};
  };
  Json j;
  j["arm"] = {{"dh", dh}, {"limits", limits}, {"base", pose_json(c.arm_base)}, {"tool", pose_json(c.tool)}};
  j["scene"] = {{"boxes", boxes}, {"cylinders", cylinders}};
  j["rack"] = {{"pose", pose_json(c.rack_pose)},
               {"rows", c.rack_rows},
               {"cols", c.rack_cols},
               {"pitch_mm", c.rack_pitch_mm},
               {"border_mm", c.rack_border_mm},
               {"occupancy", c.occupancy},
               {"teaching",
                {{"noise_mm", c.teach_noise_mm}, {"samples", c.teach_samples}, {"base_yaw_gain", c.base_yaw_gain}}}};
  j["plates"] = {{"source", plate(c.source)},
                 {"destination", plate(c.destination)},
                 {"waste", {{"center_mm", c.waste_center_mm}, {"size_mm", c.waste_size_mm}}}};
  j["classifier"] = {{"misclassify_prob", c.misclassify_prob},
                     {"neighbor_confusion_radius", c.neighbor_confusion_radius},
                     {"deviation_std_mm", c.deviation_std_mm},
                     {"rotation_sensitivity_per_deg", c.rotation_sensitivity_per_deg},
                     {"bias_mm", c.bias_mm}};
  j["correction"] = {{"e_mm", c.e_mm},
                     {"compliance_mm", c.compliance_mm},
                     {"max_steps", c.max_steps},
                     {"gain", c.gain},
                     {"rotation_interval_deg", c.rotation_interval_deg},
                     {"approach_yaw_jitter_deg", c.approach_yaw_jitter_deg},
                     {"mode", c.mode}};
  j["planner"] = {{"seed", c.seed},
                  {"plan_motion", c.plan_motion},
                  {"edge_step_deg", c.edge_step_deg},
                  {"extend_step_deg", c.extend_step_deg},
                  {"max_iterations", c.max_iterations},
                  {"prune_attempts", c.prune_attempts},
                  {"topp_samples", c.topp_samples},
                  {"max_goal_retries", c.max_goal_retries},
                  {"seed_bank_size", c.seed_bank_size},
                  {"planning_margin_mm", c.planning_margin_mm},
                  {"approach_height_mm", c.approach_height_mm},
                  {"well_clearance_mm", c.well_clearance_mm},
                  {"yaw_step_deg", c.yaw_step_deg},
                  {"ready_point_mm", c.ready_point_mm},
                  {"dwell_s", c.dwell_s},
                  {"disposal",
                   {{"cone_half_angle_deg", c.disposal_cone_half_angle_deg},
                    {"drop_height_mm", c.drop_height_mm},
                    {"yaw_step_deg", c.disposal_yaw_step_deg},
                    {"subdivisions", c.disposal_subdivisions}}}};
  j["bounce"] = {{"mass_g", c.bounce_mass_g},         {"v0_m_s", c.bounce_v0_m_s},
                 {"dt_ms", c.bounce_dt_ms},           {"lost_force_n", c.bounce_lost_force_n},
                 {"restitution", c.bounce_restitution}, {"max_impacts", c.bounce_max_impacts}};
  j["output"] = {{"dir", c.output_dir}, {"trace", c.write_trace}};
  return j;
}

namespace detail {

/// Reads one object, remembering which keys were consumed so leftovers can
/// be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string pointer, const PointerLocator& loc, const std::string& source)
      : j_(j), ptr_(std::move(pointer)), loc_(loc), source_(source) {
    if (!j_.is_object()) fail(ptr_.empty() ? "" : ptr_, "expected an object");
  }

  [[noreturn]] void fail(const std::string& ptr, const std::string& what) const {
    const auto [line, col] = loc_.find(ptr);
    throw ConfigError(source_, line, col, ptr.empty() ? "/" : ptr, what);
  }

  std::string child(const std::string& key) const { return ptr_ + "/" + escape_pointer_token(key); }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const Json* v = get(key)) out = as_number(*v, child(key));
  }

  template <class Int>
  void integer(const std::string& key, Int& out, long long lo, long long hi) {
    if (const Json* v = get(key)) out = static_cast<Int>(as_integer(*v, child(key), lo, hi));
  }

  void boolean(const std::string& key, bool& out) {
    if (const Json* v = get(key)) {
      if (!v->is_boolean()) fail(child(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const Json* v = get(key)) {
      if (!v->is_string()) fail(child(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <std::size_t N>
  void numbers(const std::string& key, std::array<double, N>& out) {
    if (const Json* v = get(key)) {
      if (!v->is_array() || v->size() != N) fail(child(key), "expected an array of " + std::to_string(N) + " numbers");
      for (std::size_t i = 0; i < N; ++i) out[i] = as_number((*v)[i], child(key) + "/" + std::to_string(i));
    }
  }

  void pose(const std::string& key, PoseDoc& out) {
    if (const Json* v = get(key)) {
      ObjectReader r(*v, child(key), loc_, source_);
      r.numbers("xyz_mm", out.xyz_mm);
      r.numbers("rpy_deg", out.rpy_deg);
      r.finish();
    }
  }

  std::optional<ObjectReader> object(const std::string& key) {
    if (const Json* v = get(key)) return ObjectReader(*v, child(key), loc_, source_);
    return std::nullopt;
  }

  const Json* array(const std::string& key) {
    const Json* v = get(key);
    if (v && !v->is_array()) fail(child(key), "expected an array");
    return v;
  }

  ObjectReader element(const Json& e, const std::string& key, std::size_t i) const {
    return ObjectReader(e, child(key) + "/" + std::to_string(i), loc_, source_);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(child(it.key()), "unknown key \"" + it.key() + "\"");
    }
  }

 private:
  double as_number(const Json& v, const std::string& ptr) const {
    if (!v.is_number()) fail(ptr, "expected a number");
    return v.get<double>();
  }

  long long as_integer(const Json& v, const std::string& ptr, long long lo, long long hi) const {
    if (!v.is_number_integer()) fail(ptr, "expected an integer");
    long long x = 0;
    if (v.is_number_unsigned()) {
      const auto u = v.get<unsigned long long>();
      if (u > static_cast<unsigned long long>(hi)) fail(ptr, "out of range");
      x = static_cast<long long>(u);
    } else {
      x = v.get<long long>();
    }
    if (x < lo || x > hi) fail(ptr, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  const Json& j_;
  std::string ptr_;
  const PointerLocator& loc_;
  const std::string& source_;
  std::set<std::string> seen_;
};

inline void read_plate(ObjectReader& r, PlateDoc& p) {
  r.pose("pose", p.pose);
  r.integer("rows", p.rows, 1, 64);
  r.integer("cols", p.cols, 1, 64);
  r.number("pitch_mm", p.pitch_mm);
  r.finish();
}

}  // namespace detail

/**
 * Parses a scenario document. Missing keys keep the default_scenario()
 * value; unknown keys, wrong types and out-of-range values throw
 * ConfigError carrying the line and column of the offending entry.
 */
inline ScenarioConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string what = e.what();
    if (const auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    throw ConfigError(source, line, col, "", what);
  }
  const detail::PointerLocator loc(text);
  ScenarioConfig c = config_from_scenario(default_scenario());
  detail::ObjectReader root(j, "", loc, source);

  if (auto arm = root.object("arm")) {
    if (const Json* dh = arm->array("dh")) {
      if (dh->size() != kDof) arm->fail(arm->child("dh"), "expected 6 rows");
      for (std::size_t i = 0; i < kDof; ++i) {
        auto r = arm->element((*dh)[i], "dh", i);
        r.number("a_mm", c.dh[i].a_mm);
        r.number("alpha_deg", c.dh[i].alpha_deg);
        r.number("d_mm", c.dh[i].d_mm);
        r.number("theta_offset_deg", c.dh[i].theta_offset_deg);
        r.finish();
      }
    }
    if (const Json* lim = arm->array("limits")) {
      if (lim->size() != kDof) arm->fail(arm->child("limits"), "expected 6 rows");
      for (std::size_t i = 0; i < kDof; ++i) {
        auto r = arm->element((*lim)[i], "limits", i);
        r.number("lower_deg", c.limits[i].lower_deg);
        r.number("upper_deg", c.limits[i].upper_deg);
        r.number("max_velocity_deg_s", c.limits[i].max_velocity_deg_s);
        r.number("max_acceleration_deg_s2", c.limits[i].max_acceleration_deg_s2);
        r.finish();
        if (!(c.limits[i].lower_deg < c.limits[i].upper_deg)) {
          r.fail(arm->child("limits") + "/" + std::to_string(i), "lower_deg must be < upper_deg");
        }
        if (!(c.limits[i].max_velocity_deg_s > 0.0) || !(c.limits[i].max_acceleration_deg_s2 > 0.0)) {
          r.fail(arm->child("limits") + "/" + std::to_string(i), "velocity and acceleration limits must be > 0");
        }
      }
    }
    arm->pose("base", c.arm_base);
    arm->pose("tool", c.tool);
    arm->finish();
  }

  if (auto scene = root.object("scene")) {
    if (const Json* boxes = scene->array("boxes")) {
      c.boxes.clear();
      for (std::size_t i = 0; i < boxes->size(); ++i) {
        auto r = scene->element((*boxes)[i], "boxes", i);
        BoxDoc b;
        r.string("name", b.name);
        r.pose("pose", b.pose);
        r.numbers("size_mm", b.size_mm);
        r.finish();
        for (double v : b.size_mm) {
          if (!(v > 0.0)) r.fail(scene->child("boxes") + "/" + std::to_string(i) + "/size_mm", "sizes must be > 0");
        }
        c.boxes.push_back(b);
      }
    }
    if (const Json* cyls = scene->array("cylinders")) {
      c.cylinders.clear();
      for (std::size_t i = 0; i < cyls->size(); ++i) {
        auto r = scene->element((*cyls)[i], "cylinders", i);
        CylinderDoc cy;
        r.string("name", cy.name);
        r.numbers("base_mm", cy.base_mm);
        r.number("radius_mm", cy.radius_mm);
        r.number("height_mm", cy.height_mm);
        r.finish();
        if (!(cy.radius_mm > 0.0) || !(cy.height_mm > 0.0)) {
          r.fail(scene->child("cylinders") + "/" + std::to_string(i), "radius_mm and height_mm must be > 0");
        }
        c.cylinders.push_back(cy);
      }
    }
    scene->finish();
  }

  if (auto rack = root.object("rack")) {
    rack->pose("pose", c.rack_pose);
    rack->integer("rows", c.rack_rows, 1, 8);
    rack->integer("cols", c.rack_cols, 1, 12);
    rack->number("pitch_mm", c.rack_pitch_mm);
    rack->number("border_mm", c.rack_border_mm);
    rack->string("occupancy", c.occupancy);
    if (!c.occupancy.empty()) {
      const bool bits = c.occupancy.find_first_not_of("01") == std::string::npos;
      if (!bits || c.occupancy.size() != static_cast<std::size_t>(c.rack_rows * c.rack_cols)) {
        rack->fail(rack->child("occupancy"), "expected rows*cols characters of 0 and 1");
      }
    }
    if (!(c.rack_pitch_mm > 0.0)) rack->fail(rack->child("pitch_mm"), "must be > 0");
    if (auto t = rack->object("teaching")) {
      t->number("noise_mm", c.teach_noise_mm);
      t->integer("samples", c.teach_samples, 3, 96);
      t->number("base_yaw_gain", c.base_yaw_gain);
      t->finish();
      if (!(c.teach_noise_mm >= 0.0)) t->fail(t->child("noise_mm"), "must be >= 0");
    }
    rack->finish();
  }

  if (auto plates = root.object("plates")) {
    if (auto p = plates->object("source")) detail::read_plate(*p, c.source);
    if (auto p = plates->object("destination")) detail::read_plate(*p, c.destination);
    if (auto w = plates->object("waste")) {
      w->numbers("center_mm", c.waste_center_mm);
      w->numbers("size_mm", c.waste_size_mm);
      w->finish();
    }
    plates->finish();
  }

  if (auto cl = root.object("classifier")) {
    cl->number("misclassify_prob", c.misclassify_prob);
    cl->integer("neighbor_confusion_radius", c.neighbor_confusion_radius, 0, 10);
    cl->number("deviation_std_mm", c.deviation_std_mm);
    cl->number("rotation_sensitivity_per_deg", c.rotation_sensitivity_per_deg);
    cl->numbers("bias_mm", c.bias_mm);
    cl->finish();
    if (!(c.misclassify_prob >= 0.0 && c.misclassify_prob <= 1.0)) {
      cl->fail(cl->child("misclassify_prob"), "must be in [0, 1]");
    }
    if (!(c.deviation_std_mm >= 0.0)) cl->fail(cl->child("deviation_std_mm"), "must be >= 0");
    if (!(c.rotation_sensitivity_per_deg >= 0.0)) cl->fail(cl->child("rotation_sensitivity_per_deg"), "must be >= 0");
  }

  if (auto co = root.object("correction")) {
    co->number("e_mm", c.e_mm);
    co->number("compliance_mm", c.compliance_mm);
    co->integer("max_steps", c.max_steps, 1, 1000);
    co->number("gain", c.gain);
    co->number("rotation_interval_deg", c.rotation_interval_deg);
    co->number("approach_yaw_jitter_deg", c.approach_yaw_jitter_deg);
    co->string("mode", c.mode);
    co->finish();
    if (!(c.e_mm > 0.0)) co->fail(co->child("e_mm"), "must be > 0");
    if (!(c.compliance_mm >= 0.0)) co->fail(co->child("compliance_mm"), "must be >= 0");
    if (!(c.gain >= 0.0 && c.gain <= 1.0)) co->fail(co->child("gain"), "must be in [0, 1]");
    if (!(c.rotation_interval_deg > 0.0)) co->fail(co->child("rotation_interval_deg"), "must be > 0");
    if (c.mode != "open" && c.mode != "closed") co->fail(co->child("mode"), "expected \"open\" or \"closed\"");
  }

  if (auto pl = root.object("planner")) {
    pl->integer("seed", c.seed, 0, std::numeric_limits<long long>::max());
    pl->boolean("plan_motion", c.plan_motion);
    pl->number("edge_step_deg", c.edge_step_deg);
    pl->number("extend_step_deg", c.extend_step_deg);
    pl->integer("max_iterations", c.max_iterations, 1, 10000000);
    pl->integer("prune_attempts", c.prune_attempts, 0, 1000000);
    pl->integer("topp_samples", c.topp_samples, 2, 100000);
    pl->integer("max_goal_retries", c.max_goal_retries, 0, 1000);
    pl->integer("seed_bank_size", c.seed_bank_size, 1, 1000000);
    pl->number("planning_margin_mm", c.planning_margin_mm);
    pl->number("approach_height_mm", c.approach_height_mm);
    pl->number("well_clearance_mm", c.well_clearance_mm);
    pl->number("yaw_step_deg", c.yaw_step_deg);
    pl->numbers("ready_point_mm", c.ready_point_mm);
    pl->number("dwell_s", c.dwell_s);
    if (auto d = pl->object("disposal")) {
      d->number("cone_half_angle_deg", c.disposal_cone_half_angle_deg);
      d->number("drop_height_mm", c.drop_height_mm);
      d->number("yaw_step_deg", c.disposal_yaw_step_deg);
      d->integer("subdivisions", c.disposal_subdivisions, 0, 5);
      d->finish();
      if (!(c.disposal_cone_half_angle_deg < 90.0)) d->fail(d->child("cone_half_angle_deg"), "must be < 90");
      if (!(c.disposal_yaw_step_deg > 0.0)) d->fail(d->child("yaw_step_deg"), "must be > 0");
    }
    pl->finish();
    if (!(c.edge_step_deg > 0.0)) pl->fail(pl->child("edge_step_deg"), "must be > 0");
    if (!(c.extend_step_deg > 0.0)) pl->fail(pl->child("extend_step_deg"), "must be > 0");
    if (!(c.yaw_step_deg > 0.0)) pl->fail(pl->child("yaw_step_deg"), "must be > 0");
    if (!(c.planning_margin_mm >= 0.0)) pl->fail(pl->child("planning_margin_mm"), "must be >= 0");
  }

  if (auto b = root.object("bounce")) {
    b->number("mass_g", c.bounce_mass_g);
    b->number("v0_m_s", c.bounce_v0_m_s);
    b->number("dt_ms", c.bounce_dt_ms);
    b->number("lost_force_n", c.bounce_lost_force_n);
    b->number("restitution", c.bounce_restitution);
    b->integer("max_impacts", c.bounce_max_impacts, 1, 1000000);
    b->finish();
    if (!(c.bounce_mass_g > 0.0)) b->fail(b->child("mass_g"), "must be > 0");
    if (!(c.bounce_dt_ms > 0.0)) b->fail(b->child("dt_ms"), "must be > 0");
    if (!(c.bounce_restitution >= 0.0 && c.bounce_restitution < 1.0)) b->fail(b->child("restitution"), "must be in [0, 1)");
  }

  if (auto o = root.object("output")) {
    o->string("dir", c.output_dir);
    o->boolean("trace", c.write_trace);
    o->finish();
  }

  root.finish();
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, 0, "", "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline std::string dump_config(const ScenarioConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace pipetbench

#endif  // PIPETBENCH_CONFIG_HPP
