#pragma once
// Mission data, trajectories and plant assembly for the chaser/target stack.

#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oos/multibody.hpp"
#include "oos/parallel.hpp"

namespace oos {

// ---------------------------------------------------------------------------
// Configuration

struct Timeline {
  double first_dock = 255.0;
  double second_dock = 880.0;
  double tilt_start = 1100.0;
  double horizon = 1500.0;
};

struct UncertaintyFractions {
  double mass = 0.10;
  double inertia = 0.10;
  double mode1_frequency = 0.20;
};

struct ArrayMount {
  std::string name;   // SA1..SA4
  std::string parent; // "chaser" | "target"
  std::string point;  // connection point on the parent hub
  Matrix3 mount_dcm = Matrix3::Identity();  // DCM array(untilted)/hub
  Vector3 tilt_axis = Vector3::UnitY();     // in the untilted array frame
};

struct ArmJoint {
  Vector3 axis = Vector3::UnitZ();
  Matrix3 offset = Matrix3::Identity();  // fixed DCM applied before the rotation
};

struct WeightSet {
  double wn_gyro = 9.1987e-4;
  double wn_sst = 1.5343e-5;
  std::array<double, 3> wn_ext_gain{0.002577, 0.009685, 0.01239};
  double wn_ext_s = 2.236, wn_ext_0 = 0.2236;  // c / (wn_ext_s s + wn_ext_0)
  double wu = 0.5;
  double wp = 0.0079;
  int rolloff_order = 4;
  double rolloff_hz = 0.7;
  double reference_hz = 0.01;  // low-pass shaping of the reference channel
};

struct SensorActuatorSet {
  double sst_hz = 8.0;
  double gyro_hz = 200.0;
  double rw_damping = 0.7;
  double rw_hz = 200.0;
};

struct AugmentationData {
  double w_add_db = -75.0;
  double w_mul_diag = 4e-2;
  double w_mul_offdiag = 4e-3;
};

struct BaselineData {
  double xi = 1.0;
  double omega_hz = 0.01;
};

using WaypointList = std::vector<std::pair<double, double>>;  // (t, angle)

inline const std::array<const char*, 10> kJointNames{"alpha1", "alpha2", "alpha3", "alpha4", "alpha5",
                                                    "alpha6", "theta1", "theta2", "theta3", "theta4"};

struct MissionConfig {
  Timeline timeline;
  std::vector<double> illustration_times;  // representative mission snapshots
  UncertaintyFractions uncertainty;
  RigidBodyData chaser_hub;  // reference at G1; points G1, P1, P2, J0, D1
  RigidBodyData target_hub;  // reference at G2; points G2, P3, P4, D2, D3
  FlexibleAppendageData chaser_array, target_array;
  std::array<ArrayMount, 4> arrays;
  Matrix3 arm_mount = Matrix3::Identity();  // DCM L0/chaser hub
  std::vector<LinkData> arm_links;          // L0..L6, P = J_i, C = J_{i+1}
  std::vector<ArmJoint> arm_joints;         // joints 1..6
  Matrix3 grasp_dcm = Matrix3::Identity();  // DCM target/L6 when grasped
  Matrix3 hub_dcm = Matrix3::Identity();    // DCM target/chaser when hub-docked
  std::array<double, 6> alpha_ref{};        // arm pose at the second dock
  double clamp_stiffness = 1e7;
  double dock_damping = 100.0;
  double loop_tolerance = 1e-6;
  std::map<std::string, WaypointList> waypoints;
  WeightSet weights;
  SensorActuatorSet sensors;
  AugmentationData augmentation;
  BaselineData baseline;

  const FlexibleAppendageData& array_data(std::size_t k) const {
    return arrays[k].parent == "chaser" ? chaser_array : target_array;
  }
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void invalid(const std::string& path, const std::string& why) {
  throw Error(Errc::validation_error, path + ": " + why);
}

inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) invalid(path + "." + key, "missing");
  return j.at(key);
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) invalid(path, "expected a number");
  return j.get<double>();
}

inline std::vector<double> numbers(const json& j, const std::string& path, std::size_t n = 0) {
  if (!j.is_array()) invalid(path, "expected an array");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  if (n && v.size() != n) invalid(path, "expected " + std::to_string(n) + " entries");
  return v;
}

inline Vector3 vec3(const json& j, const std::string& path) {
  auto v = numbers(j, path, 3);
  return {v[0], v[1], v[2]};
}

inline Matrix matrix(const json& j, const std::string& path, Index rows = -1, Index cols = -1) {
  if (!j.is_array()) invalid(path, "expected an array of rows");
  const Index r = static_cast<Index>(j.size());
  if (rows >= 0 && r != rows) invalid(path, "expected " + std::to_string(rows) + " rows");
  Index c = cols;
  Matrix M;
  for (Index i = 0; i < r; ++i) {
    auto row = numbers(j[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]");
    if (c < 0) c = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != c) invalid(path, "ragged rows");
    if (i == 0) M.resize(r, c);
    for (Index k = 0; k < c; ++k) M(i, k) = row[static_cast<std::size_t>(k)];
  }
  return M;
}

inline Matrix3 mat3(const json& j, const std::string& path) { return matrix(j, path, 3, 3); }

inline json to_json(const Vector3& v) { return json::array({v.x(), v.y(), v.z()}); }
inline json to_json(const Matrix& M) {
  json a = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
    a.push_back(r);
  }
  return a;
}

inline void check_fraction(double v, const std::string& path) {
  if (!(v >= 0.0 && v < 1.0)) invalid(path, "fraction must lie in [0, 1)");
}

inline void check_dcm(const Matrix3& C, const std::string& path) {
  if (!(C * C.transpose()).isApprox(Matrix3::Identity(), 1e-9) || std::abs(C.determinant() - 1.0) > 1e-9)
    invalid(path, "not a right-handed rotation matrix");
}

inline void check_inertia_field(double m, const Matrix3& J, const std::string& path) {
  try {
    check_inertia(m, J, path);
  } catch (const Error& e) {
    invalid(path, e.what());
  }
}

inline RigidBodyData hub_from_json(const json& j, const std::string& p) {
  RigidBodyData b;
  b.mass = number(field(j, "mass", p), p + ".mass");
  b.inertia = mat3(field(j, "inertia", p), p + ".inertia");
  check_inertia_field(b.mass, b.inertia, p);
  const auto& pts = field(j, "points", p);
  if (!pts.is_object()) invalid(p + ".points", "expected an object");
  for (auto& [k, v] : pts.items()) b.points.push_back({k, vec3(v, p + ".points." + k)});
  return b;
}

inline json hub_to_json(const RigidBodyData& b) {
  json pts = json::object();
  for (auto& [k, v] : b.points) pts[k] = to_json(v);
  return {{"mass", b.mass}, {"inertia", to_json(Matrix(b.inertia))}, {"points", pts}};
}

inline FlexibleAppendageData array_from_json(const json& j, const std::string& p) {
  FlexibleAppendageData a;
  a.mass = number(field(j, "mass", p), p + ".mass");
  a.com = vec3(field(j, "com", p), p + ".com");
  a.inertia = mat3(field(j, "inertia", p), p + ".inertia");
  check_inertia_field(a.mass, a.inertia, p);
  a.freq_hz = numbers(field(j, "freq_hz", p), p + ".freq_hz");
  a.damping = numbers(field(j, "damping", p), p + ".damping", a.freq_hz.size());
  for (std::size_t i = 0; i < a.freq_hz.size(); ++i) {
    if (!(a.freq_hz[i] > 0.0)) invalid(p + ".freq_hz", "frequencies must be positive");
    if (!(a.damping[i] >= 0.0)) invalid(p + ".damping", "damping must be non-negative");
  }
  // stored as printed: one row per mode, columns x y z rx ry rz
  const Matrix L = matrix(field(j, "participation", p), p + ".participation",
                          static_cast<Index>(a.freq_hz.size()), 6);
  a.participation = L.transpose();
  return a;
}

inline json array_to_json(const FlexibleAppendageData& a) {
  return {{"mass", a.mass},       {"com", to_json(a.com)},        {"inertia", to_json(Matrix(a.inertia))},
          {"freq_hz", a.freq_hz}, {"damping", a.damping}, {"participation", to_json(Matrix(a.participation.transpose()))}};
}

}  // namespace detail

inline MissionConfig mission_from_json(const nlohmann::json& j) {
  using namespace detail;
  MissionConfig c;
  const std::string r = "mission";
  {
    const auto& t = field(j, "timeline", r);
    c.timeline.first_dock = number(field(t, "first_dock", r + ".timeline"), r + ".timeline.first_dock");
    c.timeline.second_dock = number(field(t, "second_dock", r + ".timeline"), r + ".timeline.second_dock");
    c.timeline.tilt_start = number(field(t, "tilt_start", r + ".timeline"), r + ".timeline.tilt_start");
    c.timeline.horizon = number(field(t, "horizon", r + ".timeline"), r + ".timeline.horizon");
    if (!(0.0 < c.timeline.first_dock && c.timeline.first_dock < c.timeline.second_dock &&
          c.timeline.second_dock <= c.timeline.tilt_start && c.timeline.tilt_start < c.timeline.horizon))
      invalid(r + ".timeline", "events must be increasing within the horizon");
  }
  c.illustration_times = numbers(field(j, "illustration_times", r), r + ".illustration_times");
  for (double t : c.illustration_times)
    if (!(t >= 0.0 && t <= c.timeline.horizon)) invalid(r + ".illustration_times", "outside the mission window");
  {
    const auto& u = field(j, "uncertainty", r);
    c.uncertainty.mass = number(field(u, "mass", r + ".uncertainty"), r + ".uncertainty.mass");
    c.uncertainty.inertia = number(field(u, "inertia", r + ".uncertainty"), r + ".uncertainty.inertia");
    c.uncertainty.mode1_frequency =
        number(field(u, "mode1_frequency", r + ".uncertainty"), r + ".uncertainty.mode1_frequency");
    check_fraction(c.uncertainty.mass, r + ".uncertainty.mass");
    check_fraction(c.uncertainty.inertia, r + ".uncertainty.inertia");
    check_fraction(c.uncertainty.mode1_frequency, r + ".uncertainty.mode1_frequency");
  }
  c.chaser_hub = hub_from_json(field(j, "chaser_hub", r), r + ".chaser_hub");
  c.target_hub = hub_from_json(field(j, "target_hub", r), r + ".target_hub");
  for (auto p : {"G1", "P1", "P2", "J0", "D1"})
    if (!c.chaser_hub.point(p)) invalid(r + ".chaser_hub.points." + p, "missing");
  for (auto p : {"G2", "P3", "P4", "D2", "D3"})
    if (!c.target_hub.point(p)) invalid(r + ".target_hub.points." + p, "missing");
  c.target_hub.mass_range = c.uncertainty.mass;
  c.target_hub.inertia_range = c.uncertainty.inertia;
  c.target_hub.shared = {{"D", {{"C1", *c.target_hub.point("D2")}, {"C2", *c.target_hub.point("D3")}}}};

  const auto& models = field(j, "array_models", r);
  c.chaser_array = array_from_json(field(models, "chaser", r + ".array_models"), r + ".array_models.chaser");
  c.target_array = array_from_json(field(models, "target", r + ".array_models"), r + ".array_models.target");
  c.chaser_array.freq1_range = c.target_array.freq1_range = c.uncertainty.mode1_frequency;
  {
    const auto& sa = field(j, "solar_arrays", r);
    if (!sa.is_array() || sa.size() != 4) invalid(r + ".solar_arrays", "expected 4 entries");
    for (std::size_t k = 0; k < 4; ++k) {
      const std::string p = r + ".solar_arrays[" + std::to_string(k) + "]";
      auto& m = c.arrays[k];
      m.name = field(sa[k], "name", p).get<std::string>();
      m.parent = field(sa[k], "parent", p).get<std::string>();
      m.point = field(sa[k], "point", p).get<std::string>();
      m.mount_dcm = mat3(field(sa[k], "mount_dcm", p), p + ".mount_dcm");
      m.tilt_axis = vec3(field(sa[k], "tilt_axis", p), p + ".tilt_axis");
      check_dcm(m.mount_dcm, p + ".mount_dcm");
      if (std::abs(m.tilt_axis.norm() - 1.0) > 1e-9) invalid(p + ".tilt_axis", "must be unit-norm");
      if (m.parent != "chaser" && m.parent != "target") invalid(p + ".parent", "must be chaser or target");
      const auto& hub = m.parent == "chaser" ? c.chaser_hub : c.target_hub;
      if (!hub.point(m.point)) invalid(p + ".point", "unknown hub point '" + m.point + "'");
    }
  }
  {
    const auto& a = field(j, "arm", r);
    c.arm_mount = mat3(field(a, "mount_dcm", r + ".arm"), r + ".arm.mount_dcm");
    check_dcm(c.arm_mount, r + ".arm.mount_dcm");
    const auto& ls = field(a, "links", r + ".arm");
    if (!ls.is_array() || ls.size() != 7) invalid(r + ".arm.links", "expected 7 links");
    for (std::size_t i = 0; i < 7; ++i) {
      const std::string p = r + ".arm.links[" + std::to_string(i) + "]";
      LinkData l;
      l.mass = number(field(ls[i], "mass", p), p + ".mass");
      l.com = vec3(field(ls[i], "com", p), p + ".com");
      l.inertia = mat3(field(ls[i], "inertia", p), p + ".inertia");
      l.pc = vec3(field(ls[i], "vector", p), p + ".vector");
      check_inertia_field(l.mass, l.inertia, p);
      c.arm_links.push_back(l);
    }
    const auto& js = field(a, "joints", r + ".arm");
    if (!js.is_array() || js.size() != 6) invalid(r + ".arm.joints", "expected 6 joints");
    for (std::size_t i = 0; i < 6; ++i) {
      const std::string p = r + ".arm.joints[" + std::to_string(i) + "]";
      ArmJoint jt;
      jt.axis = vec3(field(js[i], "axis", p), p + ".axis");
      jt.offset = mat3(field(js[i], "offset_dcm", p), p + ".offset_dcm");
      if (std::abs(jt.axis.norm() - 1.0) > 1e-9) invalid(p + ".axis", "must be unit-norm");
      check_dcm(jt.offset, p + ".offset_dcm");
      c.arm_joints.push_back(jt);
    }
  }
  {
    const auto& d = field(j, "docking", r);
    const std::string p = r + ".docking";
    c.grasp_dcm = mat3(field(d, "grasp_dcm", p), p + ".grasp_dcm");
    c.hub_dcm = mat3(field(d, "hub_dcm", p), p + ".hub_dcm");
    check_dcm(c.grasp_dcm, p + ".grasp_dcm");
    check_dcm(c.hub_dcm, p + ".hub_dcm");
    auto a = numbers(field(d, "alpha_ref", p), p + ".alpha_ref", 6);
    std::copy(a.begin(), a.end(), c.alpha_ref.begin());
    c.clamp_stiffness = number(field(d, "clamp_stiffness", p), p + ".clamp_stiffness");
    c.dock_damping = number(field(d, "damping", p), p + ".damping");
    c.loop_tolerance = number(field(d, "loop_tolerance", p), p + ".loop_tolerance");
    if (!(c.clamp_stiffness > 0.0 && c.dock_damping >= 0.0 && c.loop_tolerance > 0.0))
      invalid(p, "stiffness, damping and tolerance must be positive");
  }
  {
    const auto& w = field(j, "waypoints", r);
    for (auto n : kJointNames) {
      const std::string p = r + ".waypoints." + n;
      const auto& list = field(w, n, r + ".waypoints");
      if (!list.is_array()) invalid(p, "expected [[t, angle], ...]");
      WaypointList wl;
      for (std::size_t i = 0; i < list.size(); ++i) {
        auto tq = numbers(list[i], p + "[" + std::to_string(i) + "]", 2);
        wl.push_back({tq[0], tq[1]});
      }
      c.waypoints[n] = wl;
    }
  }
  {
    const auto& w = field(j, "weights", r);
    const std::string p = r + ".weights";
    auto& W = c.weights;
    W.wn_gyro = number(field(w, "wn_gyro", p), p + ".wn_gyro");
    W.wn_sst = number(field(w, "wn_sst", p), p + ".wn_sst");
    auto g = numbers(field(w, "wn_ext_gain", p), p + ".wn_ext_gain", 3);
    std::copy(g.begin(), g.end(), W.wn_ext_gain.begin());
    auto den = numbers(field(w, "wn_ext_den", p), p + ".wn_ext_den", 2);
    W.wn_ext_s = den[0];
    W.wn_ext_0 = den[1];
    W.wu = number(field(w, "wu", p), p + ".wu");
    W.wp = number(field(w, "wp", p), p + ".wp");
    W.rolloff_order = static_cast<int>(number(field(w, "rolloff_order", p), p + ".rolloff_order"));
    W.rolloff_hz = number(field(w, "rolloff_hz", p), p + ".rolloff_hz");
    W.reference_hz = number(field(w, "reference_hz", p), p + ".reference_hz");
    for (double v : {W.wn_gyro, W.wn_sst, W.wu, W.wp, W.rolloff_hz, W.reference_hz, W.wn_ext_s, W.wn_ext_0, g[0], g[1], g[2]})
      if (!(v > 0.0)) invalid(p, "weights must be positive");
    if (W.rolloff_order < 1) invalid(p + ".rolloff_order", "must be >= 1");
  }
  {
    const auto& s = field(j, "sensors", r);
    const std::string p = r + ".sensors";
    c.sensors.sst_hz = number(field(s, "sst_hz", p), p + ".sst_hz");
    c.sensors.gyro_hz = number(field(s, "gyro_hz", p), p + ".gyro_hz");
    c.sensors.rw_damping = number(field(s, "rw_damping", p), p + ".rw_damping");
    c.sensors.rw_hz = number(field(s, "rw_hz", p), p + ".rw_hz");
    for (double v : {c.sensors.sst_hz, c.sensors.gyro_hz, c.sensors.rw_damping, c.sensors.rw_hz})
      if (!(v > 0.0)) invalid(p, "parameters must be positive");
  }
  {
    const auto& a = field(j, "augmentation", r);
    const std::string p = r + ".augmentation";
    c.augmentation.w_add_db = number(field(a, "w_add_db", p), p + ".w_add_db");
    c.augmentation.w_mul_diag = number(field(a, "w_mul_diag", p), p + ".w_mul_diag");
    c.augmentation.w_mul_offdiag = number(field(a, "w_mul_offdiag", p), p + ".w_mul_offdiag");
  }
  {
    const auto& b = field(j, "baseline", r);
    c.baseline.xi = number(field(b, "xi", r + ".baseline"), r + ".baseline.xi");
    c.baseline.omega_hz = number(field(b, "omega_hz", r + ".baseline"), r + ".baseline.omega_hz");
  }
  return c;
}

inline nlohmann::json mission_to_json(const MissionConfig& c) {
  using namespace detail;
  json j;
  j["timeline"] = {{"first_dock", c.timeline.first_dock}, {"second_dock", c.timeline.second_dock},
                   {"tilt_start", c.timeline.tilt_start}, {"horizon", c.timeline.horizon}};
  j["illustration_times"] = c.illustration_times;
  j["uncertainty"] = {{"mass", c.uncertainty.mass}, {"inertia", c.uncertainty.inertia},
                      {"mode1_frequency", c.uncertainty.mode1_frequency}};
  j["chaser_hub"] = hub_to_json(c.chaser_hub);
  j["target_hub"] = hub_to_json(c.target_hub);
  j["array_models"] = {{"chaser", array_to_json(c.chaser_array)}, {"target", array_to_json(c.target_array)}};
  j["solar_arrays"] = json::array();
  for (auto& m : c.arrays)
    j["solar_arrays"].push_back({{"name", m.name}, {"parent", m.parent}, {"point", m.point},
                                 {"mount_dcm", to_json(Matrix(m.mount_dcm))}, {"tilt_axis", to_json(m.tilt_axis)}});
  json links = json::array(), joints = json::array();
  for (auto& l : c.arm_links)
    links.push_back({{"mass", l.mass}, {"com", to_json(l.com)}, {"inertia", to_json(Matrix(l.inertia))}, {"vector", to_json(l.pc)}});
  for (auto& a : c.arm_joints) joints.push_back({{"axis", to_json(a.axis)}, {"offset_dcm", to_json(Matrix(a.offset))}});
  j["arm"] = {{"mount_dcm", to_json(Matrix(c.arm_mount))}, {"links", links}, {"joints", joints}};
  j["docking"] = {{"grasp_dcm", to_json(Matrix(c.grasp_dcm))}, {"hub_dcm", to_json(Matrix(c.hub_dcm))},
                  {"alpha_ref", c.alpha_ref}, {"clamp_stiffness", c.clamp_stiffness},
                  {"damping", c.dock_damping}, {"loop_tolerance", c.loop_tolerance}};
  json wp = json::object();
  for (auto& [n, l] : c.waypoints) {
    json a = json::array();
    for (auto& [t, q] : l) a.push_back({t, q});
    wp[n] = a;
  }
  j["waypoints"] = wp;
  const auto& W = c.weights;
  j["weights"] = {{"wn_gyro", W.wn_gyro}, {"wn_sst", W.wn_sst}, {"wn_ext_gain", W.wn_ext_gain},
                  {"wn_ext_den", {W.wn_ext_s, W.wn_ext_0}}, {"wu", W.wu}, {"wp", W.wp},
                  {"rolloff_order", W.rolloff_order}, {"rolloff_hz", W.rolloff_hz}, {"reference_hz", W.reference_hz}};
  j["sensors"] = {{"sst_hz", c.sensors.sst_hz}, {"gyro_hz", c.sensors.gyro_hz},
                  {"rw_damping", c.sensors.rw_damping}, {"rw_hz", c.sensors.rw_hz}};
  j["augmentation"] = {{"w_add_db", c.augmentation.w_add_db}, {"w_mul_diag", c.augmentation.w_mul_diag},
                       {"w_mul_offdiag", c.augmentation.w_mul_offdiag}};
  j["baseline"] = {{"xi", c.baseline.xi}, {"omega_hz", c.baseline.omega_hz}};
  return j;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::parse_error, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, path + ": " + e.what());
  }
}

// Replaces the waypoint lists present in `overrides` (same layout as the
// "waypoints" section).
inline void apply_waypoint_overrides(MissionConfig& c, const nlohmann::json& overrides) {
  const auto& w = overrides.contains("waypoints") ? overrides.at("waypoints") : overrides;
  nlohmann::json j = mission_to_json(c);
  for (auto& [k, v] : w.items()) {
    if (std::find(kJointNames.begin(), kJointNames.end(), k) == kJointNames.end())
      detail::invalid("waypoints." + k, "unknown joint");
    j["waypoints"][k] = v;
  }
  c = mission_from_json(j);
}

inline MissionConfig load_mission(const std::string& path) {
  try {
    return mission_from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::validation_error, path + ": " + e.what());
  }
}

inline void save_mission(const MissionConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::invalid_argument, "cannot write '" + path + "'");
  out << mission_to_json(c).dump(2) << "\n";
}

inline std::string default_mission_path() { return std::string(OOS_DATA_DIR) + "/mission.json"; }

// ---------------------------------------------------------------------------
// Trajectories

// Rest-to-rest quintic segments through (t, q) waypoints for named joints.
class JointTrajectory {
 public:
  struct Segment {
    double t0, t1;
    std::array<double, 6> c;  // q(t0 + s) = sum c_k s^k
  };

  void add(const std::string& joint, const WaypointList& wp) {
    if (wp.size() < 2) throw Error(Errc::non_monotonic_times, joint + ": need at least two waypoints");
    std::vector<Segment> segs;
    for (std::size_t i = 0; i + 1 < wp.size(); ++i) {
      const double t0 = wp[i].first, t1 = wp[i + 1].first;
      if (!(t1 > t0)) throw Error(Errc::non_monotonic_times, joint + ": waypoint times must increase");
      const double T = t1 - t0, d = wp[i + 1].second - wp[i].second;
      segs.push_back({t0, t1, {wp[i].second, 0.0, 0.0, 10.0 * d / (T * T * T), -15.0 * d / (T * T * T * T),
                               6.0 * d / (T * T * T * T * T)}});
    }
    names_.push_back(joint);
    segs_.push_back(std::move(segs));
  }

  const std::vector<std::string>& joints() const { return names_; }
  const std::vector<Segment>& segments(std::size_t j) const { return segs_[j]; }
  std::size_t index(const std::string& n) const {
    for (std::size_t i = 0; i < names_.size(); ++i) if (names_[i] == n) return i;
    throw Error(Errc::unknown_label, "joint '" + n + "'");
  }
  std::vector<double> knots(std::size_t j) const {
    std::vector<double> k{segs_[j].front().t0};
    for (auto& s : segs_[j]) k.push_back(s.t1);
    return k;
  }

  // Derivative `order` (0..2); holds the end poses outside the waypoint span.
  double eval(std::size_t j, double t, int order = 0) const {
    const auto& ss = segs_[j];
    if (t <= ss.front().t0) return order == 0 ? ss.front().c[0] : 0.0;
    if (t >= ss.back().t1) {
      const auto& s = ss.back();
      return order == 0 ? poly(s, s.t1 - s.t0, 0) : 0.0;
    }
    auto it = std::upper_bound(ss.begin(), ss.end(), t, [](double v, const Segment& s) { return v < s.t1; });
    return poly(*it, t - it->t0, order);
  }
  double position(const std::string& n, double t) const { return eval(index(n), t, 0); }

 private:
  static double poly(const Segment& s, double x, int order) {
    const auto& c = s.c;
    switch (order) {
      case 0: return c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * (c[4] + x * c[5]))));
      case 1: return c[1] + x * (2 * c[2] + x * (3 * c[3] + x * (4 * c[4] + x * 5 * c[5])));
      default: return 2 * c[2] + x * (6 * c[3] + x * (12 * c[4] + x * 20 * c[5]));
    }
  }
  std::vector<std::string> names_;
  std::vector<std::vector<Segment>> segs_;
};

inline JointTrajectory quintic_trajectory(const std::map<std::string, WaypointList>& wps) {
  JointTrajectory tr;
  for (auto& [n, l] : wps) tr.add(n, l);
  return tr;
}

inline JointTrajectory mission_trajectory(const MissionConfig& c) {
  JointTrajectory tr;
  for (auto n : kJointNames) tr.add(n, c.waypoints.at(n));
  return tr;
}

// ---------------------------------------------------------------------------
// Configurations and kinematics

struct Pose {
  std::array<double, 6> alpha{};
  std::array<double, 4> theta{};
};

inline Pose pose_at(const JointTrajectory& tr, double t) {
  Pose p;
  for (std::size_t i = 0; i < 6; ++i) p.alpha[i] = tr.position(kJointNames[i], t);
  for (std::size_t i = 0; i < 4; ++i) p.theta[i] = tr.position(kJointNames[6 + i], t);
  return p;
}

enum class Phase { decoupled, arm_docked, hub_docked };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::decoupled: return "decoupled";
    case Phase::arm_docked: return "arm-docked";
    case Phase::hub_docked: return "hub-docked";
  }
  return "?";
}

inline std::pair<double, double> switch_values(Phase p) {
  return {p == Phase::arm_docked ? 1.0 : 0.0, p == Phase::hub_docked ? 1.0 : 0.0};
}

inline Phase phase_at(const MissionConfig& c, double t) {
  if (t < c.timeline.first_dock) return Phase::decoupled;
  if (t < c.timeline.second_dock) return Phase::arm_docked;
  return Phase::hub_docked;
}

struct Frame {
  Matrix3 C = Matrix3::Identity();  // DCM body/chaser hub
  Vector3 p = Vector3::Zero();      // origin in the chaser hub frame, from G1
};

inline Matrix3 joint_dcm(const ArmJoint& j, double alpha) {
  return axis_angle(j.axis, alpha).transpose() * j.offset;
}

// Link frames L0..L6 located at J0..J6, then the end-effector frame at J7.
inline std::vector<Frame> arm_frames(const MissionConfig& c, const std::array<double, 6>& alpha) {
  std::vector<Frame> f;
  const Vector3 g1 = *c.chaser_hub.point("G1");
  Frame cur{c.arm_mount, *c.chaser_hub.point("J0") - g1};
  f.push_back(cur);
  for (std::size_t i = 0; i < 7; ++i) {
    cur.p += cur.C.transpose() * c.arm_links[i].pc;
    if (i < 6) cur.C = joint_dcm(c.arm_joints[i], alpha[i]) * cur.C;
    f.push_back(cur);
  }
  return f;
}

// Target hub frame (origin at G2) for a coupled phase.
inline Frame target_frame(const MissionConfig& c, Phase ph, const std::array<double, 6>& alpha) {
  const Vector3 g2 = *c.target_hub.point("G2");
  Frame t;
  if (ph == Phase::arm_docked) {
    const Frame e = arm_frames(c, alpha).back();
    t.C = c.grasp_dcm * e.C;
    t.p = e.p - t.C.transpose() * (*c.target_hub.point("D2") - g2);
  } else {
    t.C = c.hub_dcm;
    t.p = *c.chaser_hub.point("D1") - *c.chaser_hub.point("G1") - t.C.transpose() * (*c.target_hub.point("D3") - g2);
  }
  return t;
}

struct ClosureResidual {
  double position = 0.0;     // m
  double orientation = 0.0;  // rad
};

// Gap between the end-effector frame at J7 and the target's D2 frame while D3
// is mated to D1.
inline ClosureResidual loop_closure_check(const MissionConfig& c, const std::array<double, 6>& alpha_ref) {
  const Frame e = arm_frames(c, alpha_ref).back();
  const Frame t = target_frame(c, Phase::hub_docked, alpha_ref);
  const Vector3 d2 = t.p + t.C.transpose() * (*c.target_hub.point("D2") - *c.target_hub.point("G2"));
  const Matrix3 E = c.hub_dcm * (c.grasp_dcm * e.C).transpose();
  const Vector3 v(E(2, 1) - E(1, 2), E(0, 2) - E(2, 0), E(1, 0) - E(0, 1));
  return {(e.p - d2).norm(), std::atan2(0.5 * v.norm(), 0.5 * (E.trace() - 1.0))};
}

// Rigid composite about G1 in the chaser hub frame.
struct CompositeInertia {
  double mass = 0.0;
  Matrix3 inertia = Matrix3::Zero();
};

inline CompositeInertia composite_inertia(const MissionConfig& c, const Pose& pose, Phase ph) {
  CompositeInertia out;
  auto add = [&](double m, const Matrix3& Jb, const Matrix3& C, const Vector3& r) {
    out.mass += m;
    out.inertia += C.transpose() * Jb * C + m * (r.squaredNorm() * Matrix3::Identity() - r * r.transpose());
  };
  const Vector3 g1 = *c.chaser_hub.point("G1");
  add(c.chaser_hub.mass, c.chaser_hub.inertia, Matrix3::Identity(), c.chaser_hub.com - g1);
  std::array<Frame, 2> hubs{Frame{}, Frame{}};
  const bool coupled = ph != Phase::decoupled;
  if (coupled) hubs[1] = target_frame(c, ph, pose.alpha);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& m = c.arrays[k];
    const bool on_target = m.parent == "target";
    if (on_target && !coupled) continue;
    const auto& hub = on_target ? c.target_hub : c.chaser_hub;
    const Vector3 origin = *hub.point(on_target ? "G2" : "G1");
    const Frame& h = hubs[on_target ? 1 : 0];
    const auto& a = c.array_data(k);
    const Matrix3 C = axis_angle(m.tilt_axis, pose.theta[k]).transpose() * m.mount_dcm * h.C;
    const Vector3 s = h.p + h.C.transpose() * (*hub.point(m.point) - origin) + C.transpose() * a.com;
    add(a.mass, a.inertia, C, s);
  }
  const auto f = arm_frames(c, pose.alpha);
  for (std::size_t i = 0; i < 7; ++i) {
    const auto& l = c.arm_links[i];
    add(l.mass, l.inertia, f[i].C, f[i].p + f[i].C.transpose() * l.com);
  }
  if (coupled) add(c.target_hub.mass, c.target_hub.inertia, hubs[1].C, hubs[1].p);
  return out;
}

inline std::vector<CompositeInertia> inertia_evolution(const MissionConfig& c, const JointTrajectory& tr,
                                                       const std::vector<double>& times) {
  std::vector<CompositeInertia> out;
  for (double t : times) out.push_back(composite_inertia(c, pose_at(tr, t), phase_at(c, t)));
  return out;
}

// ---------------------------------------------------------------------------
// Plant assembly

enum class PlantMode { switched, dock7, dock8 };

inline PlantMode parse_mode(const std::string& s) {
  if (s == "switched") return PlantMode::switched;
  if (s == "dock7") return PlantMode::dock7;
  if (s == "dock8") return PlantMode::dock8;
  throw Error(Errc::invalid_mode, "unknown plant mode '" + s + "'");
}

inline const char* mode_name(PlantMode m) {
  switch (m) {
    case PlantMode::switched: return "switched";
    case PlantMode::dock7: return "dock7";
    case PlantMode::dock8: return "dock8";
  }
  return "?";
}

// Physical channel labels on the assembled plant.
inline Labels plant_inputs() { return wrench_labels("RH1.G1"); }
inline Labels plant_outputs() { return accel_labels("RH1.G1"); }
inline Labels torque_inputs() { auto l = plant_inputs(); return {l[3], l[4], l[5]}; }
inline Labels angular_accel_outputs() { auto l = plant_outputs(); return {l[3], l[4], l[5]}; }

namespace detail {

struct Assembly {
  std::vector<LfrModel> parts;
  std::vector<Wire> wires;

  void add(LfrModel m) { parts.push_back(std::move(m)); }
  void wire(const Labels& from, const Labels& to) { wire6(wires, from, to); }
  // body port <-> two-port block, on either side
  void attach_parent(const std::string& port, const std::string& block) {
    wire(accel_labels(port), parent_in(block));
    wire(parent_out(block), wrench_labels(port));
  }
  void attach_child(const std::string& block, const std::string& port) {
    wire(child_out(block), accel_labels(port));
    wire(wrench_labels(port), child_in(block));
  }
  void chain(const std::string& a, const std::string& b) {
    wire(child_out(a), parent_in(b));
    wire(parent_out(b), child_in(a));
  }
  void link(const std::string& parent_port, const std::string& block, const std::string& child_port) {
    attach_parent(parent_port, block);
    attach_child(block, child_port);
  }
};

// Array on a hub port: frame, tilt, and the driving-point model with the
// wrench on the parent = -M_P(s) a.
inline void add_array(Assembly& as, const MissionConfig& c, std::size_t k, const std::string& hub, bool uncertain,
                      const std::optional<double>& theta) {
  const auto& m = c.arrays[k];
  const std::string n = m.name, idx = std::to_string(k + 1);
  as.add(frame_transform(n + ".mount", m.mount_dcm));
  if (theta) as.add(frame_transform(n + ".tilt", axis_angle(m.tilt_axis, *theta).transpose()));
  else as.add(tilt_transform(n + ".tilt", m.tilt_axis, "theta" + idx));
  as.add(appendage_effective_mass(n, c.array_data(k), uncertain, "omega" + idx));
  as.add(negate(port_labels(n + ".P", "force"), wrench_labels(n + ".P")));
  as.wire(port_labels(n + ".P", "force"), port_labels(n + ".P", "force"));
  as.attach_parent(hub + "." + m.point, n + ".mount");
  as.chain(n + ".mount", n + ".tilt");
  as.attach_child(n + ".tilt", n + ".P");
}

// Serial arm from the chaser's J0 to the end-effector port "L6.C".
inline void add_arm(Assembly& as, const MissionConfig& c, const std::optional<std::array<double, 6>>& alpha) {
  as.add(frame_transform("L0.mount", c.arm_mount));
  as.link("RH1.J0", "L0.mount", "L0.P");
  for (std::size_t i = 0; i < 7; ++i) as.add(titop_link("L" + std::to_string(i), c.arm_links[i]));
  for (std::size_t i = 0; i < 6; ++i) {
    const std::string j = "J" + std::to_string(i + 1);
    const std::string parent = "L" + std::to_string(i) + ".C", child = "L" + std::to_string(i + 1) + ".P";
    const auto& jt = c.arm_joints[i];
    if (alpha) {
      as.add(frame_transform(j, joint_dcm(jt, (*alpha)[i])));
      as.link(parent, j, child);
    } else if (jt.offset.isIdentity(0.0)) {
      as.add(tilt_transform(j, jt.axis, "alpha" + std::to_string(i + 1)));
      as.link(parent, j, child);
    } else {
      as.add(frame_transform(j + ".offset", jt.offset));
      as.add(tilt_transform(j, jt.axis, "alpha" + std::to_string(i + 1)));
      as.attach_parent(parent, j + ".offset");
      as.chain(j + ".offset", j);
      as.attach_child(j, child);
    }
  }
}

inline RigidBodyData hub_about_com(const RigidBodyData& h, const std::string& g) {
  RigidBodyData b = h;
  const Vector3 o = *h.point(g);
  for (auto& p : b.points) p.second -= o;
  b.com = Vector3::Zero();
  return b;
}

inline std::vector<UncertaintyBlock> ordered(const std::vector<LfrModel>& parts, const Labels& names) {
  std::map<std::string, UncertaintyBlock> all;
  for (auto& p : parts) for (auto& b : p.blocks) all[b.name] = b;
  std::vector<UncertaintyBlock> out;
  for (auto& n : names) {
    auto it = all.find(n);
    if (it != all.end()) { out.push_back(it->second); all.erase(it); }
  }
  for (auto& [n, b] : all) out.push_back(b);  // anything not explicitly ordered
  return out;
}

}  // namespace detail

struct AssemblyOptions {
  bool uncertain = true;
  std::optional<std::array<double, 6>> alpha;  // numeric arm pose (dock8 default: alpha_ref)
  std::optional<std::array<double, 4>> theta;  // numeric array tilts
};

// Assembles the plant LFR.  Geometric parameters (theta_k, alpha_i as
// tan(angle/4)), coupling switches C1/C2 and spring coefficients remain
// blocks unless given numerically; Delta_real blocks exist when uncertain.
inline LfrModel assemble_plant(const MissionConfig& c, PlantMode mode, AssemblyOptions opt = {}) {
  detail::Assembly as;
  const RigidBodyData chaser = detail::hub_about_com(c.chaser_hub, "G1");
  RigidBodyData target = detail::hub_about_com(c.target_hub, "G2");
  target.shared = {{"D", {{"C1", *target.point("D2")}, {"C2", *target.point("D3")}}}};

  as.add(rigid_multiport("RH1", chaser, {"G1", "P1", "P2", "J0", "D1"}, {}, false));
  if (mode == PlantMode::dock8 && !opt.alpha) {
    const auto r = loop_closure_check(c, c.alpha_ref);
    if (r.position > c.loop_tolerance || r.orientation > c.loop_tolerance)
      throw Error(Errc::loop_closure_violation, "alpha_ref residual " + std::to_string(r.position) + " m, " +
                                                    std::to_string(r.orientation) + " rad");
    opt.alpha = c.alpha_ref;
  }
  if (mode == PlantMode::dock8 && opt.alpha) {
    const auto r = loop_closure_check(c, *opt.alpha);
    if (r.position > c.loop_tolerance || r.orientation > c.loop_tolerance)
      throw Error(Errc::loop_closure_violation, "arm pose does not close the docking loop");
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const bool on_target = c.arrays[k].parent == "target";
    std::optional<double> th;
    if (opt.theta) th = (*opt.theta)[k];
    detail::add_array(as, c, k, on_target ? "RH2" : "RH1", opt.uncertain, th);
  }
  detail::add_arm(as, c, opt.alpha);

  const Matrix3 grasp_inv = c.grasp_dcm.transpose(), hub_inv = c.hub_dcm.transpose();
  switch (mode) {
    case PlantMode::switched: {
      as.add(rigid_multiport("RH2", target, {"D", "P3", "P4"}, {"D"}, opt.uncertain));
      as.add(frame_transform("grasp", c.grasp_dcm));
      as.add(frame_transform("hub", c.hub_dcm));
      as.add(coupling_switch("SW1", "C1"));
      as.add(coupling_switch("SW2", "C2"));
      as.attach_parent("L6.C", "grasp");
      as.chain("grasp", "SW1");
      as.attach_parent("RH1.D1", "hub");
      as.chain("hub", "SW2");
      // Sum the two gated twists into the shared port; fan its wrench out.
      Matrix S(6, 12);
      S << Matrix::Identity(6, 6), Matrix::Identity(6, 6);
      as.add(as_lfr(StateSpaceModel::gain(S, concat({accel_labels("SW1.out"), accel_labels("SW2.out")}),
                                          accel_labels("RH2.D.sum"))));
      as.add(as_lfr(StateSpaceModel::gain(S.transpose(), wrench_labels("RH2.D.fan"),
                                          concat({wrench_labels("SW1.out"), wrench_labels("SW2.out")}))));
      as.attach_child("SW1", "SW1.out");
      as.attach_child("SW2", "SW2.out");
      as.wire(accel_labels("RH2.D.sum"), accel_labels("RH2.D"));
      as.wire(wrench_labels("RH2.D"), wrench_labels("RH2.D.fan"));
      break;
    }
    case PlantMode::dock7:
    case PlantMode::dock8: {
      Labels ports{"D2", "P3", "P4"};
      if (mode == PlantMode::dock8) ports.push_back("D3");
      target.shared.clear();
      as.add(rigid_multiport("RH2", target, ports, {}, opt.uncertain));
      // SM1 between the end effector (P side, L6 frame) and D2 (C side).
      as.add(spring_damper("SM1", {}, true));
      as.add(frame_transform("D2f", grasp_inv));
      as.link("RH2.D2", "D2f", "SM1.C");
      as.wire(accel_labels("L6.C"), accel_labels("SM1.P"));
      as.wire(wrench_labels("SM1.P"), wrench_labels("L6.C"));
      if (mode == PlantMode::dock8) {
        // SM2 between D1 (P side, chaser frame) and D3 (C side).
        as.add(spring_damper("SM2", {}, true));
        as.add(frame_transform("D3f", hub_inv));
        as.link("RH2.D3", "D3f", "SM2.C");
        as.wire(accel_labels("RH1.D1"), accel_labels("SM2.P"));
        as.wire(wrench_labels("SM2.P"), wrench_labels("RH1.D1"));
      }
      break;
    }
  }

  auto lfr = connect_lfr(as.parts, as.wires, plant_inputs(), plant_outputs());
  Labels order;
  for (int k = 1; k <= 4; ++k) order.push_back(c.arrays[static_cast<std::size_t>(k - 1)].name + ".omega1");
  for (int k = 1; k <= 4; ++k) order.push_back(c.arrays[static_cast<std::size_t>(k - 1)].name + ".tilt");
  for (int i = 1; i <= 6; ++i) order.push_back("J" + std::to_string(i));
  for (auto s : {"SW1", "SW2"}) order.push_back(s);
  for (auto sm : {"SM1", "SM2"})
    for (auto k : {".K_shear", ".K_tors", ".D_shear", ".D_tors"}) order.push_back(std::string(sm) + k);
  for (auto b : {"RH2.m", "RH2.Jxx", "RH2.Jyy", "RH2.Jzz", "RH2.C1", "RH2.C2"}) order.push_back(b);
  auto blocks = detail::ordered(as.parts, order);
  // The closed chain leaves loop-closure integrators no input can reach.
  auto core = mode == PlantMode::dock8 ? controllable_part(lfr.core) : lfr.core;
  return make_lfr(core, std::move(blocks),
                  {{"torque", torque_inputs()}, {"angular_accel", angular_accel_outputs()}});
}

// Names of the real parametric uncertainty parameters present in a model.
inline Labels real_uncertainty_parameters(const LfrModel& m) {
  Labels out;
  for (auto& p : m.parameters())
    if (p.rfind("omega", 0) == 0 || p.rfind("RH2.", 0) == 0) out.push_back(p);
  return out;
}

// Geometric and switch parameter values for a pose and phase.
inline ParamSample configuration_sample(const LfrModel& m, const Pose& pose, Phase ph) {
  ParamSample s;
  auto [c1, c2] = switch_values(ph);
  for (auto& p : m.parameters()) {
    if (p.rfind("theta", 0) == 0) s[p] = tilt_parameter(pose.theta[static_cast<std::size_t>(std::stoi(p.substr(5)) - 1)]);
    else if (p.rfind("alpha", 0) == 0) s[p] = tilt_parameter(pose.alpha[static_cast<std::size_t>(std::stoi(p.substr(5)) - 1)]);
    else if (p == "C1") s[p] = c1;
    else if (p == "C2") s[p] = c2;
  }
  return s;
}

// Plant at a configuration; Delta_real kept open when uncertain, else nominal.
inline LfrModel plant_at(const LfrModel& symbolic, const Pose& pose, Phase ph, bool uncertain) {
  auto s = configuration_sample(symbolic, pose, ph);
  if (!uncertain)
    for (auto& p : real_uncertainty_parameters(symbolic)) s[p] = 0.0;
  return substitute(symbolic, s);
}

// Sets the raw stiffness/damping values of the docking spring-dampers
// present in `m` (same values on shear and torsion axes).
inline ParamSample spring_sample(const LfrModel& m, double K, double D) {
  ParamSample s;
  for (auto& p : m.parameters()) {
    if (p.rfind("SM", 0) != 0) continue;
    if (p.find(".K_") != std::string::npos) s[p] = K;
    else if (p.find(".D_") != std::string::npos) s[p] = D;
  }
  return s;
}

// Docking-phase plant with the springs fixed: dock7 at the grasp pose (arm
// joints from the trajectory at `t`), dock8 at alpha_ref.
inline LfrModel docking_plant(const MissionConfig& c, PlantMode mode, const Pose& pose, double K, double D,
                              bool uncertain) {
  AssemblyOptions o;
  o.uncertain = uncertain;
  o.theta = pose.theta;
  if (mode == PlantMode::dock7) o.alpha = pose.alpha;
  auto m = assemble_plant(c, mode, o);
  auto s = spring_sample(m, K, D);
  if (!uncertain)
    for (auto& p : real_uncertainty_parameters(m)) s[p] = 0.0;
  return substitute(m, s);
}

struct GridSample {
  double t = 0.0;
  Phase phase = Phase::decoupled;
  Pose pose;
};

// N equally spaced samples over the horizon.  Docking events snap to the
// nearest sample so that each switch is represented in the grid.
inline std::vector<GridSample> grid_samples(const MissionConfig& c, const JointTrajectory& tr, std::size_t N) {
  if (N < 2) throw Error(Errc::invalid_argument, "grid needs at least two samples");
  const double h = c.timeline.horizon / static_cast<double>(N - 1);
  // t = 0 always precedes the first event
  const auto i1 = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c.timeline.first_dock / h)));
  const auto i2 = std::max(i1, static_cast<std::size_t>(std::llround(c.timeline.second_dock / h)));
  std::vector<GridSample> out(N);
  for (std::size_t i = 0; i < N; ++i) {
    out[i].t = i + 1 == N ? c.timeline.horizon : h * static_cast<double>(i);
    out[i].phase = i < i1 ? Phase::decoupled : (i < i2 ? Phase::arm_docked : Phase::hub_docked);
    out[i].pose = pose_at(tr, out[i].t);
  }
  return out;
}

inline std::vector<LfrModel> model_grid(const LfrModel& symbolic, const std::vector<GridSample>& samples,
                                        bool uncertain) {
  std::vector<LfrModel> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    out[i] = plant_at(symbolic, samples[i].pose, samples[i].phase, uncertain);
  });
  return out;
}

inline std::vector<LfrModel> model_grid(const MissionConfig& c, const JointTrajectory& tr, std::size_t N,
                                        bool uncertain) {
  return model_grid(assemble_plant(c, PlantMode::switched, {uncertain, {}, {}}), grid_samples(c, tr, N), uncertain);
}

}  // namespace oos
