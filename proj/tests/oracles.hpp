#pragma once
// Brute-force references used by the tests.  Deliberately written against
// the raw mission data with Rodrigues rotations and parallel-axis sums,
// without the library's assembly or kinematics code.

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "oos/scenario.hpp"

namespace oracle {

using M3 = Eigen::Matrix3d;
using V3 = Eigen::Vector3d;
using M6 = Eigen::Matrix<double, 6, 6>;

inline M3 rodrigues(V3 k, double t) {
  k.normalize();
  M3 K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return M3::Identity() + std::sin(t) * K + (1 - std::cos(t)) * K * K;
}

inline M3 cross(const V3& r) {
  M3 K;
  K << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
  return K;
}

struct Body {
  double m;
  V3 r;  // CoM from G1, chaser hub frame
  M3 J;  // about the CoM, chaser hub frame
};

// All rigid bodies of the stack for a pose (alpha, theta) and coupling state.
inline std::vector<Body> bodies(const oos::MissionConfig& c, const std::array<double, 6>& alpha,
                                const std::array<double, 4>& theta, int coupling /*0,1,2*/) {
  std::vector<Body> out;
  const V3 g1 = *c.chaser_hub.point("G1");
  out.push_back({c.chaser_hub.mass, c.chaser_hub.com - g1, c.chaser_hub.inertia});
  // arm: R_i maps link-i coordinates to hub coordinates
  M3 R = c.arm_mount.transpose();
  V3 p = *c.chaser_hub.point("J0") - g1;
  for (int i = 0; i < 7; ++i) {
    const auto& l = c.arm_links[static_cast<std::size_t>(i)];
    out.push_back({l.mass, p + R * l.com, R * l.inertia * R.transpose()});
    p += R * l.pc;
    if (i < 6) {
      const auto& j = c.arm_joints[static_cast<std::size_t>(i)];
      R = R * j.offset.transpose() * rodrigues(j.axis, alpha[static_cast<std::size_t>(i)]);
    }
  }
  // p = J7, R = L6 -> hub
  M3 Rt = M3::Identity();
  V3 g2 = V3::Zero();
  const V3 G2 = *c.target_hub.point("G2");
  if (coupling == 1) {
    Rt = R * c.grasp_dcm.transpose();
    g2 = p - Rt * (*c.target_hub.point("D2") - G2);
  } else if (coupling == 2) {
    Rt = c.hub_dcm.transpose();
    g2 = *c.chaser_hub.point("D1") - g1 - Rt * (*c.target_hub.point("D3") - G2);
  }
  if (coupling) out.push_back({c.target_hub.mass, g2 + Rt * (c.target_hub.com - G2), Rt * c.target_hub.inertia * Rt.transpose()});
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& a = c.arrays[k];
    const bool tgt = a.parent == "target";
    if (tgt && !coupling) continue;
    const auto& hub = tgt ? c.target_hub : c.chaser_hub;
    const M3 Rh = tgt ? Rt : M3::Identity();
    const V3 o = tgt ? g2 : V3::Zero();
    const V3 P = o + Rh * (*hub.point(a.point) - *hub.point(tgt ? "G2" : "G1"));
    const M3 Ra = Rh * a.mount_dcm.transpose() * rodrigues(a.tilt_axis, theta[k]);
    const auto& d = tgt ? c.target_array : c.chaser_array;
    out.push_back({d.mass, P + Ra * d.com, Ra * d.inertia * Ra.transpose()});
  }
  return out;
}

// 6x6 rigid mass matrix about G1: [F; T_G1] = M [a_G1; wdot].
inline M6 mass_matrix(const std::vector<Body>& bs) {
  M6 M = M6::Zero();
  for (auto& b : bs) {
    const M3 S = cross(b.r);
    M.topLeftCorner<3, 3>() += b.m * M3::Identity();
    M.topRightCorner<3, 3>() -= b.m * S;
    M.bottomLeftCorner<3, 3>() += b.m * S;
    M.bottomRightCorner<3, 3>() += b.J - b.m * S * S;
  }
  return M;
}

inline double total_mass(const std::vector<Body>& bs) {
  double m = 0;
  for (auto& b : bs) m += b.m;
  return m;
}

inline M3 inertia_at_g1(const std::vector<Body>& bs) { return mass_matrix(bs).bottomRightCorner<3, 3>(); }

}  // namespace oracle
