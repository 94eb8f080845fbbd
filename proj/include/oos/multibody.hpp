#pragma once
// Port-based (TITOP-style) multibody building blocks.
//
// Conventions: a port carries a 6-vector acceleration twist [a; wdot] flowing
// from parent to child and a 6-vector wrench [F; T] flowing back, namely the
// wrench the child applies to its parent at the port.  All vectors are in the
// frame of the block emitting them.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "oos/sslft.hpp"

namespace oos {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

inline const std::array<const char*, 6> kAxes{"x", "y", "z", "rx", "ry", "rz"};

inline Labels port_labels(const std::string& prefix, const std::string& kind) {
  Labels l;
  for (auto a : kAxes) l.push_back(prefix + "." + kind + "." + a);
  return l;
}
inline Labels accel_labels(const std::string& p) { return port_labels(p, "accel"); }
inline Labels wrench_labels(const std::string& p) { return port_labels(p, "wrench"); }

inline Labels concat(std::initializer_list<Labels> ls) {
  Labels out;
  for (auto& l : ls) out.insert(out.end(), l.begin(), l.end());
  return out;
}

// Wires six channels a.<kind>.* -> b.<kind2>.*
inline void wire6(std::vector<Wire>& w, const Labels& from, const Labels& to) {
  for (std::size_t i = 0; i < from.size(); ++i) w.push_back({from[i], to[i]});
}

inline Matrix3 skew(const Vector3& v) {
  Matrix3 S;
  S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return S;
}

// Maps the twist at B to the twist at P, with r the vector from P to B.  Its
// transpose moves a wrench from P to B.
inline Matrix6 kinematic_model(const Vector3& r) {
  Matrix6 t = Matrix6::Identity();
  t.topRightCorner<3, 3>() = skew(r);
  return t;
}

inline Matrix3 axis_angle(Vector3 axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

inline Matrix6 blkdiag2(const Matrix3& R) {
  Matrix6 T = Matrix6::Zero();
  T.topLeftCorner<3, 3>() = R;
  T.bottomRightCorner<3, 3>() = R;
  return T;
}

inline Matrix6 spatial_inertia(double m, const Matrix3& J) {
  Matrix6 D = Matrix6::Zero();
  D.topLeftCorner<3, 3>() = m * Matrix3::Identity();
  D.bottomRightCorner<3, 3>() = J;
  return D;
}

inline void check_inertia(double m, const Matrix3& J, const std::string& who) {
  if (!(m > 0.0)) throw Error(Errc::non_pd_inertia, who + ": mass must be positive");
  if (!J.isApprox(J.transpose(), 1e-12)) throw Error(Errc::non_pd_inertia, who + ": inertia not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix3> es(J);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw Error(Errc::non_pd_inertia, who + ": inertia not positive definite");
}

// Port whose location is a parameter-weighted sum of vectors from the CoM.
struct SharedPort {
  std::string name;
  std::vector<std::pair<std::string, Vector3>> terms;  // (parameter, CoM -> point)
};

struct RigidBodyData {
  double mass = 0.0;
  Vector3 com = Vector3::Zero();  // from the reference point
  Matrix3 inertia = Matrix3::Identity();  // about the CoM
  std::vector<std::pair<std::string, Vector3>> points;  // from the reference point
  std::vector<SharedPort> shared;
  double mass_range = 0.0;     // relative, 0 when certain
  double inertia_range = 0.0;  // relative, applied to the diagonal entries

  Matrix6 mass_matrix_at_com() const { return spatial_inertia(mass, inertia); }
  const Vector3* point(const std::string& n) const {
    for (auto& p : points) if (p.first == n) return &p.second;
    return nullptr;
  }
  const SharedPort* shared_port(const std::string& n) const {
    for (auto& p : shared) if (p.name == n) return &p;
    return nullptr;
  }
};

namespace detail {

inline Labels suffixed(const std::string& p, const char* kind) { return port_labels(p, kind); }

// Mass-inertia block at the CoM, possibly uncertain.  Direct: F = M a, inverse:
// a = M^-1 F.  Input "<n>.G.in.*", output "<n>.G.out.*".
inline LfrModel com_dynamics(const std::string& n, const RigidBodyData& b, bool inverse, bool uncertain) {
  const Matrix6 M0 = b.mass_matrix_at_com();
  const Labels in = suffixed(n + ".G", "in"), out = suffixed(n + ".G", "out");
  std::vector<UncertaintyBlock> blocks;
  std::vector<std::pair<Index, double>> ch;  // (axis, scale)
  if (uncertain && b.mass_range > 0.0) {
    blocks.push_back(scalar_block(n + ".m", 3));
    for (Index i = 0; i < 3; ++i) ch.push_back({i, b.mass * b.mass_range});
  }
  if (uncertain && b.inertia_range > 0.0) {
    const char* nm[] = {".Jxx", ".Jyy", ".Jzz"};
    for (Index i = 0; i < 3; ++i) {
      blocks.push_back(scalar_block(n + nm[i], 1));
      ch.push_back({3 + i, b.inertia(i, i) * b.inertia_range});
    }
  }
  const Index k = static_cast<Index>(ch.size());
  Matrix E = Matrix::Zero(6, k);
  for (Index j = 0; j < k; ++j) E(ch[static_cast<std::size_t>(j)].first, j) = ch[static_cast<std::size_t>(j)].second;
  Labels wl, zl;
  for (auto& bl : blocks) { auto a = bl.w_labels(), c = bl.z_labels(); wl.insert(wl.end(), a.begin(), a.end()); zl.insert(zl.end(), c.begin(), c.end()); }
  // Channel rows pick the acceleration component each block multiplies.
  Matrix Sel = Matrix::Zero(k, 6);
  for (Index j = 0; j < k; ++j) Sel(j, ch[static_cast<std::size_t>(j)].first) = 1.0;
  Matrix D(k + 6, k + 6);
  if (inverse) {
    // a = M0^-1 (F - E w), z = Sel a
    const Matrix Mi = M0.inverse();
    D << -Sel * Mi * E, Sel * Mi, -Mi * E, Mi;
  } else {
    // F = M0 a + E w, z = Sel a
    D << Matrix::Zero(k, k), Sel, E, M0;
  }
  auto core = StateSpaceModel::gain(D, concat({wl, in}), concat({zl, out}));
  return make_lfr(core, std::move(blocks));
}

// Rank-2 factorization skew(r) = U V^T.
inline std::pair<Matrix, Matrix> skew_factors(const Vector3& r) {
  const double nr = r.norm();
  if (nr == 0.0) return {Matrix::Zero(3, 2), Matrix::Zero(3, 2)};
  const Vector3 h = r / nr;
  Vector3 e1 = std::abs(h.x()) < 0.9 ? Vector3::UnitX().cross(h) : Vector3::UnitY().cross(h);
  e1.normalize();
  const Vector3 e2 = h.cross(e1);
  Matrix U(3, 2), V(3, 2);
  U << nr * e2, -nr * e1;
  V << e1, e2;
  return {U, V};
}

// Parameter-dependent transport for a shared port whose location (from the
// CoM) is sum_i delta_i r_i.  Forward: twist at the port -> twist at the CoM;
// backward: wrench at the CoM -> wrench at the port.
inline LfrModel shared_transport(const std::string& n, const SharedPort& sp, const Labels& fwd_in,
                                 const Labels& fwd_out, const Labels& bwd_in, const Labels& bwd_out) {
  std::vector<UncertaintyBlock> blocks;
  const Index q = static_cast<Index>(sp.terms.size());
  // Rows: [z (4q); fwd_out (6); bwd_out (6)], cols: [w (4q); fwd_in (6); bwd_in (6)]
  Matrix D = Matrix::Zero(4 * q + 12, 4 * q + 12);
  const Index oF = 4 * q, oB = 4 * q + 6;
  D.block(oF, oF, 6, 6).setIdentity();
  D.block(oB, oB, 6, 6).setIdentity();
  Labels wl, zl;
  for (Index i = 0; i < q; ++i) {
    auto& [param, r] = sp.terms[static_cast<std::size_t>(i)];
    // kinematic_model(r) = I + [0 skew(r); 0 0] with skew(r) = U V^T
    auto [U, V] = skew_factors(r);
    const Index c = 4 * i;
    D.block(c, oF + 3, 2, 3) = V.transpose();  // z = V^T wdot
    D.block(oF, c, 3, 2) = U;                  // a_G += U w
    D.block(c + 2, oB, 2, 3) = U.transpose();  // z = U^T F
    D.block(oB + 3, c + 2, 3, 2) = V;          // T += V w
    auto b = scalar_block(n + "." + param, 4, 0.0, 1.0, param);
    auto a = b.w_labels(), z = b.z_labels();
    wl.insert(wl.end(), a.begin(), a.end());
    zl.insert(zl.end(), z.begin(), z.end());
    blocks.push_back(b);
  }
  auto core = StateSpaceModel::gain(D, concat({wl, fwd_in, bwd_in}), concat({zl, fwd_out, bwd_out}));
  return make_lfr(core, std::move(blocks));
}

}  // namespace detail

// Multi-port rigid body.  Without an inverted port it is the inverse model
// (wrenches in, twists out); with one inverted port d it takes the twist at d
// and returns the wrench it applies there to its parent.  A shared port must
// be the inverted one.
inline LfrModel rigid_multiport(const std::string& name, const RigidBodyData& body, const Labels& ports,
                                const Labels& inverted_ports = {}, bool uncertain = false) {
  check_inertia(body.mass, body.inertia, name);
  if (inverted_ports.size() > 1) throw Error(Errc::too_many_inverted_ports, name);
  const bool inv = inverted_ports.empty();
  const std::string d = inv ? std::string() : inverted_ports.front();
  if (!inv && std::find(ports.begin(), ports.end(), d) == ports.end())
    throw Error(Errc::unknown_port, name + "." + d + " is not among the ports");

  auto com_to = [&](const std::string& p) -> Vector3 {
    if (auto v = body.point(p)) return *v - body.com;
    throw Error(Errc::unknown_port, name + "." + p);
  };
  std::vector<std::string> others;
  for (auto& p : ports)
    if (p != d) {
      com_to(p);
      others.push_back(p);
    }
  const SharedPort* sp = inv ? nullptr : body.shared_port(d);

  const Labels gin = port_labels(name + ".G", "in"), gout = port_labels(name + ".G", "out");
  const Labels ga = port_labels(name + ".G", "twist"), wsum = port_labels(name + ".G", "wsum");
  std::vector<LfrModel> parts{detail::com_dynamics(name, body, inv, uncertain)};
  std::vector<Wire> w;

  const Index k = static_cast<Index>(others.size());
  Labels win, aout;
  for (auto& p : others) {
    auto a = wrench_labels(name + "." + p), b = accel_labels(name + "." + p);
    win.insert(win.end(), a.begin(), a.end());
    aout.insert(aout.end(), b.begin(), b.end());
  }
  // map: [twist_G; F_G; W_p...] -> [wsum; twist_p...]
  //   twist_p = T_p twist_G,  wsum = sum T_p^T W_p (- F_G for the direct form)
  Matrix Dm = Matrix::Zero(6 + 6 * k, 12 + 6 * k);
  for (Index i = 0; i < k; ++i) {
    // r: p -> CoM, so kinematic_model(r) maps twist_G to twist_p.
    const Matrix6 T = kinematic_model(-com_to(others[static_cast<std::size_t>(i)]));
    Dm.block(0, 12 + 6 * i, 6, 6) = T.transpose();
    Dm.block(6 + 6 * i, 0, 6, 6) = T;
  }
  if (!inv) Dm.block(0, 6, 6, 6) = -Matrix6::Identity();
  parts.push_back(as_lfr(StateSpaceModel::gain(Dm, concat({ga, gout, win}), concat({wsum, aout}))));

  Labels ext_in, ext_out;
  if (inv) {
    wire6(w, wsum, gin);
    wire6(w, gout, ga);
    ext_in = win;
    ext_out = aout;
  } else {
    const Labels din = accel_labels(name + "." + d), dout = wrench_labels(name + "." + d);
    const Labels tw = port_labels(name + ".G", "twist_out"), ws = port_labels(name + ".G", "wsum_in");
    if (sp) {
      parts.push_back(detail::shared_transport(name, *sp, din, tw, ws, dout));
    } else {
      // r: CoM -> d, so kinematic_model(r) maps twist_d to twist_G.
      const Matrix6 T = kinematic_model(com_to(d));
      Matrix Dt = Matrix::Zero(12, 12);
      Dt.topLeftCorner(6, 6) = T;
      Dt.bottomRightCorner(6, 6) = T.transpose();
      parts.push_back(as_lfr(StateSpaceModel::gain(Dt, concat({din, ws}), concat({tw, dout}))));
    }
    wire6(w, tw, gin);
    wire6(w, tw, ga);
    wire6(w, wsum, ws);
    wire6(w, gout, gout);
    ext_in = concat({din, win});
    ext_out = concat({dout, aout});
  }
  return connect_lfr(parts, w, ext_in, ext_out);
}


struct FlexibleAppendageData {
  double mass = 0.0;
  Vector3 com = Vector3::Zero();  // P -> CoM, appendage frame
  Matrix3 inertia = Matrix3::Identity();  // about the CoM
  std::vector<double> freq_hz;
  std::vector<double> damping;
  Matrix participation;  // 6 x N at P, one column per mode
  double freq1_range = 0.0;  // relative range on the first frequency

  Matrix6 rigid_mass_at_p() const {
    // r: CoM -> P maps twist_P to twist_CoM.
    const Matrix6 T = kinematic_model(-com);
    return T.transpose() * spatial_inertia(mass, inertia) * T;
  }
};

// Driving-point effective mass model M_P(s) at the connection point P:
// input twist "<n>.P.accel.*", output "<n>.P.force.*" = M_P(s) a.  The wrench
// applied to the parent is its negative.  Modal states use q = omega*eta so
// that omega enters affinely.
inline LfrModel appendage_effective_mass(const std::string& n, const FlexibleAppendageData& a,
                                         bool uncertain_mode1 = false, std::string param = {}) {
  check_inertia(a.mass, a.inertia, n);
  const Index N = static_cast<Index>(a.freq_hz.size());
  if (a.participation.rows() != 6 || a.participation.cols() != N || static_cast<Index>(a.damping.size()) != N)
    throw Error(Errc::dimension_mismatch, n + ": modal data sizes");
  const Matrix6 DP = a.rigid_mass_at_p();
  const Matrix& L = a.participation;
  const Matrix6 D0 = DP - L * L.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix6> es(0.5 * (D0 + D0.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-9 * DP.norm())
    throw Error(Errc::non_psd_residual, n + ": rigid mass minus modal participation is not PSD");

  const bool unc = uncertain_mode1 && N > 0 && a.freq1_range > 0.0;
  const Index k = unc ? 2 : 0;
  // states [v_i = eta_i'; q_i = omega_i eta_i]
  Matrix A = Matrix::Zero(2 * N, 2 * N), B = Matrix::Zero(2 * N, k + 6);
  Matrix C = Matrix::Zero(k + 6, 2 * N), D = Matrix::Zero(k + 6, k + 6);
  D.bottomRightCorner(6, 6) = D0;
  for (Index i = 0; i < N; ++i) {
    const double w = 2.0 * M_PI * a.freq_hz[static_cast<std::size_t>(i)];
    const double z = a.damping[static_cast<std::size_t>(i)];
    const Index v = i, q = N + i;
    // v' = -w (2 z v + q) + l^T a,  q' = w v,  F += l w (2 z v + q)
    A(v, v) = -2.0 * z * w;
    A(v, q) = -w;
    A(q, v) = w;
    B.row(v).tail(6) = L.col(i).transpose();
    C.block(k, v, 6, 1) = L.col(i) * (2.0 * z * w);
    C.block(k, q, 6, 1) = L.col(i) * w;
    if (unc && i == 0) {
      // w1 = w0 (2 z v + q) + wa, w2 = w0 v + wb; za = r w0 (2 z v + q), zb = r w0 v
      const double r = a.freq1_range;
      C(0, v) = r * w * 2.0 * z;
      C(0, q) = r * w;
      C(1, v) = r * w;
      B(v, 0) = -1.0;
      B(q, 1) = 1.0;
      D.block(k, 0, 6, 1) = L.col(i);
    }
  }
  std::vector<UncertaintyBlock> blocks;
  Labels wl, zl;
  if (unc) {
    blocks.push_back(scalar_block(n + ".omega1", 2, -1.0, 1.0, param.empty() ? n + ".omega1" : param));
    wl = blocks[0].w_labels();
    zl = blocks[0].z_labels();
  }
  StateSpaceModel core(A, B, C, D, concat({wl, accel_labels(n + ".P")}), concat({zl, port_labels(n + ".P", "force")}));
  return make_lfr(core, std::move(blocks));
}

// Static gain on a two-port block: inputs parent twist and child wrench,
// outputs child twist and parent wrench.
inline Labels parent_in(const std::string& n) { return accel_labels(n + ".parent"); }
inline Labels child_in(const std::string& n) { return wrench_labels(n + ".child"); }
inline Labels child_out(const std::string& n) { return accel_labels(n + ".child"); }
inline Labels parent_out(const std::string& n) { return wrench_labels(n + ".parent"); }

// Constant frame change: twist_child = T twist_parent, wrench_parent = T^T
// wrench_child, with T = blkdiag(dcm, dcm) and dcm = DCM child/parent.
inline LfrModel frame_transform(const std::string& n, const Matrix3& dcm) {
  const Matrix6 T = blkdiag2(dcm);
  Matrix D = Matrix::Zero(12, 12);
  D.topLeftCorner(6, 6) = T;
  D.bottomRightCorner(6, 6) = T.transpose();
  return as_lfr(StateSpaceModel::gain(D, concat({parent_in(n), child_in(n)}), concat({child_out(n), parent_out(n)})));
}

// Revolute connection about `axis` with angle theta carried as the parameter
// t = tan(theta/4) in [-1, 1]: DCM child/parent = R(axis, theta)^T.  Each
// 3x3 rotation is two Cayley factors, each of rank 2 in t.
inline LfrModel tilt_transform(const std::string& n, const Vector3& axis, std::string param = {}) {
  auto blk = scalar_block(n, 16, -1.0, 1.0, param.empty() ? n : std::move(param));
  auto [U0, V0] = detail::skew_factors(axis.normalized());
  // Channel layout: 4 factors per 6x6 transform (lin x2, rot x2), two paths.
  Matrix D = Matrix::Zero(16 + 12, 16 + 12);
  const Index oi = 16;  // io offset
  // Composes two Cayley factors: y = (I - tM)^-1 (I + tM) u with M = U V^T:
  //   v = u + U w, y = u + 2 U w, z = V^T u + V^T U w, w = t z.
  // Second factor input is the first factor's output.
  auto rotation = [&](Index ch, Index in, Index out, double sign) {
    const Matrix U = sign * U0, V = V0;
    // factor 1 (channels ch, ch+1)
    D.block(ch, ch, 2, 2) = V.transpose() * U;
    D.block(ch, oi + in, 2, 3) = V.transpose();
    // y1 = u + 2 U w1
    // factor 2 (channels ch+2, ch+3): z2 = V^T y1 + V^T U w2, y = y1 + 2 U w2
    D.block(ch + 2, oi + in, 2, 3) = V.transpose();
    D.block(ch + 2, ch, 2, 2) = 2.0 * V.transpose() * U;
    D.block(ch + 2, ch + 2, 2, 2) = V.transpose() * U;
    D.block(oi + out, oi + in, 3, 3) = Matrix3::Identity();
    D.block(oi + out, ch, 3, 2) = 2.0 * U;
    D.block(oi + out, ch + 2, 3, 2) = 2.0 * U;
  };
  // twist path: R^T = R(-theta); wrench path: R
  rotation(0, 0, 0, -1.0);
  rotation(4, 3, 3, -1.0);
  rotation(8, 6, 6, 1.0);
  rotation(12, 9, 9, 1.0);
  auto core = StateSpaceModel::gain(D, concat({blk.w_labels(), parent_in(n), child_in(n)}),
                                    concat({blk.z_labels(), child_out(n), parent_out(n)}));
  return make_lfr(core, {blk});
}

// Numeric value of the tilt parameter for an angle.
inline double tilt_parameter(double theta) { return std::tan(theta / 4.0); }

// Gates a connection by delta in [0, 1] on all 12 channels.
inline LfrModel coupling_switch(const std::string& n, std::string param = {}) {
  auto blk = scalar_block(n, 12, 0.0, 1.0, param.empty() ? n : std::move(param));
  Matrix D = Matrix::Zero(24, 24);
  D.block(0, 12, 12, 12).setIdentity();  // z = u
  D.block(12, 0, 12, 12).setIdentity();  // y = w
  auto core = StateSpaceModel::gain(D, concat({blk.w_labels(), parent_in(n), child_in(n)}),
                                    concat({blk.z_labels(), child_out(n), parent_out(n)}));
  return make_lfr(core, {blk});
}

// Massless link between parent point P and child point C.
struct LinkData {
  double mass = 0.0;
  Vector3 com = Vector3::Zero();  // P -> CoM
  Matrix3 inertia = Matrix3::Identity();
  Vector3 pc = Vector3::Zero();  // P -> C
};

// Twist at P and child wrench at C in; twist at C and the wrench applied to
// the parent at P out: W_P = -D_P a_P + tau^T W_C.
inline LfrModel titop_link(const std::string& n, const LinkData& l) {
  Matrix6 DP = Matrix6::Zero();
  if (l.mass > 0.0) {
    check_inertia(l.mass, l.inertia, n);
    const Matrix6 T = kinematic_model(-l.com);
    DP = T.transpose() * spatial_inertia(l.mass, l.inertia) * T;
  }
  const Matrix6 tau = kinematic_model(-l.pc);  // twist_P -> twist_C
  Matrix D = Matrix::Zero(12, 12);
  D.topLeftCorner(6, 6) = tau;
  D.bottomLeftCorner(6, 6) = -DP;
  D.bottomRightCorner(6, 6) = tau.transpose();
  return as_lfr(StateSpaceModel::gain(D, concat({accel_labels(n + ".P"), wrench_labels(n + ".C")}),
                                      concat({accel_labels(n + ".C"), wrench_labels(n + ".P")})));
}

struct SpringDamperData {
  double k_shear = 0.0, k_tors = 0.0, d_shear = 0.0, d_tors = 0.0;
};

// 6-DOF spring-damper between C and P, in its own frame.  Inputs: twists at C
// and P; outputs: wrenches applied to the C and P bodies.  In uncertain form
// the four coefficients are scalar blocks carrying the raw values (nominal 0).
inline LfrModel spring_damper(const std::string& n, const SpringDamperData& s, bool uncertain = false,
                              double max_coefficient = 1e9) {
  // states x (6) relative displacement, v (6) relative rate
  Matrix A = Matrix::Zero(12, 12);
  A.topRightCorner(6, 6).setIdentity();
  std::vector<UncertaintyBlock> blocks;
  Labels wl, zl;
  const Index k = uncertain ? 12 : 0;
  Matrix B = Matrix::Zero(12, k + 12), C = Matrix::Zero(k + 12, 12), D = Matrix::Zero(k + 12, k + 12);
  B.block(6, k, 6, 6).setIdentity();        // a_C
  B.block(6, k + 6, 6, 6) = -Matrix6::Identity();  // a_P
  if (uncertain) {
    const char* names[] = {".K_shear", ".K_tors", ".D_shear", ".D_tors"};
    for (int b = 0; b < 4; ++b) {
      auto blk = scalar_block(n + names[b], 3, 0.0, max_coefficient);
      auto a = blk.w_labels(), z = blk.z_labels();
      wl.insert(wl.end(), a.begin(), a.end());
      zl.insert(zl.end(), z.begin(), z.end());
      blocks.push_back(blk);
      // K_shear: x_lin, K_tors: x_rot, D_shear: v_lin, D_tors: v_rot
      const Index state = (b >= 2 ? 6 : 0) + (b % 2 == 1 ? 3 : 0);
      const Index force = b % 2 == 1 ? 3 : 0;
      C.block(3 * b, state, 3, 3).setIdentity();
      D.block(k + force, 3 * b, 3, 3) = -Matrix3::Identity();  // W_C = -F
      D.block(k + 6 + force, 3 * b, 3, 3) = Matrix3::Identity();
    }
  } else {
    Matrix F = Matrix::Zero(6, 12);
    F.block(0, 0, 3, 3) = s.k_shear * Matrix3::Identity();
    F.block(3, 3, 3, 3) = s.k_tors * Matrix3::Identity();
    F.block(0, 6, 3, 3) = s.d_shear * Matrix3::Identity();
    F.block(3, 9, 3, 3) = s.d_tors * Matrix3::Identity();
    C.topRows(6) = -F;
    C.bottomRows(6) = F;
  }
  StateSpaceModel core(A, B, C, D, concat({wl, accel_labels(n + ".C"), accel_labels(n + ".P")}),
                       concat({zl, wrench_labels(n + ".C"), wrench_labels(n + ".P")}));
  return make_lfr(core, std::move(blocks));
}

// Sign-flipped identity, e.g. to turn a driving-point force into the wrench
// applied to the parent.
inline LfrModel negate(const Labels& in, const Labels& out) {
  return as_lfr(StateSpaceModel::gain(-Matrix::Identity(static_cast<Index>(in.size()), static_cast<Index>(in.size())), in, out));
}

}  // namespace oos
