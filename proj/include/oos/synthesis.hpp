#pragma once
// Weighted design interconnection and multimodel static attitude-gain tuning.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oos/error.hpp"
#include "oos/parallel.hpp"
#include "oos/scenario.hpp"
#include "oos/sslft.hpp"

namespace oos {

inline constexpr double kTwoPi = 6.283185307179586;

// u = K [phi_ref - phi; omega_ref - omega], K = [k_att | c_att].
struct ControllerGains {
  Matrix K = Matrix::Zero(3, 6);

  Matrix k_att() const { return K.leftCols(3); }
  Matrix c_att() const { return K.rightCols(3); }
};

// Critically damped rigid-axis PD gains; omega is given in Hz and converted
// with 2*pi.
inline ControllerGains baseline_controller(const Matrix3& J, double xi = 1.0, double omega_hz = 0.01) {
  if ((J - J.transpose()).norm() > 1e-9 * J.norm())
    throw Error(Errc::non_pd_inertia, "inertia is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix3> es(J);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw Error(Errc::non_pd_inertia, "inertia is not positive definite");
  const double w = kTwoPi * omega_hz;
  ControllerGains g;
  g.K.leftCols(3) = w * w * J;
  g.K.rightCols(3) = 2.0 * xi * w * J;
  return g;
}

// ---------------------------------------------------------------------------
// Filters (SISO, unity DC gain)

namespace detail {

// Cascade b(a(u)) of SISO models.
inline StateSpaceModel series(const StateSpaceModel& a, const StateSpaceModel& b, const std::string& in,
                              const std::string& out) {
  const Index na = a.states(), nb = b.states();
  Matrix A = Matrix::Zero(na + nb, na + nb), B(na + nb, 1), C(1, na + nb), D(1, 1);
  A.topLeftCorner(na, na) = a.A();
  A.bottomRightCorner(nb, nb) = b.A();
  A.bottomLeftCorner(nb, na) = b.B() * a.C();
  B << a.B(), b.B() * a.D();
  C << b.D() * a.C(), b.C();
  D = b.D() * a.D();
  return {A, B, C, D, {in}, {out}};
}

// w0^2 / (s^2 + 2 z w0 s + w0^2), states (y, y'/w0).
inline StateSpaceModel second_order_section(double zeta, double w0, const std::string& in, const std::string& out) {
  Matrix A(2, 2), B(2, 1), C(1, 2), D = Matrix::Zero(1, 1);
  A << 0.0, w0, -w0, -2.0 * zeta * w0;
  B << 0.0, w0;
  C << 1.0, 0.0;
  return {A, B, C, D, {in}, {out}};
}

inline std::vector<Complex> butterworth_poles(int order, double wc) {
  std::vector<Complex> p;
  for (int k = 1; k <= order; ++k)
    p.push_back(wc * std::exp(Complex(0.0, M_PI * (2.0 * k + order - 1.0) / (2.0 * order))));
  return p;
}

}  // namespace detail

inline StateSpaceModel first_order_lowpass(double cutoff_hz, const std::string& in = "u",
                                           const std::string& out = "y") {
  if (!(cutoff_hz > 0.0)) throw Error(Errc::invalid_argument, "cutoff must be positive");
  const double a = kTwoPi * cutoff_hz;
  return {Matrix::Constant(1, 1, -a), Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1),
          {in}, {out}};
}

inline StateSpaceModel second_order_lowpass(double zeta, double wn_hz, const std::string& in = "u",
                                            const std::string& out = "y") {
  if (!(wn_hz > 0.0) || !(zeta > 0.0)) throw Error(Errc::invalid_argument, "second-order filter parameters");
  return detail::second_order_section(zeta, kTwoPi * wn_hz, in, out);
}

// Analog Butterworth low-pass as a cascade of second-order sections (plus a
// first-order one for odd orders).
inline StateSpaceModel butterworth_rolloff(int order, double cutoff_hz, const std::string& in = "u",
                                           const std::string& out = "y") {
  if (order < 1 || !(cutoff_hz > 0.0)) throw Error(Errc::invalid_argument, "Butterworth order/cutoff");
  const double wc = kTwoPi * cutoff_hz;
  StateSpaceModel f = StateSpaceModel::gain(Matrix::Identity(1, 1), {in}, {out});
  for (auto& p : detail::butterworth_poles(order, wc)) {
    if (p.imag() < -1e-12 * wc) continue;  // conjugate handled with its partner
    StateSpaceModel sec = std::abs(p.imag()) <= 1e-12 * wc
                              ? StateSpaceModel(Matrix::Constant(1, 1, -wc), Matrix::Constant(1, 1, wc),
                                                Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1), {in}, {out})
                              : detail::second_order_section(-p.real() / wc, wc, in, out);
    f = detail::series(f, sec, in, out);
  }
  return f;
}

// Per-axis copies of a SISO model.
inline StateSpaceModel per_axis(const StateSpaceModel& siso, const Labels& in, const Labels& out) {
  std::vector<StateSpaceModel> ms;
  for (std::size_t i = 0; i < in.size(); ++i) ms.push_back(relabel(siso, {in[i]}, {out[i]}));
  return append(ms);
}

// ---------------------------------------------------------------------------
// Design interconnection

namespace design {

inline const std::array<const char*, 3> kAxes{"x", "y", "z"};

inline Labels axes(const std::string& p) { return {p + ".x", p + ".y", p + ".z"}; }

inline Labels disturbances() {
  return concat({axes("d.ref"), axes("d.ext"), axes("d.gyro"), axes("d.sst")});
}
inline Labels performance() { return concat({axes("e.point"), axes("e.act")}); }
inline Labels controls() { return axes("u"); }
inline Labels measurements() { return concat({axes("y.att"), axes("y.rate")}); }

// Scalar transfer shapes of the frame at one frequency.
struct Shapes {
  Complex act;                 // roll-off * reaction wheel
  Complex sst, gyro;           // sensor filters
  Complex ref;                 // reference shaping (includes Wp)
  std::array<Complex, 3> ext;  // external torque weights
};

}  // namespace design

// Everything of Fig. 15a except the plant: inputs (d, u, plant.wdot),
// outputs (e, y, plant.T).  The plant maps plant.T (torque at G1) to
// plant.wdot (angular acceleration).
class DesignFrame {
 public:
  DesignFrame(const WeightSet& w, const SensorActuatorSet& hw) : w_(w), hw_(hw) {
    if (!(w.wn_gyro > 0 && w.wn_sst > 0 && w.wu > 0 && w.wp > 0 && w.wn_ext_s > 0 && w.wn_ext_0 > 0 &&
          w.reference_hz > 0) ||
        std::any_of(w.wn_ext_gain.begin(), w.wn_ext_gain.end(), [](double c) { return !(c > 0); }))
      throw Error(Errc::invalid_argument, "weights must be positive");
    using design::axes;
    std::vector<StateSpaceModel> parts;
    const double wr = kTwoPi * w.reference_hz;
    for (int k = 0; k < 3; ++k) {
      const std::string a = design::kAxes[static_cast<std::size_t>(k)];
      // reference: phi_ref = Wp wr/(s+wr) d, omega_ref = s phi_ref
      Matrix A(1, 1), B(1, 1), C(2, 1), D(2, 1);
      A << -wr; B << wr * w.wp; C << 1.0, -wr; D << 0.0, wr * w.wp;
      parts.push_back({A, B, C, D, {"d.ref." + a}, {"ref.phi." + a, "ref.rate." + a}});
      // external torque: c / (a s + b)
      A << -w.wn_ext_0 / w.wn_ext_s; B << 1.0;
      parts.push_back({A, B, Matrix::Constant(1, 1, w.wn_ext_gain[static_cast<std::size_t>(k)] / w.wn_ext_s),
                       Matrix::Zero(1, 1), {"d.ext." + a}, {"ext." + a}});
      // rate and attitude integrators
      Matrix Ai(2, 2), Bi(2, 1);
      Ai << 0, 0, 1, 0; Bi << 1, 0;
      parts.push_back({Ai, Bi, Matrix::Identity(2, 2), Matrix::Zero(2, 1), {"plant.wdot." + a},
                       {"omega." + a, "phi." + a}});
      // sensors: first-order low-pass of (signal + weighted noise)
      auto sensor = [&](double hz, double wn, const std::string& sig, const std::string& noise,
                        const std::string& out) {
        const double c = kTwoPi * hz;
        Matrix As(1, 1), Bs(1, 2);
        As << -c; Bs << c, c * wn;
        parts.push_back({As, Bs, Matrix::Ones(1, 1), Matrix::Zero(1, 2), {sig, noise}, {out}});
      };
      sensor(hw.gyro_hz, w.wn_gyro, "gyro.in." + a, "d.gyro." + a, "gyro." + a);
      sensor(hw.sst_hz, w.wn_sst, "sst.in." + a, "d.sst." + a, "sst." + a);
      // actuator: roll-off then reaction wheel
      parts.push_back(detail::series(butterworth_rolloff(w.rolloff_order, w.rolloff_hz, "u." + a, "ro." + a),
                                     second_order_lowpass(hw.rw_damping, hw.rw_hz, "ro." + a, "rw." + a),
                                     "u." + a, "rw." + a));
    }
    // static output map
    const Labels in = concat({axes("ref.phi"), axes("ref.rate"), axes("gyro"), axes("sst"), axes("phi"),
                              axes("rw"), axes("ext")});
    const Labels out = concat({axes("y.att"), axes("y.rate"), axes("e.point"), axes("e.act"), axes("plant.T")});
    Matrix S = Matrix::Zero(15, 21);
    const Matrix I = Matrix::Identity(3, 3);
    S.block(0, 0, 3, 3) = I;  S.block(0, 9, 3, 3) = -I;          // y.att = ref.phi - sst
    S.block(3, 3, 3, 3) = I;  S.block(3, 6, 3, 3) = -I;          // y.rate = ref.rate - gyro
    S.block(6, 0, 3, 3) = I / w.wp; S.block(6, 12, 3, 3) = -I / w.wp;  // e.point
    S.block(9, 15, 3, 3) = w.wu * I;                             // e.act
    S.block(12, 15, 3, 3) = I; S.block(12, 18, 3, 3) = I;        // plant.T = rw + ext
    parts.push_back(StateSpaceModel::gain(S, in, out));

    std::vector<Wire> wires;
    auto wire3 = [&](const std::string& from, const std::string& to) {
      for (auto a : design::kAxes) wires.push_back({from + "." + a, to + "." + a});
    };
    for (auto s : {"ref.phi", "ref.rate", "gyro", "sst", "rw", "ext"}) wire3(s, s);
    wire3("omega", "gyro.in");
    wire3("phi", "sst.in");
    wire3("phi", "phi");
    model_ = connect(parts, wires, concat({design::disturbances(), design::controls(), axes("plant.wdot")}),
                     concat({design::performance(), design::measurements(), axes("plant.T")}));
    rolloff_poles_ = detail::butterworth_poles(w.rolloff_order, kTwoPi * w.rolloff_hz);
  }

  const StateSpaceModel& model() const { return model_; }
  const WeightSet& weights() const { return w_; }
  const SensorActuatorSet& hardware() const { return hw_; }

  // Closed-form scalar shapes at s = j omega (same transfers as model()).
  design::Shapes shapes(double omega) const {
    const Complex s(0.0, omega);
    design::Shapes r;
    Complex ro(1.0);
    for (auto& p : rolloff_poles_) ro *= -p / (s - p);
    const double wn = kTwoPi * hw_.rw_hz;
    r.act = ro * wn * wn / (s * s + 2.0 * hw_.rw_damping * wn * s + wn * wn);
    const double as = kTwoPi * hw_.sst_hz, ag = kTwoPi * hw_.gyro_hz, wr = kTwoPi * w_.reference_hz;
    r.sst = as / (s + as);
    r.gyro = ag / (s + ag);
    r.ref = w_.wp * wr / (s + wr);
    for (std::size_t k = 0; k < 3; ++k) r.ext[k] = w_.wn_ext_gain[k] / (w_.wn_ext_s * s + w_.wn_ext_0);
    return r;
  }

 private:
  WeightSet w_;
  SensorActuatorSet hw_;
  StateSpaceModel model_;
  std::vector<Complex> rolloff_poles_;
};

namespace detail {

inline void check_plant_channels(const LfrModel& plant) {
  if (!plant.groups.count("torque") || !plant.groups.count("angular_accel"))
    throw Error(Errc::missing_channels, "plant must expose the torque and angular_accel groups");
  if (plant.group("torque").size() != 3 || plant.group("angular_accel").size() != 3)
    throw Error(Errc::missing_channels, "torque/angular_accel groups must have three channels");
}

inline std::vector<Wire> frame_wiring(const Labels& torque, const Labels& accel) {
  std::vector<Wire> w;
  for (std::size_t k = 0; k < 3; ++k) {
    w.push_back({"plant.T." + std::string(design::kAxes[k]), torque[k]});
    w.push_back({accel[k], "plant.wdot." + std::string(design::kAxes[k])});
  }
  return w;
}

inline std::map<std::string, Labels> design_groups() {
  return {{"disturbance", design::disturbances()},
          {"performance", design::performance()},
          {"control", design::controls()},
          {"measurement", design::measurements()}};
}

}  // namespace detail

// Plant LFR (uncertainty kept open) inside the weighted frame; the controller
// slot is the (measurement -> control) lower LFT.
inline LfrModel build_design_interconnection(const LfrModel& plant, const DesignFrame& frame) {
  detail::check_plant_channels(plant);
  const Labels ein = concat({design::disturbances(), design::controls()});
  const Labels eout = concat({design::performance(), design::measurements()});
  return connect_lfr({plant, as_lfr(frame.model())},
                     detail::frame_wiring(plant.group("torque"), plant.group("angular_accel")), ein, eout,
                     detail::design_groups());
}

inline LfrModel build_design_interconnection(const LfrModel& plant, const WeightSet& w, const SensorActuatorSet& hw) {
  return build_design_interconnection(plant, DesignFrame(w, hw));
}

inline StateSpaceModel gain_model(const ControllerGains& g) {
  return StateSpaceModel::gain(g.K, design::measurements(), design::controls());
}

// Closed loop d -> e for a torque -> angular-acceleration model.
inline StateSpaceModel design_loop(const StateSpaceModel& G3, const DesignFrame& frame, const ControllerGains& g) {
  if (G3.num_inputs() != 3 || G3.num_outputs() != 3)
    throw Error(Errc::missing_channels, "design loop needs a 3x3 torque to acceleration model");
  const auto P = connect({relabel(G3, design::axes("plant.T"), design::axes("plant.wdot")), frame.model()},
                         detail::frame_wiring(design::axes("plant.T"), design::axes("plant.wdot")),
                         concat({design::disturbances(), design::controls()}),
                         concat({design::performance(), design::measurements()}));
  return lft_lower(LfrModel{P, {}, detail::design_groups()}, gain_model(g)).core;
}

// Torque -> angular acceleration block of a plant LFR with all blocks closed.
inline StateSpaceModel attitude_channel(const LfrModel& plant, const ParamSample& s) {
  detail::check_plant_channels(plant);
  return select(lft_upper(plant, s), plant.group("torque"), plant.group("angular_accel"));
}

// ---------------------------------------------------------------------------
// Fast per-frequency evaluation of the closed loop

namespace design {

using C3 = Eigen::Matrix<Complex, 3, 3>;
using C6 = Eigen::Matrix<Complex, 6, 6>;
using C3x12 = Eigen::Matrix<Complex, 3, 12>;
using C6x12 = Eigen::Matrix<Complex, 6, 12>;

// Closed-loop d -> e response from G(j omega) without forming the loop.
inline C6x12 closed_loop_response(const C3& G, double omega, const Shapes& sh, const WeightSet& w,
                                  const Eigen::Matrix<double, 3, 6>& K) {
  const Complex s(0.0, omega), s2 = s * s;
  const C3 Ka = K.leftCols<3>().cast<Complex>(), Kc = K.rightCols<3>().cast<Complex>();
  const C3 Ph = G / s2;  // torque -> attitude
  const C3 N = C3::Identity() + sh.act * (sh.sst * Ka + s * sh.gyro * Kc) * Ph;
  C3x12 R;
  R.block<3, 3>(0, 0) = sh.act * sh.ref * (Ka + s * Kc);
  R.block<3, 3>(0, 3) = C3::Zero();
  for (int k = 0; k < 3; ++k) R(k, 3 + k) = sh.ext[static_cast<std::size_t>(k)];
  R.block<3, 3>(0, 6) = -sh.act * sh.gyro * w.wn_gyro * Kc;
  R.block<3, 3>(0, 9) = -sh.act * sh.sst * w.wn_sst * Ka;
  const C3x12 T = N.partialPivLu().solve(R);
  C6x12 E;
  E.topRows<3>() = -Ph * T;
  E.block<3, 3>(0, 0) += sh.ref * C3::Identity();
  E.topRows<3>() /= w.wp;
  E.bottomRows<3>() = w.wu * T;
  for (int k = 0; k < 3; ++k) E(3 + k, 3 + k) -= w.wu * sh.ext[static_cast<std::size_t>(k)];
  return E;
}

inline double sigma_max(const C6x12& E) {
  const C6 W = E * E.adjoint();
  Eigen::SelfAdjointEigenSolver<C6> es(W, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()(5)));
}

}  // namespace design

// Baseline gains for the stack inertia at the first docking event.
inline ControllerGains mission_baseline(const MissionConfig& c) {
  const auto tr = mission_trajectory(c);
  const auto J = composite_inertia(c, pose_at(tr, c.timeline.first_dock), Phase::arm_docked).inertia;
  return baseline_controller(J, c.baseline.xi, c.baseline.omega_hz);
}

// ---------------------------------------------------------------------------
// Multimodel synthesis

struct SynthesisOptions {
  std::size_t budget = 20000;   // objective evaluations
  std::uint64_t seed = 1;
  std::size_t vertices = 16;    // sign vertices per grid model (plus nominal)
  double f_min_hz = 1e-4, f_max_hz = 50.0;
  int points_per_decade = 40;
  double modal_cutoff_hz = 20.0;  // modes above are not densified
  std::size_t stage_evaluations = 300;
  std::size_t max_active_points = 2500;
  HinfOptions hinf{1e-4, 1e3, 100, 4, 1e-9, true};
};

struct SynthesisResult {
  ControllerGains gains;
  ControllerGains initial;
  double gamma = 0.0;          // max over grid models and vertices (exact norms)
  double gamma_nominal = 0.0;  // max over grid models, nominal uncertainty
  double gamma_initial = 0.0;
  double gamma_initial_nominal = 0.0;
  std::vector<double> model_gamma;          // worst over each model's samples
  std::vector<double> model_gamma_nominal;  // nominal sample of each model
  std::vector<double> model_gamma_initial;
  std::size_t evaluations = 0;
  std::size_t pairs = 0;
  bool budget_exhausted = false;
};

namespace detail {

struct DesignPair {
  std::size_t model = 0;
  bool nominal = true;
  StateSpaceModel G3;
  std::vector<double> omega;
  std::vector<design::C3> G;
  std::vector<design::Shapes> shapes;
};

// Parameters whose single-sign perturbation changes the attitude channel.
inline Labels relevant_parameters(const LfrModel& plant, const StateSpaceModel& G0) {
  Labels out;
  FrequencyEvaluator e0(G0);
  const std::array<double, 3> probe{0.3, 3.0, 30.0};
  std::array<CMatrix, 3> g0;
  for (std::size_t i = 0; i < 3; ++i) g0[i] = e0(Complex(0.0, probe[i]));
  for (auto& p : plant.parameters()) {
    ParamSample s;
    for (auto& q : plant.parameters()) s[q] = 0.0;
    double hi = 0.0;
    for (auto& b : plant.blocks) if (b.parameter == p) hi = b.hi;
    s[p] = hi;
    FrequencyEvaluator e1(attitude_channel(plant, s));
    double d = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      d = std::max(d, (e1(Complex(0.0, probe[i])) - g0[i]).norm() / std::max(g0[i].norm(), 1e-300));
    if (d > 1e-10) out.push_back(p);
  }
  return out;
}

inline std::vector<ParamSample> vertex_samples(const LfrModel& plant, const Labels& relevant, std::size_t cap,
                                               std::uint64_t seed) {
  std::map<std::string, std::pair<double, double>> range;
  for (auto& b : plant.blocks) range[b.parameter] = {b.lo, b.hi};
  ParamSample base;
  for (auto& p : plant.parameters()) base[p] = 0.0;
  const std::size_t k = relevant.size();
  if (k == 0 || cap == 0) return {};
  std::vector<std::uint64_t> codes;
  const std::uint64_t total = k >= 63 ? ~0ull : (1ull << k);
  if (total <= cap) {
    for (std::uint64_t c = 0; c < total; ++c) codes.push_back(c);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
    while (codes.size() < cap) {
      const auto c = pick(rng);
      if (std::find(codes.begin(), codes.end(), c) == codes.end()) codes.push_back(c);
    }
  }
  std::vector<ParamSample> out;
  for (auto c : codes) {
    ParamSample s = base;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& [lo, hi] = range[relevant[i]];
      s[relevant[i]] = (c >> i) & 1ull ? hi : lo;
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<double> pair_grid(const StateSpaceModel& G3, const SynthesisOptions& o) {
  const double lo = kTwoPi * o.f_min_hz, hi = kTwoPi * o.f_max_hz;
  auto grid = logspace(lo, hi, static_cast<std::size_t>(std::ceil(std::log10(hi / lo) * o.points_per_decade)) + 1);
  if (G3.states() > 0) {
    Eigen::EigenSolver<Matrix> es(G3.A(), false);
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
      const double wi = es.eigenvalues()(i).imag();
      if (wi <= 0.0 || wi > kTwoPi * o.modal_cutoff_hz) continue;
      for (double r : {-0.015, -0.005, 0.0, 0.005, 0.015}) {
        const double v = wi * (1.0 + r);
        if (v > lo && v < hi) grid.push_back(v);
      }
    }
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> out;
  for (double v : grid)
    if (out.empty() || v > out.back() * (1.0 + 1e-9)) out.push_back(v);
  return out;
}

inline void fill_pair(DesignPair& p, const DesignFrame& frame, const SynthesisOptions& o) {
  p.omega = pair_grid(p.G3, o);
  FrequencyEvaluator ev(p.G3);
  p.G.resize(p.omega.size());
  p.shapes.resize(p.omega.size());
  for (std::size_t i = 0; i < p.omega.size(); ++i) {
    p.G[i] = ev(Complex(0.0, p.omega[i]));
    p.shapes[i] = frame.shapes(p.omega[i]);
  }
}

using Gain36 = Eigen::Matrix<double, 3, 6>;

struct ActivePoint {
  std::size_t pair, index;
};

// Open loop (A, B_u, C_y) of a design pair; the static loop is A + B_u K C_y
// because no measurement depends directly on the control.
struct LoopMatrices {
  Matrix A, Bu, Cy;
};

inline LoopMatrices loop_matrices(const StateSpaceModel& G3, const DesignFrame& frame) {
  const auto P = connect({relabel(G3, design::axes("plant.T"), design::axes("plant.wdot")), frame.model()},
                         frame_wiring(design::axes("plant.T"), design::axes("plant.wdot")), design::controls(),
                         design::measurements());
  if (P.D().cwiseAbs().maxCoeff() != 0.0) throw Error(Errc::invalid_argument, "measurement feedthrough from control");
  return {P.A(), P.B(), P.C()};
}

inline double loop_abscissa(const LoopMatrices& L, const Matrix& K) {
  return spectral_abscissa(L.A + L.Bu * K * L.Cy);
}

// Gain coordinates: diagonal gains in log scale, off-diagonal gains as
// couplings normalized by the geometric mean of their row/column diagonals.
struct GainCoordinates {
  Gain36 sign, base;

  explicit GainCoordinates(const Gain36& K0) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 6; ++c) {
        sign(r, c) = K0(r, c) < 0.0 ? -1.0 : 1.0;
        base(r, c) = std::abs(K0(r, c));
      }
    for (int b = 0; b < 2; ++b)
      for (int r = 0; r < 3; ++r)
        if (!(base(r, 3 * b + r) > 0.0)) base(r, 3 * b + r) = std::max(base.cwiseAbs().maxCoeff(), 1e-6);
  }

  static int diag_index(int b, int r) { return 3 * b + r; }
  static int off_index(int b, int r, int c) {  // 6 + b*6 + position among off-diagonals
    return 6 + 6 * b + 2 * r + (c > r ? c - 1 : c);
  }

  Gain36 gain(const Eigen::Matrix<double, 18, 1>& x) const {
    Gain36 K = Gain36::Zero();
    for (int b = 0; b < 2; ++b) {
      for (int r = 0; r < 3; ++r) K(r, 3 * b + r) = sign(r, 3 * b + r) * base(r, 3 * b + r) * std::exp(x(diag_index(b, r)));
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          if (r != c)
            K(r, 3 * b + c) = x(off_index(b, r, c)) * std::sqrt(std::abs(K(r, 3 * b + r) * K(c, 3 * b + c)));
    }
    return K;
  }

  Eigen::Matrix<double, 18, 1> coords(const Gain36& K) const {
    Eigen::Matrix<double, 18, 1> x;
    for (int b = 0; b < 2; ++b) {
      for (int r = 0; r < 3; ++r) x(diag_index(b, r)) = std::log(std::abs(K(r, 3 * b + r)) / base(r, 3 * b + r));
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          if (r != c) {
            const double g = std::sqrt(std::abs(K(r, 3 * b + r) * K(c, 3 * b + c)));
            x(off_index(b, r, c)) = g > 0.0 ? K(r, 3 * b + c) / g : 0.0;
          }
    }
    return x;
  }
};

}  // namespace detail

// Multimodel soft-constraint synthesis over static 3x6 gains.  `plants` are
// the grid models with their real uncertainty blocks open; each contributes
// its nominal sample plus sign vertices of the parameters that reach the
// attitude channel.  The objective is the largest weighted d -> e gain over
// all (model, sample) pairs; direct search (Nelder-Mead stages with
// coordinate polish) runs on a log-sum-exp smoothed max with annealing over
// an active set of peak frequencies, refreshed by full passes.
inline SynthesisResult synthesize(const std::vector<LfrModel>& plants, const DesignFrame& frame,
                                  const ControllerGains& K0, const SynthesisOptions& opt = {}) {
  using detail::DesignPair;
  using detail::Gain36;
  using Vec = Eigen::Matrix<double, 18, 1>;
  if (plants.empty()) throw Error(Errc::invalid_argument, "empty design grid");
  if (K0.K.rows() != 3 || K0.K.cols() != 6 || !K0.K.allFinite())
    throw Error(Errc::invalid_argument, "gains must be a finite 3x6 matrix");
  const WeightSet& W = frame.weights();

  // Design pairs (model, uncertainty sample).
  std::vector<std::vector<DesignPair>> per_model(plants.size());
  parallel_for(plants.size(), [&](std::size_t m) {
    ParamSample nom;
    for (auto& p : plants[m].parameters()) nom[p] = 0.0;
    DesignPair p0;
    p0.model = m;
    p0.G3 = attitude_channel(plants[m], nom);
    std::vector<DesignPair> v;
    const auto rel = detail::relevant_parameters(plants[m], p0.G3);
    v.push_back(std::move(p0));
    for (auto& s : detail::vertex_samples(plants[m], rel, opt.vertices, opt.seed + 7919 * m)) {
      DesignPair p;
      p.model = m;
      p.nominal = false;
      p.G3 = attitude_channel(plants[m], s);
      v.push_back(std::move(p));
    }
    for (auto& p : v) detail::fill_pair(p, frame, opt);
    per_model[m] = std::move(v);
  });
  std::vector<DesignPair> pairs;
  for (auto& v : per_model)
    for (auto& p : v) pairs.push_back(std::move(p));
  per_model.clear();
  std::vector<std::size_t> nominal_pairs;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].nominal) nominal_pairs.push_back(i);

  // Exact loop matrices, built on demand.
  std::map<std::size_t, detail::LoopMatrices> loops;
  auto loop_of = [&](std::size_t i) -> const detail::LoopMatrices& {
    auto it = loops.find(i);
    if (it == loops.end()) it = loops.emplace(i, detail::loop_matrices(pairs[i].G3, frame)).first;
    return it->second;
  };
  auto unstable_on = [&](const std::vector<std::size_t>& idx, const Matrix& K) {
    for (auto i : idx) loop_of(i);
    std::vector<char> ok(idx.size(), 0);
    parallel_for(idx.size(), [&](std::size_t k) { ok[k] = detail::loop_abscissa(loops.at(idx[k]), K) < 0.0; });
    std::vector<std::size_t> bad;
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (!ok[k]) bad.push_back(idx[k]);
    return bad;
  };
  if (!unstable_on(nominal_pairs, K0.K).empty())
    throw Error(Errc::initial_gains_unstable, "initial gains do not stabilize every grid model");

  const detail::GainCoordinates gc(K0.K);

  auto point_value = [&](const DesignPair& p, std::size_t k, const Gain36& K) {
    const double v = design::sigma_max(design::closed_loop_response(p.G[k], p.omega[k], p.shapes[k], W, K));
    return std::isfinite(v) ? v : 1e30;
  };
  // Full pass: every pair on its whole grid.
  std::vector<std::vector<double>> curves(pairs.size());
  auto full = [&](const Gain36& K) {
    std::vector<double> peak(pairs.size(), 0.0);
    parallel_for(pairs.size(), [&](std::size_t i) {
      auto& c = curves[i];
      c.resize(pairs[i].omega.size());
      for (std::size_t k = 0; k < c.size(); ++k) {
        c[k] = point_value(pairs[i], k, K);
        peak[i] = std::max(peak[i], c[k]);
      }
    });
    return peak;
  };

  // Active set: local maxima (with neighbours) of the worst pairs' curves,
  // plus a stability watch list of the worst pairs and spread nominal ones.
  std::vector<detail::ActivePoint> active;
  std::vector<std::size_t> watch;
  auto peaks_of = [&](const std::vector<double>& peak, double level) {
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return peak[a] > peak[b]; });
    std::vector<detail::ActivePoint> pts;
    for (auto i : order) {
      if (peak[i] < level || pts.size() >= opt.max_active_points) break;
      const auto& v = curves[i];
      for (std::size_t k = 0; k < v.size(); ++k) {
        const bool l = k == 0 || v[k] >= v[k - 1];
        const bool r = k + 1 == v.size() || v[k] >= v[k + 1];
        if (!(l && r) || v[k] < level) continue;
        for (std::size_t j = k == 0 ? 0 : k - 1; j <= std::min(k + 1, v.size() - 1); ++j) pts.push_back({i, j});
      }
    }
    return pts;
  };
  std::vector<std::size_t> sticky;  // pairs that destabilized a candidate
  auto refresh = [&](const std::vector<double>& peak, std::vector<detail::ActivePoint> keep) {
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return peak[a] > peak[b]; });
    const double gmax = peak[order.front()];
    // always kept: cutting-plane points and the coarse shape of the worst curves
    for (std::size_t k = 0; k < std::min<std::size_t>(8, order.size()); ++k)
      for (std::size_t j = 0; j < curves[order[k]].size(); j += 4) keep.push_back({order[k], j});
    // peaks of the worst pairs, then still-relevant previous points while room remains
    auto pts = peaks_of(peak, 0.5 * gmax);
    auto key = [](auto& a, auto& b) { return a.pair != b.pair ? a.pair < b.pair : a.index < b.index; };
    auto same = [](auto& a, auto& b) { return a.pair == b.pair && a.index == b.index; };
    std::vector<detail::ActivePoint> old;
    for (auto& a : active)
      if (curves[a.pair][a.index] >= 0.3 * gmax) old.push_back(a);
    std::stable_sort(old.begin(), old.end(),
                     [&](auto& a, auto& b) { return curves[a.pair][a.index] > curves[b.pair][b.index]; });
    for (auto& a : old) {
      if (pts.size() >= opt.max_active_points) break;
      pts.push_back(a);
    }
    pts.insert(pts.end(), keep.begin(), keep.end());
    std::sort(pts.begin(), pts.end(), key);
    pts.erase(std::unique(pts.begin(), pts.end(), same), pts.end());
    active = std::move(pts);
    watch = sticky;
    for (std::size_t k = 0; k < std::min<std::size_t>(3, order.size()); ++k) watch.push_back(order[k]);
    for (std::size_t k = 0; k < 4; ++k) watch.push_back(nominal_pairs[k * (nominal_pairs.size() - 1) / 3]);
    std::sort(watch.begin(), watch.end());
    watch.erase(std::unique(watch.begin(), watch.end()), watch.end());
    for (auto i : watch) loop_of(i);
  };

  SynthesisResult res;
  res.initial = K0;
  res.pairs = pairs.size();
  std::size_t evals = 0;

  Vec xbest = gc.coords(K0.K);
  Gain36 Kbest = K0.K;
  double best_true;
  {
    const auto pk = full(Kbest);
    best_true = *std::max_element(pk.begin(), pk.end());
    refresh(pk, {});
  }
  ++evals;

  double tau = 0.05 * best_true;
  auto smoothed = [&](const Vec& x) {
    ++evals;
    const Gain36 K = gc.gain(x);
    if (!K.allFinite()) return 1e30;
    for (auto i : watch)
      if (!(detail::loop_abscissa(loops.at(i), K) < 0.0)) return 1e30;
    std::vector<double> v(active.size());
    parallel_for(active.size(), [&](std::size_t i) { v[i] = point_value(pairs[active[i].pair], active[i].index, K); });
    const double m = *std::max_element(v.begin(), v.end());
    double acc = 0.0;
    for (double e : v) acc += std::exp((e - m) / tau);
    return m + tau * std::log(acc);
  };

  // Free coordinates: diagonal gains first, then all 18.
  std::vector<int> diag_only{0, 1, 2, 3, 4, 5}, every(18);
  std::iota(every.begin(), every.end(), 0);
  bool full_space = false;
  double step = 1.0;
  bool converged = false;
  while (evals < opt.budget) {
    const auto& free = full_space ? every : diag_only;
    const int n = static_cast<int>(free.size());
    const std::size_t stage_end = std::min(opt.budget, evals + opt.stage_evaluations);
    auto embed = [&](const Vector& y) {
      Vec x = xbest;
      for (int i = 0; i < n; ++i) x(free[static_cast<std::size_t>(i)]) = y(i);
      return x;
    };
    Vector y0(n);
    for (int i = 0; i < n; ++i) y0(i) = xbest(free[static_cast<std::size_t>(i)]);
    auto fy = [&](const Vector& y) { return smoothed(embed(y)); };

    // Nelder-Mead from the incumbent.
    std::vector<Vector> simplex{y0};
    for (int i = 0; i < n; ++i) {
      Vector y = y0;
      y(i) += free[static_cast<std::size_t>(i)] < 6 ? step : 0.2 * step;
      simplex.push_back(y);
    }
    std::vector<double> fv;
    for (auto& y : simplex) fv.push_back(fy(y));
    auto sort_simplex = [&] {
      std::vector<std::size_t> id(simplex.size());
      std::iota(id.begin(), id.end(), 0);
      std::sort(id.begin(), id.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
      std::vector<Vector> s2;
      std::vector<double> f2;
      for (auto i : id) { s2.push_back(simplex[i]); f2.push_back(fv[i]); }
      simplex = std::move(s2);
      fv = std::move(f2);
    };
    const std::size_t nm_end = evals + (stage_end - evals) * 3 / 4;
    while (evals + static_cast<std::size_t>(n) + 2 < nm_end) {
      sort_simplex();
      if (fv.back() - fv.front() <= 1e-7 * std::max(1e-12, std::abs(fv.front()))) break;
      Vector c = Vector::Zero(n);
      for (int i = 0; i < n; ++i) c += simplex[static_cast<std::size_t>(i)];
      c /= n;
      const Vector xr = c + (c - simplex.back());
      const double fr = fy(xr);
      if (fr < fv.front()) {
        const Vector xe = c + 2.0 * (c - simplex.back());
        const double fe = fy(xe);
        if (fe < fr) { simplex.back() = xe; fv.back() = fe; }
        else { simplex.back() = xr; fv.back() = fr; }
      } else if (fr < fv[fv.size() - 2]) {
        simplex.back() = xr;
        fv.back() = fr;
      } else {
        const bool outside = fr < fv.back();
        const Vector xc = outside ? Vector(c + 0.5 * (xr - c)) : Vector(c + 0.5 * (simplex.back() - c));
        const double fc = fy(xc);
        if (fc < std::min(fr, fv.back())) {
          simplex.back() = xc;
          fv.back() = fc;
        } else {
          for (std::size_t i = 1; i < simplex.size(); ++i) {
            simplex[i] = simplex.front() + 0.5 * (simplex[i] - simplex.front());
            fv[i] = fy(simplex[i]);
          }
        }
      }
    }
    sort_simplex();
    // Coordinate polish.
    Vector y = simplex.front();
    double fcur = fv.front(), h = 0.25 * step;
    while (evals + 2 <= stage_end && h > 1e-5) {
      bool moved = false;
      for (int i = 0; i < n && evals + 2 <= stage_end; ++i)
        for (double sg : {1.0, -1.0}) {
          Vector t = y;
          t(i) += sg * h;
          const double ft = fy(t);
          if (ft < fcur) { y = t; fcur = ft; moved = true; break; }
        }
      if (!moved) h *= 0.5;
    }
    // Verify on every pair; accept only stable improvements.
    const Vec x = embed(y);
    const Gain36 K = gc.gain(x);
    const auto pk = full(K);
    ++evals;
    const double g = *std::max_element(pk.begin(), pk.end());
    std::vector<std::size_t> check = nominal_pairs;
    if (g < best_true) {
      for (std::size_t i = 0; i < pairs.size(); ++i)
        if (!pairs[i].nominal && pk[i] >= 0.5 * g) check.push_back(i);
    }
    const auto bad = g < best_true ? unstable_on(check, K) : std::vector<std::size_t>{};
    if (g < best_true && bad.empty()) {
      const double rel = (best_true - g) / best_true;
      best_true = g;
      xbest = x;
      Kbest = K;
      refresh(pk, {});
      if (rel < 1e-3) step *= 0.5;
    } else {
      // cutting plane: the rejected candidate's peaks join the active set
      step *= 0.5;
      auto cut = peaks_of(pk, 0.7 * best_true);
      if (cut.size() > 500) {
        std::stable_sort(cut.begin(), cut.end(),
                         [&](auto& a, auto& b) { return curves[a.pair][a.index] > curves[b.pair][b.index]; });
        cut.resize(500);
      }
      for (std::size_t k = 0; k < bad.size() && sticky.size() < 16; ++k) sticky.push_back(bad[k]);
      refresh(full(Kbest), std::move(cut));
    }
#ifdef OOS_SYNTH_TRACE
    std::fprintf(stderr, "stage evals %zu full %d step %g gamma %g cand %g active %zu\n", evals, int(full_space), step,
                 best_true, g, active.size());
#endif
    tau = std::max(0.5 * tau, 1e-4 * best_true);
    if (!full_space && (step < 0.05 || evals > opt.budget * 2 / 5)) {
      full_space = true;
      step = 0.5;
    } else if (full_space && step < 1e-4) {
      converged = true;
      break;
    }
  }
  res.evaluations = evals;
  res.budget_exhausted = !converged && opt.budget > 0 && evals >= opt.budget;

  // Exact closed-loop norms; unstable loops count as infinite.
  auto exact = [&](const ControllerGains& g, std::vector<double>& worst, std::vector<double>& nom) {
    std::vector<double> v(pairs.size(), 0.0);
    parallel_for(pairs.size(), [&](std::size_t i) {
      try {
        v[i] = hinf_norm(design_loop(pairs[i].G3, frame, g), opt.hinf).gamma;
      } catch (const Error& e) {
        if (e.code() != Errc::unstable_model) throw;
        v[i] = std::numeric_limits<double>::infinity();
      }
    });
    worst.assign(plants.size(), 0.0);
    nom.assign(plants.size(), 0.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      worst[pairs[i].model] = std::max(worst[pairs[i].model], v[i]);
      if (pairs[i].nominal) nom[pairs[i].model] = v[i];
    }
  };
  std::vector<double> w0, n0;
  exact(K0, w0, n0);
  res.model_gamma_initial = w0;
  res.gamma_initial = *std::max_element(w0.begin(), w0.end());
  res.gamma_initial_nominal = *std::max_element(n0.begin(), n0.end());
  res.gains.K = Kbest;
  if (opt.budget > 0) {
    exact(res.gains, res.model_gamma, res.model_gamma_nominal);
    res.gamma = *std::max_element(res.model_gamma.begin(), res.model_gamma.end());
    res.gamma_nominal = *std::max_element(res.model_gamma_nominal.begin(), res.model_gamma_nominal.end());
  }
  if (opt.budget == 0 || !(res.gamma <= res.gamma_initial)) {
    res.gains = K0;
    res.model_gamma = w0;
    res.model_gamma_nominal = n0;
    res.gamma = res.gamma_initial;
    res.gamma_nominal = res.gamma_initial_nominal;
  }
  return res;
}

}  // namespace oos
