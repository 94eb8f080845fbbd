#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oos/synthesis.hpp"

using namespace oos;

namespace {

double mag(const StateSpaceModel& g, double w) { return std::abs(FrequencyEvaluator(g)(Complex(0.0, w))(0, 0)); }

// Rigid single-axis stand-in for the plant: torque -> angular acceleration = J^-1.
LfrModel rigid_plant(const Matrix3& J) {
  auto g = StateSpaceModel::gain(J.inverse(), torque_inputs(), angular_accel_outputs());
  return make_lfr(g, {}, {{"torque", torque_inputs()}, {"angular_accel", angular_accel_outputs()}});
}

const MissionConfig& mission() {
  static const MissionConfig c = load_mission(default_mission_path());
  return c;
}

}  // namespace

TEST(Baseline, IdentityInertia) {
  const auto g = baseline_controller(Matrix3::Identity(), 1.0, 0.01);
  EXPECT_NEAR(g.K(0, 0), 3.9478e-3, 1e-7);
  EXPECT_NEAR(g.K(1, 4), 0.12566, 1e-5);
  EXPECT_NEAR(g.K(0, 1), 0.0, 0.0);
  EXPECT_TRUE(g.k_att().isApprox(std::pow(2 * M_PI * 0.01, 2) * Matrix::Identity(3, 3), 1e-14));
}

TEST(Baseline, LinearInInertiaAndRejectsIndefinite) {
  Matrix3 J;
  J << 539.1, 3.72, 8.52, 3.72, 80.13, 0.327, 8.52, 0.327, 546.8;
  const auto a = baseline_controller(J), b = baseline_controller(2.0 * J);
  EXPECT_TRUE(b.K.isApprox(2.0 * a.K, 1e-14));
  Matrix3 bad = Matrix3::Identity();
  bad(2, 2) = -1.0;
  EXPECT_THROW(baseline_controller(bad), Error);
  try {
    baseline_controller(bad);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_pd_inertia);
  }
}

TEST(Baseline, RigidAxisStepHasNoOvershoot) {
  // J phi'' = -k phi - c phi' + k r, integrated with small steps
  const auto g = baseline_controller(Matrix3::Identity() * 300.0);
  const double J = 300.0, k = g.K(0, 0), c = g.K(0, 3);
  double phi = 0.0, rate = 0.0, peak = 0.0;
  const double dt = 0.05;
  for (int i = 0; i < 40000; ++i) {  // 2000 s
    const double acc = (k * (1.0 - phi) - c * rate) / J;
    rate += dt * acc;
    phi += dt * rate;
    peak = std::max(peak, phi);
  }
  EXPECT_LE(peak, 1.0 + 1e-6);
  EXPECT_NEAR(phi, 1.0, 1e-3);
}

TEST(Filters, ButterworthHalfPowerAndSlope) {
  const auto f = butterworth_rolloff(4, 1.0 / (2 * M_PI));
  EXPECT_EQ(f.states(), 4);
  EXPECT_NEAR(mag(f, 1.0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(dc_gain(f)(0, 0), 1.0, 1e-12);
  const double slope = 20.0 * std::log10(mag(f, 1000.0) / mag(f, 100.0));
  EXPECT_NEAR(slope, -80.0, 0.02 * 80.0);
  // poles on the Butterworth circle
  Eigen::EigenSolver<Matrix> es(f.A());
  for (Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(std::abs(es.eigenvalues()(i)), 1.0, 1e-12);
    const double ang = std::abs(std::arg(es.eigenvalues()(i)));
    EXPECT_TRUE(std::abs(ang - 5 * M_PI / 8) < 1e-9 || std::abs(ang - 7 * M_PI / 8) < 1e-9);
  }
}

TEST(Filters, OddOrderAndFirstOrderReuse) {
  const auto a = butterworth_rolloff(1, 8.0), b = first_order_lowpass(8.0);
  for (double w : {1.0, 50.27, 300.0})
    EXPECT_NEAR(mag(a, w), mag(b, w), 1e-14);
  const auto f3 = butterworth_rolloff(3, 2.0);
  EXPECT_NEAR(mag(f3, 2 * M_PI * 2.0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_THROW(butterworth_rolloff(0, 1.0), Error);
  const auto rw = second_order_lowpass(0.7, 200.0);
  EXPECT_NEAR(dc_gain(rw)(0, 0), 1.0, 1e-12);
}

TEST(Interconnection, ChannelCountsAndGroups) {
  const auto& c = mission();
  const auto P = build_design_interconnection(rigid_plant(Matrix3::Identity() * 400.0), c.weights, c.sensors);
  EXPECT_EQ(P.group("disturbance").size(), 12u);
  EXPECT_EQ(P.group("performance").size(), 6u);
  EXPECT_EQ(P.group("measurement").size(), 6u);
  EXPECT_EQ(P.group("control").size(), 3u);
  EXPECT_EQ(P.core.num_inputs(), 15);
  EXPECT_EQ(P.core.num_outputs(), 12);
  LfrModel bare{StateSpaceModel::gain(Matrix::Identity(3, 3), torque_inputs(), angular_accel_outputs()), {}, {}};
  try {
    build_design_interconnection(bare, c.weights, c.sensors);
    FAIL() << "expected MissingChannels";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_channels);
  }
}

TEST(Interconnection, ActuatorWeightEncodesTorqueBound) {
  // 2 N m of wheel torque at low frequency gives |e_u| = 1.
  const auto& c = mission();
  DesignFrame fr(c.weights, c.sensors);
  const auto g = select(fr.model(), {"u.y"}, {"e.act.y", "plant.T.y"});
  // the frame's integrators make s = 0 singular; far below the 0.7 Hz roll-off
  const Matrix dc = FrequencyEvaluator(g)(Complex(0.0, 1e-4)).cwiseAbs();
  EXPECT_NEAR(2.0 * dc(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(dc(1, 0), 1.0, 1e-9);
}

TEST(Interconnection, ZeroControllerZeroDisturbance) {
  const auto& c = mission();
  const auto P = build_design_interconnection(rigid_plant(Matrix3::Identity() * 400.0), c.weights, c.sensors);
  const auto cl = lft_lower(P, gain_model(ControllerGains{}));
  // linear and strictly proper in the noise channels: zero input, zero state -> zero output
  Vector x = Vector::Zero(cl.core.states()), d = Vector::Zero(12);
  EXPECT_EQ((cl.core.C() * x + cl.core.D() * d).norm(), 0.0);
}

TEST(FastEvaluator, MatchesAssembledLoop) {
  const auto& c = mission();
  const auto tr = mission_trajectory(c);
  const auto sym = assemble_plant(c, PlantMode::switched, {true, {}, {}});
  DesignFrame fr(c.weights, c.sensors);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double t : {100.0, 600.0, 1300.0}) {
    const auto m = plant_at(sym, pose_at(tr, t), phase_at(c, t), true);
    ParamSample s;
    for (auto& p : m.parameters()) s[p] = 0.5;
    const auto G3 = attitude_channel(m, s);
    ControllerGains K;
    for (Index i = 0; i < 18; ++i) K.K(i / 6, i % 6) = (i % 6 < 3 ? 5.0 : 60.0) * n(rng);
    const auto loop = design_loop(G3, fr, K);
    // same loop through the generic LFR path
    const auto via_lfr = lft_upper(lft_lower(build_design_interconnection(m, fr), gain_model(K)), s);
    FrequencyEvaluator e1(G3), e2(loop), e3(via_lfr);
    const Eigen::Matrix<double, 3, 6> Kf = K.K;
    for (double w : {1e-3, 0.05, 0.7, 4.1, 30.0}) {
      const design::C3 G = e1(Complex(0.0, w));
      const CMatrix fast = design::closed_loop_response(G, w, fr.shapes(w), c.weights, Kf);
      const CMatrix ref = e2(Complex(0.0, w));
      EXPECT_LT((fast - ref).norm(), 1e-8 * ref.norm()) << "t=" << t << " w=" << w;
      EXPECT_LT((e3(Complex(0.0, w)) - ref).norm(), 1e-8 * ref.norm());
    }
  }
}

TEST(Synthesize, ToyProblemStrictlyImproves) {
  const auto& c = mission();
  Matrix3 J = Matrix3::Identity() * 300.0;
  J(1, 1) = 120.0;
  DesignFrame fr(c.weights, c.sensors);
  const std::vector<LfrModel> grid{rigid_plant(J), rigid_plant(1.2 * J)};
  const auto K0 = baseline_controller(J);
  SynthesisOptions o;
  o.budget = 1500;
  const auto r = synthesize(grid, fr, K0, o);
  EXPECT_LT(r.gamma, r.gamma_initial);
  EXPECT_LT(r.gamma, 1.0);
  EXPECT_GT(r.gamma_initial, 1.0);
  // reported gamma is the exact norm of the assembled loops
  double g = 0.0;
  for (auto& p : grid) {
    const auto loop = lft_lower(build_design_interconnection(p, fr), gain_model(r.gains)).core;
    EXPECT_LT(spectral_abscissa(loop.A()), 0.0);
    g = std::max(g, hinf_norm(loop, o.hinf).gamma);
  }
  EXPECT_NEAR(g, r.gamma, 1e-6 * r.gamma);
  EXPECT_EQ(r.model_gamma.size(), 2u);
}

TEST(Synthesize, ZeroBudgetReturnsBaselineAndChecksStability) {
  const auto& c = mission();
  DesignFrame fr(c.weights, c.sensors);
  const Matrix3 J = Matrix3::Identity() * 300.0;
  const auto K0 = baseline_controller(J);
  SynthesisOptions o;
  o.budget = 0;
  const auto r = synthesize({rigid_plant(J)}, fr, K0, o);
  EXPECT_TRUE(r.gains.K.isApprox(K0.K, 0.0));
  EXPECT_DOUBLE_EQ(r.gamma, r.gamma_initial);
  ControllerGains bad = K0;
  bad.K *= -1.0;
  try {
    synthesize({rigid_plant(J)}, fr, bad, o);
    FAIL() << "expected InitialGainsUnstable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::initial_gains_unstable);
  }
}
