#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oos/analysis.hpp"

using namespace oos;

namespace {

CMatrix random_complex(Index n, Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  CMatrix M(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) M(i, j) = Complex(d(rng), d(rng));
  return M;
}

double singular_gap(const CMatrix& M, const CMatrix& D) {
  const CMatrix A = CMatrix::Identity(M.rows(), M.rows()) - M * D;
  Eigen::JacobiSVD<CMatrix> s(A);
  return s.singularValues().minCoeff();
}

// Block-diagonal check of a witness: zero off-block entries, real scalars
// real and repeated, and the norm of every block at most 1/bound.
void expect_admissible(const CMatrix& D, const std::vector<UncertaintyBlock>& st, double bound, bool real) {
  Index zo = 0, wo = 0;
  CMatrix rest = D;
  for (auto& b : st) {
    const CMatrix blk = D.block(wo, zo, b.rows, b.cols);
    EXPECT_LE(sigma_max(blk), 1.0 / bound * (1.0 + 1e-9));
    if (b.kind == BlockKind::real_scalar) {
      EXPECT_LT((blk - blk(0, 0) * CMatrix::Identity(b.rows, b.cols)).norm(), 1e-12);
      if (real) EXPECT_LT(std::abs(blk(0, 0).imag()), 1e-12);
    }
    rest.block(wo, zo, b.rows, b.cols).setZero();
    zo += b.cols;
    wo += b.rows;
  }
  EXPECT_EQ(rest.norm(), 0.0);
}

// Static LFR e = (1 + k delta) d with one scalar block; z = d, e = k w + d.
LfrModel scalar_perf_loop(double k, BlockKind kind) {
  auto b = kind == BlockKind::real_scalar ? scalar_block("p", 1) : full_block("p", 1, 1);
  Matrix D(2, 2);
  D << 0.0, 1.0, k, 1.0;
  auto g = StateSpaceModel::gain(D, {b.w_label(0), "d"}, {b.z_label(0), "e"});
  return make_lfr(g, {b}, {{"disturbance", {"d"}}});
}

}  // namespace

TEST(MuUpper, ZeroAndSingleFullBlock) {
  std::mt19937_64 rng(1);
  const auto st = std::vector<UncertaintyBlock>{full_block("a", 3, 4)};
  EXPECT_EQ(mu_upper(CMatrix::Zero(4, 3), st), 0.0);
  const CMatrix M = random_complex(4, 3, rng);
  EXPECT_NEAR(mu_upper(M, st), sigma_max(M), 1e-12);
  EXPECT_NEAR(mu_lower(M, st).bound, sigma_max(M), 1e-9);
}

TEST(MuUpper, OffDiagonalPairIsGeometricMean) {
  // mu of [[0, a], [b, 0]] over two scalars is sqrt(|ab|) for complex and real
  CMatrix M(2, 2);
  M << 0.0, 8.0, 0.5, 0.0;
  for (bool mixed : {false, true}) {
    std::vector<UncertaintyBlock> st{scalar_block("x", 1), scalar_block("y", 1)};
    MuUpperOptions o;
    o.mixed = mixed;
    EXPECT_NEAR(mu_upper(M, st, o), 2.0, 1e-6);
    MuLowerOptions l;
    l.real_blocks = mixed;
    const auto r = mu_lower(M, st, l);
    EXPECT_NEAR(r.bound, 2.0, 1e-6);
    EXPECT_LT(singular_gap(M, r.delta), 1e-8);
    expect_admissible(r.delta, st, r.bound, mixed);
  }
}

TEST(MuUpper, RankOneComplexScalars) {
  // mu of u v^H over complex scalars is sum |u_i| |v_i|
  std::mt19937_64 rng(2);
  const CMatrix u = random_complex(4, 1, rng), v = random_complex(4, 1, rng);
  const CMatrix M = u * v.adjoint();
  std::vector<UncertaintyBlock> st;
  double exact = 0.0;
  for (int i = 0; i < 4; ++i) {
    st.push_back(full_block("b" + std::to_string(i), 1, 1));
    exact += std::abs(u(i)) * std::abs(v(i));
  }
  EXPECT_NEAR(mu_upper(M, st), exact, 1e-5 * exact);
  const auto r = mu_lower(M, st);
  EXPECT_NEAR(r.bound, exact, 1e-6 * exact);
  EXPECT_LT(singular_gap(M, r.delta), 1e-8);
}

TEST(MuUpper, RepeatedRealScalarSeesOnlyRealEigenvalues) {
  // delta I with delta real: det(I - delta M) = 0 needs a real eigenvalue of M,
  // so mu = 0.5 although the spectral radius is 3
  std::mt19937_64 rng(5);
  const CMatrix V = random_complex(2, 2, rng);
  CMatrix L = CMatrix::Zero(2, 2);
  L(0, 0) = 0.5;
  L(1, 1) = Complex(0.0, 3.0);
  const CMatrix M = V * L * V.inverse();
  const std::vector<UncertaintyBlock> st{scalar_block("r", 2)};
  MuUpperOptions mixed;
  mixed.mixed = true;
  EXPECT_NEAR(mu_upper(M, st, mixed), 0.5, 1e-3);
  EXPECT_GT(mu_upper(M, st), 2.9);  // as a complex repeated scalar
  MuLowerOptions lo;
  lo.real_blocks = true;
  const auto r = mu_lower(M, st, lo);
  EXPECT_NEAR(r.bound, 0.5, 1e-6);
  EXPECT_LT(singular_gap(M, r.delta), 1e-8);
  expect_admissible(r.delta, st, r.bound, true);
}

TEST(MuBounds, OrderedOnRandomMatrices) {
  std::mt19937_64 rng(5);
  const std::vector<UncertaintyBlock> st{scalar_block("r", 2), full_block("f", 2, 2), scalar_block("s", 1)};
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix M = random_complex(5, 5, rng);
    MuUpperOptions c, m;
    m.mixed = true;
    const double uc = mu_upper(M, st, c), um = mu_upper(M, st, m);
    MuLowerOptions lc, lr;
    lr.real_blocks = true;
    const auto wc = mu_lower(M, st, lc), wr = mu_lower(M, st, lr);
    EXPECT_LE(um, uc * (1.0 + 1e-9));
    EXPECT_LE(uc, sigma_max(M) * (1.0 + 1e-9));
    EXPECT_LE(wc.bound, uc * (1.0 + 1e-6));
    EXPECT_LE(wr.bound, um * (1.0 + 1e-6));
    if (wc.bound > 0.0) {
      EXPECT_LT(singular_gap(M, wc.delta), 1e-8);
      expect_admissible(wc.delta, st, wc.bound, false);
    }
    if (wr.bound > 0.0) {
      EXPECT_LT(singular_gap(M, wr.delta), 1e-8);
      expect_admissible(wr.delta, st, wr.bound, true);
    }
  }
}

TEST(MuBounds, SubsetNeverExceedsFullStructure) {
  std::mt19937_64 rng(9);
  const auto b1 = scalar_block("a", 2), b2 = full_block("b", 2, 2);
  // dynamic LFR: one state driving both blocks
  Matrix A(1, 1), B = Matrix::Zero(1, 5), C = Matrix::Zero(5, 1), D = Matrix::Zero(5, 5);
  A << -1.0;
  std::normal_distribution<double> n(0.0, 1.0);
  for (Index i = 0; i < 4; ++i) { B(0, i) = n(rng); C(i, 0) = n(rng); }
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) D(i, j) = 0.3 * n(rng);
  Labels in = concat({b1.w_labels(), b2.w_labels(), {"d"}}), out = concat({b1.z_labels(), b2.z_labels(), {"e"}});
  const auto loop = make_lfr(StateSpaceModel(A, B, C, D, in, out), {b1, b2});
  const std::vector<double> w{0.1, 1.0, 10.0};
  MuOptions all, sub;
  sub.subset = {"b"};
  const auto ra = mu_sweep(loop, w, all), rs = mu_sweep(loop, w, sub);
  ASSERT_EQ(rs.structure.size(), 1u);
  for (std::size_t k = 0; k < w.size(); ++k) {
    EXPECT_LE(rs.upper[k], ra.upper[k] * (1.0 + 1e-6));
    EXPECT_LE(ra.lower[k], ra.upper[k] * (1.0 + 1e-9));
  }
  sub.subset = {"nope"};
  try {
    mu_sweep(loop, w, sub);
    FAIL() << "expected UnknownBlock";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_block);
  }
}

TEST(Sweeps, UnstableLoopRejected) {
  const auto b = scalar_block("a", 1);
  Matrix A(1, 1), B(1, 1), C(1, 1), D(1, 1);
  A << 0.5;
  B << 1.0;
  C << 1.0;
  D << 0.0;
  const auto loop = make_lfr(StateSpaceModel(A, B, C, D, b.w_labels(), b.z_labels()), {b});
  try {
    robust_stability_sweep({loop}, {1.0});
    FAIL() << "expected NominalUnstable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::nominal_unstable);
  }
}

TEST(WorstCase, ScalarPerturbationOfUnitGain) {
  // |1 + k delta| peaks at 1 + k for complex and real delta
  for (auto kind : {BlockKind::real_scalar, BlockKind::complex_full}) {
    MuOptions o;
    o.mixed = kind == BlockKind::real_scalar;
    const auto r = worst_case_gain({scalar_perf_loop(0.3, kind)}, {"e"}, {1.0}, o, 1e-6);
    EXPECT_NEAR(r.nominal[0], 1.0, 1e-12);
    EXPECT_NEAR(r.bound[0], 1.3, 1e-4);
  }
  // no coupling into performance: worst case is the nominal gain
  const auto r0 = worst_case_gain({scalar_perf_loop(0.0, BlockKind::complex_full)}, {"e"}, {1.0}, {}, 1e-6);
  EXPECT_NEAR(r0.bound[0], 1.0, 1e-5);
  // uncertainty that destabilizes (loop gain >= 1) has no finite bound
  auto b = full_block("p", 1, 1);
  Matrix D(2, 2);
  D << 2.0, 1.0, 1.0, 1.0;
  const auto bad = make_lfr(StateSpaceModel::gain(D, {b.w_label(0), "d"}, {b.z_label(0), "e"}), {b},
                            {{"disturbance", {"d"}}});
  EXPECT_TRUE(std::isinf(worst_case_gain({bad}, {"e"}, {1.0}).bound[0]));
}

TEST(Augmentation, NominalRecoveryAndMultiplicativeScale) {
  Matrix3 Jinv = Matrix3::Identity() / 400.0;
  Jinv(0, 1) = Jinv(1, 0) = 1e-4;
  const auto g = StateSpaceModel::gain(Jinv, torque_inputs(), angular_accel_outputs());
  const auto plant = make_lfr(g, {}, {{"torque", torque_inputs()}, {"angular_accel", angular_accel_outputs()}});
  const AugmentedUncertainty a;
  const auto aug = augment_uncertainty(plant, a);
  ASSERT_EQ(aug.blocks.size(), 10u);
  EXPECT_EQ(aug.blocks[0].name, "aug.add");
  EXPECT_EQ(aug.w_size(), 12);
  EXPECT_EQ(aug.z_size(), 12);
  const auto n = select(nominal(aug), torque_inputs(), angular_accel_outputs());
  EXPECT_LT((n.D() - Jinv).norm(), 1e-15);

  // all diagonal multiplicative scalars at +1: torque scaled by 1 + 0.04
  std::vector<Index> wi, zi;
  for (Index i = 0; i < 12; ++i) { wi.push_back(i); zi.push_back(i); }
  Matrix Dl = Matrix::Zero(12, 12);
  for (Index i = 3; i < 6; ++i) Dl(i, i) = 1.0;
  const auto scaled = select(close_static(aug.core, wi, zi, Dl), torque_inputs(), angular_accel_outputs());
  EXPECT_LT((scaled.D() - 1.04 * Jinv).norm(), 1e-15);

  // additive block at identity adds the -75 dB weight
  Matrix Da = Matrix::Zero(12, 12);
  Da.topLeftCorner(3, 3).setIdentity();
  const auto added = select(close_static(aug.core, wi, zi, Da), torque_inputs(), angular_accel_outputs());
  EXPECT_LT((added.D() - Jinv - db_to_gain(-75.0) * Matrix::Identity(3, 3)).norm(), 1e-15);

  // off-diagonal scalar xy couples torque y into torque x
  Matrix Do = Matrix::Zero(12, 12);
  Do(6, 6) = 1.0;
  const auto off = select(close_static(aug.core, wi, zi, Do), torque_inputs(), angular_accel_outputs());
  Matrix3 Tm = Matrix3::Identity();
  Tm(0, 1) = 4e-3;
  EXPECT_LT((off.D() - Jinv * Tm).norm(), 1e-15);
}

TEST(FrequencyGrid, DensifiedAroundModes) {
  const auto g = mu_frequency_grid({0.65, 3.0}, 1e-2, 1e2, 20, 5, 0.3);
  EXPECT_NEAR(g.front(), kTwoPi * 1e-2, 1e-12);
  EXPECT_NEAR(g.back(), kTwoPi * 1e2, 1e-9);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  auto count = [&](double a, double b) {
    return std::count_if(g.begin(), g.end(), [&](double w) { return w >= kTwoPi * a && w <= kTwoPi * b; });
  };
  // same log width, densified band has about 5x more points
  EXPECT_GT(count(0.6, 0.7), 3 * count(20.0, 23.33));
}
