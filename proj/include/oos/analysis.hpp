#pragma once
// Structured singular value bounds and the robustness experiments built on
// them: mission stability surfaces, worst-case gains, docking-stiffness sweep
// and sampled sensitivity overlays.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oos/error.hpp"
#include "oos/parallel.hpp"
#include "oos/scenario.hpp"
#include "oos/sslft.hpp"
#include "oos/synthesis.hpp"

namespace oos {

inline double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }

// ---------------------------------------------------------------------------
// Unmodelled dynamics and actuator uncertainty

struct AugmentedUncertainty {
  double w_add = db_to_gain(-75.0);
  double w_mul_left = 4e-2;   // diagonal scalars
  double w_mul_right = 4e-3;  // off-diagonal scalars

  static AugmentedUncertainty from(const AugmentationData& a) {
    return {db_to_gain(a.w_add_db), a.w_mul_diag, a.w_mul_offdiag};
  }
};

// P^ = P + W_add D_add on the torque -> angular-acceleration channel and
// T^ = (I + W_mulL D_mulL + W_mulR D_mulR) T on the torque input.  New blocks
// follow the plant's in the order add, mulL (x, y, z), mulR (xy, xz, yx, yz,
// zx, zy).
inline LfrModel augment_uncertainty(const LfrModel& plant, const AugmentedUncertainty& a) {
  detail::check_plant_channels(plant);
  const Labels& T = plant.group("torque");
  const Labels& Wd = plant.group("angular_accel");
  const Labels Ti = design::axes("aug.T"), Wi = design::axes("aug.wdot"), Zi = design::axes("aug.zadd");

  Labels pin = plant.core.inputs(), pout = plant.core.outputs();
  for (std::size_t k = 0; k < 3; ++k) {
    *std::find(pin.begin(), pin.end(), T[k]) = Ti[k];
    *std::find(pout.begin(), pout.end(), Wd[k]) = Wi[k];
  }
  const LfrModel p{relabel(plant.core, pin, pout), plant.blocks, {}};

  const auto add = full_block("aug.add", 3, 3);
  std::vector<UncertaintyBlock> mul;
  const std::string ax = "xyz";
  for (int i = 0; i < 3; ++i) mul.push_back(full_block("aug.mulL." + ax.substr(i, 1), 1, 1));
  std::vector<std::pair<int, int>> off;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) {
        off.push_back({i, j});
        mul.push_back(full_block("aug.mulR." + ax.substr(i, 1) + ax.substr(j, 1), 1, 1));
      }

  // [w_add; aug.wdot; aug.zadd] -> [z_add; angular acceleration]
  Matrix Ad = Matrix::Zero(6, 9);
  Ad.block(0, 6, 3, 3).setIdentity();
  Ad.block(3, 0, 3, 3) = a.w_add * Matrix::Identity(3, 3);
  Ad.block(3, 3, 3, 3).setIdentity();
  const auto addpart = make_lfr(StateSpaceModel::gain(Ad, concat({add.w_labels(), Wi, Zi}), concat({add.z_labels(), Wd})),
                                {add});

  // [w_mul; T] -> [z_mul; aug.T; aug.zadd], T^ = T + W w_mul, z_mul picks T
  Labels mw, mz;
  for (auto& b : mul) {
    mw.push_back(b.w_label(0));
    mz.push_back(b.z_label(0));
  }
  Matrix Mm = Matrix::Zero(9 + 6, 9 + 3);
  for (int i = 0; i < 3; ++i) Mm(i, 9 + i) = 1.0;
  for (std::size_t k = 0; k < off.size(); ++k) Mm(3 + static_cast<Index>(k), 9 + off[k].second) = 1.0;
  Matrix That = Matrix::Zero(3, 12);
  That.rightCols(3).setIdentity();
  for (int i = 0; i < 3; ++i) That(i, i) = a.w_mul_left;
  for (std::size_t k = 0; k < off.size(); ++k) That(off[k].first, 3 + static_cast<Index>(k)) = a.w_mul_right;
  Mm.middleRows(9, 3) = That;
  Mm.bottomRows(3) = That;
  const auto mulpart = make_lfr(StateSpaceModel::gain(Mm, concat({mw, T}), concat({mz, Ti, Zi})), mul);

  std::vector<Wire> wires;
  for (std::size_t k = 0; k < 3; ++k) {
    wires.push_back({Ti[k], Ti[k]});
    wires.push_back({Wi[k], Wi[k]});
    wires.push_back({Zi[k], Zi[k]});
  }
  Labels ein, eout;
  for (auto& l : plant.core.inputs())
    if (l.rfind("delta.", 0) != 0) ein.push_back(l);
  for (auto& l : plant.core.outputs())
    if (l.rfind("delta.", 0) != 0) eout.push_back(l);
  return connect_lfr({p, addpart, mulpart}, wires, ein, eout, plant.groups);
}

// ---------------------------------------------------------------------------
// Structured singular value

namespace detail {

// Scaling slot: one D (and, for real channels, G) entry group.
struct MuSlot {
  std::vector<Index> z, w;  // rows / columns of M
  bool real = false;
};

inline std::vector<MuSlot> mu_slots(const std::vector<UncertaintyBlock>& s, Index nz, Index nw) {
  std::vector<MuSlot> out;
  Index zo = 0, wo = 0;
  for (auto& b : s) {
    if (b.kind == BlockKind::real_scalar) {
      for (Index k = 0; k < b.rows; ++k) out.push_back({{zo + k}, {wo + k}, true});
    } else {
      MuSlot sl;
      for (Index k = 0; k < b.cols; ++k) sl.z.push_back(zo + k);
      for (Index k = 0; k < b.rows; ++k) sl.w.push_back(wo + k);
      out.push_back(sl);
    }
    zo += b.cols;
    wo += b.rows;
  }
  if (zo != nz || wo != nw) throw Error(Errc::dimension_mismatch, "matrix does not match the uncertainty structure");
  return out;
}

// Quasi-Newton minimization with a weak Wolfe line search (bracketing and
// bisection), which keeps BFGS effective on nonsmooth max-eigenvalue
// objectives; f returns value and gradient.
inline Vector bfgs(const std::function<double(const Vector&, Vector&)>& f, Vector x, int iters, double tol) {
  const Index n = x.size();
  if (n == 0) return x;
  Vector g(n), gn(n);
  double fx = f(x, g);
  Matrix H = Matrix::Identity(n, n);
  for (int it = 0; it < iters; ++it) {
    Vector p = -H * g;
    if (p.dot(g) >= 0.0) { H.setIdentity(); p = -g; }
    const double slope = p.dot(g);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), t = 1.0, fn = 0.0;
    Vector xn;
    bool ok = false;
    for (int ls = 0; ls < 50; ++ls) {
      xn = x + t * p;
      fn = f(xn, gn);
      if (!std::isfinite(fn) || fn > fx + 1e-4 * t * slope) {
        hi = t;
      } else if (gn.dot(p) < 0.9 * slope) {
        lo = t;
      } else {
        ok = true;
        break;
      }
      t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
    }
    if (!ok) {
      // no Wolfe point: accept the best sufficient-decrease point, if any
      if (lo == 0.0) break;
      xn = x + lo * p;
      fn = f(xn, gn);
    }
    const Vector sv = xn - x, yv = gn - g;
    const double sy = sv.dot(yv);
    const double drop = fx - fn;
    x = xn;
    g = gn;
    fx = fn;
    if (sy > 1e-14 * sv.norm() * yv.norm()) {
      const double r = 1.0 / sy;
      const Matrix I = Matrix::Identity(n, n);
      H = (I - r * sv * yv.transpose()) * H * (I - r * yv * sv.transpose()) + r * sv * sv.transpose();
    }
    if (drop <= tol * std::max(1.0, std::abs(fx))) break;
  }
  return x;
}

// sigma_max(Dz M Dw^-1) and its gradient in the log scalings (slot 0 fixed).
inline double dscaled_sigma(const CMatrix& M, const std::vector<MuSlot>& sl, const Vector& p, Vector& grad) {
  Vector dz = Vector::Zero(M.rows()), dw = Vector::Zero(M.cols());
  for (std::size_t i = 1; i < sl.size(); ++i) {
    for (auto r : sl[i].z) dz(r) = p(static_cast<Index>(i) - 1);
    for (auto c : sl[i].w) dw(c) = p(static_cast<Index>(i) - 1);
  }
  const CMatrix S = dz.array().exp().matrix().asDiagonal() * M * dw.array().exp().inverse().matrix().asDiagonal();
  // top singular pair from the Hermitian eigenproblem of S^H S (much cheaper than an SVD)
  Eigen::SelfAdjointEigenSolver<CMatrix> es(S.adjoint() * S);
  const Index top = S.cols() - 1;
  const double s = std::sqrt(std::max(0.0, es.eigenvalues()(top)));
  const CVector v = es.eigenvectors().col(top);
  const CVector u = s > 0.0 ? CVector(S * v / s) : CVector(CVector::Zero(S.rows()));
  grad.setZero(p.size());
  for (std::size_t i = 1; i < sl.size(); ++i) {
    double g = 0.0;
    for (auto r : sl[i].z) g += std::norm(u(r));
    for (auto c : sl[i].w) g -= std::norm(v(c));
    grad(static_cast<Index>(i) - 1) = s * g;
  }
  return s;
}

// D,G scaling group for the mixed bound.  Repeated real scalars with few
// repetitions get full Hermitian D and G blocks (D = L L^H, L lower triangular
// with positive diagonal); others get one scalar d (and g for real channels).
struct DgGroup {
  std::vector<Index> z, w;
  bool real = false;
  Index d_offset = 0, g_offset = 0;
  Index size() const { return static_cast<Index>(z.size()); }
  bool full() const { return real && z.size() > 1; }
};

inline std::vector<DgGroup> dg_groups(const std::vector<UncertaintyBlock>& s, Index& nparams) {
  constexpr Index kFullLimit = 4;
  std::vector<DgGroup> out;
  Index zo = 0, wo = 0;
  for (auto& b : s) {
    if (b.kind == BlockKind::real_scalar) {
      const Index k = b.rows;
      if (k <= kFullLimit) {
        DgGroup g;
        g.real = true;
        for (Index i = 0; i < k; ++i) { g.z.push_back(zo + i); g.w.push_back(wo + i); }
        out.push_back(g);
      } else {
        for (Index i = 0; i < k; ++i) out.push_back({{zo + i}, {wo + i}, true});
      }
    } else {
      DgGroup g;
      for (Index i = 0; i < b.cols; ++i) g.z.push_back(zo + i);
      for (Index i = 0; i < b.rows; ++i) g.w.push_back(wo + i);
      out.push_back(g);
    }
    zo += b.cols;
    wo += b.rows;
  }
  Index n = 0;
  for (auto& g : out) { g.d_offset = n; n += g.full() ? g.size() * g.size() : 1; }
  for (auto& g : out)
    if (g.real) { g.g_offset = n; n += g.size() * g.size(); }
  nparams = n;
  return out;
}

// Lower-triangular factor of a full D block: diag exp(p), then (re, im) pairs.
inline CMatrix dg_factor(const DgGroup& g, const Vector& p) {
  const Index k = g.size();
  CMatrix L = CMatrix::Zero(k, k);
  Index o = g.d_offset;
  for (Index i = 0; i < k; ++i) L(i, i) = std::exp(p(o++));
  for (Index i = 1; i < k; ++i)
    for (Index j = 0; j < i; ++j, o += 2) L(i, j) = Complex(p(o), p(o + 1));
  return L;
}

// Hermitian G block: diag, then (re, im) of the strictly lower entries.
inline CMatrix dg_gblock(const DgGroup& g, const Vector& p) {
  const Index k = g.size();
  CMatrix G = CMatrix::Zero(k, k);
  Index o = g.g_offset;
  for (Index i = 0; i < k; ++i) G(i, i) = p(o++);
  for (Index i = 1; i < k; ++i)
    for (Index j = 0; j < i; ++j, o += 2) {
      G(i, j) = Complex(p(o), p(o + 1));
      G(j, i) = std::conj(G(i, j));
    }
  return G;
}

// Generalized eigenvalue bound: largest l with (M^H Dz M + j(G M - M^H G^H)) x = l Dw x.
inline double dg_bound(const CMatrix& M, const std::vector<DgGroup>& gs, const Vector& p, Vector& grad) {
  const Index nz = M.rows(), nw = M.cols();
  CMatrix Dz = CMatrix::Zero(nz, nz), Dw = CMatrix::Zero(nw, nw), G = CMatrix::Zero(nw, nz);
  std::vector<CMatrix> Ls(gs.size());
  for (std::size_t b = 0; b < gs.size(); ++b) {
    const auto& g = gs[b];
    if (g.full()) {
      Ls[b] = dg_factor(g, p);
      const CMatrix D = Ls[b] * Ls[b].adjoint();
      for (Index i = 0; i < g.size(); ++i)
        for (Index j = 0; j < g.size(); ++j) {
          Dz(g.z[i], g.z[j]) = D(i, j);
          Dw(g.w[i], g.w[j]) = D(i, j);
        }
    } else {
      const double d = std::exp(p(g.d_offset));
      for (auto r : g.z) Dz(r, r) = d;
      for (auto c : g.w) Dw(c, c) = d;
    }
    if (g.real) {
      // G relative to D: G = L Gh L^H (full) or d gh (scalar), which decouples
      // the two sets of variables
      const CMatrix Gh = dg_gblock(g, p);
      const CMatrix Gb = g.full() ? CMatrix(Ls[b] * Gh * Ls[b].adjoint()) : CMatrix(std::exp(p(g.d_offset)) * Gh);
      for (Index i = 0; i < g.size(); ++i)
        for (Index j = 0; j < g.size(); ++j) G(g.w[i], g.z[j]) = Gb(i, j);
    }
  }
  const CMatrix GM = G * M;
  CMatrix H = M.adjoint() * Dz * M + Complex(0.0, 1.0) * (GM - GM.adjoint());
  H = 0.5 * (H + H.adjoint());
  Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> es(H, Dw);  // x^H Dw x = 1
  const double lam = es.eigenvalues()(nw - 1);
  grad.setZero(p.size());
  const CVector x = es.eigenvectors().col(nw - 1);
  const CVector y = M * x;
  for (std::size_t b = 0; b < gs.size(); ++b) {
    const auto& g = gs[b];
    const Index k = g.size();
    // W = y_z x_w^H: d lambda = tr(dD P) - 2 Im tr(dG W), P = y_z y_z^H - lambda x_w x_w^H
    CMatrix W = CMatrix::Zero(k, k);
    if (g.real)
      for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) W(i, j) = y(g.z[i]) * std::conj(x(g.w[j]));
    if (g.full()) {
      const CMatrix& L = Ls[b];
      CMatrix P(k, k);
      for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j)
          P(i, j) = y(g.z[i]) * std::conj(y(g.z[j])) - lam * x(g.w[i]) * std::conj(x(g.w[j]));
      const CMatrix Gh = dg_gblock(g, p);
      const CMatrix R = L.adjoint() * P;  // D part: 2 Re tr(dL R)
      const CMatrix A = Gh * L.adjoint() * W, B = W * L * Gh;  // G = L Gh L^H part
      // d lambda for dL = c E_ij
      auto dl = [&](Index i, Index j, Complex c) {
        return 2.0 * (c * R(j, i)).real() - 2.0 * (c * A(j, i) + std::conj(c) * B(i, j)).imag();
      };
      Index o = g.d_offset;
      for (Index i = 0; i < k; ++i) grad(o++) += dl(i, i, L(i, i));
      for (Index i = 1; i < k; ++i)
        for (Index j = 0; j < i; ++j, o += 2) {
          grad(o) += dl(i, j, 1.0);
          grad(o + 1) += dl(i, j, Complex(0.0, 1.0));
        }
      W = L.adjoint() * W * L;  // for the Gh entries
    } else {
      const double d = std::exp(p(g.d_offset));
      double t = 0.0;
      for (auto r : g.z) t += std::norm(y(r));
      for (auto c : g.w) t -= lam * std::norm(x(c));
      if (g.real) t += -2.0 * p(g.g_offset) * W(0, 0).imag();  // G = d gh moves with d
      grad(g.d_offset) += d * t;
      W *= d;
    }
    if (g.real) {
      Index o = g.g_offset;
      for (Index i = 0; i < k; ++i) grad(o++) += -2.0 * W(i, i).imag();
      for (Index i = 1; i < k; ++i)
        for (Index j = 0; j < i; ++j, o += 2) {
          grad(o) += -2.0 * (W(j, i) + W(i, j)).imag();
          grad(o + 1) += -2.0 * (W(j, i) - W(i, j)).real();
        }
    }
  }
  return lam;
}

}  // namespace detail

struct MuUpperOptions {
  bool mixed = false;  // G-scales on real blocks
  int iterations = 200;
  double tol = 1e-10;
};

// D-scaling upper bound; with `mixed`, real scalar blocks also get G-scales
// (otherwise they are treated as complex).  Slots of repeated scalars use
// diagonal scalings.
inline double mu_upper(const CMatrix& M, const std::vector<UncertaintyBlock>& structure,
                       const MuUpperOptions& opt = {}) {
  const auto sl = detail::mu_slots(structure, M.rows(), M.cols());
  if (M.size() == 0 || M.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  if (sl.size() == 1 && !sl[0].real) return sigma_max(M);
  const Index nd = static_cast<Index>(sl.size()) - 1;
  // Osborne-style start: balance slot row and column norms.
  Vector p = Vector::Zero(nd);
  for (int sweep = 0; sweep < 30; ++sweep) {
    Vector dz = Vector::Zero(M.rows()), dw = Vector::Zero(M.cols());
    for (Index i = 1; i <= nd; ++i) {
      for (auto r : sl[static_cast<std::size_t>(i)].z) dz(r) = p(i - 1);
      for (auto c : sl[static_cast<std::size_t>(i)].w) dw(c) = p(i - 1);
    }
    const CMatrix S = dz.array().exp().matrix().asDiagonal() * M * dw.array().exp().inverse().matrix().asDiagonal();
    double change = 0.0;
    for (Index i = 1; i <= nd; ++i) {
      double rn = 0.0, cn = 0.0;
      for (auto r : sl[static_cast<std::size_t>(i)].z) rn += S.row(r).squaredNorm();
      for (auto c : sl[static_cast<std::size_t>(i)].w) cn += S.col(c).squaredNorm();
      if (rn > 0.0 && cn > 0.0) {
        const double d = 0.25 * std::log(cn / rn);
        p(i - 1) += d;
        change = std::max(change, std::abs(d));
      }
    }
    if (change < 1e-3) break;
  }
  p = p.cwiseMax(-30.0).cwiseMin(30.0);
  Vector g;
  auto f = [&](const Vector& x, Vector& gr) { return detail::dscaled_sigma(M, sl, x, gr); };
  double best = f(p, g);
  p = detail::bfgs(f, p, opt.iterations, opt.tol);
  best = std::min(best, f(p, g));
  if (!opt.mixed) return best;

  bool any_real = false;
  for (auto& x : sl) any_real = any_real || x.real;
  if (!any_real) return best;
  Index np = 0;
  const auto gs = detail::dg_groups(structure, np);
  // start from the D scales above (squared: the LMI form uses D, not D^1/2)
  Vector slot_log = Vector::Zero(static_cast<Index>(sl.size()));
  slot_log.tail(nd) = p;
  Vector q = Vector::Zero(np);
  std::size_t si = 0;
  for (auto& g : gs) {
    if (g.full()) {
      for (Index i = 0; i < g.size(); ++i) q(g.d_offset + i) = slot_log(static_cast<Index>(si + i));
      si += static_cast<std::size_t>(g.size());
    } else {
      q(g.d_offset) = 2.0 * slot_log(static_cast<Index>(si++));
    }
    // G start: the value that reduces each real channel's own 1x1 bound to |Re m_ii|
    if (g.real)
      for (Index i = 0; i < g.size(); ++i) {
        q(g.g_offset + i) = 0.5 * M(g.z[i], g.w[i]).imag();
      }
  }
  // every iterate is a valid bound
  auto h = [&](const Vector& x, Vector& gr) { return detail::dg_bound(M, gs, x, gr); };
  double lam = h(q, g);
  q = detail::bfgs(h, q, opt.iterations, opt.tol);
  lam = std::min(lam, h(q, g));
  return std::min(best, std::sqrt(std::max(0.0, lam)));
}

struct MuLowerResult {
  double bound = 0.0;
  CMatrix delta;  // admissible, sigma_max = 1/bound, det(I - M delta) = 0
  bool converged = false;
};

struct MuLowerOptions {
  bool real_blocks = false;  // enforce real scalars (mixed structure)
  int iterations = 100;
  int restarts = 4;
  std::uint64_t seed = 1;
};

namespace detail {

inline CMatrix assemble_delta(const std::vector<UncertaintyBlock>& s, const std::vector<CMatrix>& parts) {
  Index nz = 0, nw = 0;
  for (auto& b : s) { nz += b.cols; nw += b.rows; }
  CMatrix D = CMatrix::Zero(nw, nz);
  Index zo = 0, wo = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    D.block(wo, zo, s[i].rows, s[i].cols) = parts[i];
    zo += s[i].cols;
    wo += s[i].rows;
  }
  return D;
}

}  // namespace detail

namespace detail {

// Largest certified |l| for a unit-norm admissible Delta0 split into its real
// scalar part Dr and complex part Dc: a phase e^{i phi} on Dc is scanned and
// bisected until an eigenvalue of M (Dr + e^{i phi} Dc) is real, so Delta =
// (Dr + e^{i phi} Dc) / l keeps the real scalars real.
inline std::pair<double, CMatrix> certify_real(const CMatrix& M, const CMatrix& Dr, const CMatrix& Dc) {
  auto eig = [&](double phi) {
    Eigen::ComplexEigenSolver<CMatrix> es(M * (Dr + std::polar(1.0, phi) * Dc), false);
    return CVector(es.eigenvalues());
  };
  std::pair<double, CMatrix> best{0.0, CMatrix::Zero(Dr.rows(), Dr.cols())};
  auto accept = [&](Complex l, double phi) {
    if (!(std::abs(l) > best.first)) return;
    const double lr = l.real();
    best = {std::abs(lr), (Dr + std::polar(1.0, phi) * Dc) / lr};
  };
  const CVector e0 = eig(0.0);
  const double rho = e0.cwiseAbs().maxCoeff();
  if (!(rho > 0.0)) return best;
  const double tiny = 1e-9 * rho;
  if (Dc.cwiseAbs().maxCoeff() == 0.0) {
    for (Index i = 0; i < e0.size(); ++i)
      if (std::abs(e0(i)) > tiny && std::abs(e0(i).imag()) <= 1e-12 * std::abs(e0(i))) accept(e0(i), 0.0);
    return best;
  }
  auto nearest = [](const CVector& v, Complex z) {
    Index k = 0;
    for (Index i = 1; i < v.size(); ++i)
      if (std::abs(v(i) - z) < std::abs(v(k) - z)) k = i;
    return v(k);
  };
  constexpr int kScan = 64;
  std::vector<CVector> E;
  for (int k = 0; k <= kScan; ++k) E.push_back(k == 0 ? e0 : eig(kTwoPi * k / kScan));
  // candidate sign changes of Im l along the scan, largest |l| first
  struct Cand { double mag; int k; Complex l; };
  std::vector<Cand> cands;
  for (int k = 0; k < kScan; ++k)
    for (Index i = 0; i < E[k].size(); ++i) {
      const Complex l = E[k](i);
      if (std::abs(l) <= tiny) continue;
      const Complex r = nearest(E[k + 1], l);
      if ((l.imag() <= 0.0) != (r.imag() <= 0.0)) cands.push_back({std::max(std::abs(l), std::abs(r)), k, l});
    }
  std::sort(cands.begin(), cands.end(), [](auto& a, auto& b) { return a.mag > b.mag; });
  int tried = 0;
  for (auto& c : cands) {
    if (c.mag <= best.first || tried++ >= 4) break;
    double a = kTwoPi * c.k / kScan, b = kTwoPi * (c.k + 1) / kScan;
    Complex la = c.l;
    const bool sa = la.imag() <= 0.0;
    for (int it = 0; it < 60 && b - a > 1e-15; ++it) {
      const double m = 0.5 * (a + b);
      const Complex lm = nearest(eig(m), la);
      if ((lm.imag() <= 0.0) == sa) { a = m; la = lm; } else { b = m; }
    }
    if (std::abs(la) > tiny && std::abs(la.imag()) <= 1e-10 * std::abs(la)) accept(la, a);
  }
  return best;
}

}  // namespace detail

// Power-iteration lower bound.  Each iterate defines a unit-norm admissible
// Delta0; the certified bound is the spectral radius of M Delta0, and the
// witness Delta0 / lambda makes I - M Delta singular.  With real blocks the
// certificate comes from detail::certify_real instead.
inline MuLowerResult mu_lower(const CMatrix& M, const std::vector<UncertaintyBlock>& structure,
                              const MuLowerOptions& opt = {}) {
  detail::mu_slots(structure, M.rows(), M.cols());
  MuLowerResult best;
  const Index nw = M.cols();
  best.delta = CMatrix::Zero(nw, M.rows());
  if (M.size() == 0 || M.cwiseAbs().maxCoeff() == 0.0) {
    best.converged = true;
    return best;
  }
  bool any_real = false;
  for (auto& b : structure) any_real = any_real || b.kind == BlockKind::real_scalar;
  const bool real = opt.real_blocks && any_real;
  auto certify = [&](const std::vector<CMatrix>& parts) {
    if (real) {
      std::vector<CMatrix> pr = parts, pc = parts;
      for (std::size_t i = 0; i < structure.size(); ++i)
        (structure[i].kind == BlockKind::real_scalar ? pc[i] : pr[i]).setZero();
      auto [v, D] = detail::certify_real(M, detail::assemble_delta(structure, pr), detail::assemble_delta(structure, pc));
      if (v > best.bound) {
        best.bound = v;
        best.delta = D;
      }
      return;
    }
    const CMatrix D0 = detail::assemble_delta(structure, parts);
    Eigen::ComplexEigenSolver<CMatrix> es(M * D0, false);
    Complex lam(0.0);
    for (Index i = 0; i < es.eigenvalues().size(); ++i)
      if (std::abs(es.eigenvalues()(i)) > std::abs(lam)) lam = es.eigenvalues()(i);
    if (std::abs(lam) > best.bound) {
      best.bound = std::abs(lam);
      best.delta = D0 / lam;
    }
  };

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const Eigen::JacobiSVD<CMatrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    // start: top singular pair, then random directions
    CVector x(nw), u(M.rows());
    if (r == 0) {
      x = svd.matrixV().col(0);
      u = svd.matrixU().col(0);
    } else {
      for (Index i = 0; i < nw; ++i) x(i) = Complex(nd(rng), nd(rng));
      for (Index i = 0; i < M.rows(); ++i) u(i) = Complex(nd(rng), nd(rng));
    }
    std::vector<CMatrix> parts(structure.size()), best_parts;
    double prev = -1.0, best_run = -1.0;
    for (int it = 0; it < opt.iterations; ++it) {
      // align each block with (z-side vector u, w-side vector x): Delta_i u_i ~ x_i
      Index zo = 0, wo = 0;
      for (std::size_t i = 0; i < structure.size(); ++i) {
        const auto& b = structure[i];
        const CVector ui = u.segment(zo, b.cols), xi = x.segment(wo, b.rows);
        if (b.kind == BlockKind::real_scalar) {
          const Complex c = ui.dot(xi);  // ui^H xi
          Complex ph;
          if (real) ph = c.real() >= 0.0 ? 1.0 : -1.0;
          else ph = std::abs(c) > 0.0 ? c / std::abs(c) : Complex(1.0);
          parts[i] = ph * CMatrix::Identity(b.rows, b.cols);
        } else {
          const double nu = ui.norm(), nx = xi.norm();
          parts[i] = (nu > 0.0 && nx > 0.0) ? CMatrix(xi * ui.adjoint() / (nu * nx))
                                            : CMatrix(CMatrix::Zero(b.rows, b.cols));
        }
        zo += b.cols;
        wo += b.rows;
      }
      if (!real) certify(parts);
      // eigenvectors of M Delta0 drive the next alignment
      const CMatrix D0 = detail::assemble_delta(structure, parts);
      Eigen::ComplexEigenSolver<CMatrix> es(M * D0, true);
      Index k = 0;
      for (Index i = 1; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(k))) k = i;
      const Complex lk = es.eigenvalues()(k);
      const CVector z = es.eigenvectors().col(k);  // M D0 z = l z
      Eigen::ComplexEigenSolver<CMatrix> el(D0.adjoint() * M.adjoint(), true);
      Index kl = 0;
      for (Index i = 1; i < el.eigenvalues().size(); ++i)
        if (std::abs(el.eigenvalues()(i) - std::conj(lk)) < std::abs(el.eigenvalues()(kl) - std::conj(lk))) kl = i;
      CVector y = el.eigenvectors().col(kl);  // y^H M D0 = l y^H
      const Complex yz = y.dot(z);
      if (std::abs(yz) > 0.0) y /= std::conj(yz);  // y^H z = 1
      // first-order change of l is sum (M^H y)_i^H dDelta_i z_i: align each
      // block with z_i and (M^H y)_i rotated by the phase of l
      u = z;
      x = M.adjoint() * y;
      if (std::abs(lk) > 0.0) x *= lk / std::abs(lk);
      const double cur = std::abs(lk);
      if (cur > best_run) {
        best_run = cur;
        best_parts = parts;
      }
      if (std::abs(cur - prev) <= 1e-12 * std::max(1.0, cur)) {
        best.converged = true;
        break;
      }
      prev = cur;
    }
    if (real) {
      certify(parts);
      if (!best_parts.empty()) certify(best_parts);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sweeps

struct MuOptions {
  bool mixed = true;
  bool lower = true;         // lower bound at every frequency (the peak always gets one)
  int screen_iterations = 25;  // cheap bound first; refine only points that can still be the peak (0: refine all)
  MuUpperOptions upper_opt{};
  MuLowerOptions lower_opt{};
  std::vector<std::string> subset;  // restrict to these block names (empty: all)
};

struct MuResult {
  std::vector<double> omegas;  // rad/s
  std::vector<double> upper, lower;
  std::vector<UncertaintyBlock> structure;
  CMatrix worst_sample;        // witness at the peak (lower bound)
  double peak_omega = 0.0, peak_mu = 0.0, peak_lower = 0.0;
  std::size_t peak_index = 0;
};

namespace detail {

// Rows/cols of the retained blocks.
inline std::pair<std::vector<Index>, std::vector<Index>> subset_channels(const std::vector<UncertaintyBlock>& s,
                                                                         const std::vector<std::string>& names,
                                                                         std::vector<UncertaintyBlock>& kept) {
  std::vector<Index> zi, wi;
  Index zo = 0, wo = 0;
  for (auto& n : names)
    if (std::none_of(s.begin(), s.end(), [&](auto& b) { return b.name == n; }))
      throw Error(Errc::unknown_block, "block '" + n + "'");
  for (auto& b : s) {
    const bool keep = names.empty() || std::find(names.begin(), names.end(), b.name) != names.end();
    if (keep) {
      kept.push_back(b);
      for (Index k = 0; k < b.cols; ++k) zi.push_back(zo + k);
      for (Index k = 0; k < b.rows; ++k) wi.push_back(wo + k);
    }
    zo += b.cols;
    wo += b.rows;
  }
  return {zi, wi};
}

inline CMatrix pick(const CMatrix& M, const std::vector<Index>& r, const std::vector<Index>& c) {
  CMatrix out(static_cast<Index>(r.size()), static_cast<Index>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = M(r[i], c[j]);
  return out;
}

}  // namespace detail

// mu over frequency of the uncertainty channels of a closed-loop LFR.
inline MuResult mu_sweep(const LfrModel& loop, const std::vector<double>& omegas, const MuOptions& opt = {}) {
  MuResult r;
  r.omegas = omegas;
  auto [zi, wi] = detail::subset_channels(loop.blocks, opt.subset, r.structure);
  const Index nz = loop.z_size(), nw = loop.w_size();
  (void)nz;
  (void)nw;
  FrequencyEvaluator ev(loop.core);
  r.upper.assign(omegas.size(), 0.0);
  r.lower.assign(omegas.size(), 0.0);
  std::vector<CMatrix> Ms(omegas.size());
  MuUpperOptions uo = opt.upper_opt;
  uo.mixed = opt.mixed;
  const bool screen = opt.screen_iterations > 0 && opt.screen_iterations < uo.iterations;
  MuUpperOptions cheap = uo;
  if (screen) cheap.iterations = opt.screen_iterations;
  parallel_for(omegas.size(), [&](std::size_t k) {
    Ms[k] = detail::pick(ev(Complex(0.0, omegas[k])), zi, wi);
    r.upper[k] = mu_upper(Ms[k], r.structure, cheap);
  });
  if (screen) {
    // every scaling gives a valid bound: refine in decreasing order until no
    // screened value can exceed the refined peak
    std::vector<std::size_t> order(omegas.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r.upper[a] > r.upper[b]; });
    double best = 0.0;
    constexpr std::size_t chunk = 8;  // fixed, so results do not depend on the worker count
    for (std::size_t i = 0; i < order.size() && r.upper[order[i]] > best; i += chunk) {
      const std::size_t n = std::min(chunk, order.size() - i);
      parallel_for(n, [&](std::size_t j) {
        const auto k = order[i + j];
        r.upper[k] = std::min(r.upper[k], mu_upper(Ms[k], r.structure, uo));
      });
      for (std::size_t j = 0; j < n; ++j) best = std::max(best, r.upper[order[i + j]]);
    }
  }
  for (std::size_t k = 0; k < omegas.size(); ++k)
    if (r.upper[k] > r.peak_mu) { r.peak_mu = r.upper[k]; r.peak_index = k; r.peak_omega = omegas[k]; }
  MuLowerOptions lo = opt.lower_opt;
  lo.real_blocks = opt.mixed;
  if (opt.lower)
    parallel_for(omegas.size(), [&](std::size_t k) {
      MuLowerOptions l1 = lo;
      l1.restarts = 1;
      l1.iterations = 20;
      r.lower[k] = std::min(r.upper[k], mu_lower(Ms[k], r.structure, l1).bound);
    });
  if (!omegas.empty()) {
    auto w = mu_lower(Ms[r.peak_index], r.structure, lo);
    r.peak_lower = std::min(w.bound, r.upper[r.peak_index]);
    r.lower[r.peak_index] = std::max(r.lower[r.peak_index], r.peak_lower);
    r.worst_sample = w.delta;
  }
  return r;
}

inline void require_nominal_stability(const LfrModel& loop, std::size_t index) {
  if (loop.core.states() > 0 && !(spectral_abscissa(loop.core.A()) < 0.0))
    throw Error(Errc::nominal_unstable, "closed loop " + std::to_string(index) + " is not nominally stable");
}

// Closed loop with the uncertainty channels open, at a plant (configuration
// fixed) and gains.
inline LfrModel robust_loop(const LfrModel& plant, const DesignFrame& frame, const ControllerGains& K,
                            const AugmentedUncertainty& aug) {
  return lft_lower(build_design_interconnection(augment_uncertainty(plant, aug), frame), gain_model(K));
}

inline std::vector<MuResult> robust_stability_sweep(const std::vector<LfrModel>& loops,
                                                    const std::vector<double>& omegas,
                                                    const MuOptions& opt = {}) {
  for (std::size_t i = 0; i < loops.size(); ++i) require_nominal_stability(loops[i], i);
  std::vector<MuResult> out;
  out.reserve(loops.size());
  for (auto& l : loops) out.push_back(mu_sweep(l, omegas, opt));
  return out;
}

struct SurfacePeak {
  std::size_t model = 0;
  double omega = 0.0, mu = 0.0;
};

inline SurfacePeak surface_peak(const std::vector<MuResult>& s) {
  SurfacePeak p;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i].peak_mu > p.mu) p = {i, s[i].peak_omega, s[i].peak_mu};
  return p;
}

// Worst-case gain upper bound on a performance sub-channel by bisection on
// the gain level with an artificial full block closing e -> d.
struct WorstCaseResult {
  std::vector<double> omegas;
  std::vector<double> bound, nominal;
};

inline WorstCaseResult worst_case_gain(const std::vector<LfrModel>& loops, const Labels& outputs,
                                       const std::vector<double>& omegas, const MuOptions& opt = {},
                                       double rel_tol = 1e-3) {
  for (std::size_t i = 0; i < loops.size(); ++i) require_nominal_stability(loops[i], i);
  WorstCaseResult res;
  res.omegas = omegas;
  res.bound.assign(omegas.size(), 0.0);
  res.nominal.assign(omegas.size(), 0.0);
  MuUpperOptions uo = opt.upper_opt;
  uo.mixed = opt.mixed;
  for (auto& loop : loops) {
    const Labels& d = loop.group("disturbance");
    std::vector<UncertaintyBlock> st;
    auto [zi, wi] = detail::subset_channels(loop.blocks, opt.subset, st);
    auto perf = full_block("perf", static_cast<Index>(d.size()), static_cast<Index>(outputs.size()));
    st.push_back(perf);
    std::vector<Index> ri = zi, ci = wi;
    for (auto& l : outputs) ri.push_back(loop.core.output_index(l));
    for (auto& l : d) ci.push_back(loop.core.input_index(l));
    const std::size_t nu = zi.size();
    FrequencyEvaluator ev(loop.core);
    std::vector<double> b(omegas.size()), n(omegas.size());
    parallel_for(omegas.size(), [&](std::size_t k) {
      const CMatrix M = detail::pick(ev(Complex(0.0, omegas[k])), ri, ci);
      const Index q = static_cast<Index>(nu);
      const CMatrix M22 = M.bottomRightCorner(M.rows() - q, M.cols() - q);
      n[k] = sigma_max(M22);
      if (q > 0 && mu_upper(M.topLeftCorner(q, q), std::vector<UncertaintyBlock>(st.begin(), st.end() - 1), uo) >= 1.0) {
        b[k] = std::numeric_limits<double>::infinity();
        return;
      }
      auto feasible = [&](double g) {
        CMatrix Mg = M;
        Mg.bottomRows(Mg.rows() - q) /= g;
        return mu_upper(Mg, st, uo) < 1.0;
      };
      double lo = n[k], hi = std::max(2.0 * n[k], 1e-300);
      if (lo <= 0.0) { lo = 0.0; hi = std::max(M.cwiseAbs().maxCoeff(), 1e-12); }
      int grow = 0;
      while (!feasible(hi) && grow < 60) { lo = hi; hi *= 2.0; ++grow; }
      if (grow == 60) { b[k] = std::numeric_limits<double>::infinity(); return; }
      while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
      }
      b[k] = std::max(hi, n[k]);
    });
    for (std::size_t k = 0; k < omegas.size(); ++k) {
      res.bound[k] = std::max(res.bound[k], b[k]);
      res.nominal[k] = std::max(res.nominal[k], n[k]);
    }
  }
  return res;
}

// Docking-stiffness sweep on the arm-docked (single spring) plant.
struct DockingSweepResult {
  std::vector<double> stiffness;
  std::vector<MuResult> mu;
  std::vector<char> unstable;  // nominally unstable samples (mu not computed)
  std::size_t peak_index = 0;
  MuResult reference;          // switch-coupled plant at the same pose
};

inline DockingSweepResult docking_stability_sweep(const MissionConfig& c, const ControllerGains& K,
                                                  const std::vector<double>& stiffness, double damping,
                                                  const std::vector<double>& omegas, const MuOptions& opt = {},
                                                  std::optional<double> t_pose = std::nullopt) {
  const auto tr = mission_trajectory(c);
  const Pose pose = pose_at(tr, t_pose.value_or(c.timeline.first_dock));
  const DesignFrame frame(c.weights, c.sensors);
  const auto aug = AugmentedUncertainty::from(c.augmentation);
  DockingSweepResult r;
  r.stiffness = stiffness;
  r.mu.resize(stiffness.size());
  r.unstable.assign(stiffness.size(), 0);
  AssemblyOptions o;
  o.theta = pose.theta;
  o.alpha = pose.alpha;
  const auto sym = assemble_plant(c, PlantMode::dock7, o);
  for (std::size_t i = 0; i < stiffness.size(); ++i) {
    auto s = spring_sample(sym, stiffness[i], damping);
    const auto loop = robust_loop(substitute(sym, s), frame, K, aug);
    if (!(spectral_abscissa(loop.core.A()) < 0.0)) {
      r.unstable[i] = 1;
      r.mu[i].omegas = omegas;
      r.mu[i].upper.assign(omegas.size(), std::numeric_limits<double>::quiet_NaN());
      r.mu[i].lower = r.mu[i].upper;
      continue;
    }
    r.mu[i] = mu_sweep(loop, omegas, opt);
  }
  double best = -1.0;
  for (std::size_t i = 0; i < stiffness.size(); ++i)
    if (!r.unstable[i] && r.mu[i].peak_mu > best) { best = r.mu[i].peak_mu; r.peak_index = i; }
  const auto sw = assemble_plant(c, PlantMode::switched, {true, {}, {}});
  const auto ref = robust_loop(plant_at(sw, pose, Phase::arm_docked, true), frame, K, aug);
  require_nominal_stability(ref, 0);
  r.reference = mu_sweep(ref, omegas, opt);
  return r;
}

// Frequency-response family with a subset of real blocks sampled (vertices
// first, then uniform interior samples) and the others nominal.
struct ResponseFamily {
  std::vector<double> omegas;
  std::vector<ParamSample> samples;
  std::vector<std::vector<double>> magnitude;  // |G| per sample and frequency
};

inline ResponseFamily sensitivity_overlay(const LfrModel& plant, const std::vector<std::string>& subset,
                                          std::size_t samples, const std::string& input, const std::string& output,
                                          const std::vector<double>& omegas, std::uint64_t seed = 1) {
  Labels params;
  for (auto& n : subset) {
    const auto* b = plant.find_block(n);
    if (!b) throw Error(Errc::unknown_block, "block '" + n + "'");
    if (std::find(params.begin(), params.end(), b->parameter) == params.end()) params.push_back(b->parameter);
  }
  std::map<std::string, std::pair<double, double>> range;
  for (auto& b : plant.blocks) range[b.parameter] = {b.lo, b.hi};
  ParamSample base;
  for (auto& b : plant.blocks)
    if (b.kind == BlockKind::real_scalar) base[b.parameter] = 0.0;
  ResponseFamily f;
  f.omegas = omegas;
  if (params.empty()) {
    f.samples.push_back(base);
  } else {
    const std::size_t k = params.size();
    const std::size_t nv = k < 20 ? std::min<std::size_t>(samples, std::size_t(1) << k) : samples;
    std::mt19937_64 rng(seed);
    for (std::size_t c = 0; c < nv; ++c) {
      ParamSample s = base;
      for (std::size_t i = 0; i < k; ++i) {
        const auto [lo, hi] = range[params[i]];
        s[params[i]] = (c >> i) & 1u ? hi : lo;
      }
      f.samples.push_back(s);
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (f.samples.size() < samples) {
      ParamSample s = base;
      for (auto& p : params) {
        const auto [lo, hi] = range[p];
        s[p] = lo + (hi - lo) * u(rng);
      }
      f.samples.push_back(s);
    }
  }
  f.magnitude.resize(f.samples.size());
  parallel_for(f.samples.size(), [&](std::size_t i) {
    const auto G = select(substitute(plant, f.samples[i]).core, {input}, {output});
    if (G.inputs().empty()) return;
    FrequencyEvaluator ev(G);
    for (double w : omegas) f.magnitude[i].push_back(std::abs(ev(Complex(0.0, w))(0, 0)));
  });
  return f;
}

// Natural frequencies (Hz) of the oscillatory poles of a model.
inline std::vector<double> modal_frequencies_hz(const StateSpaceModel& G) {
  std::vector<double> f;
  if (G.states() == 0) return f;
  Eigen::EigenSolver<Matrix> es(G.A(), false);
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i).imag() > 0.0) f.push_back(std::abs(es.eigenvalues()(i)) / kTwoPi);
  std::sort(f.begin(), f.end());
  return f;
}

// mu frequency grid: log-spaced base, densified around modal frequencies.
inline std::vector<double> mu_frequency_grid(const std::vector<double>& modal_hz, double lo_hz = 1e-2,
                                             double hi_hz = 1e2, int per_decade = 60, int densify = 5,
                                             double band = 0.3) {
  const double dec = std::log10(hi_hz / lo_hz);
  auto g = logspace(lo_hz, hi_hz, static_cast<std::size_t>(std::ceil(dec * per_decade)) + 1);
  for (double f : modal_hz) {
    const double a = std::max(lo_hz, f * (1.0 - band)), b = std::min(hi_hz, f * (1.0 + band));
    if (!(b > a)) continue;
    const auto extra = logspace(a, b, static_cast<std::size_t>(std::ceil(std::log10(b / a) * per_decade * densify)) + 1);
    g.insert(g.end(), extra.begin(), extra.end());
  }
  std::sort(g.begin(), g.end());
  std::vector<double> out;
  for (double f : g)
    if (out.empty() || f > out.back() * (1.0 + 1e-9)) out.push_back(f);
  for (double& f : out) f *= kTwoPi;
  return out;
}

}  // namespace oos
