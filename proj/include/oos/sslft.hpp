#pragma once
// State-space models, block-diagram interconnection and linear fractional
// transformations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "oos/error.hpp"

namespace oos {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Labels = std::vector<std::string>;

namespace detail {

inline std::unordered_map<std::string, Index> index_of(const Labels& l, const char* what) {
  std::unordered_map<std::string, Index> m;
  m.reserve(l.size());
  for (std::size_t i = 0; i < l.size(); ++i)
    if (!m.emplace(l[i], static_cast<Index>(i)).second)
      throw Error(Errc::duplicate_label, std::string(what) + " '" + l[i] + "'");
  return m;
}

inline Matrix rows(const Matrix& M, const std::vector<Index>& r) {
  Matrix out(static_cast<Index>(r.size()), M.cols());
  for (std::size_t i = 0; i < r.size(); ++i) out.row(static_cast<Index>(i)) = M.row(r[i]);
  return out;
}
inline Matrix cols(const Matrix& M, const std::vector<Index>& c) {
  Matrix out(M.rows(), static_cast<Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) out.col(static_cast<Index>(i)) = M.col(c[i]);
  return out;
}
inline Matrix sub(const Matrix& M, const std::vector<Index>& r, const std::vector<Index>& c) {
  return cols(rows(M, r), c);
}

inline std::vector<Index> complement(Index n, const std::vector<Index>& idx) {
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (Index i : idx) used[static_cast<std::size_t>(i)] = 1;
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i)
    if (!used[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

// LU solve that rejects (near-)singular systems by pivot ratio.
inline Matrix guarded_solve(const Matrix& L, const Matrix& R, Errc err, const char* what,
                            double rtol = 1e-12) {
  if (L.rows() == 0) return Matrix(0, R.cols());
  Eigen::PartialPivLU<Matrix> lu(L);
  const auto d = lu.matrixLU().diagonal().cwiseAbs();
  if (!(d.minCoeff() > rtol * std::max(1.0, d.maxCoeff())))
    throw Error(err, what);
  return lu.solve(R);
}

}  // namespace detail

// Continuous-time LTI model with labelled inputs and outputs.  Immutable.
class StateSpaceModel {
 public:
  StateSpaceModel() = default;
  StateSpaceModel(Matrix A, Matrix B, Matrix C, Matrix D, Labels inputs, Labels outputs)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)),
        in_(std::move(inputs)), out_(std::move(outputs)) {
    const Index n = A_.rows(), m = static_cast<Index>(in_.size()), p = static_cast<Index>(out_.size());
    if (A_.cols() != n || B_.rows() != n || B_.cols() != m || C_.rows() != p || C_.cols() != n ||
        D_.rows() != p || D_.cols() != m)
      throw Error(Errc::dimension_mismatch, "state-space matrices do not agree with labels");
    in_idx_ = detail::index_of(in_, "input");
    out_idx_ = detail::index_of(out_, "output");
  }

  static StateSpaceModel gain(Matrix D, Labels inputs, Labels outputs) {
    const Index m = D.cols(), p = D.rows();
    return {Matrix(0, 0), Matrix(0, m), Matrix(p, 0), std::move(D), std::move(inputs), std::move(outputs)};
  }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& D() const { return D_; }
  const Labels& inputs() const { return in_; }
  const Labels& outputs() const { return out_; }
  Index states() const { return A_.rows(); }
  Index num_inputs() const { return static_cast<Index>(in_.size()); }
  Index num_outputs() const { return static_cast<Index>(out_.size()); }

  std::optional<Index> find_input(const std::string& l) const {
    auto it = in_idx_.find(l);
    return it == in_idx_.end() ? std::nullopt : std::optional<Index>(it->second);
  }
  std::optional<Index> find_output(const std::string& l) const {
    auto it = out_idx_.find(l);
    return it == out_idx_.end() ? std::nullopt : std::optional<Index>(it->second);
  }
  Index input_index(const std::string& l) const {
    if (auto i = find_input(l)) return *i;
    throw Error(Errc::unknown_label, "input '" + l + "'");
  }
  Index output_index(const std::string& l) const {
    if (auto i = find_output(l)) return *i;
    throw Error(Errc::unknown_label, "output '" + l + "'");
  }
  std::vector<Index> input_indices(const Labels& ls) const {
    std::vector<Index> r;
    for (auto& l : ls) r.push_back(input_index(l));
    return r;
  }
  std::vector<Index> output_indices(const Labels& ls) const {
    std::vector<Index> r;
    for (auto& l : ls) r.push_back(output_index(l));
    return r;
  }

 private:
  Matrix A_, B_, C_, D_;
  Labels in_, out_;
  std::unordered_map<std::string, Index> in_idx_, out_idx_;
};

using StateSpace = StateSpaceModel;

inline StateSpaceModel select(const StateSpaceModel& G, const Labels& inputs, const Labels& outputs) {
  auto ii = G.input_indices(inputs);
  auto oo = G.output_indices(outputs);
  return {G.A(), detail::cols(G.B(), ii), detail::rows(G.C(), oo), detail::sub(G.D(), oo, ii),
          inputs, outputs};
}

inline StateSpaceModel relabel(const StateSpaceModel& G, Labels inputs, Labels outputs) {
  return {G.A(), G.B(), G.C(), G.D(), std::move(inputs), std::move(outputs)};
}

// Block-diagonal stack; labels must be globally unique.
inline StateSpaceModel append(const std::vector<StateSpaceModel>& ms) {
  Index n = 0, m = 0, p = 0;
  for (auto& g : ms) { n += g.states(); m += g.num_inputs(); p += g.num_outputs(); }
  Matrix A = Matrix::Zero(n, n), B = Matrix::Zero(n, m), C = Matrix::Zero(p, n), D = Matrix::Zero(p, m);
  Labels in, out;
  in.reserve(static_cast<std::size_t>(m));
  out.reserve(static_cast<std::size_t>(p));
  Index i = 0, j = 0, k = 0;
  for (auto& g : ms) {
    const Index gn = g.states(), gm = g.num_inputs(), gp = g.num_outputs();
    A.block(i, i, gn, gn) = g.A();
    B.block(i, j, gn, gm) = g.B();
    C.block(k, i, gp, gn) = g.C();
    D.block(k, j, gp, gm) = g.D();
    in.insert(in.end(), g.inputs().begin(), g.inputs().end());
    out.insert(out.end(), g.outputs().begin(), g.outputs().end());
    i += gn; j += gm; k += gp;
  }
  return {std::move(A), std::move(B), std::move(C), std::move(D), std::move(in), std::move(out)};
}

struct Wire {
  std::string from;  // output label
  std::string to;    // input label
};

// Interconnects models by label.  Fan-out is allowed; an input may be driven
// by at most one source (use explicit summing gains otherwise).  Inputs that
// are neither wired nor external are held at zero.
inline StateSpaceModel connect(const std::vector<StateSpaceModel>& models, const std::vector<Wire>& wiring,
                               const Labels& external_in, const Labels& external_out) {
  const StateSpaceModel S = append(models);
  std::vector<Index> int_in, src;
  std::vector<char> wired(static_cast<std::size_t>(S.num_inputs()), 0);
  for (auto& w : wiring) {
    const Index to = S.input_index(w.to);
    const Index from = S.output_index(w.from);
    if (wired[static_cast<std::size_t>(to)])
      throw Error(Errc::duplicate_label, "input '" + w.to + "' driven by more than one source");
    wired[static_cast<std::size_t>(to)] = 1;
    int_in.push_back(to);
    src.push_back(from);
  }
  std::vector<Index> ext_in;
  for (auto& l : external_in) {
    const Index i = S.input_index(l);
    if (wired[static_cast<std::size_t>(i)])
      throw Error(Errc::duplicate_label, "input '" + l + "' is both wired and external");
    ext_in.push_back(i);
  }
  const auto ext_out = S.output_indices(external_out);

  const Matrix Bi = detail::cols(S.B(), int_in), Be = detail::cols(S.B(), ext_in);
  const Matrix Di = detail::cols(S.D(), int_in), De = detail::cols(S.D(), ext_in);
  // u_int = Sel * y  ->  (I - Sel Di) u_int = Sel C x + Sel De u_ext
  const Index k = static_cast<Index>(int_in.size());
  Matrix L = Matrix::Identity(k, k) - detail::rows(Di, src);
  Matrix R(k, S.states() + static_cast<Index>(ext_in.size()));
  R << detail::rows(S.C(), src), detail::rows(De, src);
  const Matrix K = detail::guarded_solve(L, R, Errc::algebraic_loop, "interconnection has a singular algebraic loop");
  const Index n = S.states();
  const Matrix Kx = K.leftCols(n), Ke = K.rightCols(static_cast<Index>(ext_in.size()));
  Matrix A = S.A() + Bi * Kx;
  Matrix B = Be + Bi * Ke;
  const Matrix Co = detail::rows(S.C(), ext_out), Dio = detail::rows(Di, ext_out), Deo = detail::rows(De, ext_out);
  Matrix C = Co + Dio * Kx;
  Matrix D = Deo + Dio * Ke;
  return {std::move(A), std::move(B), std::move(C), std::move(D), external_in, external_out};
}

// Closes u[in_idx] = G * y[out_idx]; the closed channels are removed.
inline StateSpaceModel close_static(const StateSpaceModel& M, const std::vector<Index>& in_idx,
                                    const std::vector<Index>& out_idx, const Matrix& G) {
  if (G.rows() != static_cast<Index>(in_idx.size()) || G.cols() != static_cast<Index>(out_idx.size()))
    throw Error(Errc::dimension_mismatch, "feedback gain size");
  const auto ri = detail::complement(M.num_inputs(), in_idx);
  const auto ro = detail::complement(M.num_outputs(), out_idx);
  Labels in, out;
  for (Index i : ri) in.push_back(M.inputs()[static_cast<std::size_t>(i)]);
  for (Index i : ro) out.push_back(M.outputs()[static_cast<std::size_t>(i)]);
  const Matrix B2 = detail::cols(M.B(), ri), C2 = detail::rows(M.C(), ro), D22 = detail::sub(M.D(), ro, ri);
  if (G.size() == 0 || (G.array() == 0.0).all())
    return {M.A(), B2, C2, D22, std::move(in), std::move(out)};
  const Matrix B1 = detail::cols(M.B(), in_idx), C1 = detail::rows(M.C(), out_idx);
  const Matrix D11 = detail::sub(M.D(), out_idx, in_idx);
  const Matrix D12 = detail::sub(M.D(), out_idx, ri), D21 = detail::sub(M.D(), ro, in_idx);
  const Index k = G.rows();
  const Matrix Q = detail::guarded_solve(Matrix::Identity(k, k) - G * D11, G, Errc::algebraic_loop,
                                         "feedback interconnection is ill-posed");
  const Matrix QC = Q * C1, QD = Q * D12;
  return {M.A() + B1 * QC, B2 + B1 * QD, C2 + D21 * QC, D22 + D21 * QD, std::move(in), std::move(out)};
}

// Swaps the roles of a port: the listed outputs become inputs and vice versa.
// Applying it twice restores the original model.
inline StateSpaceModel port_invert(const StateSpaceModel& G, const Labels& port_inputs, const Labels& port_outputs) {
  if (port_inputs.size() != port_outputs.size())
    throw Error(Errc::dimension_mismatch, "port input/output counts differ");
  const auto pi = G.input_indices(port_inputs), po = G.output_indices(port_outputs);
  const auto oi = detail::complement(G.num_inputs(), pi), oo = detail::complement(G.num_outputs(), po);
  const Matrix Dpp = detail::sub(G.D(), po, pi);
  const Index k = Dpp.rows();
  // u_p = Dpp^-1 (y_p - Cp x - Dpo u_o)
  const Matrix Dinv = detail::guarded_solve(Dpp, Matrix::Identity(k, k), Errc::singular_feedthrough,
                                            "port feedthrough is singular", 1e-13);
  const Matrix Cp = detail::rows(G.C(), po), Dpo = detail::sub(G.D(), po, oi);
  const Matrix Bp = detail::cols(G.B(), pi), Bo = detail::cols(G.B(), oi);
  const Matrix Co = detail::rows(G.C(), oo), Dop = detail::sub(G.D(), oo, pi), Doo = detail::sub(G.D(), oo, oi);
  const Matrix Ux = -Dinv * Cp, Uy = Dinv, Uo = -Dinv * Dpo;  // u_p = Ux x + Uy y_p + Uo u_o
  const Index n = G.states();
  Matrix A = G.A() + Bp * Ux;
  Matrix B(n, k + static_cast<Index>(oi.size()));
  B << Bp * Uy, Bo + Bp * Uo;
  Matrix C(k + static_cast<Index>(oo.size()), n);
  C << Ux, Co + Dop * Ux;
  Matrix D(C.rows(), B.cols());
  D << Uy, Uo, Dop * Uy, Doo + Dop * Uo;
  Labels in(port_outputs), out(port_inputs);
  for (Index i : oi) in.push_back(G.inputs()[static_cast<std::size_t>(i)]);
  for (Index i : oo) out.push_back(G.outputs()[static_cast<std::size_t>(i)]);
  return {std::move(A), std::move(B), std::move(C), std::move(D), std::move(in), std::move(out)};
}

// Restriction to the controllable subspace, built by block Arnoldi with
// rank decisions at rtol relative to the largest new direction.  Removes
// e.g. the integrators of a kinematic loop that no input can excite.
inline StateSpaceModel controllable_part(const StateSpaceModel& G, double rtol = 1e-9) {
  const Index n = G.states();
  if (n == 0) return G;
  const Matrix& A = G.A();
  const double scale = std::max(A.norm(), 1.0);
  Matrix V(n, 0);
  auto extend = [&](const Matrix& X) {
    Matrix R = X - V * (V.transpose() * X);
    R -= V * (V.transpose() * R);  // second pass for orthogonality
    Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    Index r = 0;
    const double ref = std::max(X.norm(), 1e-300);
    while (r < sv.size() && sv(r) > rtol * ref) ++r;
    Matrix W(n, V.cols() + r);
    W << V, svd.matrixU().leftCols(r);
    V = std::move(W);
    return svd.matrixU().leftCols(r).eval();
  };
  Matrix fresh = extend(G.B());
  while (fresh.cols() > 0 && V.cols() < n) fresh = extend(A * fresh / scale);
  if (V.cols() == n) return G;
  return {V.transpose() * A * V, V.transpose() * G.B(), G.C() * V, G.D(), G.inputs(), G.outputs()};
}

inline double spectral_abscissa(const Matrix& A) {
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

inline bool is_stable(const StateSpaceModel& G) { return spectral_abscissa(G.A()) < 0.0; }

inline Matrix dc_gain(const StateSpaceModel& G) {
  if (G.states() == 0) return G.D();
  const Matrix X = detail::guarded_solve(G.A(), G.B(), Errc::singular_resolvent, "A is singular at s = 0", 1e-14);
  return G.D() - G.C() * X;
}

// ---------------------------------------------------------------------------
// Frequency evaluation

// Evaluates G(s) = C (sI - A)^-1 B + D.  Uses a modal decomposition when A is
// well diagonalizable, otherwise a Hessenberg reduction (O(n^2) per point).
class FrequencyEvaluator {
 public:
  enum class Method { automatic, hessenberg, modal };

  explicit FrequencyEvaluator(const StateSpaceModel& G, Method method = Method::hessenberg)
      : D_(G.D().cast<Complex>()) {
    n_ = G.states();
    if (n_ == 0) return;
    anorm_ = G.A().lpNorm<1>();
    if (method != Method::hessenberg) {
      Eigen::EigenSolver<Matrix> es(G.A(), true);
      if (es.info() == Eigen::Success) {
        const CMatrix V = es.eigenvectors();
        Eigen::PartialPivLU<CMatrix> lu(V);
        const CMatrix Vi = lu.inverse();
        const double cond = V.cwiseAbs().colwise().sum().maxCoeff() * Vi.cwiseAbs().colwise().sum().maxCoeff();
        if (std::isfinite(cond) && (cond < 1e8 || method == Method::modal)) {
          modal_ = true;
          lambda_ = es.eigenvalues();
          Bm_ = Vi * G.B().cast<Complex>();
          Cm_ = G.C().cast<Complex>() * V;
          return;
        }
      }
    }
    Eigen::HessenbergDecomposition<Matrix> hd(G.A());
    H_ = hd.matrixH();
    const Matrix Q = hd.matrixQ();
    Bh_ = (Q.transpose() * G.B()).cast<Complex>();
    Ch_ = (G.C() * Q).cast<Complex>();
  }

  bool modal() const { return modal_; }
  const CVector& poles() const { return lambda_; }

  CMatrix operator()(Complex s) const {
    if (n_ == 0) return D_;
    if (modal_) {
      CVector r(n_);
      for (Index i = 0; i < n_; ++i) {
        const Complex d = s - lambda_(i);
        if (std::abs(d) <= 1e-13 * (std::abs(lambda_(i)) + 1.0))
          throw Error(Errc::singular_resolvent, "evaluation point coincides with a pole");
        r(i) = 1.0 / d;
      }
      return Cm_ * r.asDiagonal() * Bm_ + D_;
    }
    CMatrix M = -H_.cast<Complex>();
    M.diagonal().array() += s;
    CMatrix X = Bh_;
    // Hessenberg LU with adjacent-row pivoting.
    for (Index k = 0; k + 1 < n_; ++k) {
      if (std::abs(M(k + 1, k)) > std::abs(M(k, k))) {
        M.row(k).segment(k, n_ - k).swap(M.row(k + 1).segment(k, n_ - k));
        X.row(k).swap(X.row(k + 1));
      }
      if (M(k + 1, k) == Complex(0)) continue;
      const Complex l = M(k + 1, k) / M(k, k);
      M.row(k + 1).segment(k + 1, n_ - k - 1) -= l * M.row(k).segment(k + 1, n_ - k - 1);
      X.row(k + 1) -= l * X.row(k);
    }
    const double tol = 1e-14 * (anorm_ + std::abs(s) + 1.0);
    for (Index k = 0; k < n_; ++k)
      if (std::abs(M(k, k)) <= tol)
        throw Error(Errc::singular_resolvent, "sI - A is singular at the evaluation point");
    M.triangularView<Eigen::Upper>().solveInPlace(X);
    return Ch_ * X + D_;
  }

 private:
  Index n_ = 0;
  double anorm_ = 0.0;
  bool modal_ = false;
  CMatrix D_;
  CVector lambda_;
  CMatrix Bm_, Cm_;
  Matrix H_;
  CMatrix Bh_, Ch_;
};

// Complex responses at s = j*omega [rad/s]; omega must be positive and
// strictly increasing.
inline std::vector<CMatrix> freq_response(const StateSpaceModel& G, const std::vector<double>& omega) {
  for (std::size_t i = 0; i < omega.size(); ++i)
    if (!(omega[i] > 0.0) || (i > 0 && !(omega[i] > omega[i - 1])))
      throw Error(Errc::invalid_argument, "frequencies must be positive and strictly increasing");
  FrequencyEvaluator ev(G);
  std::vector<CMatrix> out;
  out.reserve(omega.size());
  for (double w : omega) out.push_back(ev(Complex(0.0, w)));
  return out;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
  std::vector<double> w(n);
  if (n == 1) { w[0] = lo; return w; }
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

inline double sigma_max(const CMatrix& G) {
  if (G.size() == 0) return 0.0;
  if (G.rows() == 1 || G.cols() == 1) return G.norm();
  // Largest eigenvalue of the smaller Gram matrix.
  CMatrix W = G.rows() <= G.cols() ? CMatrix(G * G.adjoint()) : CMatrix(G.adjoint() * G);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(W, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

struct HinfOptions {
  double omega_min = 1e-4;  // rad/s
  double omega_max = 1e3;
  int points_per_decade = 200;
  int peaks_refined = 4;
  double rel_tol = 1e-11;  // golden-section bracket width (log-frequency)
  bool check_stability = true;
};

struct HinfResult {
  double gamma = 0.0;
  double omega_peak = 0.0;  // rad/s; 0 for DC, +inf for the feedthrough
};

inline HinfResult hinf_norm(const StateSpaceModel& G, const HinfOptions& opt = {}) {
  if (G.states() > 0 && opt.check_stability && !(spectral_abscissa(G.A()) < 0.0))
    throw Error(Errc::unstable_model, "H-infinity norm of an unstable model");
  HinfResult best{sigma_max(G.D().cast<Complex>()), std::numeric_limits<double>::infinity()};
  if (G.states() == 0) return best;
  FrequencyEvaluator ev(G, FrequencyEvaluator::Method::automatic);
  auto f = [&](double w) { return sigma_max(ev(Complex(0.0, w))); };

  const double dec = std::log10(opt.omega_max / opt.omega_min);
  auto grid = logspace(opt.omega_min, opt.omega_max,
                       static_cast<std::size_t>(std::ceil(dec * opt.points_per_decade)) + 1);
  if (ev.modal())
    for (Index i = 0; i < ev.poles().size(); ++i) {
      const double wi = std::abs(ev.poles()(i).imag());
      if (wi > opt.omega_min && wi < opt.omega_max) grid.push_back(wi);
    }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> val(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    val[i] = f(grid[i]);
    if (val[i] > best.gamma) best = {val[i], grid[i]};
  }
  {
    const double g0 = sigma_max(dc_gain(G).cast<Complex>());
    if (g0 > best.gamma) best = {g0, 0.0};
  }
  // Local maxima, largest first.
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool l = i == 0 || val[i] >= val[i - 1];
    const bool r = i + 1 == grid.size() || val[i] >= val[i + 1];
    if (l && r) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return val[a] > val[b]; });
  if (peaks.size() > static_cast<std::size_t>(opt.peaks_refined)) peaks.resize(static_cast<std::size_t>(opt.peaks_refined));
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (auto i : peaks) {
    double a = std::log(grid[i == 0 ? 0 : i - 1]);
    double b = std::log(grid[std::min(i + 1, grid.size() - 1)]);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(std::exp(c)), fd = f(std::exp(d));
    while (b - a > opt.rel_tol) {
      if (fc > fd) { b = d; d = c; fd = fc; c = b - gr * (b - a); fc = f(std::exp(c)); }
      else { a = c; c = d; fc = fd; d = a + gr * (b - a); fd = f(std::exp(d)); }
    }
    if (fc > best.gamma) best = {fc, std::exp(c)};
    if (fd > best.gamma) best = {fd, std::exp(d)};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Linear fractional models

enum class BlockKind { real_scalar, complex_full };

// One block of the block-diagonal uncertainty: w = Delta z.
struct UncertaintyBlock {
  std::string name;       // unique block id; channel labels derive from it
  std::string parameter;  // parameter bound to the block (several blocks may share one)
  BlockKind kind = BlockKind::real_scalar;
  Index rows = 1;  // size of w
  Index cols = 1;  // size of z
  double lo = -1.0, hi = 1.0;

  Index repetitions() const { return kind == BlockKind::real_scalar ? rows : 1; }
  std::string w_label(Index k) const { return "delta." + name + ".w" + std::to_string(k); }
  std::string z_label(Index k) const { return "delta." + name + ".z" + std::to_string(k); }
  Labels w_labels() const { Labels l; for (Index k = 0; k < rows; ++k) l.push_back(w_label(k)); return l; }
  Labels z_labels() const { Labels l; for (Index k = 0; k < cols; ++k) l.push_back(z_label(k)); return l; }
};

inline UncertaintyBlock scalar_block(std::string name, Index reps, double lo = -1.0, double hi = 1.0,
                                     std::string parameter = {}) {
  UncertaintyBlock b;
  b.parameter = parameter.empty() ? name : std::move(parameter);
  b.name = std::move(name);
  b.rows = b.cols = reps;
  b.lo = lo;
  b.hi = hi;
  return b;
}

inline UncertaintyBlock full_block(std::string name, Index rows, Index cols) {
  UncertaintyBlock b;
  b.parameter = name;
  b.name = std::move(name);
  b.kind = BlockKind::complex_full;
  b.rows = rows;
  b.cols = cols;
  b.lo = 0.0;
  b.hi = 1.0;
  return b;
}

using ParamSample = std::map<std::string, double>;

// Core model with the uncertainty channels first: inputs [w; others],
// outputs [z; others], in block order.
struct LfrModel {
  StateSpaceModel core;
  std::vector<UncertaintyBlock> blocks;
  std::map<std::string, Labels> groups;  // e.g. "control", "measurement"

  Index w_size() const { Index n = 0; for (auto& b : blocks) n += b.rows; return n; }
  Index z_size() const { Index n = 0; for (auto& b : blocks) n += b.cols; return n; }
  const UncertaintyBlock* find_block(const std::string& name) const {
    for (auto& b : blocks) if (b.name == name) return &b;
    return nullptr;
  }
  // Total scalar occurrences of a parameter across all blocks.
  Index occurrences(const std::string& parameter) const {
    Index n = 0;
    for (auto& b : blocks) if (b.parameter == parameter) n += b.repetitions();
    return n;
  }
  Labels parameters() const {
    Labels p;
    for (auto& b : blocks)
      if (std::find(p.begin(), p.end(), b.parameter) == p.end()) p.push_back(b.parameter);
    return p;
  }
  const Labels& group(const std::string& g) const {
    auto it = groups.find(g);
    if (it == groups.end()) throw Error(Errc::missing_channels, "channel group '" + g + "'");
    return it->second;
  }
};

// Builds an LFR from a model whose uncertainty channels carry the block labels;
// reorders channels so that they lead, in block order.
inline LfrModel make_lfr(const StateSpaceModel& core, std::vector<UncertaintyBlock> blocks,
                         std::map<std::string, Labels> groups = {}) {
  Labels in, out;
  std::unordered_set<std::string> names;
  for (auto& b : blocks) {
    if (!names.insert(b.name).second) throw Error(Errc::duplicate_label, "block '" + b.name + "'");
    for (auto& l : b.w_labels()) in.push_back(l);
    for (auto& l : b.z_labels()) out.push_back(l);
  }
  std::unordered_set<std::string> ins(in.begin(), in.end()), outs(out.begin(), out.end());
  for (auto& l : core.inputs()) if (!ins.count(l)) in.push_back(l);
  for (auto& l : core.outputs()) if (!outs.count(l)) out.push_back(l);
  if (in.size() != core.inputs().size() || out.size() != core.outputs().size())
    throw Error(Errc::unknown_label, "uncertainty channel missing from core model");
  for (auto& [g, ls] : groups)
    for (auto& l : ls)
      if (!core.find_input(l) && !core.find_output(l))
        throw Error(Errc::unknown_label, "group '" + g + "' channel '" + l + "'");
  return {select(core, in, out), std::move(blocks), std::move(groups)};
}

inline StateSpaceModel nominal(const LfrModel& M) {
  std::vector<Index> wi, zi;
  for (Index i = 0; i < M.w_size(); ++i) wi.push_back(i);
  for (Index i = 0; i < M.z_size(); ++i) zi.push_back(i);
  return close_static(M.core, wi, zi, Matrix::Zero(M.w_size(), M.z_size()));
}

namespace detail {

inline double sample_value(const UncertaintyBlock& b, const ParamSample& s) {
  auto it = s.find(b.parameter);
  if (it == s.end()) throw Error(Errc::missing_block, "no value for parameter '" + b.parameter + "'");
  const double v = it->second, tol = 1e-12 * std::max(1.0, std::max(std::abs(b.lo), std::abs(b.hi)));
  if (!(v >= b.lo - tol && v <= b.hi + tol))
    throw Error(Errc::out_of_range, "parameter '" + b.parameter + "' = " + std::to_string(v));
  return v;
}

}  // namespace detail

// Substitutes the sampled parameters and keeps the other blocks open.
inline LfrModel substitute(const LfrModel& M, const ParamSample& s) {
  std::unordered_set<std::string> known;
  for (auto& b : M.blocks) known.insert(b.parameter);
  for (auto& [k, v] : s)
    if (!known.count(k)) throw Error(Errc::unknown_block, "parameter '" + k + "'");
  std::vector<Index> wi, zi;
  std::vector<double> dv;
  std::vector<UncertaintyBlock> kept;
  Index wo = 0, zo = 0;
  for (auto& b : M.blocks) {
    if (b.kind == BlockKind::real_scalar && s.count(b.parameter)) {
      const double v = detail::sample_value(b, s);
      for (Index k = 0; k < b.rows; ++k) { wi.push_back(wo + k); zi.push_back(zo + k); dv.push_back(v); }
    } else {
      kept.push_back(b);
    }
    wo += b.rows;
    zo += b.cols;
  }
  Matrix G = Matrix::Zero(static_cast<Index>(wi.size()), static_cast<Index>(zi.size()));
  for (std::size_t i = 0; i < dv.size(); ++i) G(static_cast<Index>(i), static_cast<Index>(i)) = dv[i];
  return {close_static(M.core, wi, zi, G), std::move(kept), M.groups};
}

// Closes every block; all parameters must be sampled.
inline StateSpaceModel lft_upper(const LfrModel& M, const ParamSample& s) {
  for (auto& b : M.blocks) {
    if (b.kind != BlockKind::real_scalar) throw Error(Errc::missing_block, "full block '" + b.name + "'");
    detail::sample_value(b, s);
  }
  return substitute(M, s).core;
}

// u = K y over the "control"/"measurement" groups; a static K is closed
// algebraically, a dynamic one by interconnection.
inline LfrModel lft_lower(const LfrModel& P, const StateSpaceModel& K) {
  const Labels& u = P.group("control");
  const Labels& y = P.group("measurement");
  if (K.num_inputs() != static_cast<Index>(y.size()) || K.num_outputs() != static_cast<Index>(u.size()))
    throw Error(Errc::dimension_mismatch, "controller size does not match control/measurement channels");
  auto groups = P.groups;
  groups.erase("control");
  groups.erase("measurement");
  if (K.states() == 0)
    return {close_static(P.core, P.core.input_indices(u), P.core.output_indices(y), K.D()), P.blocks, groups};
  Labels kin, kout;
  for (std::size_t i = 0; i < y.size(); ++i) kin.push_back("K.in" + std::to_string(i));
  for (std::size_t i = 0; i < u.size(); ++i) kout.push_back("K.out" + std::to_string(i));
  std::vector<Wire> w;
  for (std::size_t i = 0; i < y.size(); ++i) w.push_back({y[i], kin[i]});
  for (std::size_t i = 0; i < u.size(); ++i) w.push_back({kout[i], u[i]});
  Labels ein, eout;
  std::unordered_set<std::string> us(u.begin(), u.end()), ys(y.begin(), y.end());
  for (auto& l : P.core.inputs()) if (!us.count(l)) ein.push_back(l);
  for (auto& l : P.core.outputs()) if (!ys.count(l)) eout.push_back(l);
  return {connect({P.core, relabel(K, kin, kout)}, w, ein, eout), P.blocks, groups};
}

// Interconnects LFR models: uncertainty channels pass through untouched and
// the blocks are concatenated in argument order.
inline LfrModel connect_lfr(const std::vector<LfrModel>& parts, const std::vector<Wire>& wiring,
                            const Labels& external_in, const Labels& external_out,
                            std::map<std::string, Labels> groups = {}) {
  std::vector<StateSpaceModel> cores;
  std::vector<UncertaintyBlock> blocks;
  Labels ein, eout;
  for (auto& p : parts) {
    cores.push_back(p.core);
    for (auto& b : p.blocks) {
      blocks.push_back(b);
      for (auto& l : b.w_labels()) ein.push_back(l);
      for (auto& l : b.z_labels()) eout.push_back(l);
    }
  }
  ein.insert(ein.end(), external_in.begin(), external_in.end());
  eout.insert(eout.end(), external_out.begin(), external_out.end());
  return make_lfr(connect(cores, wiring, ein, eout), std::move(blocks), std::move(groups));
}

inline LfrModel as_lfr(StateSpaceModel g) { return {std::move(g), {}, {}}; }

}  // namespace oos
