#include "ctmhd/krylov.hpp"

#include "ctmhd/parallel.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace ctmhd {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::SparseMatrix<double> with_pins(const SpMat& A, const std::vector<int>& pinned) {
  std::vector<bool> mask(A.rows(), false);
  for (int p : pinned) mask[p] = true;
  TripletVec t;
  t.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      if (mask[it.row()] || mask[it.col()]) continue;
      t.emplace_back(it.row(), it.col(), it.value());
    }
  for (int p : pinned) t.emplace_back(p, p, 1.0);
  Eigen::SparseMatrix<double> out(A.rows(), A.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace

std::pair<Eigen::VectorXd, SolveReport> fgmres(const LinOp& A, const LinOp& precond,
                                               const Eigen::VectorXd& b,
                                               const Eigen::VectorXd& x0,
                                               const SolveConfig& cfg) {
  const auto t0 = Clock::now();
  const long n = b.size();
  SolveReport rep;

  Eigen::VectorXd x = x0.size() ? x0 : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = b - A(x);
  const double r0 = r.norm();
  rep.residuals.push_back(1.0);
  if (r0 == 0.0) {
    rep.converged = true;
    rep.seconds = elapsed(t0);
    return {x, rep};
  }

  const int m = cfg.max_iter;
  std::vector<Eigen::VectorXd> V, Z;
  V.reserve(m + 1);
  Z.reserve(m);
  V.push_back(r / r0);

  Eigen::MatrixXd Hm = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
  g(0) = r0;

  int j = 0;
  for (; j < m; ++j) {
    Z.push_back(precond ? precond(V[j]) : V[j]);
    Eigen::VectorXd w = A(Z[j]);

    // modified Gram-Schmidt, one reorthogonalization pass if needed
    for (int i = 0; i <= j; ++i) {
      double h = V[i].dot(w);
      Hm(i, j) = h;
      w -= h * V[i];
    }
    double drift = 0.0;
    for (int i = 0; i <= j; ++i) drift = std::max(drift, std::abs(V[i].dot(w)));
    if (drift > 1e-8 * (w.norm() + 1e-300)) {
      for (int i = 0; i <= j; ++i) {
        double h = V[i].dot(w);
        Hm(i, j) += h;
        w -= h * V[i];
      }
    }
    const double hnext = w.norm();

    // apply stored Givens rotations, then form the new one
    for (int i = 0; i < j; ++i) {
      double t = cs(i) * Hm(i, j) + sn(i) * Hm(i + 1, j);
      Hm(i + 1, j) = -sn(i) * Hm(i, j) + cs(i) * Hm(i + 1, j);
      Hm(i, j) = t;
    }
    double denom = std::hypot(Hm(j, j), hnext);
    cs(j) = denom == 0.0 ? 1.0 : Hm(j, j) / denom;
    sn(j) = denom == 0.0 ? 0.0 : hnext / denom;
    Hm(j, j) = denom;
    g(j + 1) = -sn(j) * g(j);
    g(j) = cs(j) * g(j);

    const double res = std::abs(g(j + 1)) / r0;
    rep.residuals.push_back(res);

    if (res <= cfg.tol || hnext == 0.0) {
      ++j;
      rep.converged = res <= cfg.tol;
      break;
    }
    V.push_back(w / hnext);
  }

  const int k = std::min(j, m);
  if (k > 0) {
    Eigen::VectorXd y =
        Hm.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    for (int i = 0; i < k; ++i) x += y(i) * Z[i];
  }
  rep.iterations = k;
  rep.seconds = elapsed(t0);
  if (!rep.converged) rep.converged = (b - A(x)).norm() <= cfg.tol * r0;
  return {x, rep};
}

std::pair<Eigen::VectorXd, SolveReport> fgmres(const SpMat& A, const Eigen::VectorXd& b,
                                               const SolveConfig& cfg) {
  LinOp op = [&A](const Eigen::VectorXd& v) { return Eigen::VectorXd(A * v); };
  return fgmres(op, LinOp{}, b, Eigen::VectorXd(), cfg);
}

std::pair<Eigen::VectorXd, SolveReport> cg(const SpMat& A, const Eigen::VectorXd& b,
                                           double tol, int max_iter, bool jacobi) {
  const auto t0 = Clock::now();
  SolveReport rep;
  const long n = b.size();
  Eigen::VectorXd invdiag = Eigen::VectorXd::Ones(n);
  if (jacobi)
    for (long i = 0; i < n; ++i) {
      double d = A.coeff(i, i);
      invdiag(i) = d != 0.0 ? 1.0 / d : 1.0;
    }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = b;
  const double r0 = r.norm();
  rep.residuals.push_back(1.0);
  if (r0 == 0.0) {
    rep.converged = true;
    rep.seconds = elapsed(t0);
    return {x, rep};
  }
  Eigen::VectorXd z = invdiag.asDiagonal() * r;
  Eigen::VectorXd p = z;
  double rz = r.dot(z);

  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd Ap = A * p;
    double pAp = p.dot(Ap);
    if (pAp <= 0.0) {
      rep.indefinite = true;
      break;
    }
    double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    rep.iterations = it + 1;
    double res = r.norm() / r0;
    rep.residuals.push_back(res);
    if (res <= tol) {
      rep.converged = true;
      break;
    }
    z = invdiag.asDiagonal() * r;
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  rep.seconds = elapsed(t0);
  return {x, rep};
}

void DirectSolver::factor_lu(const SpMat& A, const std::vector<int>& pinned) {
  pinned_ = pinned;
  use_llt_ = false;
  Eigen::SparseMatrix<double> M = with_pins(A, pinned);
  lu_.compute(M);
  ok_ = lu_.info() == Eigen::Success;
  if (!ok_) throw std::runtime_error("DirectSolver: LU factorization failed");
}

void DirectSolver::factor_llt(const SpMat& A, const std::vector<int>& pinned) {
  pinned_ = pinned;
  use_llt_ = true;
  Eigen::SparseMatrix<double> M = with_pins(A, pinned);
  llt_.compute(M);
  ok_ = llt_.info() == Eigen::Success && llt_.vectorD().minCoeff() > 0.0;
  if (!ok_) throw std::runtime_error("DirectSolver: matrix is not positive definite");
}

Eigen::VectorXd DirectSolver::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd rhs = b;
  for (int p : pinned_) rhs(p) = 0.0;
  return use_llt_ ? Eigen::VectorXd(llt_.solve(rhs)) : Eigen::VectorXd(lu_.solve(rhs));
}

Eigen::VectorXd direct_solve(const SpMat& A, const Eigen::VectorXd& b,
                             const std::vector<int>& pinned) {
  DirectSolver s;
  s.factor_lu(A, pinned);
  return s.solve(b);
}

}  // namespace ctmhd
