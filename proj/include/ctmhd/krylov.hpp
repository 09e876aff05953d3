#pragma once

#include "ctmhd/assembly.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <vector>

namespace ctmhd {

struct SolveConfig {
  double tol = 1e-5;       ///< relative residual target
  int max_iter = 200;      ///< no restart
  double inner_tol = 1e-3; ///< eps0 for preconditioner sub-solves
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> residuals;  ///< |r_k| / |r_0|, monotone for (F)GMRES
  bool converged = false;
  bool indefinite = false;  ///< CG detected negative curvature
  double seconds = 0.0;
};

using LinOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Flexible GMRES with right preconditioning: the preconditioner may vary
/// per iteration (inexact inner solves), so the preconditioned directions
/// are stored. Modified Gram-Schmidt with one reorthogonalization pass when
/// loss of orthogonality exceeds 1e-8. Stops when |b - A x| <= tol |r0|.
std::pair<Eigen::VectorXd, SolveReport> fgmres(const LinOp& A, const LinOp& precond,
                                               const Eigen::VectorXd& b,
                                               const Eigen::VectorXd& x0,
                                               const SolveConfig& cfg);

/// Unpreconditioned convenience overload starting from zero.
std::pair<Eigen::VectorXd, SolveReport> fgmres(const SpMat& A, const Eigen::VectorXd& b,
                                               const SolveConfig& cfg);

/// Conjugate gradients for SPD systems, optional Jacobi preconditioner.
std::pair<Eigen::VectorXd, SolveReport> cg(const SpMat& A, const Eigen::VectorXd& b,
                                           double tol, int max_iter,
                                           bool jacobi = true);

/// Sparse LU solve. Pinned DOFs get identity rows/columns and zero value
/// (null-space representative convention).
Eigen::VectorXd direct_solve(const SpMat& A, const Eigen::VectorXd& b,
                             const std::vector<int>& pinned = {});

/// Reusable factorization with the same pinning convention.
class DirectSolver {
 public:
  DirectSolver() = default;
  void factor_lu(const SpMat& A, const std::vector<int>& pinned = {});
  void factor_llt(const SpMat& A, const std::vector<int>& pinned = {});
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  bool ok() const { return ok_; }

 private:
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> llt_;
  std::vector<int> pinned_;
  bool use_llt_ = false;
  bool ok_ = false;
};

}  // namespace ctmhd
