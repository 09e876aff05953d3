#pragma once

#include "ctmhd/assembly.hpp"
#include "ctmhd/krylov.hpp"

#include <memory>

namespace ctmhd {

enum class InnerMethod { Direct, Iterative };

struct InnerPolicy {
  InnerMethod method = InnerMethod::Direct;
  double tol = 1e-3;  ///< eps0
  int max_iter = 1000;
};

/// Per-block inner-solve policy for the six steps of the application.
struct PrecondOptions {
  InnerPolicy step_p, step_u, step_r, step_H, step_phi, step_A;
  void set_all(InnerMethod m, double tol = 1e-3) {
    for (InnerPolicy* s : {&step_p, &step_u, &step_r, &step_H, &step_phi, &step_A}) {
      s->method = m;
      s->tol = tol;
    }
  }
};

/// Augmented Lagrangian block preconditioner: upper block-triangular with
/// diagonal blocks
///   Chat = C + M_A,  -L_phi,  Hhat = H + (kappa/Rm) M_H,  -L_r,
///   S_u,  -(1/Re + alpha)^{-1} M_p
/// and off-diagonal blocks 2 G^T, K, 2 D^T, J^T, B^T. Application runs the
/// six back-substitution steps in order p, u, r, H, phi, A with the
/// configured inner solver per step.
class BlockPreconditioner {
 public:
  BlockPreconditioner(const BlockSystem& sys, const Params& params,
                      const Eigen::VectorXd& u_prev, const Eigen::VectorXd& A_prev,
                      const EssentialBc& bc, const PrecondOptions& opt = {},
                      bool f_only = false);

  /// The six solve steps; residual segments ordered (A, phi, H, r, u, p).
  Eigen::VectorXd apply(const Eigen::VectorXd& r) const;

  /// Identical preconditioner except S_u is replaced by the plain F block
  /// (the frozen-Lorentz coupling term dropped).
  BlockPreconditioner f_only_variant() const;

  /// The assembled upper-triangular matrix this object applies the inverse
  /// of, with the phi pin row included (for verification).
  SpMat matrix() const;

  const SpMat& chat() const { return chat_; }
  const SpMat& hhat() const { return hhat_; }
  const SpMat& lphi() const { return lphi_; }
  const SpMat& lr() const { return lr_; }
  const SpMat& su() const { return su_; }
  const SpMat& mp() const { return mp_; }
  double pressure_scale() const { return pressure_scale_; }
  int phi_pin() const { return 0; }

 private:
  BlockPreconditioner() = default;
  void factor();
  Eigen::VectorXd inner_solve(int step, const Eigen::VectorXd& rhs) const;

  const BlockSystem* sys_ = nullptr;
  Params params_;
  Eigen::VectorXd u_prev_, A_prev_;
  EssentialBc bc_;
  PrecondOptions opt_;
  bool f_only_ = false;

  SpMat chat_, hhat_, lphi_, lr_, su_, mp_;
  SpMat gt2_, k_, dt2_, jt_, bt_;  // constrained off-diagonal blocks
  double pressure_scale_ = 1.0;    // 1/Re + alpha

  std::array<std::shared_ptr<DirectSolver>, 6> direct_;  // p,u,r,H,phi,A
};

}  // namespace ctmhd
