#pragma once

#include "ctmhd/assembly.hpp"
#include "ctmhd/precond.hpp"

#include <array>
#include <memory>
#include <optional>

namespace ctmhd {

/// Coefficient segments of the coupled solution.
struct State {
  Eigen::VectorXd xA;    ///< Dh
  Eigen::VectorXd xphi;  ///< Yh
  Eigen::VectorXd xH;    ///< Wh
  Eigen::VectorXd xr;    ///< Sh
  Eigen::VectorXd xu;    ///< Vh
  Eigen::VectorXd xp;    ///< Qh
};

struct PicardConfig {
  double delta = 1e-4;   ///< nonlinear tolerance on Theta(u)+Theta(H)+Theta(A)
  int max_picard = 100;
  SolveConfig linear;    ///< FGMRES settings (eps, 200 iterations, no restart)
  PrecondOptions inner;
  bool f_only_precond = false;
};

struct PicardReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> theta_u, theta_H, theta_A;
  std::vector<int> gmres_iters;
  std::vector<bool> gmres_ok;
  double seconds = 0.0;

  double mean_gmres() const;
};

/// Closed-form exact fields with derived sources, all satisfying the strong
/// equations; div u = div H = div A = 0 analytically.
struct ManufacturedCase {
  VectorField u, H, A;
  ScalarField p;
  VectorField f, g_H, g_A;
  std::function<Eigen::Matrix3d(const Vec3&)> grad_u;  ///< (r,c) = du_r/dx_c
  VectorField curl_H, curl_A;
};

/// A = (sin z, 0, 0), H = (0, cos z, 0), u = (cos z, sin(x+z), 0),
/// p = x + y - 1, phi = r = 0, at Re = Rm = kappa = 1.
ManufacturedCase manufactured_case_example1();

/// Sources and Dirichlet data of a manufactured case.
ProblemData problem_data(const ManufacturedCase& c);

/// Driven cavity: f = 0, boundary data A = (0,0,-y), H = (-1,0,0),
/// u = (v,0,0) with v = 1 on the lid z = 1, v = 0 for z <= 1-h and a linear
/// ramp in between (h is the mesh size).
ProblemData cavity_benchmark(const TetMesh& mesh);

/// The six spaces and cached mass matrices for one mesh; runs the Picard
/// iteration. One instance per problem; assembly and solves may parallelize
/// internally, the driver itself is sequential.
class MhdProblem {
 public:
  MhdProblem(const TetMesh& mesh, const Params& params);

  const TetMesh& mesh() const { return *mesh_; }
  const Params& params() const { return params_; }
  const FeSpace& space(SpaceKind k) const;

  State zero_state() const;
  State split(const Eigen::VectorXd& x) const;
  Eigen::VectorXd concat(const State& s) const;

  /// Relative L2 update norms (Theta_u, Theta_H, Theta_A) via mass-matrix
  /// inner products. Theta = 0 when both norms vanish, +inf when only the
  /// current one does.
  std::array<double, 3> stopping_theta(const State& current, const State& previous) const;

  /// Picard iteration: freeze (u, A), assemble, solve by right-preconditioned
  /// FGMRES, repeat until Theta(u)+Theta(H)+Theta(A) < delta. The returned
  /// pressure and phi are shifted to zero mean.
  std::pair<State, PicardReport> picard_solve(const ProblemData& data,
                                              const PicardConfig& cfg) const;

  /// Mean over the box of a Qh or P2 coefficient field.
  double mean_value(SpaceKind kind, const Eigen::VectorXd& coef) const;
  double domain_volume() const { return volume_; }

 private:
  const TetMesh* mesh_;
  Params params_;
  std::unique_ptr<FeSpace> Dh_, Yh_, Wh_, Sh_, Vh_, Qh_;
  SpMat mass_Vh_, mass_Wh_, mass_Dh_;
  double volume_ = 0.0;
};

struct ErrorNorms {
  double u_dg = 0.0;      ///< broken H1 plus h_F^{-1}-weighted jumps
  double p_l2 = 0.0;      ///< after mean-shifting both fields
  double H_hcurl = 0.0;
  double A_hcurl = 0.0;
  double div_u_l2 = 0.0;
};

ErrorNorms error_norms(const MhdProblem& prob, const State& state, const ManufacturedCase& c);

struct DivergenceDiagnostics {
  double div_u_l2 = 0.0;
  double max_flux_jump_J = 0.0;  ///< normal jump of curl H_h over interior faces
  double max_flux_jump_B = 0.0;  ///< normal jump of curl A_h
  double max_cell_div_J = 0.0;   ///< per-tet divergence (affine refit)
  double max_cell_div_B = 0.0;
  double max_weak_div_H = 0.0;   ///< max_s |(H_h, grad s_h)| over free Sh DOFs
  double max_weak_div_A = 0.0;   ///< max_phi |(A_h, grad phi_h) - b_phi|
};

DivergenceDiagnostics divergence_diagnostics(const MhdProblem& prob, const State& state,
                                             const ProblemData* data = nullptr);

}  // namespace ctmhd
