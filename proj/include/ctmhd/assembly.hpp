#pragma once

#include "ctmhd/fespace.hpp"

#include <Eigen/Sparse>

#include <array>

namespace ctmhd {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Dimensionless problem parameters.
struct Params {
  double Re = 1.0;     ///< Reynolds number
  double Rm = 1.0;     ///< magnetic Reynolds number
  double kappa = 1.0;  ///< coupling number
  double gamma = 10.0; ///< interior penalty
  double alpha = 1.0;  ///< grad-div parameter
};

/// Sparse matrix tagged with the spaces its rows and columns live on.
struct SparseBlock {
  SpaceKind row_space{};
  SpaceKind col_space{};
  SpMat mat;
};

// --- individual forms ---

/// Interior-penalty form of the viscous term on Vh:
/// (1/Re) sum_K (grad u, grad v) + (gamma/Re) sum_F h_F^{-1} ([u],[v])
/// - (1/Re) sum_F ({{du/dn}},[v]) + ({{dv/dn}},[u]).  Symmetric.
SparseBlock assemble_Ah(const FeSpace& Vh, double Re, double gamma);

/// Upwind convection with frozen advecting field w in Vh:
/// -sum_K (u, div(w (x) v)) + sum_K (w.n_K, u_up . v)_{dK}, with the upwind
/// trace taken pointwise at quadrature points and zero on inflow boundary.
SparseBlock assemble_Oh(const FeSpace& Vh, const Eigen::VectorXd& w);

/// alpha (div w, div v) on Vh.
SparseBlock assemble_graddiv(const FeSpace& Vh, double alpha);

/// scale (curl v, curl w) on Wh or Dh. Positive semidefinite; the kernel
/// contains discrete gradients.
SparseBlock assemble_curlcurl(const FeSpace& space, double scale);

/// K block: rows Dh (test d), cols Wh (trial H); entries -(H_j, curl d_i).
SparseBlock assemble_mixed_K(const FeSpace& Wh, const FeSpace& Dh);

/// J block with frozen A_prev in Dh: rows Vh (v), cols Wh (H);
/// entries kappa (curl A_prev x v_i, curl H_j).
SparseBlock assemble_L(const FeSpace& Vh, const FeSpace& Wh, const FeSpace& Dh,
                       const Eigen::VectorXd& A_prev, double kappa);

/// Gradient coupling: rows scal (Yh or Sh), cols vec (Dh or Wh);
/// entries (vec_j, grad scal_i).
SparseBlock assemble_grad(const FeSpace& vec, const FeSpace& scal);

/// B block: rows Qh, cols Vh; entries -(q_i, div v_j).
SparseBlock assemble_B(const FeSpace& Vh, const FeSpace& Qh);

/// Mass matrix of any space.
SparseBlock assemble_mass(const FeSpace& space);

/// scale (grad s, grad t) on Sh or Yh (P2 stiffness), no boundary rows
/// eliminated here.
SparseBlock assemble_scalar_stiffness(const FeSpace& space, double scale);

/// Momentum Schur surrogate: A1 + Oh(u_prev) +
/// kappa Rm (curl A_prev x w, curl A_prev x v), with A1 = Ah + graddiv.
SparseBlock assemble_Su(const FeSpace& Vh, const FeSpace& Dh, const Params& p,
                        const Eigen::VectorXd& u_prev, const Eigen::VectorXd& A_prev);

/// Gram matrix of the dg norm: sum_K (grad u, grad v) + sum_F h_F^{-1}([u],[v]).
SparseBlock assemble_dg_gram(const FeSpace& Vh);

// --- problem data and the coupled system ---

/// Sources and Dirichlet data; empty std::function means zero/absent.
struct ProblemData {
  VectorField f;       ///< momentum source
  VectorField g_H;     ///< H-equation source (manufactured solutions)
  VectorField g_A;     ///< A-equation source
  VectorField u_bdry;  ///< Dirichlet velocity data
  VectorField H_bdry;  ///< tangential-trace data for H
  VectorField A_bdry;  ///< boundary data for A; only its normal component
                       ///< acts, through the phi-row flux term
};

/// The 6x6 block matrix and right-hand side in variable order
/// (A, phi, H, r, u, p). Zero blocks of the layout are absent; F already
/// contains A1 + Oh.
struct BlockSystem {
  const FeSpace* Dh = nullptr;
  const FeSpace* Yh = nullptr;
  const FeSpace* Wh = nullptr;
  const FeSpace* Sh = nullptr;
  const FeSpace* Vh = nullptr;
  const FeSpace* Qh = nullptr;

  SparseBlock C, G, K, H, D, J, F, B;

  Eigen::VectorXd b_A, b_phi, b_H, b_r, b_u, b_p;

  /// Segment offsets for (A, phi, H, r, u, p); off[6] is the total size.
  std::array<long, 7> off{};

  long n_total() const { return off[6]; }
  Eigen::VectorXd rhs() const;
  /// Assembles the full coupled matrix (no essential conditions applied).
  SpMat monolithic() const;
};

/// Assemble all blocks and load vectors for one Picard step with frozen
/// u_prev (Vh coefficients) and A_prev (Dh coefficients).
BlockSystem assemble_system(const FeSpace& Dh, const FeSpace& Yh, const FeSpace& Wh,
                            const FeSpace& Sh, const FeSpace& Vh, const FeSpace& Qh,
                            const Params& params, const Eigen::VectorXd& u_prev,
                            const Eigen::VectorXd& A_prev, const ProblemData& data);

/// Essential boundary conditions: full-size value vectors (zero on free DOFs)
/// and the constrained-DOF masks per space.
struct EssentialBc {
  Eigen::VectorXd gA, gH, gr, gu;
  std::vector<bool> maskA, maskH, maskr, masku;

  static EssentialBc from_data(const FeSpace& Dh, const FeSpace& Wh, const FeSpace& Sh,
                               const FeSpace& Vh, const ProblemData& data);
  /// Constrained values concatenated into a full state-sized vector.
  Eigen::VectorXd lift(const BlockSystem& sys) const;
};

/// Monolithic operator and right-hand side with essential DOFs eliminated
/// symmetrically: constrained rows/columns become identity, the right-hand
/// side receives -A*g on free rows and the boundary value on constrained rows.
void apply_essential(const BlockSystem& sys, const EssentialBc& bc, SpMat& A_out,
                     Eigen::VectorXd& b_out);

/// Copy with constrained rows/columns zeroed; optionally unit diagonal on
/// constrained rows (square blocks).
SpMat constrained(const SpMat& m, const std::vector<bool>* row_mask,
                  const std::vector<bool>* col_mask, bool unit_diag);

}  // namespace ctmhd
