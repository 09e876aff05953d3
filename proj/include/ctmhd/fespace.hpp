#pragma once

#include "ctmhd/mesh.hpp"
#include "ctmhd/quadrature.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace ctmhd {

/// The six discrete spaces:
///   Vh    BDM1: full P1 vectors, H(div)-conforming, 3 DOFs per face
///         (moments of v.n against P1 on the face)
///   Wh,Dh second-kind Nedelec: full P1 vectors, H(curl)-conforming,
///         2 DOFs per edge (moments of v.t against P1 on the edge)
///   Qh    piecewise constants, 1 DOF per tet
///   Sh,Yh continuous P2, 1 DOF per vertex + 1 per edge
enum class SpaceKind { Vh, Wh, Dh, Qh, Sh, Yh };

const char* space_name(SpaceKind kind);
bool is_vector_space(SpaceKind kind);

/// Total DOF count: Vh = 3F, Wh = Dh = 2E, Sh = Yh = V + E, Qh = T.
/// Counts are pre-elimination of essential boundary conditions.
long dof_count(SpaceKind kind, const TetMesh& mesh);

using ScalarField = std::function<double(const Vec3&)>;
using VectorField = std::function<Vec3(const Vec3&)>;

/// Reference basis, DOF functionals, global DOF map and interpolation for
/// one discrete space on one mesh. Immutable after construction; all
/// evaluation is pure and reentrant.
class FeSpace {
 public:
  FeSpace(SpaceKind kind, const TetMesh& mesh);

  SpaceKind kind() const { return kind_; }
  const TetMesh& mesh() const { return *mesh_; }
  int n_dofs() const { return n_dofs_; }
  int n_local() const { return n_local_; }
  int global_dof(int tet, int local) const { return tet_dofs_[tet * n_local_ + local]; }

  /// DOFs that carry essential boundary data for this space (boundary faces
  /// for Vh, boundary edges for Wh/Dh, boundary vertices+edges for Sh; none
  /// for Qh/Yh).
  const std::vector<bool>& essential_dofs() const { return essential_; }

  // --- basis evaluation (local index order matches global_dof) ---

  /// Vector shape values at a barycentric point: n_local x 3.
  Eigen::MatrixXd vector_values(int tet, const Eigen::Vector4d& bary) const;
  /// Constant-per-tet gradients of the vector shapes; G[i](r,c) = d(N_i)_r/dx_c.
  std::vector<Eigen::Matrix3d> vector_gradients(int tet) const;
  /// Constant-per-tet curls, n_local x 3 (row i = curl N_i).
  Eigen::MatrixXd vector_curls(int tet) const;
  /// Constant-per-tet divergences.
  Eigen::VectorXd vector_divs(int tet) const;

  /// Scalar shape values at a barycentric point.
  Eigen::VectorXd scalar_values(int tet, const Eigen::Vector4d& bary) const;
  /// Scalar shape gradients at a barycentric point: n_local x 3.
  Eigen::MatrixXd scalar_gradients(int tet, const Eigen::Vector4d& bary) const;

  // --- fields represented by a global coefficient vector ---

  Vec3 eval_vector(int tet, const Eigen::Vector4d& bary, const Eigen::VectorXd& coef) const;
  Vec3 eval_curl(int tet, const Eigen::VectorXd& coef) const;
  double eval_div(int tet, const Eigen::VectorXd& coef) const;
  Eigen::Matrix3d eval_grad(int tet, const Eigen::VectorXd& coef) const;
  double eval_scalar(int tet, const Eigen::Vector4d& bary, const Eigen::VectorXd& coef) const;
  Vec3 eval_scalar_grad(int tet, const Eigen::Vector4d& bary, const Eigen::VectorXd& coef) const;

  /// Apply the DOF functionals to a smooth field (face/edge moments by
  /// quadrature, point values for Sh/Yh, cell means for Qh).
  Eigen::VectorXd interpolate(const VectorField& f) const;
  Eigen::VectorXd interpolate(const ScalarField& f) const;

  /// DOF values of essential boundary data: pairs (global dof, value) for
  /// every essential DOF, from the same functionals as interpolate().
  std::vector<std::pair<int, double>> boundary_values(const VectorField& f) const;
  std::vector<std::pair<int, double>> boundary_values(const ScalarField& f) const;

 private:
  void build_vector_basis();
  void build_dof_map();

  SpaceKind kind_;
  const TetMesh* mesh_;
  int n_dofs_ = 0;
  int n_local_ = 0;
  std::vector<int> tet_dofs_;
  std::vector<bool> essential_;
  /// Vh/Wh/Dh: per-tet 12x12 coefficients of the dual basis in scaled
  /// monomials m_{3s+c} = e_c * s((x - center)/h_t).
  std::vector<Eigen::MatrixXd> basis_coef_;
};

// --- geometry helpers shared by assembly and interpolation ---

/// Physical point of a barycentric point in tet t.
Vec3 tet_point(const TetMesh& mesh, int tet, const Eigen::Vector4d& bary);
/// Barycentric coordinates in tet t of a physical point.
Eigen::Vector4d tet_barycentric(const TetMesh& mesh, int tet, const Vec3& x);
/// Constant barycentric gradients of tet t, 4 x 3 (row i = grad lambda_i).
Eigen::Matrix<double, 4, 3> barycentric_gradients(const TetMesh& mesh, int tet);
/// Physical point of a barycentric point on face f.
Vec3 face_point(const TetMesh& mesh, int face, const Eigen::Vector3d& bary);

/// Moments of (f.n_F, P1 basis) over one face, normalized by |F|.
Eigen::Vector3d face_moments(const TetMesh& mesh, int face, const VectorField& f, int qdeg = 6);
/// Moments of (f.t_e, P1 basis) over one edge, normalized by |e|.
Eigen::Vector2d edge_moments(const TetMesh& mesh, int edge, const VectorField& f, int qdeg = 5);

}  // namespace ctmhd
