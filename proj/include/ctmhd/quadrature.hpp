#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ctmhd {

/// Quadrature rule on the reference tetrahedron, triangle or segment.
/// Points are barycentric; weights sum to the reference measure
/// (1/6, 1/2 and 1 respectively).
struct QuadratureRule {
  Eigen::MatrixXd points;  ///< nq x (dim+1) barycentric coordinates
  Eigen::VectorXd weights;
  int degree = 0;  ///< polynomial exactness

  int size() const { return static_cast<int>(weights.size()); }
};

/// Conical-product rules built from Gauss-Jacobi lines; exact for total
/// degree <= degree. Supported up to degree 20.
QuadratureRule tet_quadrature(int degree);
QuadratureRule triangle_quadrature(int degree);
QuadratureRule segment_quadrature(int degree);

}  // namespace ctmhd
