#include "ctmhd/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace ctmhd {

namespace {

constexpr int kMaxDegree = 20;

// Gauss-Jacobi rule with n points for weight (1-t)^alpha on [0,1],
// via Golub-Welsch on the Jacobi recurrence (beta = 0).
void gauss_jacobi(int n, int alpha, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  const double a = alpha;
  for (int k = 0; k < n; ++k) {
    double ak = (k == 0) ? -a / (a + 2.0) : -a * a / ((2.0 * k + a) * (2.0 * k + a + 2.0));
    J(k, k) = ak;
    if (k >= 1) {
      double t = 2.0 * k + a;
      double bk = 4.0 * k * k * (k + a) * (k + a) / (t * t * (t * t - 1.0));
      J(k, k - 1) = J(k - 1, k) = std::sqrt(bk);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::pow(2.0, a + 1.0) / (a + 1.0);  // integral of (1-s)^a over [-1,1]
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x(i) = 0.5 * (1.0 + es.eigenvalues()(i));  // map [-1,1] -> [0,1]
    double v0 = es.eigenvectors()(0, i);
    w(i) = mu0 * v0 * v0 * std::pow(0.5, a + 1.0);
  }
}

int line_points(int degree) { return degree / 2 + 1; }

}  // namespace

QuadratureRule segment_quadrature(int degree) {
  if (degree < 0 || degree > kMaxDegree) throw std::invalid_argument("segment_quadrature: degree");
  Eigen::VectorXd x, w;
  gauss_jacobi(line_points(degree), 0, x, w);
  QuadratureRule rule;
  rule.degree = degree;
  rule.points.resize(x.size(), 2);
  rule.weights = w;
  for (int i = 0; i < x.size(); ++i) {
    rule.points(i, 0) = 1.0 - x(i);
    rule.points(i, 1) = x(i);
  }
  return rule;
}

QuadratureRule triangle_quadrature(int degree) {
  if (degree < 0 || degree > kMaxDegree) throw std::invalid_argument("triangle_quadrature: degree");
  const int n = line_points(degree);
  Eigen::VectorXd xu, wu, xv, wv;
  gauss_jacobi(n, 0, xu, wu);
  gauss_jacobi(n, 1, xv, wv);
  QuadratureRule rule;
  rule.degree = degree;
  rule.points.resize(n * n, 3);
  rule.weights.resize(n * n);
  int q = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j, ++q) {
      double x = xu(i) * (1.0 - xv(j));
      double y = xv(j);
      rule.points(q, 0) = 1.0 - x - y;
      rule.points(q, 1) = x;
      rule.points(q, 2) = y;
      rule.weights(q) = wu(i) * wv(j);
    }
  return rule;
}

QuadratureRule tet_quadrature(int degree) {
  if (degree < 0 || degree > kMaxDegree) throw std::invalid_argument("tet_quadrature: degree");
  const int n = line_points(degree);
  Eigen::VectorXd xu, wu, xv, wv, xw, ww;
  gauss_jacobi(n, 0, xu, wu);
  gauss_jacobi(n, 1, xv, wv);
  gauss_jacobi(n, 2, xw, ww);
  QuadratureRule rule;
  rule.degree = degree;
  rule.points.resize(n * n * n, 4);
  rule.weights.resize(n * n * n);
  int q = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k, ++q) {
        double x = xu(i) * (1.0 - xv(j)) * (1.0 - xw(k));
        double y = xv(j) * (1.0 - xw(k));
        double z = xw(k);
        rule.points(q, 0) = 1.0 - x - y - z;
        rule.points(q, 1) = x;
        rule.points(q, 2) = y;
        rule.points(q, 3) = z;
        rule.weights(q) = wu(i) * wv(j) * ww(k);
      }
  return rule;
}

}  // namespace ctmhd
