#include "ctmhd/fespace.hpp"

#include <Eigen/LU>

#include <cassert>
#include <stdexcept>

namespace ctmhd {

namespace {

constexpr int kLocalEdge[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

// P2 Lagrange shapes in barycentric coordinates: 4 vertex + 6 edge functions.
Eigen::VectorXd p2_values(const Eigen::Vector4d& l) {
  Eigen::VectorXd v(10);
  for (int i = 0; i < 4; ++i) v(i) = l(i) * (2.0 * l(i) - 1.0);
  for (int k = 0; k < 6; ++k) v(4 + k) = 4.0 * l(kLocalEdge[k][0]) * l(kLocalEdge[k][1]);
  return v;
}

Eigen::MatrixXd p2_gradients(const Eigen::Vector4d& l, const Eigen::Matrix<double, 4, 3>& gl) {
  Eigen::MatrixXd g(10, 3);
  for (int i = 0; i < 4; ++i) g.row(i) = (4.0 * l(i) - 1.0) * gl.row(i);
  for (int k = 0; k < 6; ++k) {
    int a = kLocalEdge[k][0], b = kLocalEdge[k][1];
    g.row(4 + k) = 4.0 * (l(a) * gl.row(b) + l(b) * gl.row(a));
  }
  return g;
}

}  // namespace

const char* space_name(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::Vh: return "Vh";
    case SpaceKind::Wh: return "Wh";
    case SpaceKind::Dh: return "Dh";
    case SpaceKind::Qh: return "Qh";
    case SpaceKind::Sh: return "Sh";
    case SpaceKind::Yh: return "Yh";
  }
  return "?";
}

bool is_vector_space(SpaceKind kind) {
  return kind == SpaceKind::Vh || kind == SpaceKind::Wh || kind == SpaceKind::Dh;
}

long dof_count(SpaceKind kind, const TetMesh& mesh) {
  switch (kind) {
    case SpaceKind::Vh: return 3L * mesh.n_faces();
    case SpaceKind::Wh:
    case SpaceKind::Dh: return 2L * mesh.n_edges();
    case SpaceKind::Qh: return mesh.n_tets();
    case SpaceKind::Sh:
    case SpaceKind::Yh: return static_cast<long>(mesh.n_vertices()) + mesh.n_edges();
  }
  return 0;
}

Vec3 tet_point(const TetMesh& mesh, int tet, const Eigen::Vector4d& bary) {
  const auto& tv = mesh.tets[tet];
  Vec3 x = Vec3::Zero();
  for (int i = 0; i < 4; ++i) x += bary(i) * mesh.vertices[tv[i]];
  return x;
}

Eigen::Matrix<double, 4, 3> barycentric_gradients(const TetMesh& mesh, int tet) {
  const auto& tv = mesh.tets[tet];
  Eigen::Matrix3d E;
  for (int i = 0; i < 3; ++i) E.col(i) = mesh.vertices[tv[i + 1]] - mesh.vertices[tv[0]];
  Eigen::Matrix3d Einv = E.inverse();
  Eigen::Matrix<double, 4, 3> g;
  for (int i = 0; i < 3; ++i) g.row(i + 1) = Einv.row(i);
  g.row(0) = -(g.row(1) + g.row(2) + g.row(3));
  return g;
}

Eigen::Vector4d tet_barycentric(const TetMesh& mesh, int tet, const Vec3& x) {
  const auto& tv = mesh.tets[tet];
  Eigen::Matrix3d E;
  for (int i = 0; i < 3; ++i) E.col(i) = mesh.vertices[tv[i + 1]] - mesh.vertices[tv[0]];
  Vec3 l = E.inverse() * (x - mesh.vertices[tv[0]]);
  return Eigen::Vector4d(1.0 - l.sum(), l(0), l(1), l(2));
}

Vec3 face_point(const TetMesh& mesh, int face, const Eigen::Vector3d& bary) {
  const Face& f = mesh.faces[face];
  return bary(0) * mesh.vertices[f.v[0]] + bary(1) * mesh.vertices[f.v[1]] +
         bary(2) * mesh.vertices[f.v[2]];
}

Eigen::Vector3d face_moments(const TetMesh& mesh, int face, const VectorField& f, int qdeg) {
  const QuadratureRule rule = triangle_quadrature(qdeg);
  const Face& fc = mesh.faces[face];
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  for (int q = 0; q < rule.size(); ++q) {
    Eigen::Vector3d b = rule.points.row(q);
    double fn = f(face_point(mesh, face, b)).dot(fc.normal);
    // weights sum to 1/2 on the reference triangle; normalization by |F|
    // leaves a plain factor 2.
    m += 2.0 * rule.weights(q) * fn * b;
  }
  return m;
}

Eigen::Vector2d edge_moments(const TetMesh& mesh, int edge, const VectorField& f, int qdeg) {
  const QuadratureRule rule = segment_quadrature(qdeg);
  const Edge& e = mesh.edges[edge];
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (int q = 0; q < rule.size(); ++q) {
    Eigen::Vector2d b = rule.points.row(q);
    Vec3 x = b(0) * mesh.vertices[e.v[0]] + b(1) * mesh.vertices[e.v[1]];
    double ft = f(x).dot(e.tangent);
    m += rule.weights(q) * ft * b;
  }
  return m;
}

FeSpace::FeSpace(SpaceKind kind, const TetMesh& mesh) : kind_(kind), mesh_(&mesh) {
  n_dofs_ = static_cast<int>(dof_count(kind, mesh));
  switch (kind) {
    case SpaceKind::Vh:
    case SpaceKind::Wh:
    case SpaceKind::Dh: n_local_ = 12; break;
    case SpaceKind::Sh:
    case SpaceKind::Yh: n_local_ = 10; break;
    case SpaceKind::Qh: n_local_ = 1; break;
  }
  build_dof_map();
  if (is_vector_space(kind)) build_vector_basis();
}

void FeSpace::build_dof_map() {
  const TetMesh& m = *mesh_;
  tet_dofs_.resize(static_cast<size_t>(m.n_tets()) * n_local_);
  essential_.assign(n_dofs_, false);

  for (int t = 0; t < m.n_tets(); ++t) {
    int* dofs = &tet_dofs_[static_cast<size_t>(t) * n_local_];
    switch (kind_) {
      case SpaceKind::Vh:
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 3; ++j) dofs[3 * i + j] = 3 * m.tet_faces[t][i] + j;
        break;
      case SpaceKind::Wh:
      case SpaceKind::Dh:
        for (int k = 0; k < 6; ++k)
          for (int j = 0; j < 2; ++j) dofs[2 * k + j] = 2 * m.tet_edges[t][k] + j;
        break;
      case SpaceKind::Sh:
      case SpaceKind::Yh:
        for (int i = 0; i < 4; ++i) dofs[i] = m.tets[t][i];
        for (int k = 0; k < 6; ++k) dofs[4 + k] = m.n_vertices() + m.tet_edges[t][k];
        break;
      case SpaceKind::Qh: dofs[0] = t; break;
    }
  }

  switch (kind_) {
    case SpaceKind::Vh:
      for (int f = 0; f < m.n_faces(); ++f)
        if (m.faces[f].on_boundary())
          for (int j = 0; j < 3; ++j) essential_[3 * f + j] = true;
      break;
    case SpaceKind::Wh:
    case SpaceKind::Dh:
      for (int e = 0; e < m.n_edges(); ++e)
        if (m.edges[e].on_boundary)
          for (int j = 0; j < 2; ++j) essential_[2 * e + j] = true;
      break;
    case SpaceKind::Sh:
      for (int v = 0; v < m.n_vertices(); ++v)
        if (m.vertex_on_boundary[v]) essential_[v] = true;
      for (int e = 0; e < m.n_edges(); ++e)
        if (m.edges[e].on_boundary) essential_[m.n_vertices() + e] = true;
      break;
    case SpaceKind::Yh:
    case SpaceKind::Qh: break;  // pure Neumann / mean-constrained: no essential DOFs
  }
}

void FeSpace::build_vector_basis() {
  const TetMesh& m = *mesh_;
  const QuadratureRule tri = triangle_quadrature(3);
  const QuadratureRule seg = segment_quadrature(3);
  basis_coef_.resize(m.n_tets());

  for (int t = 0; t < m.n_tets(); ++t) {
    const Vec3 center = m.tet_centroid(t);
    const double ht = m.tet_diameter[t];
    auto mono = [&](int k, const Vec3& x) -> double {
      int s = k / 3;
      if (s == 0) return 1.0;
      return (x(s - 1) - center(s - 1)) / ht;
    };

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(12, 12);
    if (kind_ == SpaceKind::Vh) {
      for (int i = 0; i < 4; ++i) {
        const Face& f = m.face_of(t, i);
        for (int q = 0; q < tri.size(); ++q) {
          Eigen::Vector3d b = tri.points.row(q);
          Vec3 x = face_point(m, m.tet_faces[t][i], b);
          for (int k = 0; k < 12; ++k) {
            double mn = mono(k, x) * f.normal(k % 3);
            for (int j = 0; j < 3; ++j) M(3 * i + j, k) += 2.0 * tri.weights(q) * mn * b(j);
          }
        }
      }
    } else {
      for (int kedge = 0; kedge < 6; ++kedge) {
        const Edge& e = m.edges[m.tet_edges[t][kedge]];
        for (int q = 0; q < seg.size(); ++q) {
          Eigen::Vector2d b = seg.points.row(q);
          Vec3 x = b(0) * m.vertices[e.v[0]] + b(1) * m.vertices[e.v[1]];
          for (int k = 0; k < 12; ++k) {
            double mt = mono(k, x) * e.tangent(k % 3);
            for (int j = 0; j < 2; ++j) M(2 * kedge + j, k) += seg.weights(q) * mt * b(j);
          }
        }
      }
    }
    basis_coef_[t] = M.inverse();
  }
}

Eigen::MatrixXd FeSpace::vector_values(int tet, const Eigen::Vector4d& bary) const {
  assert(is_vector_space(kind_));
  const Vec3 x = tet_point(*mesh_, tet, bary);
  const Vec3 center = mesh_->tet_centroid(tet);
  const double ht = mesh_->tet_diameter[tet];
  Eigen::Vector4d mono(1.0, (x(0) - center(0)) / ht, (x(1) - center(1)) / ht,
                       (x(2) - center(2)) / ht);
  const Eigen::MatrixXd& C = basis_coef_[tet];
  Eigen::MatrixXd vals(12, 3);
  for (int i = 0; i < 12; ++i)
    for (int r = 0; r < 3; ++r) {
      double v = 0.0;
      for (int s = 0; s < 4; ++s) v += C(3 * s + r, i) * mono(s);
      vals(i, r) = v;
    }
  return vals;
}

std::vector<Eigen::Matrix3d> FeSpace::vector_gradients(int tet) const {
  assert(is_vector_space(kind_));
  const double ht = mesh_->tet_diameter[tet];
  const Eigen::MatrixXd& C = basis_coef_[tet];
  std::vector<Eigen::Matrix3d> g(12);
  for (int i = 0; i < 12; ++i)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) g[i](r, c) = C(3 * (c + 1) + r, i) / ht;
  return g;
}

Eigen::MatrixXd FeSpace::vector_curls(int tet) const {
  auto g = vector_gradients(tet);
  Eigen::MatrixXd curls(12, 3);
  for (int i = 0; i < 12; ++i) {
    curls(i, 0) = g[i](2, 1) - g[i](1, 2);
    curls(i, 1) = g[i](0, 2) - g[i](2, 0);
    curls(i, 2) = g[i](1, 0) - g[i](0, 1);
  }
  return curls;
}

Eigen::VectorXd FeSpace::vector_divs(int tet) const {
  auto g = vector_gradients(tet);
  Eigen::VectorXd d(12);
  for (int i = 0; i < 12; ++i) d(i) = g[i].trace();
  return d;
}

Eigen::VectorXd FeSpace::scalar_values(int tet, const Eigen::Vector4d& bary) const {
  assert(!is_vector_space(kind_));
  if (kind_ == SpaceKind::Qh) return Eigen::VectorXd::Ones(1);
  return p2_values(bary);
}

Eigen::MatrixXd FeSpace::scalar_gradients(int tet, const Eigen::Vector4d& bary) const {
  assert(!is_vector_space(kind_));
  if (kind_ == SpaceKind::Qh) return Eigen::MatrixXd::Zero(1, 3);
  return p2_gradients(bary, barycentric_gradients(*mesh_, tet));
}

Vec3 FeSpace::eval_vector(int tet, const Eigen::Vector4d& bary, const Eigen::VectorXd& coef) const {
  Eigen::MatrixXd vals = vector_values(tet, bary);
  Vec3 out = Vec3::Zero();
  for (int i = 0; i < n_local_; ++i) out += coef(global_dof(tet, i)) * vals.row(i).transpose();
  return out;
}

Vec3 FeSpace::eval_curl(int tet, const Eigen::VectorXd& coef) const {
  Eigen::MatrixXd curls = vector_curls(tet);
  Vec3 out = Vec3::Zero();
  for (int i = 0; i < n_local_; ++i) out += coef(global_dof(tet, i)) * curls.row(i).transpose();
  return out;
}

double FeSpace::eval_div(int tet, const Eigen::VectorXd& coef) const {
  Eigen::VectorXd divs = vector_divs(tet);
  double out = 0.0;
  for (int i = 0; i < n_local_; ++i) out += coef(global_dof(tet, i)) * divs(i);
  return out;
}

Eigen::Matrix3d FeSpace::eval_grad(int tet, const Eigen::VectorXd& coef) const {
  auto g = vector_gradients(tet);
  Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n_local_; ++i) out += coef(global_dof(tet, i)) * g[i];
  return out;
}

double FeSpace::eval_scalar(int tet, const Eigen::Vector4d& bary, const Eigen::VectorXd& coef) const {
  Eigen::VectorXd vals = scalar_values(tet, bary);
  double out = 0.0;
  for (int i = 0; i < n_local_; ++i) out += coef(global_dof(tet, i)) * vals(i);
  return out;
}

Vec3 FeSpace::eval_scalar_grad(int tet, const Eigen::Vector4d& bary,
                               const Eigen::VectorXd& coef) const {
  Eigen::MatrixXd g = scalar_gradients(tet, bary);
  Vec3 out = Vec3::Zero();
  for (int i = 0; i < n_local_; ++i) out += coef(global_dof(tet, i)) * g.row(i).transpose();
  return out;
}

Eigen::VectorXd FeSpace::interpolate(const VectorField& f) const {
  if (!is_vector_space(kind_)) throw std::invalid_argument("interpolate: vector field into scalar space");
  const TetMesh& m = *mesh_;
  Eigen::VectorXd coef(n_dofs_);
  if (kind_ == SpaceKind::Vh) {
    for (int fc = 0; fc < m.n_faces(); ++fc) coef.segment<3>(3 * fc) = face_moments(m, fc, f);
  } else {
    for (int e = 0; e < m.n_edges(); ++e) coef.segment<2>(2 * e) = edge_moments(m, e, f);
  }
  return coef;
}

Eigen::VectorXd FeSpace::interpolate(const ScalarField& f) const {
  const TetMesh& m = *mesh_;
  Eigen::VectorXd coef(n_dofs_);
  if (kind_ == SpaceKind::Qh) {
    const QuadratureRule rule = tet_quadrature(6);
    for (int t = 0; t < m.n_tets(); ++t) {
      double s = 0.0;
      for (int q = 0; q < rule.size(); ++q)
        s += rule.weights(q) * f(tet_point(m, t, rule.points.row(q)));
      coef(t) = 6.0 * s;  // reference weights sum to 1/6; cell mean
    }
  } else if (kind_ == SpaceKind::Sh || kind_ == SpaceKind::Yh) {
    for (int v = 0; v < m.n_vertices(); ++v) coef(v) = f(m.vertices[v]);
    for (int e = 0; e < m.n_edges(); ++e)
      coef(m.n_vertices() + e) = f(0.5 * (m.vertices[m.edges[e].v[0]] + m.vertices[m.edges[e].v[1]]));
  } else {
    throw std::invalid_argument("interpolate: scalar field into vector space");
  }
  return coef;
}

std::vector<std::pair<int, double>> FeSpace::boundary_values(const VectorField& f) const {
  const TetMesh& m = *mesh_;
  std::vector<std::pair<int, double>> out;
  if (kind_ == SpaceKind::Vh) {
    for (int fc = 0; fc < m.n_faces(); ++fc) {
      if (!m.faces[fc].on_boundary()) continue;
      Eigen::Vector3d mm = face_moments(m, fc, f);
      for (int j = 0; j < 3; ++j) out.emplace_back(3 * fc + j, mm(j));
    }
  } else if (kind_ == SpaceKind::Wh || kind_ == SpaceKind::Dh) {
    for (int e = 0; e < m.n_edges(); ++e) {
      if (!m.edges[e].on_boundary) continue;
      Eigen::Vector2d mm = edge_moments(m, e, f);
      for (int j = 0; j < 2; ++j) out.emplace_back(2 * e + j, mm(j));
    }
  } else {
    throw std::invalid_argument("boundary_values: vector data for scalar space");
  }
  return out;
}

std::vector<std::pair<int, double>> FeSpace::boundary_values(const ScalarField& f) const {
  const TetMesh& m = *mesh_;
  if (kind_ != SpaceKind::Sh) throw std::invalid_argument("boundary_values: scalar data only for Sh");
  std::vector<std::pair<int, double>> out;
  for (int v = 0; v < m.n_vertices(); ++v)
    if (m.vertex_on_boundary[v]) out.emplace_back(v, f(m.vertices[v]));
  for (int e = 0; e < m.n_edges(); ++e)
    if (m.edges[e].on_boundary)
      out.emplace_back(m.n_vertices() + e,
                       f(0.5 * (m.vertices[m.edges[e].v[0]] + m.vertices[m.edges[e].v[1]])));
  return out;
}

}  // namespace ctmhd
