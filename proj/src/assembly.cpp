#include "ctmhd/assembly.hpp"

#include "ctmhd/parallel.hpp"

#include <stdexcept>

namespace ctmhd {

namespace {

// Exactness degrees: the highest-degree polynomial integrand among the forms
// is 4 (P2 mass); data terms with smooth sources use a finer rule.
constexpr int kVolDegree = 4;
constexpr int kFaceDegree = 3;
constexpr int kDataVolDegree = 6;
constexpr int kDataFaceDegree = 4;

SpMat from_triplets(long rows, long cols, const TripletVec& t) {
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

double phys_vol_weight(const TetMesh& mesh, int tet, double wref) {
  return 6.0 * mesh.tet_volume[tet] * wref;  // reference weights sum to 1/6
}

// Two-sided trace evaluation of Vh basis functions on one face.
struct FaceEval {
  bool boundary = false;
  int nslots = 0;  // 12 on boundary faces, 24 on interior ones
  std::array<int, 24> gdof{};
  std::array<double, 24> jump_sign{};           // +1 for the K+ side, -1 for K-
  std::vector<Eigen::MatrixXd> values;          // per qpoint: nslots x 3
  std::vector<Eigen::Matrix3d> grads;           // per slot, constant
  std::vector<Vec3> xq;
  Eigen::VectorXd wq;                           // physical weights
  double hF = 0.0;
  Vec3 n = Vec3::Zero();
};

FaceEval face_eval(const FeSpace& Vh, int face, const QuadratureRule& tri) {
  const TetMesh& mesh = Vh.mesh();
  const Face& f = mesh.faces[face];
  FaceEval fe;
  fe.boundary = f.on_boundary();
  fe.nslots = fe.boundary ? 12 : 24;
  fe.hF = f.diameter;
  fe.n = f.normal;

  const int tets[2] = {f.tet_plus, f.tet_minus};
  const int nsides = fe.boundary ? 1 : 2;
  for (int s = 0; s < nsides; ++s) {
    auto g = Vh.vector_gradients(tets[s]);
    for (int i = 0; i < 12; ++i) {
      fe.gdof[12 * s + i] = Vh.global_dof(tets[s], i);
      fe.jump_sign[12 * s + i] = (s == 0) ? 1.0 : -1.0;
      fe.grads.push_back(g[i]);
    }
  }

  const int nq = tri.size();
  fe.values.resize(nq);
  fe.xq.resize(nq);
  fe.wq.resize(nq);
  for (int q = 0; q < nq; ++q) {
    Eigen::Vector3d fb = tri.points.row(q);
    Vec3 x = face_point(mesh, face, fb);
    fe.xq[q] = x;
    fe.wq(q) = 2.0 * f.area * tri.weights(q);
    fe.values[q].resize(fe.nslots, 3);
    for (int s = 0; s < nsides; ++s) {
      Eigen::Vector4d tb = tet_barycentric(mesh, tets[s], x);
      fe.values[q].middleRows(12 * s, 12) = Vh.vector_values(tets[s], tb);
    }
  }
  return fe;
}

void scatter(TripletVec& out, const FaceEval& fe, const Eigen::MatrixXd& local) {
  for (int i = 0; i < fe.nslots; ++i)
    for (int j = 0; j < fe.nslots; ++j)
      if (local(i, j) != 0.0) out.emplace_back(fe.gdof[i], fe.gdof[j], local(i, j));
}

}  // namespace

SparseBlock assemble_Ah(const FeSpace& Vh, double Re, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("assemble_Ah: gamma must be positive");
  const TetMesh& mesh = Vh.mesh();
  const QuadratureRule tri = triangle_quadrature(kFaceDegree);

  TripletVec vol = parallel_triplets(mesh.n_tets(), [&](int t, TripletVec& out) {
    auto g = Vh.vector_gradients(t);
    const double c = mesh.tet_volume[t] / Re;
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        out.emplace_back(Vh.global_dof(t, i), Vh.global_dof(t, j),
                         c * g[i].cwiseProduct(g[j]).sum());
  });

  TripletVec fac = parallel_triplets(mesh.n_faces(), [&](int f, TripletVec& out) {
    FaceEval fe = face_eval(Vh, f, tri);
    const double mean_c = fe.boundary ? 1.0 : 0.5;
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(fe.nslots, fe.nslots);
    // normal derivative of each slot, constant over the face
    Eigen::MatrixXd dn(fe.nslots, 3);
    for (int i = 0; i < fe.nslots; ++i) dn.row(i) = mean_c * (fe.grads[i] * fe.n).transpose();
    Eigen::MatrixXd jsum = Eigen::MatrixXd::Zero(fe.nslots, 3);
    for (int q = 0; q < fe.wq.size(); ++q) {
      Eigen::MatrixXd jmp = fe.values[q];
      for (int i = 0; i < fe.nslots; ++i) jmp.row(i) *= fe.jump_sign[i];
      local += (gamma / (Re * fe.hF) * fe.wq(q)) * jmp * jmp.transpose();
      jsum += fe.wq(q) * jmp;
    }
    local -= (dn * jsum.transpose() + jsum * dn.transpose()) / Re;
    scatter(out, fe, local);
  });

  vol.insert(vol.end(), fac.begin(), fac.end());
  return {SpaceKind::Vh, SpaceKind::Vh, from_triplets(Vh.n_dofs(), Vh.n_dofs(), vol)};
}

SparseBlock assemble_dg_gram(const FeSpace& Vh) {
  const TetMesh& mesh = Vh.mesh();
  const QuadratureRule tri = triangle_quadrature(kFaceDegree);

  TripletVec vol = parallel_triplets(mesh.n_tets(), [&](int t, TripletVec& out) {
    auto g = Vh.vector_gradients(t);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        out.emplace_back(Vh.global_dof(t, i), Vh.global_dof(t, j),
                         mesh.tet_volume[t] * g[i].cwiseProduct(g[j]).sum());
  });
  TripletVec fac = parallel_triplets(mesh.n_faces(), [&](int f, TripletVec& out) {
    FaceEval fe = face_eval(Vh, f, tri);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(fe.nslots, fe.nslots);
    for (int q = 0; q < fe.wq.size(); ++q) {
      Eigen::MatrixXd jmp = fe.values[q];
      for (int i = 0; i < fe.nslots; ++i) jmp.row(i) *= fe.jump_sign[i];
      local += (fe.wq(q) / fe.hF) * jmp * jmp.transpose();
    }
    scatter(out, fe, local);
  });
  vol.insert(vol.end(), fac.begin(), fac.end());
  return {SpaceKind::Vh, SpaceKind::Vh, from_triplets(Vh.n_dofs(), Vh.n_dofs(), vol)};
}

SparseBlock assemble_Oh(const FeSpace& Vh, const Eigen::VectorXd& w) {
  const TetMesh& mesh = Vh.mesh();
  const QuadratureRule vol = tet_quadrature(kVolDegree);
  const QuadratureRule tri = triangle_quadrature(kFaceDegree);

  TripletVec tv = parallel_triplets(mesh.n_tets(), [&](int t, TripletVec& out) {
    auto g = Vh.vector_gradients(t);
    const double divw = Vh.eval_div(t, w);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(12, 12);
    for (int q = 0; q < vol.size(); ++q) {
      Eigen::Vector4d b = vol.points.row(q);
      const double wq = phys_vol_weight(mesh, t, vol.weights(q));
      Eigen::MatrixXd vals = Vh.vector_values(t, b);
      Vec3 wvec = Vh.eval_vector(t, b, w);
      // row = test i, col = trial j: -(N_j . N_i) div w - N_j . (grad N_i) w
      for (int i = 0; i < 12; ++i) {
        Vec3 gw = g[i] * wvec;
        for (int j = 0; j < 12; ++j) {
          double unj = vals.row(j).dot(vals.row(i));
          local(i, j) -= wq * (unj * divw + vals.row(j).dot(gw));
        }
      }
    }
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        if (local(i, j) != 0.0)
          out.emplace_back(Vh.global_dof(t, i), Vh.global_dof(t, j), local(i, j));
  });

  TripletVec fv = parallel_triplets(mesh.n_faces(), [&](int f, TripletVec& out) {
    FaceEval fe = face_eval(Vh, f, tri);
    const Face& fc = mesh.faces[f];
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(fe.nslots, fe.nslots);
    for (int q = 0; q < fe.wq.size(); ++q) {
      Eigen::Vector4d bp = tet_barycentric(mesh, fc.tet_plus, fe.xq[q]);
      const double s = Vh.eval_vector(fc.tet_plus, bp, w).dot(fe.n);
      // upwind trace, pointwise: from K+ if s >= 0, from K- if s < 0;
      // zero on inflow boundary (handled in the load vector when data given)
      int up_lo;
      if (s >= 0.0)
        up_lo = 0;
      else if (!fe.boundary)
        up_lo = 12;
      else
        continue;
      for (int i = 0; i < fe.nslots; ++i) {
        const double si = fe.jump_sign[i];
        for (int j = up_lo; j < up_lo + 12; ++j)
          local(i, j) += fe.wq(q) * s * si * fe.values[q].row(i).dot(fe.values[q].row(j));
      }
    }
    scatter(out, fe, local);
  });

  tv.insert(tv.end(), fv.begin(), fv.end());
  return {SpaceKind::Vh, SpaceKind::Vh, from_triplets(Vh.n_dofs(), Vh.n_dofs(), tv)};
}

SparseBlock assemble_graddiv(const FeSpace& Vh, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("assemble_graddiv: alpha must be >= 0");
  const TetMesh& mesh = Vh.mesh();
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    Eigen::VectorXd d = Vh.vector_divs(k);
    const double c = alpha * mesh.tet_volume[k];
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        out.emplace_back(Vh.global_dof(k, i), Vh.global_dof(k, j), c * d(i) * d(j));
  });
  return {SpaceKind::Vh, SpaceKind::Vh, from_triplets(Vh.n_dofs(), Vh.n_dofs(), t)};
}

SparseBlock assemble_curlcurl(const FeSpace& space, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("assemble_curlcurl: scale must be positive");
  const TetMesh& mesh = space.mesh();
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    Eigen::MatrixXd c = space.vector_curls(k);
    const double s = scale * mesh.tet_volume[k];
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        out.emplace_back(space.global_dof(k, i), space.global_dof(k, j),
                         s * c.row(i).dot(c.row(j)));
  });
  return {space.kind(), space.kind(), from_triplets(space.n_dofs(), space.n_dofs(), t)};
}

SparseBlock assemble_mixed_K(const FeSpace& Wh, const FeSpace& Dh) {
  const TetMesh& mesh = Wh.mesh();
  const QuadratureRule vol = tet_quadrature(kVolDegree);
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    Eigen::MatrixXd curld = Dh.vector_curls(k);
    Eigen::MatrixXd wbar = Eigen::MatrixXd::Zero(12, 3);
    for (int q = 0; q < vol.size(); ++q)
      wbar += phys_vol_weight(mesh, k, vol.weights(q)) *
              Wh.vector_values(k, vol.points.row(q));
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        out.emplace_back(Dh.global_dof(k, i), Wh.global_dof(k, j),
                         -wbar.row(j).dot(curld.row(i)));
  });
  return {SpaceKind::Dh, SpaceKind::Wh, from_triplets(Dh.n_dofs(), Wh.n_dofs(), t)};
}

SparseBlock assemble_L(const FeSpace& Vh, const FeSpace& Wh, const FeSpace& Dh,
                       const Eigen::VectorXd& A_prev, double kappa) {
  const TetMesh& mesh = Vh.mesh();
  const QuadratureRule vol = tet_quadrature(kVolDegree);
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    const Vec3 c = Dh.eval_curl(k, A_prev);
    Eigen::MatrixXd curlw = Wh.vector_curls(k);
    Eigen::MatrixXd vbar = Eigen::MatrixXd::Zero(12, 3);
    for (int q = 0; q < vol.size(); ++q)
      vbar += phys_vol_weight(mesh, k, vol.weights(q)) *
              Vh.vector_values(k, vol.points.row(q));
    for (int i = 0; i < 12; ++i) {
      Vec3 cv = c.cross(Vec3(vbar.row(i)));
      for (int j = 0; j < 12; ++j)
        out.emplace_back(Vh.global_dof(k, i), Wh.global_dof(k, j),
                         kappa * cv.dot(curlw.row(j)));
    }
  });
  return {SpaceKind::Vh, SpaceKind::Wh, from_triplets(Vh.n_dofs(), Wh.n_dofs(), t)};
}

SparseBlock assemble_grad(const FeSpace& vec, const FeSpace& scal) {
  const TetMesh& mesh = vec.mesh();
  const QuadratureRule vol = tet_quadrature(kVolDegree);
  const int nv = vec.n_local(), ns = scal.n_local();
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(ns, nv);
    for (int q = 0; q < vol.size(); ++q) {
      Eigen::Vector4d b = vol.points.row(q);
      const double wq = phys_vol_weight(mesh, k, vol.weights(q));
      Eigen::MatrixXd vv = vec.vector_values(k, b);
      Eigen::MatrixXd sg = scal.scalar_gradients(k, b);
      local += wq * sg * vv.transpose();
    }
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < nv; ++j)
        out.emplace_back(scal.global_dof(k, i), vec.global_dof(k, j), local(i, j));
  });
  return {scal.kind(), vec.kind(), from_triplets(scal.n_dofs(), vec.n_dofs(), t)};
}

SparseBlock assemble_B(const FeSpace& Vh, const FeSpace& Qh) {
  const TetMesh& mesh = Vh.mesh();
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    Eigen::VectorXd d = Vh.vector_divs(k);
    for (int j = 0; j < 12; ++j)
      out.emplace_back(Qh.global_dof(k, 0), Vh.global_dof(k, j),
                       -mesh.tet_volume[k] * d(j));
  });
  return {SpaceKind::Qh, SpaceKind::Vh, from_triplets(Qh.n_dofs(), Vh.n_dofs(), t)};
}

SparseBlock assemble_mass(const FeSpace& space) {
  const TetMesh& mesh = space.mesh();
  const QuadratureRule vol = tet_quadrature(kVolDegree);
  const int n = space.n_local();
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(n, n);
    for (int q = 0; q < vol.size(); ++q) {
      const double wq = phys_vol_weight(mesh, k, vol.weights(q));
      if (is_vector_space(space.kind())) {
        Eigen::MatrixXd v = space.vector_values(k, vol.points.row(q));
        local += wq * v * v.transpose();
      } else {
        Eigen::VectorXd v = space.scalar_values(k, vol.points.row(q));
        local += wq * v * v.transpose();
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out.emplace_back(space.global_dof(k, i), space.global_dof(k, j), local(i, j));
  });
  return {space.kind(), space.kind(), from_triplets(space.n_dofs(), space.n_dofs(), t)};
}

SparseBlock assemble_scalar_stiffness(const FeSpace& space, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("assemble_scalar_stiffness: scale must be positive");
  const TetMesh& mesh = space.mesh();
  const QuadratureRule vol = tet_quadrature(kVolDegree);
  const int n = space.n_local();
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(n, n);
    for (int q = 0; q < vol.size(); ++q) {
      const double wq = phys_vol_weight(mesh, k, vol.weights(q));
      Eigen::MatrixXd g = space.scalar_gradients(k, vol.points.row(q));
      local += (scale * wq) * g * g.transpose();
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out.emplace_back(space.global_dof(k, i), space.global_dof(k, j), local(i, j));
  });
  return {space.kind(), space.kind(), from_triplets(space.n_dofs(), space.n_dofs(), t)};
}

namespace {

// kappa Rm (curl A_prev x w_j, curl A_prev x v_i) on Vh.
SparseBlock assemble_frozen_lorentz(const FeSpace& Vh, const FeSpace& Dh,
                                    const Eigen::VectorXd& A_prev, double scale) {
  const TetMesh& mesh = Vh.mesh();
  const QuadratureRule vol = tet_quadrature(kVolDegree);
  TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
    const Vec3 c = Dh.eval_curl(k, A_prev);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(12, 12);
    for (int q = 0; q < vol.size(); ++q) {
      const double wq = phys_vol_weight(mesh, k, vol.weights(q));
      Eigen::MatrixXd v = Vh.vector_values(k, vol.points.row(q));
      Eigen::MatrixXd cv(12, 3);
      for (int i = 0; i < 12; ++i) cv.row(i) = c.cross(Vec3(v.row(i)));
      local += (scale * wq) * cv * cv.transpose();
    }
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        out.emplace_back(Vh.global_dof(k, i), Vh.global_dof(k, j), local(i, j));
  });
  return {SpaceKind::Vh, SpaceKind::Vh, from_triplets(Vh.n_dofs(), Vh.n_dofs(), t)};
}

}  // namespace

SparseBlock assemble_Su(const FeSpace& Vh, const FeSpace& Dh, const Params& p,
                        const Eigen::VectorXd& u_prev, const Eigen::VectorXd& A_prev) {
  SparseBlock su = assemble_Ah(Vh, p.Re, p.gamma);
  if (p.alpha > 0.0) su.mat += assemble_graddiv(Vh, p.alpha).mat;
  su.mat += assemble_Oh(Vh, u_prev).mat;
  su.mat += assemble_frozen_lorentz(Vh, Dh, A_prev, p.kappa * p.Rm).mat;
  return su;
}

Eigen::VectorXd BlockSystem::rhs() const {
  Eigen::VectorXd b(n_total());
  b.segment(off[0], b_A.size()) = b_A;
  b.segment(off[1], b_phi.size()) = b_phi;
  b.segment(off[2], b_H.size()) = b_H;
  b.segment(off[3], b_r.size()) = b_r;
  b.segment(off[4], b_u.size()) = b_u;
  b.segment(off[5], b_p.size()) = b_p;
  return b;
}

namespace {

// Append block entries at the given offsets; optionally transposed/scaled.
// When a bc mask+lift is supplied, constrained rows are dropped and
// constrained columns are folded into the right-hand side.
struct MonoBuilder {
  TripletVec trip;
  const std::vector<bool>* mask = nullptr;  // full-size constrained mask
  const Eigen::VectorXd* lift = nullptr;    // full-size boundary values
  Eigen::VectorXd* b = nullptr;

  void add(const SpMat& m, long roff, long coff, double scale, bool transpose) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SpMat::InnerIterator it(m, k); it; ++it) {
        long r = roff + (transpose ? it.col() : it.row());
        long c = coff + (transpose ? it.row() : it.col());
        double v = scale * it.value();
        if (mask) {
          if ((*mask)[r]) continue;
          if ((*mask)[c]) {
            (*b)(r) -= v * (*lift)(c);
            continue;
          }
        }
        trip.emplace_back(r, c, v);
      }
  }
};

void add_all_blocks(MonoBuilder& mb, const BlockSystem& s) {
  const auto& off = s.off;
  mb.add(s.C.mat, off[0], off[0], 1.0, false);
  mb.add(s.G.mat, off[0], off[1], 1.0, true);   // G^T
  mb.add(s.K.mat, off[0], off[2], 1.0, false);
  mb.add(s.G.mat, off[1], off[0], 1.0, false);
  mb.add(s.H.mat, off[2], off[2], 1.0, false);
  mb.add(s.D.mat, off[2], off[3], 1.0, true);   // D^T
  mb.add(s.J.mat, off[2], off[4], 1.0, true);   // J^T
  mb.add(s.D.mat, off[3], off[2], 1.0, false);
  mb.add(s.J.mat, off[4], off[2], -1.0, false); // -J
  mb.add(s.F.mat, off[4], off[4], 1.0, false);
  mb.add(s.B.mat, off[4], off[5], 1.0, true);   // B^T
  mb.add(s.B.mat, off[5], off[4], 1.0, false);
}

}  // namespace

SpMat BlockSystem::monolithic() const {
  MonoBuilder mb;
  add_all_blocks(mb, *this);
  SpMat m(n_total(), n_total());
  m.setFromTriplets(mb.trip.begin(), mb.trip.end());
  return m;
}

BlockSystem assemble_system(const FeSpace& Dh, const FeSpace& Yh, const FeSpace& Wh,
                            const FeSpace& Sh, const FeSpace& Vh, const FeSpace& Qh,
                            const Params& params, const Eigen::VectorXd& u_prev,
                            const Eigen::VectorXd& A_prev, const ProblemData& data) {
  BlockSystem s;
  s.Dh = &Dh; s.Yh = &Yh; s.Wh = &Wh; s.Sh = &Sh; s.Vh = &Vh; s.Qh = &Qh;

  s.off[0] = 0;
  s.off[1] = s.off[0] + Dh.n_dofs();
  s.off[2] = s.off[1] + Yh.n_dofs();
  s.off[3] = s.off[2] + Wh.n_dofs();
  s.off[4] = s.off[3] + Sh.n_dofs();
  s.off[5] = s.off[4] + Vh.n_dofs();
  s.off[6] = s.off[5] + Qh.n_dofs();

  s.C = assemble_curlcurl(Dh, 1.0);
  s.G = assemble_grad(Dh, Yh);
  s.K = assemble_mixed_K(Wh, Dh);
  s.H = assemble_curlcurl(Wh, params.kappa / params.Rm);
  s.D = assemble_grad(Wh, Sh);
  s.J = assemble_L(Vh, Wh, Dh, A_prev, params.kappa);
  s.F = assemble_Ah(Vh, params.Re, params.gamma);
  if (params.alpha > 0.0) s.F.mat += assemble_graddiv(Vh, params.alpha).mat;
  s.F.mat += assemble_Oh(Vh, u_prev).mat;
  s.B = assemble_B(Vh, Qh);

  const TetMesh& mesh = Vh.mesh();
  s.b_A = Eigen::VectorXd::Zero(Dh.n_dofs());
  s.b_phi = Eigen::VectorXd::Zero(Yh.n_dofs());
  s.b_H = Eigen::VectorXd::Zero(Wh.n_dofs());
  s.b_r = Eigen::VectorXd::Zero(Sh.n_dofs());
  s.b_u = Eigen::VectorXd::Zero(Vh.n_dofs());
  s.b_p = Eigen::VectorXd::Zero(Qh.n_dofs());

  const QuadratureRule vol = tet_quadrature(kDataVolDegree);
  auto volume_load = [&](const FeSpace& sp, const VectorField& g, Eigen::VectorXd& b) {
    if (!g) return;
    TripletVec t = parallel_triplets(mesh.n_tets(), [&](int k, TripletVec& out) {
      for (int q = 0; q < vol.size(); ++q) {
        Eigen::Vector4d bq = vol.points.row(q);
        const double wq = phys_vol_weight(mesh, k, vol.weights(q));
        Vec3 gv = g(tet_point(mesh, k, bq));
        Eigen::MatrixXd v = sp.vector_values(k, bq);
        for (int i = 0; i < sp.n_local(); ++i)
          out.emplace_back(sp.global_dof(k, i), 0, wq * v.row(i).dot(gv));
      }
    });
    for (const auto& tr : t) b(tr.row()) += tr.value();
  };
  volume_load(Vh, data.f, s.b_u);
  volume_load(Wh, data.g_H, s.b_H);
  volume_load(Dh, data.g_A, s.b_A);

  // Dirichlet velocity data enters weakly via the penalty/consistency terms
  // of the viscous form and as the inflow upwind value of the convection.
  if (data.u_bdry) {
    const QuadratureRule tri = triangle_quadrature(kDataFaceDegree);
    TripletVec t = parallel_triplets(mesh.n_faces(), [&](int f, TripletVec& out) {
      const Face& fc = mesh.faces[f];
      if (!fc.on_boundary()) return;
      const int k = fc.tet_plus;
      auto g = Vh.vector_gradients(k);
      for (int q = 0; q < tri.size(); ++q) {
        Eigen::Vector3d fb = tri.points.row(q);
        Vec3 x = face_point(mesh, f, fb);
        const double wq = 2.0 * fc.area * tri.weights(q);
        Eigen::Vector4d tb = tet_barycentric(mesh, k, x);
        Eigen::MatrixXd v = Vh.vector_values(k, tb);
        Vec3 gd = data.u_bdry(x);
        const double s_up = Vh.eval_vector(k, tb, u_prev).dot(fc.normal);
        for (int i = 0; i < 12; ++i) {
          double val = wq * params.gamma / (params.Re * fc.diameter) * v.row(i).dot(gd) -
                       wq / params.Re * (g[i] * fc.normal).dot(gd);
          if (s_up < 0.0) val -= wq * s_up * v.row(i).dot(gd);
          out.emplace_back(Vh.global_dof(k, i), 0, val);
        }
      }
    });
    for (const auto& tr : t) s.b_u(tr.row()) += tr.value();
  }

  // Normal flux of the A data feeds the phi-row: (A_h, grad phi) = (A.n, phi)_Gamma.
  if (data.A_bdry) {
    const QuadratureRule tri = triangle_quadrature(kDataFaceDegree);
    TripletVec t = parallel_triplets(mesh.n_faces(), [&](int f, TripletVec& out) {
      const Face& fc = mesh.faces[f];
      if (!fc.on_boundary()) return;
      const int k = fc.tet_plus;
      for (int q = 0; q < tri.size(); ++q) {
        Eigen::Vector3d fb = tri.points.row(q);
        Vec3 x = face_point(mesh, f, fb);
        const double wq = 2.0 * fc.area * tri.weights(q);
        const double an = data.A_bdry(x).dot(fc.normal);
        Eigen::Vector4d tb = tet_barycentric(mesh, k, x);
        Eigen::VectorXd v = Yh.scalar_values(k, tb);
        for (int i = 0; i < Yh.n_local(); ++i)
          out.emplace_back(Yh.global_dof(k, i), 0, wq * an * v(i));
      }
    });
    for (const auto& tr : t) s.b_phi(tr.row()) += tr.value();
  }

  return s;
}

EssentialBc EssentialBc::from_data(const FeSpace& Dh, const FeSpace& Wh, const FeSpace& Sh,
                                   const FeSpace& Vh, const ProblemData& data) {
  EssentialBc bc;
  bc.gA = Eigen::VectorXd::Zero(Dh.n_dofs());
  bc.gH = Eigen::VectorXd::Zero(Wh.n_dofs());
  bc.gr = Eigen::VectorXd::Zero(Sh.n_dofs());
  bc.gu = Eigen::VectorXd::Zero(Vh.n_dofs());
  bc.maskH = Wh.essential_dofs();
  bc.maskr = Sh.essential_dofs();
  bc.masku = Vh.essential_dofs();
  // Dh is never constrained: A's boundary data enters through the phi-row
  // flux (normal part) and the natural curl A x n terms. Eliminating
  // boundary-edge DOFs of A would leave too few rows to determine phi
  // (the inclusion grad Y_h in D_h needs the full space).
  bc.maskA.assign(Dh.n_dofs(), false);
  if (data.H_bdry)
    for (auto [dof, val] : Wh.boundary_values(data.H_bdry)) bc.gH(dof) = val;
  if (data.u_bdry)
    for (auto [dof, val] : Vh.boundary_values(data.u_bdry)) bc.gu(dof) = val;
  return bc;
}

Eigen::VectorXd EssentialBc::lift(const BlockSystem& sys) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(sys.n_total());
  g.segment(sys.off[0], gA.size()) = gA;
  g.segment(sys.off[2], gH.size()) = gH;
  g.segment(sys.off[3], gr.size()) = gr;
  g.segment(sys.off[4], gu.size()) = gu;
  return g;
}

void apply_essential(const BlockSystem& sys, const EssentialBc& bc, SpMat& A_out,
                     Eigen::VectorXd& b_out) {
  const long n = sys.n_total();
  std::vector<bool> mask(n, false);
  auto put = [&](const std::vector<bool>& m, long off) {
    for (size_t i = 0; i < m.size(); ++i)
      if (m[i]) mask[off + i] = true;
  };
  put(bc.maskA, sys.off[0]);
  put(bc.maskH, sys.off[2]);
  put(bc.maskr, sys.off[3]);
  put(bc.masku, sys.off[4]);

  Eigen::VectorXd g = bc.lift(sys);
  b_out = sys.rhs();

  MonoBuilder mb;
  mb.mask = &mask;
  mb.lift = &g;
  mb.b = &b_out;
  add_all_blocks(mb, sys);
  for (long i = 0; i < n; ++i)
    if (mask[i]) {
      mb.trip.emplace_back(i, i, 1.0);
      b_out(i) = g(i);
    }
  A_out.resize(n, n);
  A_out.setFromTriplets(mb.trip.begin(), mb.trip.end());
}

SpMat constrained(const SpMat& m, const std::vector<bool>* row_mask,
                  const std::vector<bool>* col_mask, bool unit_diag) {
  TripletVec t;
  t.reserve(m.nonZeros());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      if (row_mask && (*row_mask)[it.row()]) continue;
      if (col_mask && (*col_mask)[it.col()]) continue;
      t.emplace_back(it.row(), it.col(), it.value());
    }
  if (unit_diag && row_mask)
    for (size_t i = 0; i < row_mask->size(); ++i)
      if ((*row_mask)[i]) t.emplace_back(i, i, 1.0);
  SpMat out(m.rows(), m.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace ctmhd
