#pragma once

// Dense construction of the exact block factorization A = E L U on the free
// subspace (essential DOFs removed, one phi and one p DOF grounded), used to
// verify that preconditioning with the exact E*U factors leaves only unit
// eigenvalues. Test / acceptance code only.

#include "ctmhd/assembly.hpp"
#include "ctmhd/driver.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <vector>

namespace ctmhd::ideal {

struct Reduced {
  Eigen::MatrixXd A;                    // free-subspace coupled matrix
  std::array<std::vector<int>, 6> idx;  // kept indices per segment (A,phi,H,r,u,p)
  Eigen::MatrixXd Lphi, Lr;             // reduced multiplier stiffness blocks
};

inline Reduced reduce(const BlockSystem& sys, const EssentialBc& bc, const Params& params) {
  Reduced red;
  auto keep = [](int n, const std::vector<bool>* mask, int drop = -1) {
    std::vector<int> v;
    for (int i = 0; i < n; ++i)
      if ((!mask || !(*mask)[i]) && i != drop) v.push_back(i);
    return v;
  };
  red.idx[0] = keep(sys.Dh->n_dofs(), &bc.maskA);
  red.idx[1] = keep(sys.Yh->n_dofs(), nullptr, 0);  // ground one phi DOF
  red.idx[2] = keep(sys.Wh->n_dofs(), &bc.maskH);
  red.idx[3] = keep(sys.Sh->n_dofs(), &bc.maskr);
  red.idx[4] = keep(sys.Vh->n_dofs(), &bc.masku);
  red.idx[5] = keep(sys.Qh->n_dofs(), nullptr, 0);  // ground one pressure DOF

  std::vector<long> full;
  for (int s = 0; s < 6; ++s)
    for (int i : red.idx[s]) full.push_back(sys.off[s] + i);

  Eigen::MatrixXd mono = Eigen::MatrixXd(sys.monolithic());
  const long n = static_cast<long>(full.size());
  red.A.resize(n, n);
  for (long r = 0; r < n; ++r)
    for (long c = 0; c < n; ++c) red.A(r, c) = mono(full[r], full[c]);

  Eigen::MatrixXd lphi = Eigen::MatrixXd(assemble_scalar_stiffness(*sys.Yh, 1.0).mat);
  Eigen::MatrixXd lr =
      Eigen::MatrixXd(assemble_scalar_stiffness(*sys.Sh, params.Rm / params.kappa).mat);
  auto slice = [](const Eigen::MatrixXd& m, const std::vector<int>& ix) {
    Eigen::MatrixXd out(ix.size(), ix.size());
    for (size_t r = 0; r < ix.size(); ++r)
      for (size_t c = 0; c < ix.size(); ++c) out(r, c) = m(ix[r], ix[c]);
    return out;
  };
  red.Lphi = slice(lphi, red.idx[1]);
  red.Lr = slice(lr, red.idx[3]);
  return red;
}

struct IdealCheck {
  /// |A - E L U| / |A|: certifies that A (E U)^{-1} is similar to the unit
  /// block-triangular L, whose eigenvalues are exactly 1.
  double factor_residual = 0.0;
  /// max |lambda - 1| from a raw dense eigensolver on (E U)^{-1} A. The unit
  /// eigenvalue is defective, so this carries the usual eps^(1/k)
  /// conditioning and cannot reach machine accuracy.
  double eigen_spread = 0.0;
};

inline IdealCheck ideal_unit_eigen_check(const BlockSystem& sys, const EssentialBc& bc,
                                         const Params& params) {
  Reduced red = reduce(sys, bc, params);
  std::array<long, 7> off{};
  for (int s = 0; s < 6; ++s) off[s + 1] = off[s] + static_cast<long>(red.idx[s].size());
  const long n = off[6];
  auto blk = [&](int r, int c) {
    return red.A.block(off[r], off[c], off[r + 1] - off[r], off[c + 1] - off[c]);
  };

  const Eigen::MatrixXd C = blk(0, 0), Gt = blk(0, 1), K = blk(0, 2);
  const Eigen::MatrixXd G = blk(1, 0);
  const Eigen::MatrixXd H = blk(2, 2), Dt = blk(2, 3), Jt = blk(2, 4);
  const Eigen::MatrixXd D = blk(3, 2);
  const Eigen::MatrixXd F = blk(4, 4), Bt = blk(4, 5);
  const Eigen::MatrixXd B = blk(5, 4);

  const Eigen::MatrixXd GtLphi = Gt * red.Lphi.inverse();
  const Eigen::MatrixXd DtLr = Dt * red.Lr.inverse();
  const Eigen::MatrixXd Ctil = C + GtLphi * G;
  const Eigen::MatrixXd Htil = H + DtLr * D;

  const Eigen::MatrixXd Ctil_inv = Ctil.inverse();
  const Eigen::MatrixXd Htil_inv = Htil.inverse();
  const Eigen::MatrixXd Sphi = G * Ctil_inv * Gt;
  const Eigen::MatrixXd Sr = D * Htil_inv * Dt;
  const Eigen::MatrixXd DHJ = D * Htil_inv * Jt;
  const Eigen::MatrixXd Ftil = F + Jt.transpose() * Htil_inv * Jt - DHJ.transpose() * Sr.inverse() * DHJ;
  const Eigen::MatrixXd Sp = B * Ftil.inverse() * Bt;

  const Eigen::MatrixXd X23 = -G * Ctil_inv * K;
  const Eigen::MatrixXd X45 = -DHJ;

  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(n, n);
  auto set = [&](int r, int c, const Eigen::MatrixXd& m) {
    U.block(off[r], off[c], m.rows(), m.cols()) = m;
  };
  set(0, 0, Ctil);
  set(0, 1, Gt);
  set(0, 2, K);
  set(1, 1, -Sphi);
  set(1, 2, X23);
  set(2, 2, Htil);
  set(2, 3, Dt);
  set(2, 4, Jt);
  set(3, 3, -Sr);
  set(3, 4, X45);
  set(4, 4, Ftil);
  set(4, 5, Bt);
  set(5, 5, -Sp);

  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n);
  E.block(off[0], off[1], GtLphi.rows(), GtLphi.cols()) = -GtLphi;
  E.block(off[2], off[3], DtLr.rows(), DtLr.cols()) = -DtLr;

  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n, n);
  auto setl = [&](int r, int c, const Eigen::MatrixXd& m) {
    L.block(off[r], off[c], m.rows(), m.cols()) = m;
  };
  const Eigen::MatrixXd Htil_Jt = Jt.transpose() * Htil_inv;
  setl(1, 0, G * Ctil_inv);
  setl(3, 2, D * Htil_inv);
  setl(4, 2, -Htil_Jt);
  setl(4, 3, -Htil_Jt * Dt * Sr.inverse());
  setl(5, 4, B * Ftil.inverse());

  IdealCheck out;
  out.factor_residual =
      (red.A - E * L * U).cwiseAbs().maxCoeff() / red.A.cwiseAbs().maxCoeff();

  Eigen::MatrixXd EU = E * U;
  // (EU)^{-1} A is similar to A (EU)^{-1}; same spectrum
  Eigen::MatrixXd M = EU.partialPivLu().solve(red.A);
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  for (long i = 0; i < n; ++i)
    out.eigen_spread =
        std::max(out.eigen_spread, std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0)));
  return out;
}

}  // namespace ctmhd::ideal
