#include "ctmhd/precond.hpp"

#include "ctmhd/parallel.hpp"

#include <stdexcept>

namespace ctmhd {

namespace {

SpMat scaled_transpose(const SpMat& m, double scale) {
  SpMat t = SpMat(m.transpose());
  return SpMat(scale * t);
}

}  // namespace

BlockPreconditioner::BlockPreconditioner(const BlockSystem& sys, const Params& params,
                                         const Eigen::VectorXd& u_prev,
                                         const Eigen::VectorXd& A_prev,
                                         const EssentialBc& bc, const PrecondOptions& opt,
                                         bool f_only)
    : sys_(&sys), params_(params), u_prev_(u_prev), A_prev_(A_prev), bc_(bc), opt_(opt),
      f_only_(f_only) {
  const auto &mA = bc.maskA, &mH = bc.maskH, &mr = bc.maskr, &mu = bc.masku;

  SpMat chat_raw = sys.C.mat + assemble_mass(*sys.Dh).mat;
  chat_ = constrained(chat_raw, &mA, &mA, true);

  SpMat hhat_raw = sys.H.mat;
  hhat_raw += SpMat((params.kappa / params.Rm) * assemble_mass(*sys.Wh).mat);
  hhat_ = constrained(hhat_raw, &mH, &mH, true);

  // pure-Neumann block: pin one DOF so factorizations and CG see an SPD matrix
  std::vector<bool> pin_mask(sys.Yh->n_dofs(), false);
  pin_mask[phi_pin()] = true;
  lphi_ = constrained(assemble_scalar_stiffness(*sys.Yh, 1.0).mat, &pin_mask, &pin_mask, true);
  lr_ = constrained(assemble_scalar_stiffness(*sys.Sh, params.Rm / params.kappa).mat, &mr, &mr, true);

  if (f_only_) {
    su_ = constrained(sys.F.mat, &mu, &mu, true);
  } else {
    su_ = constrained(assemble_Su(*sys.Vh, *sys.Dh, params, u_prev, A_prev).mat, &mu, &mu, true);
  }

  mp_ = assemble_mass(*sys.Qh).mat;
  pressure_scale_ = 1.0 / params.Re + params.alpha;

  gt2_ = constrained(scaled_transpose(sys.G.mat, 2.0), &mA, nullptr, false);
  k_ = constrained(sys.K.mat, &mA, &mH, false);
  dt2_ = constrained(scaled_transpose(sys.D.mat, 2.0), &mH, &mr, false);
  jt_ = constrained(scaled_transpose(sys.J.mat, 1.0), &mH, &mu, false);
  bt_ = constrained(scaled_transpose(sys.B.mat, 1.0), &mu, nullptr, false);

  factor();
}

void BlockPreconditioner::factor() {
  const InnerPolicy* pol[6] = {&opt_.step_p, &opt_.step_u, &opt_.step_r,
                               &opt_.step_H, &opt_.step_phi, &opt_.step_A};
  const SpMat* mats[6] = {&mp_, &su_, &lr_, &hhat_, &lphi_, &chat_};
  static const char* kStepName[6] = {"M_p", "S_u", "L_r", "Hhat", "L_phi", "Chat"};
  for (int s = 0; s < 6; ++s) {
    if (pol[s]->method != InnerMethod::Direct) continue;
    direct_[s] = std::make_shared<DirectSolver>();
    try {
      if (s == 1)
        direct_[s]->factor_lu(*mats[s]);  // S_u is nonsymmetric (upwinding)
      else
        direct_[s]->factor_llt(*mats[s]);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("preconditioner block ") + kStepName[s] + ": " +
                               e.what());
    }
  }
}

Eigen::VectorXd BlockPreconditioner::inner_solve(int step, const Eigen::VectorXd& rhs) const {
  const InnerPolicy* pol[6] = {&opt_.step_p, &opt_.step_u, &opt_.step_r,
                               &opt_.step_H, &opt_.step_phi, &opt_.step_A};
  const SpMat* mats[6] = {&mp_, &su_, &lr_, &hhat_, &lphi_, &chat_};
  if (pol[step]->method == InnerMethod::Direct) return direct_[step]->solve(rhs);

  if (step == 1) {
    SolveConfig cfg{pol[step]->tol, pol[step]->max_iter, pol[step]->tol};
    Eigen::VectorXd invdiag(su_.rows());
    for (long i = 0; i < su_.rows(); ++i) {
      double d = su_.coeff(i, i);
      invdiag(i) = d != 0.0 ? 1.0 / d : 1.0;
    }
    LinOp op = [this](const Eigen::VectorXd& v) { return Eigen::VectorXd(su_ * v); };
    LinOp pre = [invdiag](const Eigen::VectorXd& v) {
      return Eigen::VectorXd(invdiag.asDiagonal() * v);
    };
    auto [x, rep] = fgmres(op, pre, rhs, Eigen::VectorXd(), cfg);
    return x;
  }
  auto [x, rep] = cg(*mats[step], rhs, pol[step]->tol, pol[step]->max_iter);
  if (rep.indefinite) throw std::runtime_error("preconditioner: indefinite block in step " +
                                               std::to_string(step));
  return x;
}

Eigen::VectorXd BlockPreconditioner::apply(const Eigen::VectorXd& r) const {
  const auto& off = sys_->off;
  auto seg = [&](int i) { return r.segment(off[i], off[i + 1] - off[i]); };
  Eigen::VectorXd rA = seg(0), rphi = seg(1), rH = seg(2), rr = seg(3), ru = seg(4), rp = seg(5);

  // 1. M_p e_p = -(1/Re + alpha) r_p
  Eigen::VectorXd ep = inner_solve(0, Eigen::VectorXd(-pressure_scale_ * rp));
  // 2. S_u e_u = r_u - B^T e_p
  Eigen::VectorXd eu = inner_solve(1, Eigen::VectorXd(ru - bt_ * ep));
  // 3. L_r e_r = -r_r
  Eigen::VectorXd er = inner_solve(2, Eigen::VectorXd(-rr));
  // 4. Hhat e_H = r_H - 2 D^T e_r - J^T e_u
  Eigen::VectorXd eH = inner_solve(3, Eigen::VectorXd(rH - dt2_ * er - jt_ * eu));
  // 5. L_phi e_phi = -r_phi
  Eigen::VectorXd rphi_pinned = -rphi;
  rphi_pinned(phi_pin()) = 0.0;
  Eigen::VectorXd ephi = inner_solve(4, rphi_pinned);
  // 6. Chat e_A = r_A - 2 G^T e_phi - K e_H
  Eigen::VectorXd eA = inner_solve(5, Eigen::VectorXd(rA - gt2_ * ephi - k_ * eH));

  Eigen::VectorXd e(r.size());
  e.segment(off[0], eA.size()) = eA;
  e.segment(off[1], ephi.size()) = ephi;
  e.segment(off[2], eH.size()) = eH;
  e.segment(off[3], er.size()) = er;
  e.segment(off[4], eu.size()) = eu;
  e.segment(off[5], ep.size()) = ep;
  return e;
}

BlockPreconditioner BlockPreconditioner::f_only_variant() const {
  return BlockPreconditioner(*sys_, params_, u_prev_, A_prev_, bc_, opt_, /*f_only=*/true);
}

SpMat BlockPreconditioner::matrix() const {
  const auto& off = sys_->off;
  TripletVec t;
  auto add = [&](const SpMat& m, long ro, long co, double scale) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SpMat::InnerIterator it(m, k); it; ++it)
        t.emplace_back(ro + it.row(), co + it.col(), scale * it.value());
  };
  add(chat_, off[0], off[0], 1.0);
  add(gt2_, off[0], off[1], 1.0);
  add(k_, off[0], off[2], 1.0);
  add(lphi_, off[1], off[1], -1.0);
  add(hhat_, off[2], off[2], 1.0);
  add(dt2_, off[2], off[3], 1.0);
  add(jt_, off[2], off[4], 1.0);
  add(lr_, off[3], off[3], -1.0);
  add(su_, off[4], off[4], 1.0);
  add(bt_, off[4], off[5], 1.0);
  add(mp_, off[5], off[5], -1.0 / pressure_scale_);
  SpMat P(sys_->n_total(), sys_->n_total());
  P.setFromTriplets(t.begin(), t.end());
  return P;
}

}  // namespace ctmhd
