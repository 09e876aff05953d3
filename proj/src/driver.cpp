#include "ctmhd/driver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctmhd {

namespace {

constexpr int kErrDegree = 6;

double weighted_norm(const SpMat& M, const Eigen::VectorXd& x) {
  return std::sqrt(std::max(0.0, x.dot(M * x)));
}

}  // namespace

double PicardReport::mean_gmres() const {
  if (gmres_iters.empty()) return 0.0;
  double s = 0.0;
  for (int k : gmres_iters) s += k;
  return s / gmres_iters.size();
}

ManufacturedCase manufactured_case_example1() {
  ManufacturedCase c;
  c.u = [](const Vec3& x) { return Vec3(std::cos(x.z()), std::sin(x.x() + x.z()), 0.0); };
  c.H = [](const Vec3& x) { return Vec3(0.0, std::cos(x.z()), 0.0); };
  c.A = [](const Vec3& x) { return Vec3(std::sin(x.z()), 0.0, 0.0); };
  c.p = [](const Vec3& x) { return x.x() + x.y() - 1.0; };
  c.grad_u = [](const Vec3& x) {
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    g(0, 2) = -std::sin(x.z());
    g(1, 0) = std::cos(x.x() + x.z());
    g(1, 2) = std::cos(x.x() + x.z());
    return g;
  };
  c.curl_H = [](const Vec3& x) { return Vec3(std::sin(x.z()), 0.0, 0.0); };
  c.curl_A = [](const Vec3& x) { return Vec3(0.0, std::cos(x.z()), 0.0); };
  c.f = [](const Vec3& x) {
    const double z = x.z(), s = std::sin(x.x() + z);
    return Vec3(1.0 + std::cos(z), 1.0 + std::cos(z) * std::cos(x.x() + z) + 2.0 * s,
                -std::sin(z) * std::cos(z));
  };
  c.g_H = [](const Vec3& x) { return Vec3(0.0, std::cos(x.z()), 0.0); };
  c.g_A = VectorField{};  // curl curl A = curl H identically
  return c;
}

ProblemData problem_data(const ManufacturedCase& c) {
  ProblemData d;
  d.f = c.f;
  d.g_H = c.g_H;
  d.g_A = c.g_A;
  d.u_bdry = c.u;
  d.H_bdry = c.H;
  d.A_bdry = c.A;
  return d;
}

ProblemData cavity_benchmark(const TetMesh& mesh) {
  const double h = mesh.h;
  ProblemData d;
  d.u_bdry = [h](const Vec3& x) {
    double v = (x.z() - (1.0 - h)) / h;
    v = std::min(1.0, std::max(0.0, v));
    return Vec3(v, 0.0, 0.0);
  };
  d.H_bdry = [](const Vec3&) { return Vec3(-1.0, 0.0, 0.0); };
  d.A_bdry = [](const Vec3& x) { return Vec3(0.0, 0.0, -x.y()); };
  return d;
}

MhdProblem::MhdProblem(const TetMesh& mesh, const Params& params)
    : mesh_(&mesh), params_(params) {
  Dh_ = std::make_unique<FeSpace>(SpaceKind::Dh, mesh);
  Yh_ = std::make_unique<FeSpace>(SpaceKind::Yh, mesh);
  Wh_ = std::make_unique<FeSpace>(SpaceKind::Wh, mesh);
  Sh_ = std::make_unique<FeSpace>(SpaceKind::Sh, mesh);
  Vh_ = std::make_unique<FeSpace>(SpaceKind::Vh, mesh);
  Qh_ = std::make_unique<FeSpace>(SpaceKind::Qh, mesh);
  mass_Vh_ = assemble_mass(*Vh_).mat;
  mass_Wh_ = assemble_mass(*Wh_).mat;
  mass_Dh_ = assemble_mass(*Dh_).mat;
  volume_ = 0.0;
  for (double v : mesh.tet_volume) volume_ += v;
}

const FeSpace& MhdProblem::space(SpaceKind k) const {
  switch (k) {
    case SpaceKind::Dh: return *Dh_;
    case SpaceKind::Yh: return *Yh_;
    case SpaceKind::Wh: return *Wh_;
    case SpaceKind::Sh: return *Sh_;
    case SpaceKind::Vh: return *Vh_;
    case SpaceKind::Qh: return *Qh_;
  }
  throw std::logic_error("space");
}

State MhdProblem::zero_state() const {
  State s;
  s.xA = Eigen::VectorXd::Zero(Dh_->n_dofs());
  s.xphi = Eigen::VectorXd::Zero(Yh_->n_dofs());
  s.xH = Eigen::VectorXd::Zero(Wh_->n_dofs());
  s.xr = Eigen::VectorXd::Zero(Sh_->n_dofs());
  s.xu = Eigen::VectorXd::Zero(Vh_->n_dofs());
  s.xp = Eigen::VectorXd::Zero(Qh_->n_dofs());
  return s;
}

State MhdProblem::split(const Eigen::VectorXd& x) const {
  State s;
  long off = 0;
  auto take = [&](long n) {
    Eigen::VectorXd v = x.segment(off, n);
    off += n;
    return v;
  };
  s.xA = take(Dh_->n_dofs());
  s.xphi = take(Yh_->n_dofs());
  s.xH = take(Wh_->n_dofs());
  s.xr = take(Sh_->n_dofs());
  s.xu = take(Vh_->n_dofs());
  s.xp = take(Qh_->n_dofs());
  return s;
}

Eigen::VectorXd MhdProblem::concat(const State& s) const {
  Eigen::VectorXd x(s.xA.size() + s.xphi.size() + s.xH.size() + s.xr.size() + s.xu.size() +
                    s.xp.size());
  long off = 0;
  for (const Eigen::VectorXd* v : {&s.xA, &s.xphi, &s.xH, &s.xr, &s.xu, &s.xp}) {
    x.segment(off, v->size()) = *v;
    off += v->size();
  }
  return x;
}

std::array<double, 3> MhdProblem::stopping_theta(const State& cur, const State& prev) const {
  auto theta = [&](const SpMat& M, const Eigen::VectorXd& c, const Eigen::VectorXd& p) {
    double num = weighted_norm(M, Eigen::VectorXd(c - p));
    double den = weighted_norm(M, c);
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
  };
  return {theta(mass_Vh_, cur.xu, prev.xu), theta(mass_Wh_, cur.xH, prev.xH),
          theta(mass_Dh_, cur.xA, prev.xA)};
}

double MhdProblem::mean_value(SpaceKind kind, const Eigen::VectorXd& coef) const {
  const TetMesh& m = *mesh_;
  double total = 0.0;
  if (kind == SpaceKind::Qh) {
    for (int t = 0; t < m.n_tets(); ++t) total += m.tet_volume[t] * coef(t);
  } else {
    const FeSpace& sp = space(kind);
    const QuadratureRule rule = tet_quadrature(4);
    for (int t = 0; t < m.n_tets(); ++t)
      for (int q = 0; q < rule.size(); ++q)
        total += 6.0 * m.tet_volume[t] * rule.weights(q) *
                 sp.eval_scalar(t, rule.points.row(q), coef);
  }
  return total / volume_;
}

std::pair<State, PicardReport> MhdProblem::picard_solve(const ProblemData& data,
                                                        const PicardConfig& cfg) const {
  const auto t0 = std::chrono::steady_clock::now();
  PicardReport rep;
  State prev = zero_state();
  State cur = prev;
  Eigen::VectorXd x_full = Eigen::VectorXd::Zero(
      Dh_->n_dofs() + Yh_->n_dofs() + Wh_->n_dofs() + Sh_->n_dofs() + Vh_->n_dofs() +
      Qh_->n_dofs());

  const EssentialBc bc = EssentialBc::from_data(*Dh_, *Wh_, *Sh_, *Vh_, data);

  for (int n = 1; n <= cfg.max_picard; ++n) {
    BlockSystem sys = assemble_system(*Dh_, *Yh_, *Wh_, *Sh_, *Vh_, *Qh_, params_, prev.xu,
                                      prev.xA, data);
    SpMat A;
    Eigen::VectorXd b;
    apply_essential(sys, bc, A, b);

    Eigen::VectorXd g = bc.lift(sys);
    Eigen::VectorXd x0 = x_full;
    // constrained rows are identity: force exact boundary values in the guess
    auto force_mask = [&](const std::vector<bool>& mask, long off) {
      for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) x0(off + i) = g(off + i);
    };
    force_mask(bc.maskA, sys.off[0]);
    force_mask(bc.maskH, sys.off[2]);
    force_mask(bc.maskr, sys.off[3]);
    force_mask(bc.masku, sys.off[4]);

    BlockPreconditioner P(sys, params_, prev.xu, prev.xA, bc, cfg.inner, cfg.f_only_precond);
    LinOp op = [&A](const Eigen::VectorXd& v) { return Eigen::VectorXd(A * v); };
    LinOp pre = [&P](const Eigen::VectorXd& v) { return P.apply(v); };
    auto [x, lrep] = fgmres(op, pre, b, x0, cfg.linear);

    rep.gmres_iters.push_back(lrep.iterations);
    rep.gmres_ok.push_back(lrep.converged);
    x_full = x;
    cur = split(x);

    auto th = stopping_theta(cur, prev);
    rep.theta_u.push_back(th[0]);
    rep.theta_H.push_back(th[1]);
    rep.theta_A.push_back(th[2]);
    rep.iterations = n;
    prev = cur;

    if (th[0] + th[1] + th[2] < cfg.delta) {
      rep.converged = true;
      break;
    }
  }

  // zero-mean representatives of Q = L2/R and Y = H1/R
  cur.xp.array() -= mean_value(SpaceKind::Qh, cur.xp);
  cur.xphi.array() -= mean_value(SpaceKind::Yh, cur.xphi);

  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {cur, rep};
}

ErrorNorms error_norms(const MhdProblem& prob, const State& state, const ManufacturedCase& c) {
  const TetMesh& mesh = prob.mesh();
  const FeSpace& Vh = prob.space(SpaceKind::Vh);
  const FeSpace& Wh = prob.space(SpaceKind::Wh);
  const FeSpace& Dh = prob.space(SpaceKind::Dh);
  const QuadratureRule vol = tet_quadrature(kErrDegree);
  const QuadratureRule tri = triangle_quadrature(kErrDegree);

  ErrorNorms err;
  double p_mean_ex = 0.0, u_h1 = 0.0, p_sq = 0.0, H_sq = 0.0, A_sq = 0.0, jump_sq = 0.0;

  const double p_mean_h = prob.mean_value(SpaceKind::Qh, state.xp);
  for (int t = 0; t < mesh.n_tets(); ++t)
    for (int q = 0; q < vol.size(); ++q)
      p_mean_ex += 6.0 * mesh.tet_volume[t] * vol.weights(q) *
                   c.p(tet_point(mesh, t, vol.points.row(q)));
  p_mean_ex /= prob.domain_volume();

  for (int t = 0; t < mesh.n_tets(); ++t) {
    const Eigen::Matrix3d gh = Vh.eval_grad(t, state.xu);
    const Vec3 curlH_h = Wh.eval_curl(t, state.xH);
    const Vec3 curlA_h = Dh.eval_curl(t, state.xA);
    const double div_u = Vh.eval_div(t, state.xu);
    err.div_u_l2 += mesh.tet_volume[t] * div_u * div_u;
    for (int q = 0; q < vol.size(); ++q) {
      Eigen::Vector4d b = vol.points.row(q);
      const double wq = 6.0 * mesh.tet_volume[t] * vol.weights(q);
      const Vec3 x = tet_point(mesh, t, b);
      u_h1 += wq * (c.grad_u(x) - gh).squaredNorm();
      const double pe = (c.p(x) - p_mean_ex) - (state.xp(t) - p_mean_h);
      p_sq += wq * pe * pe;
      H_sq += wq * ((c.H(x) - Wh.eval_vector(t, b, state.xH)).squaredNorm() +
                    (c.curl_H(x) - curlH_h).squaredNorm());
      A_sq += wq * ((c.A(x) - Dh.eval_vector(t, b, state.xA)).squaredNorm() +
                    (c.curl_A(x) - curlA_h).squaredNorm());
    }
  }

  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& fc = mesh.faces[f];
    for (int q = 0; q < tri.size(); ++q) {
      Eigen::Vector3d fb = tri.points.row(q);
      const Vec3 x = face_point(mesh, f, fb);
      const double wq = 2.0 * fc.area * tri.weights(q);
      Vec3 jump;
      if (fc.on_boundary()) {
        jump = c.u(x) - Vh.eval_vector(fc.tet_plus, tet_barycentric(mesh, fc.tet_plus, x),
                                       state.xu);
      } else {
        jump = Vh.eval_vector(fc.tet_plus, tet_barycentric(mesh, fc.tet_plus, x), state.xu) -
               Vh.eval_vector(fc.tet_minus, tet_barycentric(mesh, fc.tet_minus, x), state.xu);
      }
      jump_sq += wq / fc.diameter * jump.squaredNorm();
    }
  }

  err.u_dg = std::sqrt(u_h1 + jump_sq);
  err.p_l2 = std::sqrt(p_sq);
  err.H_hcurl = std::sqrt(H_sq);
  err.A_hcurl = std::sqrt(A_sq);
  err.div_u_l2 = std::sqrt(err.div_u_l2);
  return err;
}

DivergenceDiagnostics divergence_diagnostics(const MhdProblem& prob, const State& state,
                                             const ProblemData* data) {
  const TetMesh& mesh = prob.mesh();
  const FeSpace& Vh = prob.space(SpaceKind::Vh);
  const FeSpace& Wh = prob.space(SpaceKind::Wh);
  const FeSpace& Dh = prob.space(SpaceKind::Dh);
  const FeSpace& Sh = prob.space(SpaceKind::Sh);
  const FeSpace& Yh = prob.space(SpaceKind::Yh);

  DivergenceDiagnostics d;
  std::vector<Vec3> J(mesh.n_tets()), B(mesh.n_tets());
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const double div_u = Vh.eval_div(t, state.xu);
    d.div_u_l2 += mesh.tet_volume[t] * div_u * div_u;
    J[t] = Wh.eval_curl(t, state.xH);
    B[t] = Dh.eval_curl(t, state.xA);
  }
  d.div_u_l2 = std::sqrt(d.div_u_l2);

  for (const Face& fc : mesh.faces) {
    if (fc.on_boundary()) continue;
    d.max_flux_jump_J = std::max(d.max_flux_jump_J,
                                 std::abs((J[fc.tet_plus] - J[fc.tet_minus]).dot(fc.normal)));
    d.max_flux_jump_B = std::max(d.max_flux_jump_B,
                                 std::abs((B[fc.tet_plus] - B[fc.tet_minus]).dot(fc.normal)));
  }

  // per-tet divergence of the piecewise fields by affine refit from samples
  const Eigen::Vector4d pts[4] = {{0.7, 0.1, 0.1, 0.1},
                                  {0.1, 0.7, 0.1, 0.1},
                                  {0.1, 0.1, 0.7, 0.1},
                                  {0.1, 0.1, 0.1, 0.7}};
  for (int t = 0; t < mesh.n_tets(); ++t) {
    Eigen::Matrix4d X;
    Eigen::Matrix<double, 4, 3> FJ, FB;
    for (int s = 0; s < 4; ++s) {
      const Vec3 x = tet_point(mesh, t, pts[s]);
      X.row(s) << 1.0, x.x(), x.y(), x.z();
      // curls of P1 fields are constant per tet; sampling re-derives that
      FJ.row(s) = Wh.eval_curl(t, state.xH).transpose();
      FB.row(s) = Dh.eval_curl(t, state.xA).transpose();
    }
    Eigen::Matrix<double, 4, 3> cJ = X.fullPivLu().solve(FJ);
    Eigen::Matrix<double, 4, 3> cB = X.fullPivLu().solve(FB);
    d.max_cell_div_J = std::max(d.max_cell_div_J,
                                std::abs(cJ(1, 0) + cJ(2, 1) + cJ(3, 2)));
    d.max_cell_div_B = std::max(d.max_cell_div_B,
                                std::abs(cB(1, 0) + cB(2, 1) + cB(3, 2)));
  }

  // weak-divergence residuals against all discrete gradients
  Eigen::VectorXd rH = assemble_grad(Wh, Sh).mat * state.xH;
  for (int i = 0; i < Sh.n_dofs(); ++i)
    if (!Sh.essential_dofs()[i]) d.max_weak_div_H = std::max(d.max_weak_div_H, std::abs(rH(i)));

  Eigen::VectorXd rA = assemble_grad(Dh, Yh).mat * state.xA;
  if (data && data->A_bdry) {
    const QuadratureRule tri = triangle_quadrature(4);
    for (int f = 0; f < mesh.n_faces(); ++f) {
      const Face& fc = mesh.faces[f];
      if (!fc.on_boundary()) continue;
      const int t = fc.tet_plus;
      for (int q = 0; q < tri.size(); ++q) {
        Eigen::Vector3d fb = tri.points.row(q);
        const Vec3 x = face_point(mesh, f, fb);
        const double an = data->A_bdry(x).dot(fc.normal);
        Eigen::Vector4d tb = tet_barycentric(mesh, t, x);
        Eigen::VectorXd v = Yh.scalar_values(t, tb);
        for (int i = 0; i < Yh.n_local(); ++i)
          rA(Yh.global_dof(t, i)) -= 2.0 * fc.area * tri.weights(q) * an * v(i);
      }
    }
  }
  d.max_weak_div_A = rA.cwiseAbs().maxCoeff();
  return d;
}

}  // namespace ctmhd
